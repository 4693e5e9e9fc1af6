import numpy as np
import pytest

from herqt.constants import omega_to_wavelength, wavelength_to_omega
from herqt.dispersion import (
    OMEGA_IDLER_0,
    OMEGA_PUMP_0,
    OMEGA_SIGNAL_0,
    calibrated_strand,
    gvm,
)
from herqt.errors import (
    ConstraintViolationError,
    NonPositiveLengthError,
    OutOfRangeError,
)
from herqt.jsa import (
    JointAmplitude,
    PumpEnvelope,
    SpectralGrid,
    build_jsa,
    default_grid,
    jsi,
    schmidt_decompose,
)
from herqt.phasematching import FrequencyScan, PhasematchConfig


@pytest.fixture(scope="module")
def strand():
    return calibrated_strand()


@pytest.fixture(scope="module")
def strand_cfg(strand):
    return PhasematchConfig(
        model=strand,
        pump_scan=FrequencyScan(OMEGA_PUMP_0 - 1e12, OMEGA_PUMP_0 + 1e12, 3),
        detuning_scan=FrequencyScan(-1e12, 1e12, 3),
    )


@pytest.fixture(scope="module")
def pump():
    return PumpEnvelope(center_wavelength=751.1e-9, fwhm_wavelength=0.5e-9)


def _amplitude_on_grid(grid, values):
    """Wrap a raw matrix as a normalized JointAmplitude."""
    norm2 = np.einsum("j,jk,k->", grid.weights_s, np.abs(values) ** 2,
                      grid.weights_i)
    return JointAmplitude(grid=grid, values=values / np.sqrt(norm2),
                          gain=np.sqrt(norm2))


class TestPumpEnvelope:
    def test_sigma_amplitude_value(self, pump):
        # 0.5 nm intensity FWHM at 751.1 nm -> amplitude sigma in rad/s
        assert pump.sigma_amplitude == pytest.approx(1.00261e12, rel=1e-4)

    def test_amplitude_normalization(self, pump):
        om = np.linspace(pump.center_omega - 6e12, pump.center_omega + 6e12,
                         801)
        w = np.full(om.size, om[1] - om[0])
        w[0] = w[-1] = 0.5 * (om[1] - om[0])
        e = pump.amplitude(om, weights=w)
        assert np.sum(w * e * e) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_bad_widths(self):
        with pytest.raises(ConstraintViolationError):
            PumpEnvelope(center_wavelength=751.1e-9, fwhm_wavelength=0.0)


class TestGridValidation:
    def test_rejects_decreasing_axis(self):
        ax = np.linspace(2e15, 1e15, 8)
        w = np.full(8, 1e12)
        with pytest.raises(ConstraintViolationError):
            SpectralGrid(ax, ax[::-1], w, w)

    def test_rejects_non_trapezoid_weights(self):
        ax = np.linspace(1e15, 2e15, 8)
        w = np.full(8, ax[1] - ax[0])  # endpoints not halved
        with pytest.raises(ConstraintViolationError):
            SpectralGrid(ax, ax, w, w)

    def test_regular_grid_shape(self):
        g = SpectralGrid.regular(2e15, 1e13, 1e15, 2e13, n_s=32, n_i=48)
        assert g.axis_s.size == 32 and g.axis_i.size == 48
        assert g.weights_s.sum() == pytest.approx(g.axis_s[-1] - g.axis_s[0])


class TestBuildJsa:
    def test_rejects_non_positive_length(self, strand_cfg, pump):
        g = SpectralGrid.regular(OMEGA_SIGNAL_0, 1e12, OMEGA_IDLER_0, 1e12,
                                 n_s=16)
        with pytest.raises(NonPositiveLengthError):
            build_jsa(strand_cfg, pump, 0.0, g)

    def test_rejects_grid_outside_valid_range(self, strand_cfg, pump):
        g = SpectralGrid.regular(5e14, 1e12, OMEGA_IDLER_0, 1e12, n_s=16)
        with pytest.raises(OutOfRangeError):
            build_jsa(strand_cfg, pump, 0.1, g)

    def test_unit_weighted_norm(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.8, OMEGA_SIGNAL_0, OMEGA_IDLER_0,
                         n=128)
        F = build_jsa(strand_cfg, pump, 0.8, g)
        norm2 = np.einsum("j,jk,k->", g.weights_s, np.abs(F.values) ** 2,
                          g.weights_i)
        assert norm2 == pytest.approx(1.0, rel=1e-12)

    def test_short_fiber_limit_is_pump_ridge(self, strand_cfg, pump):
        # L -> 0+: sinc -> 1 and the amplitude is the bare sum-frequency
        # Gaussian, an anti-diagonal ridge whose entanglement grows with
        # the window
        sig = pump.sigma_amplitude
        ks = []
        for span in (4.0, 8.0):
            g = SpectralGrid.regular(OMEGA_SIGNAL_0, span * sig,
                                     OMEGA_IDLER_0, span * sig, n_s=256)
            F = build_jsa(strand_cfg, pump, 1e-9, g)
            total = g.axis_s[:, None] + g.axis_i[None, :]
            ridge = np.exp(-((total - 2.0 * OMEGA_PUMP_0) ** 2)
                           / (4.0 * sig * sig))
            ridge = _amplitude_on_grid(g, ridge).values
            assert np.allclose(np.abs(F.values), ridge, atol=1e-6)
            ks.append(schmidt_decompose(F).K)
        assert ks[0] > 2.0
        assert ks[1] > ks[0]

    def test_signal_marginal_much_narrower_than_idler(self, strand_cfg,
                                                      pump):
        # operating point: idler arm is group-velocity matched to the pump,
        # so the sinc confines the signal and the pump envelope sets the
        # (much wider) idler marginal
        g = default_grid(strand_cfg, pump, 0.8, OMEGA_SIGNAL_0, OMEGA_IDLER_0,
                         n=256)
        F = build_jsa(strand_cfg, pump, 0.8, g)
        dens = jsi(F)
        marg_s = dens @ F.grid.weights_i
        marg_i = F.grid.weights_s @ dens

        def fwhm(ax, m):
            above = m >= 0.5 * m.max()
            return ax[above][-1] - ax[above][0]

        assert fwhm(g.axis_s, marg_s) < fwhm(g.axis_i, marg_i) / 3.0

    def test_wide_pump_ridge_angle_matches_gvm(self, strand_cfg):
        # huge pump bandwidth: the sinc ridge dominates the orientation
        wide = PumpEnvelope(center_wavelength=751.1e-9,
                            fwhm_wavelength=50e-9)
        g = SpectralGrid.regular(OMEGA_SIGNAL_0, 8e11, OMEGA_IDLER_0, 5e13,
                                 n_s=256)
        F = build_jsa(strand_cfg, wide, 0.8, g)
        dens = jsi(F)
        x = (g.axis_s - OMEGA_SIGNAL_0)[:, None]
        y = (g.axis_i - OMEGA_IDLER_0)[None, :]
        tot = dens.sum()
        mx = (dens * x).sum() / tot
        my = (dens * y).sum() / tot
        mu20 = (dens * (x - mx) ** 2).sum() / tot
        mu02 = (dens * (y - my) ** 2).sum() / tot
        mu11 = (dens * (x - mx) * (y - my)).sum() / tot
        angle = np.degrees(0.5 * np.arctan2(2.0 * mu11, mu20 - mu02))
        if angle < 0.0:
            angle += 180.0
        r = gvm(strand_cfg.model, 0.8, OMEGA_PUMP_0, OMEGA_SIGNAL_0,
                OMEGA_IDLER_0)
        assert abs(angle - abs(r.theta_si)) < 2.0

    def test_exact_pump_convolution_agrees(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.0845, OMEGA_SIGNAL_0,
                         OMEGA_IDLER_0, n=64)
        fa = build_jsa(strand_cfg, pump, 0.0845, g)
        fb = build_jsa(strand_cfg, pump, 0.0845, g,
                       exact_pump_convolution=True, n_pump_quadrature=33)
        dist2 = np.einsum("j,jk,k->", g.weights_s,
                          np.abs(np.abs(fa.values) - np.abs(fb.values)) ** 2,
                          g.weights_i)
        assert np.sqrt(dist2) < 0.05
        ka = schmidt_decompose(fa).K
        kb = schmidt_decompose(fb).K
        assert ka == pytest.approx(kb, rel=0.02)


class TestJsi:
    def test_sums_to_one(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.2, OMEGA_SIGNAL_0, OMEGA_IDLER_0,
                         n=128)
        F = build_jsa(strand_cfg, pump, 0.2, g)
        total = np.einsum("j,jk,k->", g.weights_s, jsi(F), g.weights_i)
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_real_positive_amplitude_squares(self):
        g = SpectralGrid.regular(2e15, 1e13, 1e15, 1e13, n_s=32)
        x = (g.axis_s - 2e15)[:, None]
        y = (g.axis_i - 1e15)[None, :]
        F = _amplitude_on_grid(g, np.exp(-(x ** 2 + y ** 2) / 2e25))
        assert np.array_equal(jsi(F), F.values ** 2)

    def test_idler_marginal_peaks_at_calibrated_carrier(self, strand_cfg,
                                                        pump):
        g = default_grid(strand_cfg, pump, 0.8, OMEGA_SIGNAL_0, OMEGA_IDLER_0,
                         n=256)
        F = build_jsa(strand_cfg, pump, 0.8, g)
        marg_i = F.grid.weights_s @ jsi(F)
        lam = omega_to_wavelength(g.axis_i[np.argmax(marg_i)])
        assert abs(lam - 1.593e-6) < 5e-9


class TestSchmidt:
    def test_rank_one_is_pure(self):
        g = SpectralGrid.regular(2e15, 6e12, 1e15, 6e12, n_s=128)
        u = np.exp(-((g.axis_s - 2e15) ** 2) / 2e24)
        v = np.exp(-((g.axis_i - 1e15) ** 2) / 8e24)
        F = _amplitude_on_grid(g, np.outer(u, v))
        r = schmidt_decompose(F)
        assert r.K == pytest.approx(1.0, abs=1e-10)
        assert r.purity == pytest.approx(1.0, abs=1e-10)

    def test_two_equal_coefficients_give_k_two(self):
        g = SpectralGrid.regular(2e15, 6e12, 1e15, 6e12, n_s=128)
        x = g.axis_s - 2e15
        y = g.axis_i - 1e15
        u1 = np.exp(-(x ** 2) / 2e24)
        u2 = x * np.exp(-(x ** 2) / 2e24)  # odd: orthogonal to u1
        v1 = np.exp(-(y ** 2) / 2e24)
        v2 = y * np.exp(-(y ** 2) / 2e24)
        for u in (u1, u2):
            u /= np.sqrt(np.sum(g.weights_s * u * u))
        for v in (v1, v2):
            v /= np.sqrt(np.sum(g.weights_i * v * v))
        F = _amplitude_on_grid(g, np.outer(u1, v1) + np.outer(u2, v2))
        r = schmidt_decompose(F)
        assert r.K == pytest.approx(2.0, rel=1e-12)
        assert r.coefficients[0] == pytest.approx(0.5, abs=1e-12)
        assert r.coefficients[1] == pytest.approx(0.5, abs=1e-12)

    def test_correlated_gaussian_matches_closed_form(self):
        # amplitude exp(-(a x^2 + 2 b x y + c y^2)) has purity
        # sqrt(1 - b^2/(a c)); with a = c and b = -rho*a this is
        # sqrt(1 - rho^2)
        rho = 0.6
        sig = 1e12
        a = 1.0 / (2.0 * (1.0 - rho ** 2) * sig * sig)
        b = -rho * a
        g = SpectralGrid.regular(2e15, 6 * sig, 1e15, 6 * sig, n_s=256)
        x = (g.axis_s - 2e15)[:, None]
        y = (g.axis_i - 1e15)[None, :]
        F = _amplitude_on_grid(
            g, np.exp(-(a * x ** 2 + 2 * b * x * y + a * y ** 2)))
        r = schmidt_decompose(F)
        k_oracle = 1.0 / np.sqrt(1.0 - rho ** 2)
        assert r.K == pytest.approx(k_oracle, rel=0.01)

    def test_coefficients_normalized_and_descending(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.0845, OMEGA_SIGNAL_0,
                         OMEGA_IDLER_0, n=128)
        r = schmidt_decompose(build_jsa(strand_cfg, pump, 0.0845, g))
        assert np.all(r.coefficients >= 0.0)
        assert np.all(np.diff(r.coefficients) <= 1e-15)
        assert r.coefficients.sum() == pytest.approx(1.0, abs=1e-10)
        assert r.purity == pytest.approx(1.0 / r.K, abs=1e-14)

    def test_modes_orthonormal_under_weights(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.0845, OMEGA_SIGNAL_0,
                         OMEGA_IDLER_0, n=128)
        r = schmidt_decompose(build_jsa(strand_cfg, pump, 0.0845, g))
        for modes, w in ((r.signal_modes, g.weights_s),
                         (r.idler_modes, g.weights_i)):
            gram = (modes * w) @ modes.conj().T
            assert np.allclose(gram, np.eye(gram.shape[0]), atol=1e-8)

    def test_reconstruction(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.0845, OMEGA_SIGNAL_0,
                         OMEGA_IDLER_0, n=96)
        F = build_jsa(strand_cfg, pump, 0.0845, g)
        r = schmidt_decompose(F)
        rec = np.einsum("n,nj,nk->jk", np.sqrt(r.coefficients),
                        r.signal_modes, r.idler_modes.conj())
        # the SVD fixes each mode pair's phase only jointly; compare
        # weighted kernels
        ws = np.sqrt(g.weights_s)[:, None]
        wi = np.sqrt(g.weights_i)[None, :]
        assert np.linalg.norm(ws * (rec - F.values) * wi) < 1e-8

    def test_exchange_symmetry(self, strand_cfg, pump):
        g = default_grid(strand_cfg, pump, 0.0845, OMEGA_SIGNAL_0,
                         OMEGA_IDLER_0, n=96)
        F = build_jsa(strand_cfg, pump, 0.0845, g)
        swapped_grid = SpectralGrid(F.grid.axis_i, F.grid.axis_s,
                                    F.grid.weights_i, F.grid.weights_s)
        Ft = JointAmplitude(grid=swapped_grid, values=F.values.T, gain=F.gain)
        la = schmidt_decompose(F).coefficients
        lb = schmidt_decompose(Ft).coefficients
        assert np.allclose(la, lb, atol=1e-10)

    def test_grid_refinement_converged(self, strand_cfg, pump):
        ks = []
        for n in (256, 512):
            g = default_grid(strand_cfg, pump, 0.8, OMEGA_SIGNAL_0,
                             OMEGA_IDLER_0, n=n)
            ks.append(schmidt_decompose(
                build_jsa(strand_cfg, pump, 0.8, g)).K)
        assert abs(ks[1] - ks[0]) / ks[0] < 0.005


class TestPurityCurve:
    def test_purity_grows_toward_factorability(self, strand_cfg, pump):
        purities = []
        for length in (0.02, 0.0845, 0.3, 0.8):
            g = default_grid(strand_cfg, pump, length, OMEGA_SIGNAL_0,
                             OMEGA_IDLER_0, n=256)
            purities.append(schmidt_decompose(
                build_jsa(strand_cfg, pump, length, g)).purity)
        assert np.all(np.diff(purities) > 0.0)
        assert purities[1] == pytest.approx(0.7187, abs=0.05)
        assert purities[-1] >= 0.95
