import numpy as np
import pytest

from herqt.constants import C, wavelength_to_omega, omega_to_wavelength
from herqt.dispersion import (
    OMEGA_PUMP_0,
    OMEGA_SIGNAL_0,
    DispersionModel,
    calibrated_strand,
    gvm,
)
from herqt.errors import (
    ConstraintViolationError,
    EmptyScanError,
    NoIntersectionError,
    OutOfRangeError,
)
from herqt.phasematching import (
    FrequencyScan,
    PhasematchConfig,
    build_map,
    delta_k,
    find_operating_point,
)


def constant_k_model(k0=1e7):
    return DispersionModel.polynomial([k0, 1e-12], omega_ref=2e15,
                                      valid_range=(0.5e15, 4e15))


def vacuum_line_model():
    om = np.linspace(0.5e15, 4e15, 400)
    return DispersionModel.tabulated(om, om / C)


@pytest.fixture(scope="module")
def strand():
    return calibrated_strand()


@pytest.fixture(scope="module")
def strand_cfg(strand):
    # window bracketing the calibrated operating point
    return PhasematchConfig(
        model=strand,
        pump_scan=FrequencyScan(wavelength_to_omega(760e-9),
                                wavelength_to_omega(742e-9), 24),
        detuning_scan=FrequencyScan(-1.4e15, 1.4e15, 48),
    )


class TestDeltaK:
    def test_near_constant_k(self):
        cfg = PhasematchConfig(
            model=constant_k_model(),
            pump_scan=FrequencyScan(1.5e15, 2.5e15, 4),
            detuning_scan=FrequencyScan(-0.5e15, 0.5e15, 4),
        )
        # slope term cancels by energy conservation; constant term by 2-1-1
        assert delta_k(cfg, 2e15, 1.7e15, 2.3e15) == pytest.approx(0.0, abs=1e-9)

    def test_vacuum_line_is_zero(self):
        cfg = PhasematchConfig(
            model=vacuum_line_model(),
            pump_scan=FrequencyScan(1.5e15, 2.5e15, 4),
            detuning_scan=FrequencyScan(-0.5e15, 0.5e15, 4),
        )
        wp = 2.1e15
        for d in (0.0, 0.1e15, -0.3e15):
            assert delta_k(cfg, wp, wp + d, wp - d) == pytest.approx(
                0.0, abs=1e-6)

    def test_calibrated_operating_point_is_phasematched(self, strand_cfg):
        wi = 2.0 * OMEGA_PUMP_0 - OMEGA_SIGNAL_0
        dk = delta_k(strand_cfg, OMEGA_PUMP_0, OMEGA_SIGNAL_0, wi)
        assert abs(dk) < 1e-6  # 1/m, vs k_p ~ 1e7 1/m

    def test_phi_nl_shifts_linearly(self, strand):
        scans = dict(pump_scan=FrequencyScan(2.4e15, 2.6e15, 4),
                     detuning_scan=FrequencyScan(-0.5e15, 0.5e15, 4))
        a = PhasematchConfig(model=strand, phi_nl=0.0, **scans)
        b = PhasematchConfig(model=strand, phi_nl=7.5, **scans)
        wp = 2.5e15
        assert delta_k(a, wp, wp + 1e14, wp - 1e14) - \
            delta_k(b, wp, wp + 1e14, wp - 1e14) == pytest.approx(7.5)

    def test_negative_phi_nl_rejected(self, strand):
        with pytest.raises(ConstraintViolationError):
            PhasematchConfig(
                model=strand,
                pump_scan=FrequencyScan(2.4e15, 2.6e15, 4),
                detuning_scan=FrequencyScan(-1e14, 1e14, 4),
                phi_nl=-1.0,
            )

    def test_scan_outside_range_rejected(self, strand):
        with pytest.raises(OutOfRangeError):
            PhasematchConfig(
                model=strand,
                pump_scan=FrequencyScan(2.4e15, 2.6e15, 4),
                detuning_scan=FrequencyScan(-2e15, 2e15, 4),
            )


class TestBuildMap:
    def test_degenerate_contour_diagnostic(self):
        cfg = PhasematchConfig(
            model=vacuum_line_model(),
            pump_scan=FrequencyScan(1.8e15, 2.2e15, 16),
            detuning_scan=FrequencyScan(-0.3e15, 0.3e15, 16),
        )
        pm = build_map(cfg, 0.8)
        assert pm.degenerate_contour
        assert pm.contours == ()

    def test_contour_passes_through_calibration_point(self, strand):
        d0 = OMEGA_SIGNAL_0 - OMEGA_PUMP_0
        cfg = PhasematchConfig(
            model=strand,
            pump_scan=FrequencyScan(OMEGA_PUMP_0 - 4e12, OMEGA_PUMP_0 + 4e12,
                                    40),
            detuning_scan=FrequencyScan(d0 - 8e12, d0 + 8e12, 40),
        )
        pm = build_map(cfg, 0.8)
        cell = np.hypot((cfg.pump_scan.stop - cfg.pump_scan.start) / 39,
                        (cfg.detuning_scan.stop - cfg.detuning_scan.start) / 39)
        best = min(
            np.min(np.hypot(c[:, 0] - OMEGA_PUMP_0, c[:, 1] - d0))
            for c in pm.contours
        )
        assert best <= cell

    def test_theta_grid_matches_gvm_bitwise(self, strand_cfg):
        pm = build_map(strand_cfg, 1.0)
        wp = pm.pump_axis
        dd = pm.detuning_axis
        rng = np.random.default_rng(7)
        for _ in range(12):
            i = rng.integers(0, dd.size)
            j = rng.integers(0, wp.size)
            if dd[i] == 0.0:
                continue
            r = gvm(strand_cfg.model, 1.0, wp[j], wp[j] + dd[i], wp[j] - dd[i])
            assert pm.theta_si[i, j] == r.theta_si

    def test_contour_vertices_lie_on_zero_set(self, strand_cfg):
        pm = build_map(strand_cfg, 1.0)
        # linear-interp error bound per cell from the grid's second differences
        step_d = pm.detuning_axis[1] - pm.detuning_axis[0]
        curv = np.max(np.abs(np.diff(pm.delta_k, n=2, axis=0)))
        bound = 2.0 * max(curv, 1e-12)
        for c in pm.contours:
            for pump, det in c[:: max(1, len(c) // 20)]:
                dk = delta_k(strand_cfg, pump, pump + det, pump - det)
                assert abs(dk) <= bound

    def test_mirror_symmetry_in_detuning(self, strand):
        cfg = PhasematchConfig(
            model=strand,
            pump_scan=FrequencyScan(2.45e15, 2.55e15, 8),
            detuning_scan=FrequencyScan(-0.9e15, 0.9e15, 9),
        )
        pm = build_map(cfg, 1.0)
        assert np.array_equal(pm.delta_k, pm.delta_k[::-1, :])

    def test_empty_scan_rejected(self, strand):
        with pytest.raises(EmptyScanError):
            FrequencyScan(2e15, 2e15, 4)
        with pytest.raises(EmptyScanError):
            FrequencyScan(2e15, 3e15, 0)


class TestOperatingPoint:
    def test_target_90_self_consistency(self, strand_cfg):
        pts = find_operating_point(strand_cfg, 90.0)
        wp, ws, wi = min(pts, key=lambda p: abs(p[0] - OMEGA_PUMP_0))
        assert ws + wi == pytest.approx(2.0 * wp, rel=1e-9)
        assert abs(delta_k(strand_cfg, wp, ws, wi)) < 1e-1
        r = gvm(strand_cfg.model, 1.0, wp, ws, wi)
        assert abs(abs(r.theta_si) - 90.0) < 0.1
        assert abs(omega_to_wavelength(wp) - 751.1e-9) < 0.5e-12

    def test_target_0_lands_on_mirrored_point(self, strand_cfg):
        # swapping the arm labels mirrors the map in detuning, so the
        # 0 degree target finds the same pump with signal on the red side
        pts = find_operating_point(strand_cfg, 0.0)
        pumps_nm = [omega_to_wavelength(p[0]) * 1e9 for p in pts]
        assert any(abs(p - 751.1) < 0.5 for p in pumps_nm)

    def test_unreachable_target_raises(self):
        # linear dispersion: tau_s = tau_i = 0 everywhere, no theta locus
        m = DispersionModel.polynomial([1.0, 1e-8], omega_ref=2e15,
                                       valid_range=(0.5e15, 4e15))
        cfg = PhasematchConfig(
            model=m,
            pump_scan=FrequencyScan(1.8e15, 2.2e15, 8),
            detuning_scan=FrequencyScan(-0.3e15, 0.3e15, 8),
        )
        with pytest.raises(NoIntersectionError):
            find_operating_point(cfg, 30.0)

    def test_target_out_of_bounds_rejected(self, strand_cfg):
        with pytest.raises(ConstraintViolationError):
            find_operating_point(strand_cfg, -1.0)
        with pytest.raises(ConstraintViolationError):
            find_operating_point(strand_cfg, 90.5)
