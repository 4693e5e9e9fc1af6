import numpy as np
import pytest

from herqt.constants import C, wavelength_to_omega
from herqt.dispersion import (
    CALIBRATED_AIR_FILL,
    CALIBRATED_CORE_RADIUS,
    OMEGA_IDLER_0,
    OMEGA_PUMP_0,
    OMEGA_SIGNAL_0,
    DispersionModel,
    calibrated_strand,
    gvm,
)
from herqt.errors import (
    DegenerateGvmError,
    ModelUnderspecifiedError,
    NonPositiveSlopeError,
    OutOfRangeError,
)


@pytest.fixture(scope="module")
def strand():
    return calibrated_strand()


def vacuum_table(n=200):
    om = np.linspace(1e15, 4e15, n)
    return DispersionModel.tabulated(om, om / C)


class TestPropagationConstant:
    def test_constant_polynomial(self):
        m = DispersionModel.polynomial([42.0], omega_ref=2e15,
                                       valid_range=(1e15, 3e15))
        assert m.propagation_constant(1.7e15) == pytest.approx(42.0)

    def test_tabulated_vacuum_line(self):
        m = vacuum_table()
        om = np.linspace(1.1e15, 3.9e15, 57)
        k = m.propagation_constant(om)
        assert np.allclose(k, om / C, rtol=1e-9)

    def test_strand_monotonic_over_valid_range(self, strand):
        lo, hi = strand.valid_range
        om = np.linspace(lo, hi, 4000)
        k = strand.propagation_constant(om)
        assert np.all(np.diff(k) > 0.0)
        assert np.all(np.isfinite(k)) and np.all(k > 0.0)

    def test_out_of_range_raises(self, strand):
        with pytest.raises(OutOfRangeError):
            strand.propagation_constant(strand.valid_range[1] * 1.01)

    def test_missing_fields_raise(self):
        with pytest.raises(ModelUnderspecifiedError):
            DispersionModel.step_index_strand(-1e-6)
        with pytest.raises(ModelUnderspecifiedError):
            DispersionModel.tabulated([1e15, 2e15], [1.0, 2.0])


class TestGroupVelocity:
    def test_tabulated_vacuum(self):
        m = vacuum_table()
        assert m.group_velocity(2e15) == pytest.approx(C, rel=1e-6)

    def test_linear_polynomial(self):
        v = 2.1e8
        m = DispersionModel.polynomial([5.0, 1.0 / v], omega_ref=2e15,
                                       valid_range=(1e15, 3e15))
        assert m.group_velocity(2.5e15) == pytest.approx(v, rel=1e-14)

    def test_strand_matches_dense_finite_differences(self, strand):
        # independent oracle: Richardson-extrapolated central differences
        om = wavelength_to_omega(751.1e-9)
        h = 1e-7 * om
        d1 = (strand.propagation_constant(om + h)
              - strand.propagation_constant(om - h)) / (2 * h)
        d2 = (strand.propagation_constant(om + 2 * h)
              - strand.propagation_constant(om - 2 * h)) / (4 * h)
        dense = 1.0 / ((4 * d1 - d2) / 3.0)
        assert strand.group_velocity(om) == pytest.approx(dense, rel=1e-6)

    def test_strand_consistency_across_scan(self, strand):
        om = np.linspace(OMEGA_IDLER_0 * 0.9, OMEGA_SIGNAL_0 * 1.05, 31)
        vg = strand.group_velocity(om)
        h = 3e-7 * om
        fd = 2.0 * h / (strand.propagation_constant(om + h)
                        - strand.propagation_constant(om - h))
        assert np.allclose(vg, fd, rtol=1e-6)

    def test_non_positive_slope_raises(self):
        m = DispersionModel.polynomial([1.0, -1e-9], omega_ref=2e15,
                                       valid_range=(1e15, 3e15))
        with pytest.raises(NonPositiveSlopeError):
            m.group_velocity(2e15)


class TestGvm:
    def test_tau_s_zero_gives_zero_angle(self):
        # dk/dw even about the signal/pump midpoint: vg(w_s) == vg(w_p)
        m = DispersionModel.polynomial([0.0, 1e-8, 0.0, 1e-39],
                                       omega_ref=1.5e15,
                                       valid_range=(0.5e15, 3.5e15))
        r = gvm(m, 1.0, 2e15, 1e15, 3e15)
        assert r.tau_s == 0.0
        assert r.theta_si == 0.0

    def test_tau_i_zero_tau_s_negative_gives_plus_90(self):
        # dk/dw even about the pump/idler midpoint: vg(w_i) == vg(w_p),
        # and dk/dw larger at the (more distant) signal -> tau_s < 0
        m = DispersionModel.polynomial([0.0, 1e-8, 0.0, 1e-39],
                                       omega_ref=2.5e15,
                                       valid_range=(0.5e15, 3.5e15))
        r = gvm(m, 1.0, 2e15, 1e15, 3e15)
        assert r.tau_i == 0.0 and r.tau_s < 0.0
        assert r.theta_si == 90.0

    def test_antisymmetric_taus_give_45(self):
        # dk/dw linear about the pump: tau_s = -tau_i exactly
        m = DispersionModel.polynomial([0.0, 1e-8, 1e-24],
                                       omega_ref=2e15,
                                       valid_range=(0.5e15, 3.5e15))
        r = gvm(m, 1.0, 2e15, 1e15, 3e15)
        assert r.tau_s == pytest.approx(-r.tau_i, rel=1e-9)
        assert r.theta_si == pytest.approx(45.0, abs=1e-5)

    def test_angle_independent_of_length(self, strand):
        a = gvm(strand, 0.0123, OMEGA_PUMP_0, OMEGA_SIGNAL_0 * 1.01,
                OMEGA_IDLER_0)
        b = gvm(strand, 7.7, OMEGA_PUMP_0, OMEGA_SIGNAL_0 * 1.01,
                OMEGA_IDLER_0)
        assert a.theta_si == pytest.approx(b.theta_si, abs=1e-12)

    def test_degenerate_raises(self):
        m = DispersionModel.polynomial([5.0, 1e-8], omega_ref=2e15,
                                       valid_range=(0.5e15, 3.5e15))
        with pytest.raises(DegenerateGvmError):
            gvm(m, 1.0, 2e15, 1.5e15, 2.5e15)
        with pytest.raises(DegenerateGvmError):
            gvm(m, -1.0, 2e15, 1.5e15, 2.6e15)


class TestCalibration:
    def test_operating_point_phasematched(self, strand):
        dk = (2.0 * strand.propagation_constant(OMEGA_PUMP_0)
              - strand.propagation_constant(OMEGA_SIGNAL_0)
              - strand.propagation_constant(OMEGA_IDLER_0))
        k_p = strand.propagation_constant(OMEGA_PUMP_0)
        assert abs(dk) / k_p < 1e-10

    def test_idler_group_velocity_matched(self, strand):
        r = gvm(strand, 0.8, OMEGA_PUMP_0, OMEGA_SIGNAL_0, OMEGA_IDLER_0)
        assert abs(r.tau_i) < 1e-16
        # tau_i sits at the finite-difference noise floor, so its sign (and
        # with it the +/-90 branch of the folded angle) is indeterminate
        assert abs(r.theta_si) == pytest.approx(90.0, abs=1e-4)

    def test_calibration_constants_are_frozen(self):
        assert CALIBRATED_CORE_RADIUS == pytest.approx(6.5320e-7, rel=1e-4)
        assert 0.0 < CALIBRATED_AIR_FILL < 1.0


class TestCsvIngestion:
    def test_round_trip(self, tmp_path):
        om = np.linspace(1e15, 3e15, 40)
        k = om / C
        path = tmp_path / "disp.csv"
        rows = ["omega_rad_per_s,k_per_m"]
        rows += [f"{o:.17g},{kk:.17g}" for o, kk in zip(om, k)]
        path.write_text("\n".join(rows) + "\n")
        m = DispersionModel.from_csv(path)
        assert m.group_velocity(2e15) == pytest.approx(C, rel=1e-6)
