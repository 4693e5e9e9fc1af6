"""One-off calibration of the strand-in-air core radius.

Finds the radius for which the phasematched (delta_k = 0), signal
group-velocity-matched (tau_s = 0) operating point sits at a pump
wavelength of 751.1 nm.  The resulting radius is frozen into
herqt.dispersion.CALIBRATED_CORE_RADIUS.
"""

import sys

import numpy as np
from scipy.optimize import brentq

sys.path.insert(0, "src")

from herqt.constants import C, TWO_PI, omega_to_wavelength, wavelength_to_omega
from herqt.dispersion import DispersionModel

OMEGA_P = wavelength_to_omega(751.1e-9)


def gvm_detuning(model, omega_p, lo_frac=0.05, hi_frac=0.65):
    """Detuning D > 0 with vg(omega_p - D) = vg(omega_p), or None."""
    vg_p = model.group_velocity(omega_p)

    def f(d):
        return model.group_velocity(omega_p - d) - vg_p

    grid = np.linspace(lo_frac * omega_p, hi_frac * omega_p, 200)
    vals = np.array([f(d) for d in grid])
    sign = np.sign(vals)
    idx = np.nonzero(np.diff(sign) != 0)[0]
    if idx.size == 0:
        return None
    i = idx[0]
    return brentq(f, grid[i], grid[i + 1], xtol=1e3)


def mismatch_at(radius):
    model = DispersionModel.step_index_strand(radius)
    d = gvm_detuning(model, OMEGA_P)
    if d is None:
        return None, None
    dk = (
        2.0 * model.propagation_constant(OMEGA_P)
        - model.propagation_constant(OMEGA_P + d)
        - model.propagation_constant(OMEGA_P - d)
    )
    return dk, d


def main():
    print("radius_um  delta_k_per_m  lam_s_um  lam_i_nm")
    radii = np.linspace(0.15e-6, 1.2e-6, 43)
    rows = []
    for a in radii:
        try:
            dk, d = mismatch_at(a)
        except Exception as e:
            print(f"{a*1e6:8.4f}  error: {e}")
            continue
        if dk is None:
            print(f"{a*1e6:8.4f}  no GVM point")
            continue
        lam_s = omega_to_wavelength(OMEGA_P - d)
        lam_i = omega_to_wavelength(OMEGA_P + d)
        rows.append((a, dk))
        print(f"{a*1e6:8.4f}  {dk:13.4e}  {lam_s*1e6:8.4f}  {lam_i*1e9:8.2f}")

    rows = np.array(rows)
    sign = np.sign(rows[:, 1])
    idx = np.nonzero(np.diff(sign) != 0)[0]
    for i in idx:
        a_star = brentq(lambda a: mismatch_at(a)[0], rows[i, 0], rows[i + 1, 0],
                        xtol=1e-13)
        model = DispersionModel.step_index_strand(a_star)
        d = gvm_detuning(model, OMEGA_P)
        lam_s = omega_to_wavelength(OMEGA_P - d)
        lam_i = omega_to_wavelength(OMEGA_P + d)
        print(f"\ncalibrated radius = {a_star*1e6:.6f} um")
        print(f"  signal (GVM-matched, heralded) = {lam_s*1e6:.4f} um")
        print(f"  idler (herald arm)             = {lam_i*1e9:.2f} nm")


if __name__ == "__main__":
    main()
