"""Two-knob calibration scan for the step-index strand model.

For each cladding air-fill fraction, find the core radius at which the
phasematched (dk = 0) pair with a group-velocity-matched red arm sits at
a 751.1 nm pump.  Report the blue-arm walk-off slope tau_blue / L, which
sets the factorability length scale.
"""

import sys

import numpy as np
from scipy.optimize import brentq

sys.path.insert(0, "/root/pkg/src")

from herqt.constants import wavelength_to_omega, omega_to_wavelength  # noqa: E402
from herqt.dispersion import DispersionModel  # noqa: E402

OMEGA_P = wavelength_to_omega(751.1e-9)
W_RANGE = (0.3e-6, 2.75e-6)


def matched_red(model, w_lo=1.1e-6, w_hi=2.7e-6):
    """Red angular frequency with vg equal to vg at the pump, or None."""
    vg_p = model.group_velocity(OMEGA_P)

    def g(om):
        return 1.0 / model.group_velocity(om) - 1.0 / vg_p

    oms = np.linspace(wavelength_to_omega(w_hi), wavelength_to_omega(w_lo), 400)
    vals = g(oms)
    for j in range(len(oms) - 1):
        if vals[j] * vals[j + 1] < 0.0:
            return brentq(g, oms[j], oms[j + 1], xtol=1e2)
    return None


def mismatch(radius, air_fill):
    """dk at the GVM-matched pair for this radius, or None if no pair."""
    model = DispersionModel.step_index_strand(radius, air_fill=air_fill,
                                              wavelength_range=W_RANGE)
    try:
        om_r = matched_red(model)
    except Exception:
        return None, None, None
    if om_r is None:
        return None, None, None
    om_b = 2.0 * OMEGA_P - om_r
    try:
        dk = (2.0 * model.propagation_constant(OMEGA_P)
              - model.propagation_constant(om_b)
              - model.propagation_constant(om_r))
    except Exception:
        return None, None, None
    return float(dk), om_b, om_r


def calibrate_radius(air_fill, radii):
    vals = [mismatch(a, air_fill)[0] for a in radii]
    out = []
    for j in range(len(radii) - 1):
        if vals[j] is None or vals[j + 1] is None:
            continue
        if vals[j] * vals[j + 1] < 0.0:
            out.append(brentq(lambda a: mismatch(a, air_fill)[0],
                              radii[j], radii[j + 1], xtol=1e-13))
    return out


def main():
    radii = np.linspace(0.25e-6, 3.0e-6, 56)
    print(f"{'fill':>6} {'a_um':>9} {'lam_blue_nm':>11} {'lam_red_um':>10} "
          f"{'tau_blue/L (s/m)':>17} {'tau_red/L':>12}")
    for fill in [1.0, 0.8, 0.6, 0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05, 0.03,
                 0.02, 0.01, 0.005]:
        roots = calibrate_radius(fill, radii)
        if not roots:
            print(f"{fill:>6} {'--':>9}")
            continue
        for a in roots:
            model = DispersionModel.step_index_strand(a, air_fill=fill,
                                                      wavelength_range=W_RANGE)
            _, om_b, om_r = mismatch(a, fill)
            inv_p = 1.0 / model.group_velocity(OMEGA_P)
            tb = inv_p - 1.0 / model.group_velocity(om_b)
            tr = inv_p - 1.0 / model.group_velocity(om_r)
            print(f"{fill:>6} {a*1e6:>9.5f} {omega_to_wavelength(om_b)*1e9:>11.2f} "
                  f"{omega_to_wavelength(om_r)*1e6:>10.4f} {tb:>17.4e} {tr:>12.2e}")


if __name__ == "__main__":
    main()
