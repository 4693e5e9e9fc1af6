"""Explore delta_k = 0 roots vs detuning and radius at the 751.1 nm pump."""

import sys

import numpy as np
from scipy.optimize import brentq

sys.path.insert(0, "src")

from herqt.constants import omega_to_wavelength, wavelength_to_omega
from herqt.dispersion import DispersionModel, gvm

OMEGA_P = wavelength_to_omega(751.1e-9)


def pm_roots(model, n=400):
    dmax = min(OMEGA_P - model.valid_range[0], model.valid_range[1] - OMEGA_P)
    ds = np.linspace(0.01 * OMEGA_P, 0.995 * dmax, n)
    kp = model.propagation_constant(OMEGA_P)
    dk = (
        2.0 * kp
        - model.propagation_constant(OMEGA_P + ds)
        - model.propagation_constant(OMEGA_P - ds)
    )
    roots = []
    sgn = np.sign(dk)
    for i in np.nonzero(np.diff(sgn) != 0)[0]:
        f = lambda d: float(
            2.0 * kp
            - model.propagation_constant(OMEGA_P + d)
            - model.propagation_constant(OMEGA_P - d)
        )
        roots.append(brentq(f, ds[i], ds[i + 1], xtol=1e2))
    return roots


def main():
    for a_um in [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.8, 0.9, 1.0]:
        model = DispersionModel.step_index_strand(a_um * 1e-6)
        try:
            roots = pm_roots(model)
        except Exception as e:
            print(f"a={a_um}: {e}")
            continue
        print(f"a = {a_um:.2f} um: {len(roots)} phasematched detunings")
        for d in roots:
            # convention: signal = red side (heralded), idler = blue side
            ws, wi = OMEGA_P - d, OMEGA_P + d
            g = gvm(model, 1.0, OMEGA_P, ws, wi)
            print(
                f"   lam_s={omega_to_wavelength(ws)*1e6:7.4f}um "
                f"lam_i={omega_to_wavelength(wi)*1e9:7.2f}nm "
                f"tau_s/L={g.tau_s:+.3e} tau_i/L={g.tau_i:+.3e} "
                f"theta={g.theta_si:+7.2f} deg"
            )


if __name__ == "__main__":
    main()
