"""Shot-noise dephasing of the zeta mode as E_L is varied.

For each inductive energy the dispersive shift chi01 is computed from the
level sum over the (theta, phi) spectrum and turned into a photon shot-noise
dephasing time. The two limiting forms (small and large chi/kappa) are
printed next to the full expression; the dephasing time peaks where they
cross.
"""

import warnings
from dataclasses import replace

import numpy as np

from zeropi import coupling_matrix, parameter_set, shot_noise_rate, solve_2d, stark_lamb
from zeropi.decoherence import ThermalEnv, shot_noise_asymptotes
from zeropi.params import BasisSpec

LEVELS = 15


def main() -> None:
    base = parameter_set("PS2")
    print(f"{'EL (GHz)':>9} {'chi01 (kHz)':>12} {'chi/kappa':>10} {'Tphi (us)':>10} "
          f"{'small (us)':>11} {'large (us)':>11}")
    for EL in np.geomspace(0.005, 0.2, 9):
        p = replace(base, EL=float(EL))
        basis = BasisSpec.default_for(p, n_theta_max=10, max_step=0.2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = solve_2d(p, basis, LEVELS)
            rep = stark_lamb(coupling_matrix(sol, p, basis, LEVELS), sol.eigenvalues, p.Omega_zeta)
        n_th = ThermalEnv.from_params(p).n_th
        shot = shot_noise_rate(rep.chi01, p.kappa_zeta, n_th)
        limits = shot_noise_asymptotes(rep.chi01, p.kappa_zeta, n_th)
        chi_rad = abs(rep.chi01) * 2 * np.pi * 1e9
        print(f"{EL:9.4f} {rep.chi01 * 1e6:12.4g} {chi_rad / p.kappa_zeta:10.3g} {1e6 / shot.rate:10.4g} "
              f"{1e6 / limits['small_chi']:11.4g} {1e6 / limits['large_chi']:11.4g}")


if __name__ == "__main__":
    main()
