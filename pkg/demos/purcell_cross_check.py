"""Purcell relaxation through the zeta mode, two ways.

The exact route diagonalizes the coupled (levels x Fock) Hamiltonian and
applies the golden rule to the zeta loss operator. The perturbative route
uses the first-order dressing by g_ll'/Delta_ll'. The two agree when every
|g/Delta| entering the sum is small.
"""

import numpy as np

from zeropi import parameter_set, purcell_exact, purcell_perturbative, solve_dressed
from zeropi.decoherence import ThermalEnv
from zeropi.params import BasisSpec


def main() -> None:
    base = parameter_set("PS2")
    basis = BasisSpec(n_theta_max=10, phi_points=201, phi_max=18.0)
    print(f"{'flux':>6} {'exact (1/s)':>12} {'pert (1/s)':>12} {'ratio':>7}")
    for flux in np.linspace(0.0, 0.4, 5):
        p = base.with_value("flux", float(flux))
        d = solve_dressed(p, basis, levels=12)
        env = ThermalEnv.from_params(p)
        exact = purcell_exact(d.labels, env)
        pert = purcell_perturbative(d.g, d.sol2d.eigenvalues[:12], p.Omega_zeta, env)
        print(f"{flux:6.2f} {exact.Gamma1:12.4g} {pert.Gamma1:12.4g} {exact.Gamma1 / pert.Gamma1:7.3f}")


if __name__ == "__main__":
    main()
