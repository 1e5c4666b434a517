"""Qubit transition frequency and its curvature versus external flux.

Sweeps the reduced (theta, phi) Hamiltonian of PS2 symmetrically around
zero flux, tracks the lowest levels by overlap and prints E1 - E0 together
with its first and second flux derivatives. The first derivative changes
sign at the zero-flux sweet spot; the qubit splitting closes as the flux
approaches half a quantum.
"""

import numpy as np

from zeropi import parameter_set, sweep
from zeropi.params import BasisSpec


def main() -> None:
    params = parameter_set("PS2")
    basis = BasisSpec(n_theta_max=10, phi_points=201, phi_max=18.0)
    curve = sweep(params, basis, "flux", np.linspace(-0.2, 0.45, 14), k=4)
    print(f"{'flux':>6} {'E1-E0 (MHz)':>12} {'E2-E0 (GHz)':>12} {'d1 (rad/s)':>12} {'d2 (rad/s)':>12}")
    for x, E, d1, d2 in zip(curve.grid, curve.energies, curve.d1, curve.d2):
        print(f"{x:6.2f} {(E[1] - E[0]) * 1e3:12.5f} {E[2] - E[0]:12.5f} {d1:12.4g} {d2:12.4g}")
    for w in curve.warnings:
        print("warning:", w)


if __name__ == "__main__":
    main()
