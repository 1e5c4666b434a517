"""Coherence budget of the PS2 device at its flux sweet spot.

Runs every dephasing and relaxation channel once and prints a table of
coherence times, followed by the combined T_phi, T_1 and T_2. Takes about
a minute on one core.

    python demos/working_point_budget.py [PS1|PS2|PS3]
"""

import sys
import warnings

from zeropi import coherence_budget, parameter_set
from zeropi.params import BasisSpec


def fmt(seconds: float) -> str:
    if seconds == float("inf"):
        return "inf"
    for unit, scale in (("s", 1.0), ("ms", 1e-3), ("us", 1e-6)):
        if seconds >= scale:
            return f"{seconds / scale:9.3g} {unit}"
    return f"{seconds / 1e-9:9.3g} ns"


def main(name: str = "PS2") -> None:
    params = parameter_set(name)
    basis = BasisSpec.default_for(params, n_theta_max=20)
    print(f"{name}: EC={params.EC} ECJ={params.ECJ} EJ={params.EJ} EL={params.EL} GHz, "
          f"Omega_zeta={params.Omega_zeta * 1e3:.2f} MHz")
    print(f"basis: n_theta_max={basis.n_theta_max} phi_points={basis.phi_points} phi_max={basis.phi_max:.2f}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        budget = coherence_budget(params, basis)

    print(f"\nthermal occupation of the zeta mode: {budget.metadata['n_th']:.3f}")
    print(f"{'channel':<22}{'time':>14}")
    for channel, time in budget.times.items():
        print(f"{channel:<22}{fmt(time):>14}")
    print(f"\n{'T_phi':<22}{fmt(budget.Tphi):>14}")
    print(f"{'T_1':<22}{fmt(budget.T1):>14}")
    print(f"{'T_2':<22}{fmt(budget.T2):>14}")
    if caught:
        print("\nwarnings:")
        for w in caught:
            print(f"  {w.category.__name__}: {w.message}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
