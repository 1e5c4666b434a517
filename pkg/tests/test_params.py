import math

import pytest

from zeropi.errors import DomainError
from zeropi.params import BasisSpec, CircuitParams, derive_energies, parameter_set


def test_zeta_frequency_ps2():
    assert parameter_set("PS2").Omega_zeta == pytest.approx(math.sqrt(8 * 0.04 * 0.04), rel=1e-12)
    assert parameter_set("PS2").Omega_zeta == pytest.approx(0.11314, abs=5e-6)


def test_plasma_frequency_ps1():
    assert derive_energies(parameter_set("PS1")).omega_p == pytest.approx(40.0, rel=1e-12)


def test_ecs_combination():
    p = CircuitParams(EC=0.04, ECJ=20.0, EJ=10.0, EL=0.04)
    assert p.ECS == pytest.approx(1 / (1 / 0.04 + 1 / 20.0), rel=1e-14)
    assert p.ECS == pytest.approx(0.0399201, abs=1e-7)


@pytest.mark.parametrize("field,value", [("EJ", -1.0), ("EL", 0.0), ("EC", float("nan")), ("dEL", 1.0),
                                         ("temperature", -0.01), ("kappa_zeta", -1.0)])
def test_invalid_parameters_rejected(field, value):
    kwargs = dict(EC=0.04, ECJ=20.0, EJ=10.0, EL=0.04)
    kwargs[field] = value
    with pytest.raises(DomainError):
        CircuitParams(**kwargs)


def test_parameter_sets_table():
    expected = {"PS1": (0.02, 20, 10, 0.008), "PS2": (0.04, 20, 10, 0.04), "PS3": (0.15, 10, 5, 0.13)}
    for name, (EC, ECJ, EJ, EL) in expected.items():
        p = parameter_set(name)
        assert (p.EC, p.ECJ, p.EJ, p.EL) == (EC, ECJ, EJ, EL)
        assert p.dC == p.dCJ == p.dEJ == p.dEL == 0.05
    with pytest.raises(DomainError):
        parameter_set("PS9")


def test_basis_dimensions():
    b = BasisSpec(n_theta_max=2, phi_points=11, n_zeta_max=3)
    assert b.n_theta == 5 and b.dim_2d == 55 and b.dim_3d == 220
    with pytest.raises(DomainError):
        BasisSpec(stencil_order=3)


def test_default_basis_covers_wavefunction():
    p = parameter_set("PS2")
    b = BasisSpec.default_for(p)
    spread = (8 * p.ECJ / p.EL) ** 0.25 / math.sqrt(2)
    assert b.phi_max == pytest.approx(7 * spread)
    assert b.dphi <= 0.15
