"""Circuit parameters, derived energy scales and discretization choices.

All energies are stored as E/h in GHz. Angular rates (``kappa_zeta``, noise
cutoffs) are in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .constants import KB_OVER_H_GHZ
from .errors import DomainError


@dataclass(frozen=True)
class NoiseAmplitudes:
    """1/f noise amplitudes.

    A_flux is in units of the flux quantum, A_charge in units of the
    dimensionless offset charge, A_Ic as a fraction of the critical current.
    """

    A_flux: float = 1e-6
    A_charge: float = 1e-4
    A_Ic: float = 1e-7


@dataclass(frozen=True)
class FluxLine:
    """Ohmic flux-bias line: mutual inductance in Phi_0/A, resistance in ohm."""

    M: float = 1000.0
    R: float = 50.0


@dataclass(frozen=True)
class Cutoffs:
    omega_ir: float = 2 * math.pi * 1.0
    omega_uv: float = 2 * math.pi * 3.0e9
    t_meas: float = 10e-6


@dataclass(frozen=True)
class CircuitParams:
    """Physical parameters of the disordered 0-pi circuit.

    Parameters
    ----------
    EC, ECJ, EJ, EL:
        capacitive, junction charging, Josephson and inductive energies (GHz)
    dC, dCJ, dEJ, dEL:
        relative deviations ``(X1 - X2) / X`` between the nominally identical
        element pairs
    flux:
        external flux in units of the flux quantum
    ng_theta:
        offset charge of the theta mode, in Cooper pairs
    temperature:
        bath temperature in kelvin
    kappa_zeta:
        intrinsic decay rate of the zeta mode in 1/s (0 for a lossless mode)
    """

    EC: float
    ECJ: float
    EJ: float
    EL: float
    dC: float = 0.0
    dCJ: float = 0.0
    dEJ: float = 0.0
    dEL: float = 0.0
    flux: float = 0.0
    ng_theta: float = 0.0
    temperature: float = 0.015
    kappa_zeta: float = 1e4
    noise_amplitudes: NoiseAmplitudes = field(default_factory=NoiseAmplitudes)
    fluxline: FluxLine = field(default_factory=FluxLine)
    cutoffs: Cutoffs = field(default_factory=Cutoffs)

    def __post_init__(self):
        for name in ("EC", "ECJ", "EJ", "EL"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive energy, got {value!r}")
        for name in ("dC", "dCJ", "dEJ", "dEL"):
            value = getattr(self, name)
            if not (math.isfinite(value) and abs(value) < 1):
                raise DomainError(f"{name} must satisfy |{name}| < 1, got {value!r}")
        for name in ("flux", "ng_theta"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.temperature >= 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature!r}")
        if not (math.isfinite(self.kappa_zeta) and self.kappa_zeta >= 0):
            raise DomainError(f"kappa_zeta must be >= 0, got {self.kappa_zeta!r}")
        c = self.cutoffs
        if not (0 < c.omega_ir < c.omega_uv):
            raise DomainError("cutoffs must satisfy 0 < omega_ir < omega_uv")
        if not c.t_meas > 0:
            raise DomainError("cutoffs.t_meas must be positive")
        a = self.noise_amplitudes
        for name in ("A_flux", "A_charge", "A_Ic"):
            if getattr(a, name) < 0:
                raise DomainError(f"noise_amplitudes.{name} must be >= 0")
        if self.fluxline.R <= 0:
            raise DomainError("fluxline.R must be positive")

    @property
    def ECS(self) -> float:
        return 1.0 / (1.0 / self.EC + 1.0 / self.ECJ)

    @property
    def Omega_zeta(self) -> float:
        """Zeta-mode frequency in GHz."""
        return math.sqrt(8.0 * self.EC * self.EL)

    @property
    def kT_GHz(self) -> float:
        return KB_OVER_H_GHZ * self.temperature

    def with_value(self, name: str, value: float) -> "CircuitParams":
        """Copy with one scalar field replaced (used by sweeps and derivatives)."""
        return replace(self, **{name: value})

    def without_zeta_coupling(self) -> "CircuitParams":
        return replace(self, dC=0.0, dEL=0.0)


@dataclass(frozen=True)
class DerivedEnergies:
    ECS: float
    Omega_zeta: float
    omega_p: float
    zeta_osc_length: float


def derive_energies(params: CircuitParams) -> DerivedEnergies:
    """Combined charging energy, zeta-mode and plasma frequencies (all GHz)."""
    for name in ("EC", "ECJ", "EJ", "EL"):
        if not getattr(params, name) > 0:
            raise DomainError(f"{name} must be positive")
    return DerivedEnergies(
        ECS=1.0 / (1.0 / params.EC + 1.0 / params.ECJ),
        Omega_zeta=math.sqrt(8.0 * params.EC * params.EL),
        omega_p=math.sqrt(8.0 * params.ECJ * params.EJ),
        zeta_osc_length=(8.0 * params.EC / params.EL) ** 0.25,
    )


def zeta_zpf(params: CircuitParams) -> float:
    """Zero-point amplitude x0 with zeta = x0 (a + a^dag)."""
    return (params.EC / (2.0 * params.EL)) ** 0.25


@dataclass(frozen=True)
class BasisSpec:
    """Truncation of theta (charge basis), phi (grid) and zeta (Fock basis).

    ``stencil_order`` is the accuracy order of the central finite-difference
    stencils used for the phi derivatives; 2 gives the three-point stencil.
    """

    n_theta_max: int = 10
    phi_points: int = 301
    phi_max: float = 20.0
    n_zeta_max: int = 20
    stencil_order: int = 8

    def __post_init__(self):
        if self.n_theta_max < 1 or self.phi_points < 3 or self.n_zeta_max < 0:
            raise DomainError("basis cutoffs must be >= 1 (phi_points >= 3, n_zeta_max >= 0)")
        if not self.phi_max > 0:
            raise DomainError("phi_max must be positive")
        if self.stencil_order not in (2, 4, 6, 8, 10):
            raise DomainError("stencil_order must be one of 2, 4, 6, 8, 10")

    @property
    def n_theta(self) -> int:
        return 2 * self.n_theta_max + 1

    @property
    def dphi(self) -> float:
        return 2 * self.phi_max / (self.phi_points - 1)

    @property
    def dim_2d(self) -> int:
        return self.n_theta * self.phi_points

    @property
    def dim_3d(self) -> int:
        return self.dim_2d * (self.n_zeta_max + 1)

    @classmethod
    def default_for(
        cls,
        params: CircuitParams,
        *,
        n_theta_max: int = 10,
        n_zeta_max: int = 20,
        width: float = 7.0,
        max_step: float = 0.15,
        stencil_order: int = 8,
    ) -> "BasisSpec":
        """Grid spanning ``width`` times the phi spread (8 ECJ/EL)^(1/4)/sqrt(2)."""
        sigma = (8.0 * params.ECJ / params.EL) ** 0.25 / math.sqrt(2.0)
        phi_max = width * sigma
        points = int(math.ceil(2 * phi_max / max_step)) + 1
        return cls(
            n_theta_max=n_theta_max,
            phi_points=points,
            phi_max=phi_max,
            n_zeta_max=n_zeta_max,
            stencil_order=stencil_order,
        )


# Table of circuit parameters; all disorder fractions at 5 %.
_PARAMETER_SETS = {
    "PS1": dict(EC=0.02, ECJ=20.0, EJ=10.0, EL=0.008),
    "PS2": dict(EC=0.04, ECJ=20.0, EJ=10.0, EL=0.04),
    "PS3": dict(EC=0.15, ECJ=10.0, EJ=5.0, EL=0.13),
}


def parameter_set(name: str, disorder: float = 0.05, **overrides) -> CircuitParams:
    """One of the three reference devices ``PS1``, ``PS2``, ``PS3``."""
    try:
        energies = _PARAMETER_SETS[name.upper()]
    except KeyError:
        raise DomainError(f"unknown parameter set {name!r}") from None
    values = dict(energies, dC=disorder, dCJ=disorder, dEJ=disorder, dEL=disorder)
    values.update(overrides)
    return CircuitParams(**values)
