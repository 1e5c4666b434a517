"""Assembly of the 0-pi Hamiltonians and noise-coupling operators.

Basis conventions
-----------------
* theta: charge basis ``n = -N..N``; ``-i d/dtheta -> n`` and the offset
  charge enters as ``n - ng_theta`` everywhere theta momentum appears.
* phi: uniform grid on ``[-phi_max, phi_max]`` with hard walls; derivatives
  are central finite differences of configurable order.
* zeta: Fock basis of the zeta oscillator, ``zeta = x0 (a + a^dag)`` with
  ``x0 = (EC / 2 EL)^(1/4)`` and ``d/dzeta = (a - a^dag) / (2 x0)``. The
  zero-point energy Omega/2 is dropped.

Composite indices are row-major: ``(n_theta, phi)`` for 2D and
``(n_theta, phi, n_zeta)`` for the full 3D problem. The product basis uses
``(l, n_zeta)`` with ``l`` indexing eigenstates of the 2D Hamiltonian.

Sign conventions: the junction-capacitance cross term
``+2 ECS dCJ d_phi d_theta`` and the zeta coupling
``+2 ECS dC d_theta d_zeta + EL dEL phi zeta`` are implemented exactly as
written, with ``d_theta = i (n - ng)``. The resulting coupling matrix is
``g = c_phi <phi> + i c_theta <n - ng>`` (see :mod:`zeropi.dispersive`).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ResourceError, UsageError
from .params import BasisSpec, CircuitParams, zeta_zpf

BASIS_TAGS = ("theta_phi", "theta_phi_zeta", "zeta_only", "product")

DEFAULT_MAX_DIM = 4_000_000


def max_dim() -> int:
    return int(os.environ.get("ZEROPI_MAX_DIM", DEFAULT_MAX_DIM))


def _check_dim(dim: int) -> None:
    limit = max_dim()
    if dim > limit:
        raise ResourceError(f"matrix dimension {dim} exceeds ZEROPI_MAX_DIM={limit}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Sparse Hermitian matrix plus the basis it is expressed in.

    ``dims`` holds the factor dimensions, e.g. ``(2N+1, P)`` for theta_phi.
    """

    matrix: sp.csr_matrix
    basis_tag: str
    dims: tuple = ()
    units: str = "GHz"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.basis_tag not in BASIS_TAGS:
            raise UsageError(f"unknown basis tag {self.basis_tag!r}")
        m = sp.csr_matrix(self.matrix, dtype=complex)
        m.sum_duplicates()
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def entries(self):
        """Nonzero entries as a list of ``(row, col, value)``."""
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        """max |H - H^dag| relative to max |H|."""
        diff = self.matrix - self.matrix.conj().T
        scale = abs(self.matrix).max() if self.matrix.nnz else 0.0
        if diff.nnz == 0:
            return 0.0
        err = abs(diff).max()
        return err / scale if scale > 0 else err

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        return self.hermiticity_error() <= rtol

    def __matmul__(self, other):
        return self.matrix @ other

    def expectation(self, vectors: np.ndarray) -> np.ndarray:
        """Matrix ``V^dag O V`` for column vectors V."""
        return vectors.conj().T @ (self.matrix @ vectors)


def _finalize(matrix, tag, dims, units="GHz", **meta) -> HermitianOperator:
    op = HermitianOperator(matrix, tag, tuple(dims), units, dict(meta))
    # Assembly is Hermitian by construction; a failure here is a bug.
    assert op.is_hermitian(1e-12), f"non-Hermitian {tag} assembly ({op.hermiticity_error():.2e})"
    return op


# -- finite differences -----------------------------------------------------


@lru_cache(maxsize=None)
def fd_weights(order: int, derivative: int) -> tuple:
    """Central-difference weights of accuracy ``order`` for a 1st or 2nd derivative.

    Returns ``(offsets, weights)`` for unit grid spacing. Exact rational
    arithmetic avoids round-off in the Vandermonde solve.
    """
    if order % 2 or order < 2:
        raise DomainError("stencil order must be a positive even integer")
    half = order // 2
    offsets = list(range(-half, half + 1))
    size = len(offsets)
    # Solve sum_k w_k o_k^j = j! delta_{j,derivative} by Gauss-Jordan on Fractions.
    rows = [[Fraction(o) ** j for o in offsets] + [Fraction(math.factorial(j) if j == derivative else 0)]
            for j in range(size)]
    for col in range(size):
        pivot = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    weights = [float(rows[j][-1]) for j in range(size)]
    return tuple(offsets), tuple(weights)


def _banded(points: int, offsets, weights, scale: float) -> sp.csr_matrix:
    diags = []
    used = []
    for o, w in zip(offsets, weights):
        if w == 0.0 or abs(o) >= points:
            continue
        diags.append(np.full(points - abs(o), w * scale))
        used.append(o)
    return sp.diags(diags, used, shape=(points, points), format="csr")


def phi_grid(basis: BasisSpec) -> np.ndarray:
    return np.linspace(-basis.phi_max, basis.phi_max, basis.phi_points)


def d_phi(basis: BasisSpec) -> sp.csr_matrix:
    """First derivative on the phi grid (real antisymmetric)."""
    offsets, weights = fd_weights(basis.stencil_order, 1)
    return _banded(basis.phi_points, offsets, weights, 1.0 / basis.dphi)


def d2_phi(basis: BasisSpec) -> sp.csr_matrix:
    """Second derivative on the phi grid (real symmetric, hard walls)."""
    offsets, weights = fd_weights(basis.stencil_order, 2)
    return _banded(basis.phi_points, offsets, weights, 1.0 / basis.dphi**2)


# -- theta (charge basis) and zeta (Fock basis) operators -------------------


def charge_numbers(basis: BasisSpec) -> np.ndarray:
    return np.arange(-basis.n_theta_max, basis.n_theta_max + 1, dtype=float)


def _raise_theta(size: int) -> sp.csr_matrix:
    """e^{i theta}: |n> -> |n+1>."""
    return sp.diags([np.ones(size - 1)], [-1], shape=(size, size), format="csr")


def cos_theta(basis: BasisSpec) -> sp.csr_matrix:
    up = _raise_theta(basis.n_theta)
    return ((up + up.T) * 0.5).tocsr()


def sin_theta(basis: BasisSpec) -> sp.csr_matrix:
    up = _raise_theta(basis.n_theta)
    return ((up - up.T) * (-0.5j)).tocsr()


def annihilation(n_max: int) -> sp.csr_matrix:
    return sp.diags([np.sqrt(np.arange(1, n_max + 1, dtype=float))], [1],
                    shape=(n_max + 1, n_max + 1), format="csr")


def _kron(a, b):
    return sp.kron(a, b, format="csr")


# -- Hamiltonians -------------------------------------------------------------


def _theta_phi_parts(params: CircuitParams, basis: BasisSpec):
    """Pieces of H_0-pi shared by the 2D and 3D builds."""
    ECS = params.ECS
    phi = phi_grid(basis)
    shifted = phi - math.pi * params.flux
    n_shift = charge_numbers(basis) - params.ng_theta
    eye_t = sp.identity(basis.n_theta, format="csr")
    eye_p = sp.identity(basis.phi_points, format="csr")

    kinetic_theta = _kron(sp.diags(2.0 * ECS * n_shift**2), eye_p)
    phi_part = -2.0 * params.ECJ * d2_phi(basis) + sp.diags(params.EL * phi**2)
    h = kinetic_theta + _kron(eye_t, phi_part)
    h = h - 2.0 * params.EJ * _kron(cos_theta(basis), sp.diags(np.cos(shifted)))
    if params.dEJ:
        h = h + params.EJ * params.dEJ * _kron(sin_theta(basis), sp.diags(np.sin(shifted)))
    if params.dCJ:
        # 2 ECS dCJ d_phi d_theta with d_theta = i (n - ng)
        h = h + 2.0 * ECS * params.dCJ * _kron(sp.diags(1j * n_shift), d_phi(basis))
    return h.tocsr()


def build_h_2d(params: CircuitParams, basis: BasisSpec) -> HermitianOperator:
    """H_0-pi on the (theta, phi) space, junction disorder included."""
    _check_dim(basis.dim_2d)
    h = _theta_phi_parts(params, basis)
    return _finalize(h, "theta_phi", (basis.n_theta, basis.phi_points))


def build_h_zeta(params: CircuitParams, n_zeta_max: int) -> HermitianOperator:
    """Omega a^dag a in the Fock basis (zero-point energy dropped)."""
    number = np.arange(n_zeta_max + 1, dtype=float)
    return _finalize(sp.diags(params.Omega_zeta * number), "zeta_only", (n_zeta_max + 1,))


def zeta_coupling_operators(params: CircuitParams, basis: BasisSpec):
    """Operators (on theta x phi) multiplying ``a`` and ``a^dag`` in H_int.

    H_int = X (x) a + X^dag (x) a^dag with
    X = EL dEL x0 phi + (ECS dC / x0) d_theta.
    """
    x0 = zeta_zpf(params)
    phi = phi_grid(basis)
    n_shift = charge_numbers(basis) - params.ng_theta
    eye_t = sp.identity(basis.n_theta, format="csr")
    eye_p = sp.identity(basis.phi_points, format="csr")
    c_phi = params.EL * params.dEL * x0
    c_theta = params.ECS * params.dC / x0
    x = c_phi * _kron(eye_t, sp.diags(phi)) + c_theta * _kron(sp.diags(1j * n_shift), eye_p)
    return x.tocsr()


def build_h_3d(params: CircuitParams, basis: BasisSpec) -> HermitianOperator:
    """Full (theta, phi, zeta) Hamiltonian H_0-pi + H_zeta + H_int."""
    _check_dim(basis.dim_3d)
    nz = basis.n_zeta_max + 1
    h2 = _theta_phi_parts(params, basis)
    eye_2 = sp.identity(basis.dim_2d, format="csr")
    h = _kron(h2, sp.identity(nz, format="csr")) + _kron(eye_2, build_h_zeta(params, basis.n_zeta_max).matrix)
    if params.dC or params.dEL:
        a = annihilation(basis.n_zeta_max)
        x = zeta_coupling_operators(params, basis)
        coupling = _kron(x, a)
        h = h + coupling + coupling.conj().T
    return _finalize(h, "theta_phi_zeta", (basis.n_theta, basis.phi_points, nz))


def build_h_product(energies2d, g, Omega_zeta: float, n_zeta_max: int) -> HermitianOperator:
    """Qubit-zeta Hamiltonian in the product basis of 2D eigenstates and Fock states.

    H = sum_l E_l |l><l| + Omega a^dag a + sum_{l,l'} (g_ll' |l><l'| a + h.c.)
    """
    energies2d = np.asarray(energies2d, dtype=float)
    g = np.asarray(g, dtype=complex)
    levels = energies2d.size
    if g.shape != (levels, levels):
        raise UsageError("coupling matrix shape does not match the number of levels")
    nz = n_zeta_max + 1
    _check_dim(levels * nz)
    number = np.arange(nz, dtype=float)
    diag = (energies2d[:, None] + Omega_zeta * number[None, :]).ravel()
    a = annihilation(n_zeta_max)
    coupling = _kron(sp.csr_matrix(g), a)
    h = sp.diags(diag) + coupling + coupling.conj().T
    return _finalize(h, "product", (levels, nz))


# -- noise couplings and parameter derivatives --------------------------------


NOISE_CHANNELS = ("critical_current", "flux")


def build_noise_operator(params: CircuitParams, basis: BasisSpec, channel: str) -> HermitianOperator:
    """Operator G with V = G * (noise variable), acting on (theta, phi).

    ``flux``: derivative with respect to Phi_ext in GHz per flux quantum,
    ``-2 pi EJ cos(theta) sin(phi - phi_ext/2) - pi EJ dEJ sin(theta) cos(phi - phi_ext/2)``.

    ``critical_current``: derivative with respect to the fractional change
    dI_c / I_c in GHz; equals I_c times the per-ampere coupling
    ``-(Phi_0/pi) cos cos + (Phi_0 / 2 pi) dEJ sin sin``.
    """
    if channel not in NOISE_CHANNELS:
        raise UsageError(f"unknown noise channel {channel!r}; expected one of {NOISE_CHANNELS}")
    _check_dim(basis.dim_2d)
    shifted = phi_grid(basis) - math.pi * params.flux
    EJ, dEJ = params.EJ, params.dEJ
    if channel == "flux":
        g = -2 * math.pi * EJ * _kron(cos_theta(basis), sp.diags(np.sin(shifted)))
        g = g - math.pi * EJ * dEJ * _kron(sin_theta(basis), sp.diags(np.cos(shifted)))
        units = "GHz per Phi0"
    else:
        g = -2 * EJ * _kron(cos_theta(basis), sp.diags(np.cos(shifted)))
        g = g + EJ * dEJ * _kron(sin_theta(basis), sp.diags(np.sin(shifted)))
        units = "GHz per unit dIc/Ic"
    return _finalize(g.tocsr(), "theta_phi", (basis.n_theta, basis.phi_points), units, channel=channel)


def build_derivative_operator(params: CircuitParams, basis: BasisSpec, name: str) -> HermitianOperator:
    """dH_0-pi / d(name) on (theta, phi), for Hellmann-Feynman checks."""
    phi = phi_grid(basis)
    shifted = phi - math.pi * params.flux
    eye_t = sp.identity(basis.n_theta, format="csr")
    if name == "flux":
        return build_noise_operator(params, basis, "flux")
    if name == "EJ":
        g = -2 * _kron(cos_theta(basis), sp.diags(np.cos(shifted)))
        g = g + params.dEJ * _kron(sin_theta(basis), sp.diags(np.sin(shifted)))
    elif name == "EL":
        g = _kron(eye_t, sp.diags(phi**2))
    elif name == "ng_theta":
        n_shift = charge_numbers(basis) - params.ng_theta
        g = _kron(sp.diags(-4 * params.ECS * n_shift), sp.identity(basis.phi_points))
        if params.dCJ:
            g = g - 2j * params.ECS * params.dCJ * _kron(eye_t, d_phi(basis))
    else:
        raise UsageError(f"no derivative operator for {name!r}")
    return _finalize(g.tocsr(), "theta_phi", (basis.n_theta, basis.phi_points), f"GHz per {name}")


def phi_operator(basis: BasisSpec) -> sp.csr_matrix:
    return _kron(sp.identity(basis.n_theta), sp.diags(phi_grid(basis)))


def n_theta_operator(basis: BasisSpec, ng_theta: float = 0.0) -> sp.csr_matrix:
    return _kron(sp.diags(charge_numbers(basis) - ng_theta), sp.identity(basis.phi_points))


# -- offset charges -----------------------------------------------------------


@dataclass(frozen=True)
class EffectiveChargeMap:
    Cg: Optional[float]
    EC_p: float
    ECJ_p: float
    ECS_p: float
    ng_theta_eff: float
    ng_phi_eff: float
    ng_zeta_eff: float


def _primed(energy_ghz: float, Cg: Optional[float]) -> float:
    if not Cg:
        return energy_ghz
    from .constants import e, h

    capacitance = e**2 / (2 * energy_ghz * 1e9 * h)
    return e**2 / (2 * (capacitance + Cg / 2)) / h * 1e-9


def effective_offset_charges(bare, params: CircuitParams, Cg: Optional[float] = None) -> EffectiveChargeMap:
    """Map offset charges of the linearized modes to the effective charges.

    ``bare`` is a mapping with keys ``nbar_theta``, ``nbar_phi``,
    ``nbar_zeta``. Without ``Cg`` (farad) the primed charging energies equal
    the unprimed ones, i.e. renormalization is absorbed in the parameters.
    """
    nt = float(bare.get("nbar_theta", 0.0))
    nph = float(bare.get("nbar_phi", 0.0))
    nz = float(bare.get("nbar_zeta", 0.0))
    if Cg is not None and Cg < 0:
        raise DomainError("Cg must be non-negative")
    EC_p = _primed(params.EC, Cg)
    ECJ_p = _primed(params.ECJ, Cg)
    ECS_p = _primed(params.ECS, Cg)
    ng_theta = nt - 0.5 * (ECJ_p / params.ECJ) * params.dCJ * nph - 0.5 * (EC_p / params.EC) * params.dC * nz
    ng_phi = nph - 0.5 * (ECS_p / params.ECJ) * params.dCJ * nt
    ng_zeta = nz - 0.5 * (ECS_p / params.EC) * params.dC * nt
    return EffectiveChargeMap(Cg, EC_p, ECJ_p, ECS_p, ng_theta, ng_phi, ng_zeta)
