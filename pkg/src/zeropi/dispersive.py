"""Qubit-zeta couplings, detunings, ac Stark shifts and Lamb shifts.

In the product basis of 2D eigenstates ``|l>`` and zeta Fock states the
interaction reads ``sum_{l,l'} g_ll' |l><l'| a + h.c.`` with

    g_ll' = c_phi <l|phi|l'> + i c_theta <l|n_theta - ng|l'>,
    c_phi = EL dEL (8 EC / EL)^(1/4) / 2,
    c_theta = ECS dC (2 EL / EC)^(1/4).

Second-order perturbation theory for ``|l, n>`` then gives the energy
``E_l + n Omega + Lambda_l + n chi_l`` with

    chi_l    = sum_l' |g_ll'|^2 / Delta_ll' - |g_l'l|^2 / Delta_l'l,
    Lambda_l = sum_l' |g_ll'|^2 / Delta_ll',     Delta_ll' = E_l - E_l' - Omega.

``|g_ll'|`` and ``|g_l'l|`` differ once both disorder channels are active,
so the two magnitudes are kept separate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DispersiveWarning, ResonanceError, TruncationWarning, UsageError
from .operators import charge_numbers, phi_grid
from .params import BasisSpec, CircuitParams

log = logging.getLogger(__name__)

DEFAULT_LEVELS = 15
WARN_RATIO = 0.2
EXCLUDE_RATIO = 0.5
RESONANCE_FLOOR = 1e-9
TRUNCATION_EXTRA = 5
TRUNCATION_TOL = 0.01


def coupling_prefactors(params: CircuitParams) -> tuple:
    """``(c_phi, c_theta)`` in GHz."""
    c_phi = 0.5 * params.EL * params.dEL * (8 * params.EC / params.EL) ** 0.25
    c_theta = params.ECS * params.dC * (2 * params.EL / params.EC) ** 0.25
    return c_phi, c_theta


def level_matrix_elements(sol2d, basis: BasisSpec, levels: int, ng_theta: float = 0.0):
    """``<l|phi|l'>`` and ``<l|n_theta - ng|l'>`` over the lowest ``levels`` states."""
    if levels > sol2d.k:
        raise UsageError(f"requested {levels} levels but only {sol2d.k} eigenpairs are available")
    U = sol2d.eigenvectors[:, :levels].reshape(basis.n_theta, basis.phi_points, levels)
    phi = phi_grid(basis)
    charge = charge_numbers(basis) - ng_theta
    Uc = U.conj()
    phi_me = np.einsum("tpa,p,tpb->ab", Uc, phi, U, optimize=True)
    n_me = np.einsum("tpa,t,tpb->ab", Uc, charge, U, optimize=True)
    return phi_me, n_me


def coupling_matrix(sol2d, params: CircuitParams, basis: BasisSpec, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Complex coupling matrix ``g`` (GHz) between the lowest 2D eigenstates."""
    phi_me, n_me = level_matrix_elements(sol2d, basis, levels, params.ng_theta)
    c_phi, c_theta = coupling_prefactors(params)
    return c_phi * phi_me + 1j * c_theta * n_me


@dataclass
class DispersiveReport:
    g: np.ndarray
    Delta: np.ndarray
    chi: np.ndarray
    Lambda: np.ndarray
    chi01: float
    max_g_over_Delta: float
    excluded: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ratio(self) -> np.ndarray:
        """|g_ll' / Delta_ll'| for every pair."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.g) / np.abs(self.Delta)


def detunings(energies2d, Omega_zeta: float) -> np.ndarray:
    E = np.asarray(energies2d, dtype=float)
    return E[:, None] - E[None, :] - Omega_zeta


def stark_lamb(
    g,
    energies2d,
    Omega_zeta: float,
    levels: int | None = None,
    *,
    warn_ratio: float = WARN_RATIO,
    exclude_ratio: float = EXCLUDE_RATIO,
    qubit_levels: tuple = (0, 1),
) -> DispersiveReport:
    """Second-order ac Stark (``chi``) and Lamb (``Lambda``) shifts, all in GHz.

    Terms with ``|g/Delta| > exclude_ratio`` are dropped from the sums and
    listed in ``excluded``. ``max_g_over_Delta`` is taken over the remaining
    terms entering the shifts of ``qubit_levels``.
    """
    g = np.asarray(g, dtype=complex)
    E = np.asarray(energies2d, dtype=float)
    L = g.shape[0] if levels is None else int(levels)
    if g.shape[0] < L or g.shape[1] < L or E.size < L:
        raise UsageError("levels exceeds the size of g or energies2d")
    g = g[:L, :L]
    E = E[:L]
    Delta = detunings(E, Omega_zeta)
    g2 = np.abs(g) ** 2

    contributing = g2 > 0
    tiny = contributing & (np.abs(Delta) < RESONANCE_FLOOR)
    if np.any(tiny):
        l, lp = map(int, np.argwhere(tiny)[0])
        raise ResonanceError(f"levels {l} and {lp} are resonant with the zeta mode", (l, lp))

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(contributing, np.sqrt(g2) / np.abs(Delta), 0.0)
        term = np.where(contributing, g2 / Delta, 0.0)
    keep = ratio <= exclude_ratio
    qubit = [q for q in qubit_levels if q < L]
    excluded = [(int(a), int(b), float(ratio[a, b])) for a, b in np.argwhere(~keep)]
    term_kept = np.where(keep, term, 0.0)

    Lambda = term_kept.sum(axis=1)
    # chi_l = sum_l' term[l, l'] - term[l', l]
    chi = term_kept.sum(axis=1) - term_kept.sum(axis=0)

    relevant = np.zeros_like(keep)
    relevant[qubit, :] = True
    relevant[:, qubit] = True
    used = relevant & keep
    max_ratio = float(ratio[used].max()) if np.any(used) else 0.0

    notes = []
    if excluded:
        msg = "excluded near-resonant pairs from dispersive sums: " + ", ".join(
            f"({a},{b}) |g/Delta|={r:.3g}" for a, b, r in excluded
        )
        log.info(msg)
        notes.append(msg)
        if any(a in qubit or b in qubit for a, b, _ in excluded):
            warnings.warn(msg, DispersiveWarning, stacklevel=2)
    if max_ratio > warn_ratio:
        msg = f"max |g/Delta| = {max_ratio:.3g} exceeds {warn_ratio} for the qubit levels"
        notes.append(msg)
        warnings.warn(msg, DispersiveWarning, stacklevel=2)
    chi01 = 0.5 * (chi[1] - chi[0]) if L > 1 else 0.0
    return DispersiveReport(g, Delta, chi, Lambda, float(chi01), max_ratio, excluded, notes)


def truncation_change(g, energies2d, Omega_zeta: float, levels: int, extra: int = TRUNCATION_EXTRA,
                      tol: float = TRUNCATION_TOL) -> float:
    """Relative change of chi01 when the level sum grows from ``levels`` to ``levels + extra``.

    ``g`` and ``energies2d`` must cover the larger count. Warns when the
    change exceeds ``tol``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DispersiveWarning)
        base = stark_lamb(g, energies2d, Omega_zeta, levels).chi01
        more = stark_lamb(g, energies2d, Omega_zeta, levels + extra).chi01
    if base == more:
        return 0.0
    change = abs(more - base) / max(abs(more), abs(base))
    if change > tol:
        warnings.warn(f"chi01 changes by {100 * change:.2g}% when the level sum grows from {levels} "
                      f"to {levels + extra}", TruncationWarning, stacklevel=2)
    return change
