"""Spectra of the 0-pi circuit: solves, sweeps, dressed-state labels, derivatives."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import GHZ_TO_RAD_S
from .dispersive import coupling_matrix
from .eigen import (
    DEFAULT_SEED,
    DEFAULT_TOL,
    EigenSolution,
    dense_oracle,
    lowest_eigenpairs,
    shifted_inverse,
)
from .errors import (
    ConvergenceError,
    HybridizationWarning,
    LabelingError,
    TruncationWarning,
    UsageError,
)
from .operators import build_h_2d, build_h_3d, build_h_product
from .params import BasisSpec, CircuitParams

log = logging.getLogger(__name__)

DEFAULT_LEVELS = 15
HYBRID_THRESHOLD = 0.5
TRACK_THRESHOLD = 0.8
SWEEP_PARAMETERS = ("flux", "ng_theta", "EJ", "EL")
# Absolute steps for flux and offset charge, relative ones for energies.
DEFAULT_STEPS = {"flux": 1e-3, "ng_theta": 1e-3, "EJ": 1e-4, "EL": 1e-4}
RELATIVE_STEP = {"EJ", "EL"}


def josephson_floor(params: CircuitParams) -> float:
    """Lower bound on the 2D spectrum (kinetic and inductive parts are >= 0)."""
    return -params.EJ * math.sqrt(4.0 + params.dEJ**2)


class SpectrumSolver:
    """Lowest 2D eigenpairs on a fixed basis, with optional warm starts.

    The sparse solve is preconditioned by a sparse LU of ``H - sigma`` where
    ``sigma`` sits just below the ground state: a quick coarse solve,
    preconditioned at a rigorous lower bound, locates it. A warm solve reuses
    the previous factorization and eigenvectors, which suits nearby
    parameter points such as finite-difference stencils.
    """

    def __init__(self, basis: BasisSpec, k: int = DEFAULT_LEVELS, tol: float = DEFAULT_TOL,
                 seed: int = DEFAULT_SEED):
        self.basis = basis
        self.k = k
        self.tol = tol
        self.seed = seed
        self._precond = None
        self._vectors = None

    def _fresh_preconditioner(self, H, params: CircuitParams):
        coarse_pre = shifted_inverse(H, josephson_floor(params) - 1.0)
        coarse = lowest_eigenpairs(H, 1, 1e-6, preconditioner=coarse_pre, block=2, guard=1,
                                   seed=self.seed, dense_threshold=0)
        sigma = float(coarse.eigenvalues[0]) - 0.5
        return shifted_inverse(H, sigma), coarse.eigenvectors

    def solve(self, params: CircuitParams, warm: bool = False) -> EigenSolution:
        H = build_h_2d(params, self.basis)
        if H.dim <= 600:
            sol = lowest_eigenpairs(H, self.k, self.tol, seed=self.seed)
            self._vectors = sol.eigenvectors
            return sol
        if warm and self._precond is not None:
            pre, start = self._precond, self._vectors
        else:
            pre, start = self._fresh_preconditioner(H, params)
        sol = lowest_eigenpairs(H, self.k, self.tol, preconditioner=pre, start=start,
                                seed=self.seed, dense_threshold=0)
        self._precond = pre
        self._vectors = sol.eigenvectors
        return sol


def solve_2d(params: CircuitParams, basis: BasisSpec, k: int = DEFAULT_LEVELS,
             tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED) -> EigenSolution:
    return SpectrumSolver(basis, k, tol, seed).solve(params)


def solve_3d(params: CircuitParams, basis: BasisSpec, k: int, tol: float = DEFAULT_TOL,
             seed: int = DEFAULT_SEED) -> EigenSolution:
    """Lowest eigenpairs of the full (theta, phi, zeta) grid Hamiltonian."""
    H = build_h_3d(params, basis)
    if H.dim <= 600:
        return lowest_eigenpairs(H, k, tol, seed=seed)
    pre = shifted_inverse(H, josephson_floor(params) - 1.0)
    return lowest_eigenpairs(H, k, tol, preconditioner=pre, seed=seed, dense_threshold=0)


# -- labels -------------------------------------------------------------------


@dataclass
class LabeledSpectrum:
    """Dressed energies with their (l, n) labels, sorted by energy."""

    energies: np.ndarray
    labels: list
    overlaps: np.ndarray
    hybridized: np.ndarray
    threshold: float = HYBRID_THRESHOLD
    vectors: Optional[np.ndarray] = None
    shape: tuple = ()
    warnings: list = field(default_factory=list)

    def index_of(self, l: int, n: int) -> int:
        try:
            return self.labels.index((l, n))
        except ValueError:
            raise LabelingError(f"no state labeled ({l}, {n})") from None

    def energy(self, l: int, n: int) -> float:
        return float(self.energies[self.index_of(l, n)])

    def state(self, l: int, n: int) -> np.ndarray:
        return self.vectors[:, self.index_of(l, n)]

    def has(self, l: int, n: int) -> bool:
        return (l, n) in self.labels


def product_weights(sol3d: EigenSolution, sol2d: EigenSolution, n_zeta_max: int) -> np.ndarray:
    """``|<l, n|psi>|^2`` with shape (states, levels, n_zeta_max + 1).

    The 3D vectors may live either on the full (theta, phi, zeta) grid or in
    the product basis of ``sol2d`` eigenstates and Fock states.
    """
    nz = n_zeta_max + 1
    psi = sol3d.eigenvectors
    levels = sol2d.k
    dim2 = sol2d.eigenvectors.shape[0]
    if psi.shape[0] == levels * nz:
        amp = psi.T.reshape(-1, levels, nz)
    elif psi.shape[0] == dim2 * nz:
        blocks = psi.T.reshape(-1, dim2, nz)
        amp = np.einsum("xl,sxn->sln", sol2d.eigenvectors.conj(), blocks, optimize=True)
    else:
        raise UsageError("3D eigenvectors match neither the product basis nor the full grid")
    return np.abs(amp) ** 2


def label_dressed(sol3d: EigenSolution, sol2d: EigenSolution, n_zeta_max: int, *,
                  threshold: float = HYBRID_THRESHOLD, strict: bool = True) -> LabeledSpectrum:
    """Assign each dressed state the bare product label of maximal overlap.

    Ties go to the lexicographically smallest ``(l, n)``. Duplicate labels
    raise :class:`LabelingError` when ``strict``; otherwise they are resolved
    by a maximum-total-overlap assignment and reported as warnings.
    """
    weights = product_weights(sol3d, sol2d, n_zeta_max)
    states, levels, nz = weights.shape
    flat = weights.reshape(states, levels * nz)
    best = np.argmax(flat, axis=1)  # first maximum = smallest (l, n) in row-major order
    labels = [divmod(int(b), nz) for b in best]
    overlaps = flat[np.arange(states), best]
    notes = []

    seen = {}
    conflicts = []
    for i, lab in enumerate(labels):
        if lab in seen:
            conflicts.append((lab, seen[lab], i))
        else:
            seen[lab] = i
    if conflicts:
        msg = "duplicate dressed-state labels: " + ", ".join(
            f"{lab} for states {a} and {b}" for lab, a, b in conflicts)
        if strict:
            raise LabelingError(msg, conflicts)
        rows, cols = linear_sum_assignment(-flat)
        labels = [divmod(int(c), nz) for c in cols[np.argsort(rows)]]
        overlaps = flat[np.arange(states), cols[np.argsort(rows)]]
        notes.append(msg + " (resolved by optimal assignment)")
        warnings.warn(notes[-1], HybridizationWarning, stacklevel=2)

    hybrid = overlaps < threshold
    if np.any(hybrid):
        msg = f"{int(hybrid.sum())} dressed states have maximal overlap below {threshold}"
        notes.append(msg)
        warnings.warn(msg, HybridizationWarning, stacklevel=2)
    return LabeledSpectrum(np.asarray(sol3d.eigenvalues, float).copy(), labels, overlaps, hybrid,
                           threshold, sol3d.eigenvectors, (levels, nz), notes)


# -- dressed spectrum in the product basis --------------------------------------


def thermal_cutoff(n_th: float, floor: float = 1e-6) -> int:
    """Largest Fock number with thermal weight P(n) >= floor."""
    if n_th <= 0:
        return 0
    ratio = n_th / (1.0 + n_th)
    # P(n) = (1 - ratio) ratio^n
    return max(0, int(math.floor(math.log(floor / (1 - ratio)) / math.log(ratio))))


@dataclass
class DressedSpectrum:
    sol2d: EigenSolution
    g: np.ndarray
    solution: EigenSolution
    labels: LabeledSpectrum
    n_zeta_max: int
    levels: int


def solve_dressed(params: CircuitParams, basis: BasisSpec, *, levels: int = DEFAULT_LEVELS,
                  n_zeta_max: Optional[int] = None, sol2d: Optional[EigenSolution] = None,
                  strict: bool = False, threshold: float = HYBRID_THRESHOLD) -> DressedSpectrum:
    """Qubit-zeta spectrum in the product basis of 2D eigenstates and Fock states.

    The default Fock cutoff covers every state with thermal weight of at
    least 1e-6 plus a margin of ten quanta.
    """
    from .decoherence import thermal_occupation

    if sol2d is None:
        sol2d = solve_2d(params, basis, levels)
    if n_zeta_max is None:
        n_zeta_max = thermal_cutoff(thermal_occupation(params.Omega_zeta, params.temperature)) + 10
    g = coupling_matrix(sol2d, params, basis, levels)
    H = build_h_product(sol2d.eigenvalues[:levels], g, params.Omega_zeta, n_zeta_max)
    full = dense_oracle(H)
    sub = EigenSolution(sol2d.eigenvalues[:levels], sol2d.eigenvectors[:, :levels],
                        sol2d.residuals[:levels], sol2d.iterations, sol2d.converged[:levels],
                        sol2d.norm_estimate)
    labels = label_dressed(full, sub, n_zeta_max, threshold=threshold, strict=strict)
    return DressedSpectrum(sol2d, g, full, labels, n_zeta_max, levels)


# -- sweeps -------------------------------------------------------------------


@dataclass
class DispersionCurve:
    """Tracked energies along a one-parameter sweep.

    ``d1``/``d2`` are the first and second derivatives of the qubit angular
    frequency ``2 pi (E1 - E0)`` along the grid, in rad/s per unit parameter.
    """

    parameter: str
    grid: np.ndarray
    energies: np.ndarray
    failed: np.ndarray
    track_overlap: np.ndarray
    anticrossing: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    warnings: list = field(default_factory=list)


def _point_params(params: CircuitParams, parameter: str, value: float) -> CircuitParams:
    return replace(params, **{parameter: float(value)})


def _solve_point(task):
    params, basis, k, tol, seed = task
    try:
        sol = SpectrumSolver(basis, k, tol, seed).solve(params)
        return sol.eigenvalues, sol.eigenvectors, None
    except ConvergenceError as exc:
        return None, None, str(exc)


def run_tasks(func, tasks, workers: int = 1):
    """Map ``func`` over ``tasks`` in order, in a process pool when workers > 1."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def track_levels(vectors: Sequence[Optional[np.ndarray]]):
    """Order levels at each point by eigenvector overlap with the previous point.

    Returns permutations (one per point) and the overlap of each tracked
    level with its predecessor.
    """
    perms = []
    overlaps = []
    prev = None
    for V in vectors:
        if V is None:
            perms.append(None)
            overlaps.append(None)
            continue
        k = V.shape[1]
        if prev is None:
            perm = np.arange(k)
            ov = np.ones(k)
        else:
            O = np.abs(prev.conj().T @ V) ** 2
            rows, cols = linear_sum_assignment(-O)
            perm = cols[np.argsort(rows)]
            ov = O[np.arange(k), perm]
        perms.append(perm)
        overlaps.append(ov)
        prev = V[:, perm]
    return perms, overlaps


def sweep(params: CircuitParams, basis: BasisSpec, parameter: str, grid, k: int = DEFAULT_LEVELS,
          *, workers: int = 1, tol: float = DEFAULT_TOL, seed: int = DEFAULT_SEED,
          max_failed_fraction: float = 0.1) -> DispersionCurve:
    """Solve the 2D problem at each grid value and track levels by overlap."""
    if parameter not in SWEEP_PARAMETERS:
        raise UsageError(f"cannot sweep {parameter!r}; choose one of {SWEEP_PARAMETERS}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise UsageError("sweep grid must be strictly increasing")
    tasks = [(_point_params(params, parameter, v), basis, k, tol, seed) for v in grid]
    results = run_tasks(_solve_point, tasks, workers)
    failed = np.array([r[0] is None for r in results])
    notes = [f"point {i} ({parameter}={grid[i]:.6g}) failed: {r[2]}" for i, r in enumerate(results) if r[0] is None]
    if failed.mean() > max_failed_fraction:
        raise ConvergenceError(f"{int(failed.sum())} of {grid.size} sweep points failed", notes)
    for msg in notes:
        warnings.warn(msg, TruncationWarning, stacklevel=2)

    perms, ovs = track_levels([r[1] for r in results])
    energies = np.full((grid.size, k), np.nan)
    track = np.full((grid.size, k), np.nan)
    for i, (r, perm, ov) in enumerate(zip(results, perms, ovs)):
        if perm is not None:
            energies[i] = r[0][perm]
            track[i] = ov
    anticross = track < TRACK_THRESHOLD

    omega = GHZ_TO_RAD_S * (energies[:, 1] - energies[:, 0]) if k > 1 else np.zeros(grid.size)
    if grid.size >= 3:
        d1 = np.gradient(omega, grid)
        d2 = np.gradient(d1, grid)
    else:
        d1 = np.full(grid.size, np.nan)
        d2 = np.full(grid.size, np.nan)
    return DispersionCurve(parameter, grid, energies, failed, track, anticross, d1, d2, notes)


# -- derivatives --------------------------------------------------------------


@dataclass(frozen=True)
class Derivatives:
    """First and second derivatives of the qubit angular frequency (rad/s per unit)."""

    d1: float
    d2: float
    d1_error: float
    d2_error: float
    step: float

    def __iter__(self):
        yield self.d1
        yield self.d2


def default_step(params: CircuitParams, parameter: str) -> float:
    base = DEFAULT_STEPS[parameter]
    return base * abs(getattr(params, parameter)) if parameter in RELATIVE_STEP else base


def richardson_derivatives(f: Callable[[float], float], x0: float, step: float,
                           noise: float = 0.0) -> Derivatives:
    """Central differences at ``step`` and ``step/2`` plus one Richardson refinement.

    The error estimates combine the Richardson difference with the
    propagation of an absolute noise level ``noise`` in ``f``.
    """
    f0 = f(x0)
    fp, fm = f(x0 + step), f(x0 - step)
    hp, hm = f(x0 + step / 2), f(x0 - step / 2)
    d1_h = (fp - fm) / (2 * step)
    d1_h2 = (hp - hm) / step
    d2_h = (fp - 2 * f0 + fm) / step**2
    d2_h2 = (hp - 2 * f0 + hm) / (step / 2) ** 2
    d1 = (4 * d1_h2 - d1_h) / 3
    d2 = (4 * d2_h2 - d2_h) / 3
    # worst-case propagation of +-noise through the refined stencils
    floor1 = noise * (4 * 2 / step + 2 / (2 * step)) / 3
    floor2 = noise * (4 * 4 * 4 / step**2 + 4 / step**2) / 3
    return Derivatives(d1, d2, abs(d1_h2 - d1_h) / 3 + floor1, abs(d2_h2 - d2_h) / 3 + floor2, step)


def energy_derivatives(params: CircuitParams, basis: BasisSpec, parameter: str, order: int = 2,
                       step: Optional[float] = None, *, levels: tuple = (0, 1),
                       frequency: Optional[Callable[[CircuitParams], float]] = None,
                       solver: Optional[SpectrumSolver] = None) -> Derivatives:
    """Derivatives of ``omega = 2 pi (E_b - E_a)`` with respect to a circuit parameter.

    ``frequency`` replaces the eigensolve by any callable returning omega in
    rad/s (useful for stubs and tests). ``order`` 1 skips nothing but is
    accepted for symmetry with the second-order formula; both derivatives
    are always returned.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise UsageError(f"no derivative for parameter {parameter!r}")
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    step = default_step(params, parameter) if step is None else float(step)
    if not step > 0:
        raise UsageError("derivative step must be positive")
    a, b = levels

    noise = 0.0
    if frequency is None:
        solver = solver or SpectrumSolver(basis, max(max(levels) + 1, 2))
        base = solver.solve(params)
        # Rayleigh-Ritz values carry round-off of order eps * ||H||.
        noise = 2 * GHZ_TO_RAD_S * 8 * np.finfo(float).eps * base.norm_estimate
        base_pre, base_vec = solver._precond, solver._vectors

        def frequency(p):
            if p is params:
                sol = base
            else:
                solver._precond, solver._vectors = base_pre, base_vec
                sol = solver.solve(p, warm=True)
            values = sol.eigenvalues
            if not np.all(np.isfinite(values)):
                raise ConvergenceError("non-finite eigenvalues")
            return GHZ_TO_RAD_S * (values[b] - values[a])

    x0 = float(getattr(params, parameter))

    def f(x):
        return frequency(params if x == x0 else _point_params(params, parameter, x))

    return richardson_derivatives(f, x0, step, noise)


# -- basis convergence ----------------------------------------------------------


@dataclass
class ConvergenceReport:
    baseline: np.ndarray
    shifts: dict
    threshold: float

    @property
    def passed(self) -> bool:
        return all(v < self.threshold for v in self.shifts.values())

    def lines(self):
        out = []
        for name, shift in self.shifts.items():
            status = "PASS" if shift < self.threshold else "FAIL"
            out.append(f"{status} doubling {name}: max shift of lowest levels {shift:.3e} GHz")
        return out


def basis_convergence(params: CircuitParams, basis: BasisSpec, *, levels: int = 10,
                      threshold: float = 1e-6, cutoffs: Sequence[str] = ("n_theta_max", "phi_points"),
                      baseline: Optional[EigenSolution] = None) -> ConvergenceReport:
    """Shift of the lowest ``levels`` energies when each cutoff is doubled.

    ``phi_points`` doubling halves the grid step on the same interval;
    ``phi_max`` doubling widens the interval at fixed step.
    """
    base = baseline if baseline is not None else solve_2d(params, basis, levels)
    ref = base.eigenvalues[:levels]
    shifts = {}
    for name in cutoffs:
        if name == "n_theta_max":
            bigger = replace(basis, n_theta_max=2 * basis.n_theta_max)
        elif name == "phi_points":
            bigger = replace(basis, phi_points=2 * basis.phi_points - 1)
        elif name == "phi_max":
            bigger = replace(basis, phi_max=2 * basis.phi_max, phi_points=2 * basis.phi_points - 1)
        else:
            raise UsageError(f"unknown cutoff {name!r}")
        sol = solve_2d(params, bigger, levels)
        shifts[name] = float(np.max(np.abs(sol.eigenvalues[:levels] - ref)))
    report = ConvergenceReport(ref, shifts, threshold)
    if not report.passed:
        warnings.warn("basis not converged: " + "; ".join(report.lines()), TruncationWarning, stacklevel=2)
    return report
