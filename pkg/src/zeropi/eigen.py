"""Lowest eigenpairs of sparse Hermitian operators.

The sparse path is a block Lanczos iteration with full reorthogonalization
and thick restarts: the basis ``V`` and its image ``W = H V`` are kept, the
Rayleigh quotient ``V^dag W`` is diagonalized when the basis is full, and
the iteration restarts from the wanted Ritz vectors plus the next Krylov
block. A block size of at least two lets near-degenerate pairs (such as the
tunnel-split 0-pi doublet) converge together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ConvergenceError, ResourceError, UsageError

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000
DEFAULT_SEED = 20240611
DEFAULT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Ascending eigenvalues (GHz) with unit-norm eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: np.ndarray
    norm_estimate: float = float("nan")

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)

    def vector(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i]

    def check(self, tol: float) -> None:
        """Assert the ordering, residual and orthonormality invariants."""
        vals = self.eigenvalues
        assert np.all(np.diff(vals) >= 0), "eigenvalues not ascending"
        bound = tol * self.norm_estimate
        assert np.all(self.residuals <= bound), f"residual {self.residuals.max():.3e} above {bound:.3e}"
        gram = self.eigenvectors.conj().T @ self.eigenvectors
        off = np.abs(gram - np.eye(len(vals))).max() if len(vals) else 0.0
        assert off < 1e-8, f"eigenvectors not orthonormal ({off:.2e})"


def _matrix(H):
    m = getattr(H, "matrix", H)
    if m.shape[0] != m.shape[1]:
        raise UsageError("operator must be square")
    return m


def norm_estimate(matrix) -> float:
    """Upper bound on the spectral norm (max absolute column sum)."""
    if sp.issparse(matrix):
        return float(abs(matrix).sum(axis=0).max())
    return float(np.abs(matrix).sum(axis=0).max())


def dense_oracle(H, limit: Optional[int] = None) -> EigenSolution:
    """Full spectrum by dense Hermitian diagonalization."""
    m = _matrix(H)
    limit = DENSE_LIMIT if limit is None else limit
    if m.shape[0] > limit:
        raise ResourceError(f"dense diagonalization limited to dim {limit}, got {m.shape[0]}")
    a = m.toarray() if sp.issparse(m) else np.asarray(m)
    a = 0.5 * (a + a.conj().T)
    vals, vecs = np.linalg.eigh(a)
    res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    return EigenSolution(vals, vecs, res, 1, np.ones(vals.size, bool), norm_estimate(a))


class _Basis:
    """Orthonormal search space V with W = H V and T = V^dag H V kept in step.

    Vectors are stored as rows so that projections need no conjugate copies
    of the whole basis.
    """

    def __init__(self, matrix, capacity: int, rng):
        n = matrix.shape[0]
        self.matrix = matrix
        self.V = np.zeros((capacity, n), complex)
        self.W = np.zeros((capacity, n), complex)
        self.T = np.zeros((capacity, capacity), complex)
        self.size = 0
        self.rng = rng

    def _project_out(self, X):
        m = self.size
        if m:
            V = self.V[:m]
            for _ in range(2):
                X = X - V.T @ (V @ X.conj()).conj()
        return X

    def extend(self, X, rank_tol: float = 1e-10) -> int:
        """Append the part of X orthogonal to the current space; return #added."""
        X = X[:, : self.V.shape[0] - self.size]
        X = self._project_out(X)
        norms = np.linalg.norm(X, axis=0)
        X = X[:, norms > 0]
        Q = X
        if X.shape[1]:
            Q, R = np.linalg.qr(X / np.linalg.norm(X, axis=0))
            Q = Q[:, np.abs(np.diag(R)) > rank_tol]
        if Q.shape[1] == 0:
            # invariant subspace reached: continue with a random direction
            Q = self.rng.standard_normal((X.shape[0], 1)) + 1j * self.rng.standard_normal((X.shape[0], 1))
        Q = self._project_out(Q)
        Q, _ = np.linalg.qr(Q)
        m, b = self.size, Q.shape[1]
        HQ = self.matrix @ Q
        self.V[m:m + b] = Q.T
        self.W[m:m + b] = HQ.T
        block = (self.V[:m + b] @ HQ.conj()).conj()
        self.T[:m + b, m:m + b] = block
        self.T[m:m + b, :m] = block[:m].conj().T
        self.size = m + b
        return b

    def ritz(self):
        T = self.T[:self.size, :self.size]
        return sla.eigh(0.5 * (T + T.conj().T))

    def ritz_pairs(self, S, cols):
        """Ritz vectors and their images under H for the given columns of S."""
        m = self.size
        C = S[:, cols]
        return self.V[:m].T @ C, self.W[:m].T @ C

    def restart(self, Y, HY, theta):
        s = Y.shape[1]
        self.V[:s] = Y.T
        self.W[:s] = HY.T
        self.T[:] = 0
        self.T[np.arange(s), np.arange(s)] = theta
        self.size = s


def lowest_eigenpairs(
    H,
    k: int,
    tol: float = DEFAULT_TOL,
    *,
    block: int = 4,
    guard: Optional[int] = None,
    basis_size: Optional[int] = None,
    max_iterations: int = 20000,
    seed: int = DEFAULT_SEED,
    dense_threshold: int = 600,
    start: Optional[np.ndarray] = None,
    preconditioner: Optional[Callable] = None,
) -> EigenSolution:
    """The ``k`` lowest eigenpairs of a Hermitian operator.

    Each step diagonalizes the projected matrix, forms the residuals
    ``H y - theta y`` of the lowest ``block`` unconverged Ritz pairs and adds
    them to the search space. Without a preconditioner the residuals span the
    next block Krylov direction, so the iteration is a thick-restart block
    Lanczos method with full reorthogonalization. A ``preconditioner(R,
    theta)`` turns it into generalized Davidson.

    ``guard`` extra Ritz pairs above the wanted ones are kept on restarts so
    that a near-degenerate pair straddling index ``k`` cannot stall the
    solve. Convergence requires ``||H v - lambda v|| < tol * ||H||_est`` for
    every returned pair, where the norm estimate is the max absolute column
    sum. Operators of dimension up to ``dense_threshold`` go to the dense
    solver. ``start`` optionally supplies initial vectors (columns).
    """
    m = _matrix(H)
    n = m.shape[0]
    if not 0 < k < n:
        raise UsageError(f"need 0 < k < dim, got k={k}, dim={n}")
    if not tol > 0:
        raise UsageError("tol must be positive")
    if n <= dense_threshold:
        full = dense_oracle(m, limit=max(dense_threshold, DENSE_LIMIT))
        return EigenSolution(
            full.eigenvalues[:k], full.eigenvectors[:, :k], full.residuals[:k], 1,
            np.ones(k, bool), full.norm_estimate,
        )

    m = sp.csr_matrix(m, dtype=complex)
    hnorm = norm_estimate(m)
    threshold = tol * hnorm
    block = max(2, int(block))
    guard = max(block, 4) if guard is None else max(int(guard), 1)
    tracked = min(k + guard, n - 1)
    if basis_size is None:
        basis_size = max(3 * tracked, tracked + 8 * block)
    basis_size = min(n, max(basis_size, tracked + block))

    rng = np.random.default_rng(seed)
    space = _Basis(m, basis_size, rng)
    X = rng.standard_normal((n, tracked)) + 1j * rng.standard_normal((n, tracked))
    if start is not None:
        start = np.asarray(start, dtype=complex).reshape(n, -1)
        X = np.hstack([start, X])[:, :tracked]
    space.extend(X)

    done = np.zeros(tracked, bool)
    iterations = 0
    while True:
        iterations += 1
        theta, S = space.ritz()
        count = min(tracked, space.size)
        open_ = [i for i in range(count) if not done[i]][:block]
        if not open_:
            # every wanted pair looked converged once; confirm all together
            cols = list(range(count))
            Y, HY = space.ritz_pairs(S, cols)
            res = np.linalg.norm(HY - Y * theta[:count], axis=0)
            done[:count] = res < threshold
            if np.all(done[:k]):
                return EigenSolution(theta[:k].copy(), Y[:, :k], res[:k], iterations, done[:k].copy(), hnorm)
            open_ = [i for i in range(count) if not done[i]][:block]
        Y, HY = space.ritz_pairs(S, open_)
        R = HY - Y * theta[open_]
        res = np.linalg.norm(R, axis=0)
        for i, r in zip(open_, res):
            done[i] = r < threshold
        active = [j for j, i in enumerate(open_) if not done[i]]
        if not active:
            continue
        if iterations >= max_iterations:
            cols = list(range(min(k, space.size)))
            Yk, HYk = space.ritz_pairs(S, cols)
            rk = np.linalg.norm(HYk - Yk * theta[cols], axis=0)
            partial = EigenSolution(theta[cols], Yk, rk, iterations, rk < threshold, hnorm)
            raise ConvergenceError(
                f"eigensolver did not converge in {iterations} iterations "
                f"(max residual {rk.max():.3e}, target {threshold:.3e})",
                partial,
            )
        X = R[:, active]
        if preconditioner is not None:
            X = preconditioner(X, theta[[open_[j] for j in active]])
        if space.size + X.shape[1] > basis_size:
            keep = list(range(min(tracked + block, space.size)))
            Yk, HYk = space.ritz_pairs(S, keep)
            space.restart(Yk, HYk, theta[keep])
        space.extend(X)


def shifted_inverse(matrix, sigma: float):
    """Preconditioner applying ``(H - sigma)^-1`` through a sparse LU factorization.

    Used as a preconditioner only: the eigenvalues still come from
    Rayleigh-Ritz on ``H`` itself, so an approximate or stale factorization
    slows convergence but does not bias the result.
    """
    import scipy.sparse.linalg as spla

    m = sp.csc_matrix(_matrix(matrix), dtype=complex)
    lu = spla.splu(m - sigma * sp.identity(m.shape[0], format="csc", dtype=complex))

    def apply(R, theta=None):
        return lu.solve(np.ascontiguousarray(R))

    return apply
