import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from zeropi.eigen import dense_oracle, lowest_eigenpairs, norm_estimate, shifted_inverse
from zeropi.errors import ConvergenceError, ResourceError, UsageError
from zeropi.operators import build_h_2d
from zeropi.params import BasisSpec, parameter_set


def random_sparse_hermitian(n, density, seed):
    rng = np.random.default_rng(seed)
    a = sp.random(n, n, density=density, random_state=rng, format="csr")
    b = sp.random(n, n, density=density, random_state=rng, format="csr")
    m = a + 1j * b
    return (m + m.conj().T).tocsr() + sp.diags(rng.standard_normal(n))


def test_identity_k3():
    sol = lowest_eigenpairs(sp.identity(50, format="csr"), 3, dense_threshold=0)
    np.testing.assert_allclose(sol.eigenvalues, [1, 1, 1], atol=1e-12)
    np.testing.assert_allclose(sol.eigenvectors.conj().T @ sol.eigenvectors, np.eye(3), atol=1e-10)


def test_pauli_x_dense():
    sol = dense_oracle(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(sol.eigenvalues, [-1.0, 1.0], atol=1e-15)


def test_harmonic_oscillator_gaps():
    # -2 EC d^2/dz^2 + EL z^2 with a plain three-point Laplacian
    EC, EL = 0.04, 0.04
    z = np.linspace(-12, 12, 2401)
    dz = z[1] - z[0]
    lap = sp.diags([np.ones(z.size - 1), -2 * np.ones(z.size), np.ones(z.size - 1)], [-1, 0, 1]) / dz**2
    H = (-2 * EC * lap + sp.diags(EL * z**2)).tocsr()
    pre = shifted_inverse(H, -0.1)
    sol = lowest_eigenpairs(H, 5, preconditioner=pre, dense_threshold=0)
    np.testing.assert_allclose(np.diff(sol.eigenvalues), math.sqrt(8 * EC * EL), rtol=1e-4)


@pytest.mark.parametrize("seed", [1, 2])
def test_random_sparse_matches_dense(seed):
    H = random_sparse_hermitian(500, 0.01, seed)
    sol = lowest_eigenpairs(H, 8, dense_threshold=0)
    ref = np.linalg.eigvalsh(H.toarray())[:8]
    np.testing.assert_allclose(sol.eigenvalues, ref, rtol=1e-9, atol=1e-12)
    sol.check(1e-12)


def test_physical_operator_sparse_vs_dense():
    p = parameter_set("PS2")
    b = BasisSpec(n_theta_max=4, phi_points=201, phi_max=18.0)
    H = build_h_2d(p, b)
    assert H.dim <= 2000
    sparse = lowest_eigenpairs(H, 10, preconditioner=shifted_inverse(H, -25.0), dense_threshold=0)
    dense = dense_oracle(H).eigenvalues[:10]
    np.testing.assert_allclose(sparse.eigenvalues, dense, rtol=1e-9)

    # the unpreconditioned (block Lanczos) path on a smaller grid
    small = build_h_2d(p, BasisSpec(n_theta_max=3, phi_points=101, phi_max=18.0))
    plain = lowest_eigenpairs(small, 4, dense_threshold=0)
    np.testing.assert_allclose(plain.eigenvalues, dense_oracle(small).eigenvalues[:4], rtol=1e-9)


def test_residual_bound_and_orthonormality():
    H = random_sparse_hermitian(800, 0.005, 7)
    sol = lowest_eigenpairs(H, 6, tol=1e-11, dense_threshold=0)
    assert np.all(sol.residuals <= 1e-11 * norm_estimate(H))
    r = np.linalg.norm(H @ sol.eigenvectors - sol.eigenvectors * sol.eigenvalues, axis=0)
    assert np.all(r <= 1e-11 * norm_estimate(H) * 1.01)


def test_nonconvergence_carries_partial_result():
    H = random_sparse_hermitian(600, 0.01, 3)
    with pytest.raises(ConvergenceError) as info:
        lowest_eigenpairs(H, 5, max_iterations=2, dense_threshold=0)
    assert info.value.partial is not None and info.value.partial.eigenvalues.size == 5


def test_argument_errors():
    with pytest.raises(UsageError):
        lowest_eigenpairs(sp.identity(5, format="csr"), 5)
    with pytest.raises(ResourceError):
        dense_oracle(sp.identity(10, format="csr"), limit=5)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), eps=st.floats(1e-6, 1.0))
def test_weyl_bound(seed, eps):
    H = random_sparse_hermitian(300, 0.02, seed)
    rng = np.random.default_rng(seed + 1)
    D = sp.diags(rng.uniform(-1, 1, 300))
    a = lowest_eigenpairs(H, 4, dense_threshold=0).eigenvalues
    b = lowest_eigenpairs(H + eps * D, 4, dense_threshold=0).eigenvalues
    assert np.all(np.abs(b - a) <= eps * (1 + 1e-9) + 1e-10)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 6))
def test_sparse_agrees_with_dense_on_random_operators(seed, k):
    H = random_sparse_hermitian(250, 0.03, seed)
    sol = lowest_eigenpairs(H, k, dense_threshold=0)
    ref = dense_oracle(H).eigenvalues[:k]
    np.testing.assert_allclose(sol.eigenvalues, ref, rtol=1e-9, atol=1e-11)
