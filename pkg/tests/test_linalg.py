import numpy as np
import pytest

from sde_identify import linalg
from sde_identify.errors import DimensionMismatch, NotHurwitz


def random_hurwitz(rng, n, margin=0.1):
    M = rng.normal(size=(n, n)) / np.sqrt(n)
    return M - (np.max(np.real(np.linalg.eigvals(M))) + margin) * np.eye(n)


def lyapunov_eig_oracle(L, Q):
    """Independent solution via eigendecomposition:
    omega = V X V^H with X_ij = -(V^-1 Q V^-H)_ij / (lam_i + conj(lam_j))."""
    lam, V = np.linalg.eig(L)
    Vi = np.linalg.inv(V)
    Qt = Vi @ Q @ Vi.conj().T
    X = -Qt / (lam[:, None] + lam[None, :].conj())
    return np.real(V @ X @ V.conj().T)


def test_matches_eigendecomposition_oracle():
    rng = np.random.default_rng(0)
    for n in (3, 7, 15):
        L = random_hurwitz(rng, n)
        Q = rng.normal(size=(n, n))
        Q = Q @ Q.T + np.eye(n)
        w = linalg.solve_lyapunov(L, Q)
        w_oracle = lyapunov_eig_oracle(L, Q)
        assert np.linalg.norm(w - w_oracle) <= 1e-9 * np.linalg.norm(Q)


def test_residual_property_many_instances():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 30))
        L = random_hurwitz(rng, n)
        Q = rng.normal(size=(n, n))
        Q = Q + Q.T
        w = linalg.solve_lyapunov(L, Q)
        resid = np.linalg.norm(L @ w + w @ L.T + Q)
        assert resid <= 1e-8 * max(1.0, np.linalg.norm(Q))
        assert np.allclose(w, w.T)


def test_rejects_non_hurwitz():
    with pytest.raises(NotHurwitz):
        linalg.solve_lyapunov(np.eye(3), np.eye(3))
    # marginal case: zero eigenvalue
    L = np.diag([-1.0, 0.0])
    with pytest.raises(NotHurwitz):
        linalg.solve_lyapunov(L, np.eye(2))


def test_ou_closed_form():
    # L = -a I gives omega = Q / (2a) for symmetric Q
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    w = linalg.solve_lyapunov(-3.0 * np.eye(2), Q)
    assert np.allclose(w, Q / 6.0)


def test_range_projector_idempotent_symmetric():
    rng = np.random.default_rng(2)
    M = rng.normal(size=(6, 2))
    P = linalg.range_projector(M)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(P, P.T)
    assert np.allclose(P @ M, M)
    assert np.isclose(np.trace(P), 2.0)


def test_range_projector_ignores_tiny_directions():
    M = np.diag([1.0, 1e-13])[:, :2]
    P = linalg.range_projector(M)
    assert np.isclose(np.trace(P), 1.0)


def test_null_space_basis():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(5, 3))
    M = X @ rng.normal(size=(3, 5))  # rank 3, null dim 2
    Z = linalg.null_space_basis(M, expected_dim=2)
    assert Z.shape == (5, 2)
    assert np.linalg.norm(M @ Z) < 1e-10
    assert np.allclose(Z.T @ Z, np.eye(2), atol=1e-12)
    with pytest.raises(DimensionMismatch):
        linalg.null_space_basis(M, expected_dim=3)


def test_spectral_norm_vs_power_iteration():
    rng = np.random.default_rng(4)
    M = rng.normal(size=(7, 4))
    v = rng.normal(size=4)
    for _ in range(500):
        v = M.T @ (M @ v)
        v /= np.linalg.norm(v)
    s_pow = np.linalg.norm(M @ v)
    assert np.isclose(linalg.spectral_norm(M), s_pow, rtol=1e-10)


def test_pinv_moore_penrose_identities():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(6, 3)) @ rng.normal(size=(3, 5))
    P = linalg.pinv(M)
    assert np.allclose(M @ P @ M, M, atol=1e-10)
    assert np.allclose(P @ M @ P, P, atol=1e-10)


def test_sym():
    M = np.array([[1.0, 2.0], [0.0, 3.0]])
    assert np.allclose(linalg.sym(M), [[1.0, 1.0], [1.0, 3.0]])
