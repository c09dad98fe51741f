import numpy as np
import pytest

from sde_identify import linalg
from sde_identify.errors import (DegenerateSpectrum, DimensionMismatch,
                                 InvalidParam, RankDeficient)
from sde_identify.experiments import make_nonlinear_instance
from sde_identify.fit import align_up_to_perm_scale
from sde_identify.identify import (Certificate, MomentOracle,
                                   counterexample_linear_adversarial,
                                   counterexample_linear_lower,
                                   counterexample_ode, low_rank_game,
                                   recover_linear_closedform,
                                   recover_nonlinear_closedform)
from sde_identify.models import NonlinearDrift, make_activation


# ----------------------------------------------------------------------
# certificate plumbing


def test_certificate_text_and_passed():
    c = Certificate(kind="demo")
    c.add("small enough", 1e-12, 1e-9)
    c.add("big enough", 0.5, 0.1, larger=True)
    assert c.passed
    txt = c.to_text()
    assert "[PASS]" in txt and "[FAIL]" not in txt
    c.add("too big", 1.0, 1e-9)
    assert not c.passed
    assert "[FAIL]" in c.to_text()


# ----------------------------------------------------------------------
# linear closed form


def _linear_truth(seed, n=8, r=3, eps=1e-3):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, r))
    A *= 0.9 / np.linalg.norm(A, 2)
    B = rng.normal(size=(r, n))
    B *= 0.9 / np.linalg.norm(B, 2)
    D = rng.uniform(1, 2, n)
    L = A @ B - np.diag(D)
    C = rng.normal(size=(n, r))  # k = r interventions
    means = -np.linalg.solve(L, C)
    omega = linalg.solve_lyapunov(L, eps * np.eye(n))
    return L, C, means, omega, D, eps


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_recover_linear_closedform_exact(seed):
    L, C, means, omega, D, eps = _linear_truth(seed)
    Lhat = recover_linear_closedform(C, means, omega, D, eps)
    assert np.linalg.norm(Lhat - L) <= 1e-8 * np.linalg.norm(L)


def test_recover_linear_closedform_rank_deficient():
    # omega D - eps I = 0 wipes out the covariance identity; a single
    # intervention cannot span the rest, so the stacked matrix loses rank
    n = 6
    eps = 0.1
    omega = eps * np.eye(n)
    D = np.ones(n)
    C = np.eye(n)[:, :1]
    means = np.ones((n, 1))
    with pytest.raises(RankDeficient):
        recover_linear_closedform(C, means, omega, D, eps)


# ----------------------------------------------------------------------
# low-rank game


def _game_instance(seed, n=7, r=3, m=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, r))
    Y = rng.normal(size=(r, n))
    Ds = [np.diag(rng.uniform(0.5, 2.0, r) * rng.choice([-1, 1], r))
          for _ in range(m)]
    S = [X @ D @ Y for D in Ds]
    return X, Y, S


@pytest.mark.parametrize("seed", range(5))
def test_low_rank_game_recovers_factor(seed):
    X, Y, S = _game_instance(seed)
    Xhat, Yhat = low_rank_game(S, 3, seed=seed)
    err, _, _ = align_up_to_perm_scale(Xhat, X)
    assert err < 1e-8
    assert np.linalg.norm(Xhat @ Yhat - S[0]) < 1e-8 * np.linalg.norm(S[0])


def test_low_rank_game_rank_one_and_alpha_grid_oracle():
    # r=2: compare against brute force over mixing angles alpha.  S(w) =
    # w0 S0 + w1 S1 = X diag(w0 d0 + w1 d1) Y, so columns of X can be
    # found by scanning rank-deficient combinations; the game must agree.
    rng = np.random.default_rng(0)
    n, r = 5, 2
    X = rng.normal(size=(n, r))
    Y = rng.normal(size=(r, n))
    d0, d1 = np.array([1.0, 0.5]), np.array([0.3, 2.0])
    S = [X @ np.diag(d0) @ Y, X @ np.diag(d1) @ Y]
    # alpha grid: find angles where S0*cos + S1*sin drops rank, then read
    # off the surviving column
    cols = []
    grid = np.linspace(0, np.pi, 200001)
    vals = np.array([np.linalg.svd(np.cos(a) * S[0] + np.sin(a) * S[1],
                                   compute_uv=False)[r - 1]
                     for a in np.linspace(0, np.pi, 721)])
    rough = np.linspace(0, np.pi, 721)[np.argsort(vals)[:6]]
    for a0 in rough:
        fine = a0 + np.linspace(-0.01, 0.01, 2001)
        svs = [np.linalg.svd(np.cos(a) * S[0] + np.sin(a) * S[1],
                             compute_uv=False)[r - 1] for a in fine]
        a = fine[int(np.argmin(svs))]
        M = np.cos(a) * S[0] + np.sin(a) * S[1]
        U, sv, _ = np.linalg.svd(M)
        if sv[r - 1] < 1e-4 * sv[0]:
            cols.append(U[:, :r - 1])
    assert cols, "alpha grid found no degenerate combination"
    Xhat, _ = low_rank_game(S, r, seed=1)
    # every grid column must match one of the recovered columns
    for c in np.hstack(cols).T:
        cosines = np.abs(c @ (Xhat / np.linalg.norm(Xhat, axis=0)))
        assert cosines.max() > 1 - 1e-6

    # rank-one branch: plain SVD
    x = rng.normal(size=(n, 1))
    y = rng.normal(size=(1, n))
    Xh, Yh = low_rank_game([x @ y], 1)
    err, _, _ = align_up_to_perm_scale(Xh, x)
    assert err < 1e-12


def test_low_rank_game_degenerate_spectrum():
    # identical diagonals for every observation: eigenvalues coincide
    rng = np.random.default_rng(3)
    X = rng.normal(size=(5, 2))
    Y = rng.normal(size=(2, 5))
    S = [1.0 * X @ Y, 2.0 * X @ Y, -0.5 * X @ Y]
    with pytest.raises(DegenerateSpectrum):
        low_rank_game(S, 2, seed=0, max_retries=5)


def test_low_rank_game_needs_two_observations():
    with pytest.raises(DimensionMismatch):
        low_rank_game([np.eye(3)], 2)


# ----------------------------------------------------------------------
# nonlinear closed form


@pytest.mark.parametrize("seed,n,r", [(0, 8, 2), (1, 8, 2), (2, 16, 3)])
def test_recover_nonlinear_closedform_exact(seed, n, r):
    drift, C = make_nonlinear_instance(seed, n, r, screen=True)
    oracle = MomentOracle.exact(drift, C)
    Ahat, Bhat = recover_nonlinear_closedform(oracle, r, seed=seed)
    errA, _, _ = align_up_to_perm_scale(Ahat, drift.A)
    errB, _, _ = align_up_to_perm_scale(Bhat.T, np.asarray(drift.B).T)
    assert errA < 1e-7
    assert errB < 1e-7


def test_recover_nonlinear_closedform_argument_checks():
    drift, C = make_nonlinear_instance(0, 8, 2, screen=True)
    oracle = MomentOracle.exact(drift, C)
    with pytest.raises(DimensionMismatch):
        recover_nonlinear_closedform(oracle, 3)  # k != r+1
    # n <= 2r
    drift2, C2 = make_nonlinear_instance(0, 4, 2)
    with pytest.raises(InvalidParam):
        recover_nonlinear_closedform(MomentOracle.exact(drift2, C2), 2)


def test_recover_nonlinear_refine_is_stable_at_truth():
    drift, C = make_nonlinear_instance(3, 8, 2, screen=True)
    oracle = MomentOracle.exact(drift, C)
    Ahat, Bhat = recover_nonlinear_closedform(oracle, 2, seed=3, refine=True)
    errA, _, _ = align_up_to_perm_scale(Ahat, drift.A)
    errB, _, _ = align_up_to_perm_scale(Bhat.T, np.asarray(drift.B).T)
    assert errA < 1e-6
    assert errB < 1e-6


# ----------------------------------------------------------------------
# counterexamples


@pytest.mark.parametrize("seed", [0, 1])
def test_counterexample_adversarial(seed):
    L, Lhat, interventions, cert = counterexample_linear_adversarial(
        8, 3, seed=seed)
    assert cert.passed, cert.to_text()
    assert not np.allclose(L, Lhat)


def test_counterexample_adversarial_needs_r_at_least_two():
    with pytest.raises(InvalidParam):
        counterexample_linear_adversarial(5, 1)


def test_counterexample_lower():
    rng = np.random.default_rng(4)
    n, r = 8, 4
    A = rng.normal(size=(n, r))
    A *= 0.9 / np.linalg.norm(A, 2)
    B = rng.normal(size=(r, n))
    B *= 0.9 / np.linalg.norm(B, 2)
    C = rng.normal(size=(n, r - 2))
    Lhat, cert = counterexample_linear_lower(A, B, C, seed=0)
    assert cert.passed, cert.to_text()
    with pytest.raises(InvalidParam):
        counterexample_linear_lower(A, B, rng.normal(size=(n, r)))


def test_counterexample_ode():
    rng = np.random.default_rng(5)
    n, r, k = 8, 3, 2  # k <= n - r - 1
    A = rng.normal(size=(n, r))
    A *= 0.9 / np.linalg.norm(A, 2)
    B = rng.normal(size=(r, n))
    B *= 0.9 / np.linalg.norm(B, 2)
    C = rng.normal(size=(n, k))
    Bhat, cert = counterexample_ode(A, B, C, seed=0)
    assert cert.passed, cert.to_text()
    with pytest.raises(RankDeficient):
        counterexample_ode(A, B, rng.normal(size=(n, n - r)))  # too many
