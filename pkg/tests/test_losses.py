import jax
import jax.numpy as jnp
import numpy as np
import pytest

from sde_identify import linalg
from sde_identify.errors import (DimensionMismatch, InvalidParam,
                                 NoConvergence, Singular)
from sde_identify.losses import (KernelSpec, kds_loss, loss_linear,
                                 loss_nonlinear, mse_distribution,
                                 sinkhorn_divergence)
from sde_identify.models import (NonlinearDrift, eval_drift, fixed_point,
                                 make_activation)
from sde_identify.simulate import linearized_nonlinear_moments


def make_linear_truth(seed=0, n=5, r=2, eps=0.01):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, r)) * 0.3
    B = rng.normal(size=(r, n)) * 0.3
    D = rng.uniform(1, 2, n)
    L = A @ B - np.diag(D)
    C = rng.normal(size=(n, r))
    omega = linalg.solve_lyapunov(L, eps * np.eye(n))
    means = -np.linalg.solve(L, C)
    return A, B, D, C, means, omega, eps


def test_loss_linear_zero_at_truth_positive_elsewhere():
    A, B, D, C, means, omega, eps = make_linear_truth()
    at_truth = float(loss_linear(A, B, D, C, means, omega, eps))
    assert at_truth < 1e-10
    off = float(loss_linear(A + 0.1, B, D, C, means, omega, eps))
    assert off > 1e-3


def test_loss_linear_singular_lhat():
    A, B, D, C, means, omega, eps = make_linear_truth()
    with pytest.raises(Singular):
        loss_linear(np.zeros_like(A), np.zeros_like(B), np.zeros_like(D),
                    C, means, omega, eps)


def test_loss_nonlinear_zero_at_truth():
    rng = np.random.default_rng(1)
    Q1, _ = np.linalg.qr(rng.normal(size=(6, 2)))
    Q2, _ = np.linalg.qr(rng.normal(size=(6, 2)))
    d = NonlinearDrift(0.9 * Q1, 0.9 * Q2.T,
                       make_activation("leaky_logistic"))
    C = rng.normal(size=(6, 3))
    moments = [linearized_nonlinear_moments(d, C[:, i]) for i in range(3)]
    assert float(loss_nonlinear(d, C, moments)) < 1e-9
    d_off = NonlinearDrift(0.9 * Q1, 0.85 * Q2.T, d.act)
    assert float(loss_nonlinear(d_off, C, moments)) > 1e-3


# ----------------------------------------------------------------------
# KDS closed form


def _stein_op_fd(v_fn, eps, f, x, h=5e-3):
    """A_x f = grad f . v(x) + (eps/2) lap f, by central differences."""
    n = x.size
    grad = np.zeros(n)
    lap = 0.0
    f0 = f(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        grad[i] = (fp - fm) / (2 * h)
        lap += (fp + fm - 2 * f0) / h ** 2
    return grad @ v_fn(x) + 0.5 * eps * lap


def test_kds_matches_nested_finite_differences():
    rng = np.random.default_rng(2)
    n, r = 3, 2
    d = NonlinearDrift(rng.normal(size=(n, r)) * 0.4,
                       rng.normal(size=(r, n)) * 0.4,
                       make_activation("leaky_logistic"))
    c = rng.normal(size=n)
    eps = 0.2
    kernel = KernelSpec(bandwidth=3.0)
    X = rng.normal(size=(4, n))

    def v_fn(x):
        return np.asarray(eval_drift(d, x, c))

    def k_fn(x, y):
        return float(np.exp(-np.sum((x - y) ** 2) / (2 * kernel.bandwidth ** 2)))

    total = 0.0
    for xi in X:
        for yj in X:
            inner = lambda y, xi=xi: _stein_op_fd(
                v_fn, eps, lambda x: k_fn(x, y), xi)
            total += _stein_op_fd(v_fn, eps, inner, yj)
    fd_val = total / X.shape[0] ** 2
    closed = float(kds_loss(d, c, eps, X, kernel))
    assert abs(closed - fd_val) <= 1e-4 * max(abs(fd_val), 1e-3)


def test_kds_near_zero_for_true_linear_stationarity():
    # OU process: stationary density N(0, eps/2 I); Stein expectation of
    # the generator vanishes, so the V-statistic is small for big samples
    rng = np.random.default_rng(3)
    n = 2
    eps = 0.5
    X = rng.normal(size=(800, n)) * np.sqrt(eps / 2)
    from sde_identify.models import LinearDrift
    d = LinearDrift(np.zeros((n, 1)), np.zeros((1, n)), np.ones(n))
    val = float(kds_loss(d, np.zeros(n), eps, X, KernelSpec(bandwidth=2.0)))
    wrong = float(kds_loss(d, np.ones(n), eps, X, KernelSpec(bandwidth=2.0)))
    assert abs(val) < 0.005
    assert wrong > 10 * abs(val)


def test_kernel_spec_validation():
    with pytest.raises(InvalidParam):
        KernelSpec(kind="matern")
    with pytest.raises(InvalidParam):
        KernelSpec(bandwidth=0.0)


# ----------------------------------------------------------------------
# distribution metrics


def test_mse_distribution():
    a = np.zeros((10, 3))
    b = np.ones((7, 3)) * 2.0
    assert np.isclose(float(mse_distribution(a, b)), 4.0)
    assert np.isclose(float(mse_distribution(b, b)), 0.0)
    with pytest.raises(DimensionMismatch):
        mse_distribution(np.zeros((5, 2)), np.zeros((5, 3)))


def test_sinkhorn_zero_on_identical_batches():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(20, 3))
    assert abs(float(sinkhorn_divergence(a, a, reg=0.1))) < 1e-8


def test_sinkhorn_point_masses():
    a = np.zeros((10, 2))
    b = np.tile([2.0, 0.0], (10, 1))
    # debiasing removes the entropic self-terms: squared distance exactly
    assert np.isclose(float(sinkhorn_divergence(a, b, reg=0.05)), 4.0,
                      atol=1e-6)


def test_sinkhorn_matches_lp_oracle():
    from scipy.optimize import linprog

    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 2))
    y = rng.normal(size=(6, 2)) + 0.5
    Cm = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
    na, nb = Cm.shape
    A_eq = []
    for i in range(na):
        row = np.zeros((na, nb))
        row[i, :] = 1
        A_eq.append(row.ravel())
    for j in range(nb):
        row = np.zeros((na, nb))
        row[:, j] = 1
        A_eq.append(row.ravel())
    b_eq = np.concatenate([np.full(na, 1 / na), np.full(nb, 1 / nb)])
    lp = linprog(Cm.ravel(), A_eq=np.array(A_eq), b_eq=b_eq,
                 bounds=(0, None))
    assert lp.status == 0
    from sde_identify.losses import _sinkhorn_cost
    sharp, err = _sinkhorn_cost(jnp.asarray(x), jnp.asarray(y), 0.005, 20000)
    assert float(err) < 1e-4
    assert abs(float(sharp) - lp.fun) <= 0.02 * abs(lp.fun)


def test_sinkhorn_nonconvergence():
    rng = np.random.default_rng(6)
    a = rng.normal(size=(10, 2))
    b = rng.normal(size=(10, 2)) + 100.0  # far apart, tiny reg, few iters
    with pytest.raises((NoConvergence, InvalidParam)):
        sinkhorn_divergence(a, b, reg=1e-4, max_iter=3)


def test_sinkhorn_invalid_reg():
    with pytest.raises(InvalidParam):
        sinkhorn_divergence(np.zeros((3, 1)), np.zeros((3, 1)), reg=0.0)
