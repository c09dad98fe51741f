"""The three training losses plus evaluation metrics.

All losses are written in jax.numpy so they can sit inside a jitted /
differentiated objective; with concrete inputs they behave like plain
numpy code returning a float.
"""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DimensionMismatch, InvalidParam, NoConvergence, Singular
from .models import NonlinearDrift, eval_drift


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    bandwidth: float = 5.0

    def __post_init__(self):
        if self.kind != "rbf":
            raise InvalidParam(f"unsupported kernel {self.kind!r}")
        if self.bandwidth <= 0:
            raise InvalidParam("bandwidth must be positive")


def _is_concrete(*xs) -> bool:
    return not any(isinstance(x, jax.core.Tracer) for x in xs)


def loss_linear(Ahat, Bhat, Dhat, C, true_means, omega, epsilon):
    """Mean term + covariance (Lyapunov residual) term for linear drift.

    L_hat = Ahat Bhat - diag(Dhat).  The mean term compares the model's
    stationary means -L_hat^{-1} c_i against the observed ones; the
    covariance term is the Lyapunov residual against the shared omega.
    Zero exactly at the truth.
    """
    Ahat, Bhat = jnp.asarray(Ahat), jnp.asarray(Bhat)
    Dhat = jnp.asarray(Dhat).ravel()
    C = jnp.asarray(C)
    true_means = jnp.asarray(true_means)
    omega = jnp.asarray(omega)
    n = Ahat.shape[0]
    Lhat = Ahat @ Bhat - jnp.diag(Dhat)
    if _is_concrete(Lhat):
        if np.linalg.cond(np.asarray(Lhat)) > 1e12:
            raise Singular("L_hat is numerically singular")
    means_hat = -jnp.linalg.solve(Lhat, C)
    mean_term = jnp.linalg.norm(means_hat - true_means)
    lyap = Lhat @ omega + omega @ Lhat.T + epsilon * jnp.eye(n)
    return mean_term + jnp.linalg.norm(lyap)


def loss_nonlinear(dhat: NonlinearDrift, C, moments):
    """Fixed-point residual + Lyapunov residual over all interventions.

    moments: sequence of (m_i, W_i) with W_i = Sigma_i / epsilon.
    Returns sqrt(sum_i |v(m_i)+c_i|^2) + sqrt(sum_i |J W + W J^T + I|_F^2).
    """
    C = jnp.asarray(C)
    n = dhat.n
    if C.shape[0] != n:
        raise DimensionMismatch("C rows must match drift dimension")
    A, B = jnp.asarray(dhat.A), jnp.asarray(dhat.B)
    mean_sq = 0.0
    cov_sq = 0.0
    eye = jnp.eye(n)
    for i, (m, W) in enumerate(moments):
        m = jnp.asarray(m)
        W = jnp.asarray(W)
        v = eval_drift(dhat, m, C[:, i])
        mean_sq = mean_sq + jnp.sum(v ** 2)
        slopes = dhat.act.deriv(m @ B.T)
        J = (A * slopes[None, :]) @ B - eye
        R = J @ W + W @ J.T + eye
        cov_sq = cov_sq + jnp.sum(R ** 2)
    return jnp.sqrt(mean_sq) + jnp.sqrt(cov_sq)


def kds_loss(dhat, c, epsilon, samples, kernel: KernelSpec = KernelSpec()):
    """Kernelized deviation from stationarity (V-statistic).

    For the SDE generator A_x g = grad(g) . (v(x)+c) + (eps/2) lap(g) and
    the RBF kernel k(x,y) = exp(-|x-y|^2 / (2 h^2)), the bilinear form
    A_x A_y k(x,y) has a closed form in u = |x-y|^2:

      term1 = k [ v.v'/s2 - (v.d)(v'.d)/s2^2 ]
      term2 = (eps/2) k [ (n+2)/s2^2 - u/s2^3 ] (v.d - v'.d)
      term3 = (eps^2/4) k [ (u/s2^2 - n/s2)^2 + 2n/s2^2 - 4u/s2^3 ]

    with d = x - y, s2 = h^2.  Returns the mean over all sample pairs.
    """
    X = jnp.asarray(samples)
    N, n = X.shape
    V = eval_drift(dhat, X, jnp.asarray(c))
    s2 = kernel.bandwidth ** 2
    d = X[:, None, :] - X[None, :, :]
    u = jnp.sum(d ** 2, axis=-1)
    K = jnp.exp(-u / (2.0 * s2))
    vv = V @ V.T
    vd = jnp.einsum("id,ijd->ij", V, d)      # v_i . (x_i - x_j)
    vpd = jnp.einsum("jd,ijd->ij", V, d)     # v_j . (x_i - x_j)
    term1 = K * (vv / s2 - vd * vpd / s2 ** 2)
    term2 = 0.5 * epsilon * K * ((n + 2) / s2 ** 2 - u / s2 ** 3) * (vd - vpd)
    term3 = 0.25 * epsilon ** 2 * K * (
        (u / s2 ** 2 - n / s2) ** 2 + 2 * n / s2 ** 2 - 4 * u / s2 ** 3)
    return jnp.mean(term1 + term2 + term3)


def mse_distribution(pred, true):
    """Mean over coordinates of the squared difference of batch means.

    This is a deliberate convention choice: it compares predicted vs
    observed perturbation means per coordinate, which preserves the
    orderings we care about even though absolute magnitudes differ from
    other MSE conventions in the literature.
    """
    pred = jnp.asarray(pred)
    true = jnp.asarray(true)
    if pred.shape[-1] != true.shape[-1]:
        raise DimensionMismatch("batches must share coordinate dimension")
    return jnp.mean((jnp.mean(pred, axis=0) - jnp.mean(true, axis=0)) ** 2)


def _sinkhorn_cost(x, y, reg, max_iter):
    """Sharp entropic OT cost <P, C> with uniform marginals, log domain."""
    Cm = jnp.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)
    na, nb = Cm.shape
    loga = -jnp.log(na) * jnp.ones(na)
    logb = -jnp.log(nb) * jnp.ones(nb)
    f = jnp.zeros(na)
    g = jnp.zeros(nb)

    def body(carry, _):
        f, g = carry
        # log-sum-exp updates of the dual potentials
        g = -reg * jax.scipy.special.logsumexp(
            (f[:, None] - Cm) / reg + loga[:, None], axis=0)
        f = -reg * jax.scipy.special.logsumexp(
            (g[None, :] - Cm) / reg + logb[None, :], axis=1)
        return (f, g), None

    (f, g), _ = jax.lax.scan(body, (f, g), None, length=max_iter)
    logP = (f[:, None] + g[None, :] - Cm) / reg + loga[:, None] + logb[None, :]
    P = jnp.exp(logP)
    # the row marginal was just projected exactly; convergence shows in
    # how far the column marginal still is from uniform
    marginal_err = jnp.sum(jnp.abs(P.sum(axis=0) - jnp.exp(logb)))
    return jnp.sum(P * Cm), marginal_err


def sinkhorn_divergence(a, b, reg: float = 0.1, max_iter: int = 500):
    """Debiased entropic OT: OT(a,b) - (OT(a,a) + OT(b,b)) / 2.

    Squared-Euclidean cost, uniform weights.  Raises NoConvergence when
    the scaling iterations leave the marginals visibly violated (reg too
    small for the point spread), provided inputs are concrete.
    """
    if reg <= 0:
        raise InvalidParam("reg must be positive")
    a = jnp.asarray(a, dtype=jnp.float64)
    b = jnp.asarray(b, dtype=jnp.float64)
    ab, err_ab = _sinkhorn_cost(a, b, reg, max_iter)
    aa, _ = _sinkhorn_cost(a, a, reg, max_iter)
    bb, _ = _sinkhorn_cost(b, b, reg, max_iter)
    val = ab - 0.5 * (aa + bb)
    if _is_concrete(val):
        if not np.isfinite(float(val)):
            raise NoConvergence("sinkhorn produced non-finite value")
        if float(err_ab) > 1e-3:
            raise NoConvergence(
                f"sinkhorn marginal violation {float(err_ab):.2e}")
    return val
