"""Euler-Maruyama integration and stationary-moment estimation.

Chains are integrated with jax (jit + scan) so long runs are cheap; the
per-seed noise stream comes from jax's counter-based PRNG, so identical
SamplerConfig values give bit-identical sample batches on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import jax
import jax.numpy as jnp
import numpy as np

from . import linalg
from .errors import DimensionMismatch, Diverged, InvalidParam, NotHurwitz
from .models import LinearDrift, NonlinearDrift, eval_drift, fixed_point, drift_jacobian

DIVERGENCE_THRESHOLD = 1e8


@dataclass(frozen=True)
class SamplerConfig:
    dt: float = 0.01
    burnin: int = 100
    thinning: int = 300
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidParam("dt must be positive")
        if self.thinning < 1 or self.n_samples < 1 or self.burnin < 0:
            raise InvalidParam("bad sampler counts")


@dataclass(frozen=True)
class StationaryMoments:
    mean: np.ndarray
    cov: np.ndarray
    epsilon: float
    n_samples: int


def _make_step(drift, c, dt, sqrt_eps_dt):
    c = jnp.asarray(c)

    def step(x, key):
        key, sub = jax.random.split(key)
        v = eval_drift(drift, x, c)
        return x + dt * v + sqrt_eps_dt * jax.random.normal(sub, x.shape), key

    return step


def euler_maruyama(drift, c, epsilon: float, x0, cfg: SamplerConfig) -> np.ndarray:
    """Simulate dX = (v(X)+c) dt + sqrt(eps) dB; return thinned samples.

    Records every cfg.thinning-th state after cfg.burnin * cfg.thinning
    burn-in steps, for cfg.n_samples records.  Raises Diverged if the
    trajectory norm ever exceeds 1e8 (checked on recorded states and the
    final state).
    """
    if epsilon < 0:
        raise InvalidParam("epsilon must be >= 0")
    x0 = jnp.asarray(x0, dtype=jnp.float64)
    if x0.shape != (drift.n,):
        raise DimensionMismatch("x0 dimension does not match drift")
    step = _make_step(drift, c, cfg.dt, float(np.sqrt(epsilon * cfg.dt)))

    @partial(jax.jit, static_argnums=(2, 3))
    def run(x0, key, n_burn, n_rec):
        def one(carry, _):
            x, key = carry
            x, key = step(x, key)
            return (x, key), None

        def thin_block(carry, _):
            (x, key), _ = jax.lax.scan(one, carry, None, length=cfg.thinning)
            return (x, key), x

        carry = (x0, key)
        carry, _ = jax.lax.scan(thin_block, carry, None, length=n_burn)
        carry, xs = jax.lax.scan(thin_block, carry, None, length=n_rec)
        return xs

    xs = run(x0, jax.random.PRNGKey(cfg.seed), cfg.burnin, cfg.n_samples)
    xs = np.asarray(xs)
    if not np.all(np.isfinite(xs)) or np.max(np.abs(xs)) > DIVERGENCE_THRESHOLD:
        raise Diverged("trajectory exceeded divergence threshold")
    return xs


def empirical_moments(samples, epsilon: float = float("nan")) -> StationaryMoments:
    """Sample mean and unbiased (n-1) covariance, symmetrized."""
    samples = np.asarray(samples, float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise DimensionMismatch("need a batch of at least 2 samples")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (samples.shape[0] - 1)
    return StationaryMoments(mean=mean, cov=linalg.sym(cov),
                             epsilon=epsilon, n_samples=samples.shape[0])


def exact_linear_moments(d: LinearDrift, c, epsilon: float) -> StationaryMoments:
    """Stationary law of the linear SDE: N(-L^{-1} c, lyap(L, eps I))."""
    L = d.L
    if not linalg.is_hurwitz(L):
        raise NotHurwitz("drift matrix is not Hurwitz")
    mean = -np.linalg.solve(L, np.asarray(c, float))
    cov = linalg.solve_lyapunov(L, epsilon * np.eye(d.n))
    return StationaryMoments(mean=mean, cov=cov, epsilon=epsilon, n_samples=0)


def linearized_nonlinear_moments(d: NonlinearDrift, c):
    """Zero-noise-limit oracle: fixed point x* and omega solving
    J w + w J^T + I = 0 with J the drift Jacobian at x*."""
    xstar = fixed_point(d, c)
    J = drift_jacobian(d, xstar)
    omega = linalg.solve_lyapunov(J, np.eye(d.n))
    return xstar, omega
