"""Drift parameterizations, activations, and intervention sets.

Two drift families:

  linear     v(x) = (A B - D) x          A: n x r, B: r x n, D diagonal >= I
  nonlinear  v(x) = A sigma(B x) - x     ||A||, ||B|| <= 1

Activations are elementwise C^2 maps with analytic first and second
derivatives (no finite differencing).  The math is written with
jax.numpy so drift evaluations stay differentiable when they appear
inside a fitted objective; outputs behave like numpy arrays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DimensionMismatch, InvalidParam, NoConvergence

# max |d2/dx2 logistic(x)| = 1/(6 sqrt(3)), attained at logistic = (3 +- sqrt(3))/6
_LOGISTIC_M = 1.0 / (6.0 * math.sqrt(3.0))


def _logistic(u):
    return jax.nn.sigmoid(u)


def _logistic_d(u):
    s = jax.nn.sigmoid(u)
    return s * (1.0 - s)


def _logistic_dd(u):
    s = jax.nn.sigmoid(u)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


@dataclass(frozen=True)
class Activation:
    """Elementwise activation with derivative queries.

    value/deriv/second_deriv accept arrays whose last axis runs over
    coordinates (or any shape for coordinate-homogeneous kinds).
    gamma/tau are the max/min slopes, curvature the max |sigma''|;
    for unbounded kinds (sine_mix, learnable) these are indicative only.
    """

    kind: str
    gamma: float
    tau: float
    curvature: float
    params: dict = field(default_factory=dict)

    def value(self, u):
        return self._fns()[0](u)

    def deriv(self, u):
        return self._fns()[1](u)

    def second_deriv(self, u):
        return self._fns()[2](u)

    # -- implementations ------------------------------------------------

    def _fns(self):
        if self.kind == "logistic":
            return _logistic, _logistic_d, _logistic_dd
        if self.kind == "linear":
            g = self.params["gamma"]
            return (lambda u: g * u,
                    lambda u: g * jnp.ones_like(u),
                    lambda u: jnp.zeros_like(u))
        if self.kind == "leaky_logistic":
            t, s = self.params["tau"], self.params["scale"]
            return (lambda u: s * _logistic(u) + t * u,
                    lambda u: s * _logistic_d(u) + t,
                    lambda u: s * _logistic_dd(u))
        if self.kind == "sine_mix":
            return (_sine_mix_val, _sine_mix_d, _sine_mix_dd)
        if self.kind == "learnable":
            p = self.params
            return (lambda u: _mlp_val(p, u),
                    lambda u: _mlp_d(p, u),
                    lambda u: _mlp_dd(p, u))
        raise InvalidParam(f"unknown activation kind {self.kind!r}")

    def flat_params(self) -> np.ndarray:
        """Trainable parameters as a flat vector (learnable kind only)."""
        if self.kind != "learnable":
            return np.zeros(0)
        p = self.params
        return np.concatenate([np.asarray(p[k]).ravel()
                               for k in ("w1", "b1", "w2", "b2")])

    def with_params(self, vec) -> "Activation":
        if self.kind != "learnable":
            raise InvalidParam("only learnable activations have parameters")
        p = self.params
        out, off = {}, 0
        for k in ("w1", "b1", "w2", "b2"):
            sz = int(np.prod(np.shape(p[k])))
            out[k] = jnp.reshape(jnp.asarray(vec[off:off + sz]), jnp.shape(p[k]))
            off += sz
        return Activation(self.kind, self.gamma, self.tau, self.curvature, out)


# sine_mix alternates the two maps from the synthetic-truth family:
#   even coords: 3 cos(3 (x - 0.5));  odd coords: 2 sin(2 (x + 1.5)) - 1
def _sine_parity(u):
    idx = jnp.arange(u.shape[-1])
    return (idx % 2).astype(u.dtype)


def _sine_mix_val(u):
    odd = _sine_parity(u)
    return (1 - odd) * 3.0 * jnp.cos(3.0 * (u - 0.5)) \
        + odd * (2.0 * jnp.sin(2.0 * (u + 1.5)) - 1.0)


def _sine_mix_d(u):
    odd = _sine_parity(u)
    return (1 - odd) * (-9.0) * jnp.sin(3.0 * (u - 0.5)) \
        + odd * 4.0 * jnp.cos(2.0 * (u + 1.5))


def _sine_mix_dd(u):
    odd = _sine_parity(u)
    return (1 - odd) * (-27.0) * jnp.cos(3.0 * (u - 0.5)) \
        + odd * (-8.0) * jnp.sin(2.0 * (u + 1.5))


# learnable: per-coordinate two-layer MLP (tanh hidden) plus the frozen
# warm-start term 0.1 * logistic(x).  w1, b1, w2: (r, h); b2: (r,).
def _mlp_pre(p, u):
    return u[..., :, None] * p["w1"] + p["b1"]


def _mlp_val(p, u):
    return jnp.sum(jnp.tanh(_mlp_pre(p, u)) * p["w2"], axis=-1) + p["b2"] \
        + 0.1 * _logistic(u)


def _mlp_d(p, u):
    t = jnp.tanh(_mlp_pre(p, u))
    return jnp.sum((1.0 - t ** 2) * p["w1"] * p["w2"], axis=-1) \
        + 0.1 * _logistic_d(u)


def _mlp_dd(p, u):
    t = jnp.tanh(_mlp_pre(p, u))
    return jnp.sum(-2.0 * t * (1.0 - t ** 2) * p["w1"] ** 2 * p["w2"], axis=-1) \
        + 0.1 * _logistic_dd(u)


def make_activation(kind: str, *, tau: float = 0.1, gamma: float = 0.8,
                    hidden: int = 20, seed: int = 0,
                    n_coords: int = 1) -> Activation:
    """Build an activation.

    kind: logistic | leaky_logistic | sine_mix | learnable | linear
    leaky_logistic(tau, gamma): s*logistic + tau*x with s = 4*(gamma - tau)
    so slopes lie in [tau, gamma].  learnable(hidden, seed, n_coords) is a
    per-coordinate MLP initialized near 0.1*logistic.
    """
    if kind == "logistic":
        return Activation("logistic", gamma=0.25, tau=0.0,
                          curvature=_LOGISTIC_M)
    if kind == "linear":
        if not 0 < gamma < 1:
            raise InvalidParam("linear activation needs 0 < gamma < 1")
        return Activation("linear", gamma=gamma, tau=gamma, curvature=0.0,
                          params={"gamma": gamma})
    if kind == "leaky_logistic":
        if not 0 < tau < 1:
            raise InvalidParam("leaky_logistic needs 0 < tau < 1")
        if not tau < gamma < 1:
            raise InvalidParam("leaky_logistic needs tau < gamma < 1")
        s = 4.0 * (gamma - tau)
        return Activation("leaky_logistic", gamma=gamma, tau=tau,
                          curvature=s * _LOGISTIC_M,
                          params={"tau": tau, "scale": s})
    if kind == "sine_mix":
        return Activation("sine_mix", gamma=9.0, tau=-9.0, curvature=27.0)
    if kind == "learnable":
        rng = np.random.default_rng(seed)
        scale = 0.1 / math.sqrt(hidden)
        params = {
            "w1": jnp.asarray(rng.normal(size=(n_coords, hidden))),
            "b1": jnp.asarray(rng.normal(size=(n_coords, hidden)) * 0.1),
            "w2": jnp.asarray(rng.normal(size=(n_coords, hidden)) * scale),
            "b2": jnp.zeros(n_coords),
        }
        return Activation("learnable", gamma=1.0, tau=0.0, curvature=1.0,
                          params=params)
    raise InvalidParam(f"unknown activation kind {kind!r}")


def _coerce_mat(x):
    """To a float matrix, leaving jax arrays/tracers untouched."""
    if isinstance(x, (np.ndarray, list, tuple)) or np.isscalar(x):
        return np.atleast_2d(np.asarray(x, float))
    return x


def _coerce_vec(x):
    if isinstance(x, (np.ndarray, list, tuple)) or np.isscalar(x):
        return np.asarray(x, float).ravel()
    return x


@dataclass(frozen=True)
class LinearDrift:
    """v(x) = (A B - D) x with D diagonal."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray  # diagonal entries, shape (n,)

    def __post_init__(self):
        object.__setattr__(self, "A", _coerce_mat(self.A))
        object.__setattr__(self, "B", _coerce_mat(self.B))
        object.__setattr__(self, "D", _coerce_vec(self.D))
        n, r = self.A.shape
        if self.B.shape != (r, n) or self.D.shape != (n,):
            raise DimensionMismatch(
                f"incompatible shapes A{self.A.shape} B{self.B.shape} D{self.D.shape}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def r(self):
        return self.A.shape[1]

    @property
    def L(self) -> np.ndarray:
        diag = np.diag if isinstance(self.D, np.ndarray) else jnp.diag
        return self.A @ self.B - diag(self.D)


@dataclass(frozen=True)
class NonlinearDrift:
    """v(x) = A sigma(B x) - x."""

    A: np.ndarray
    B: np.ndarray
    act: Activation

    def __post_init__(self):
        object.__setattr__(self, "A", _coerce_mat(self.A))
        object.__setattr__(self, "B", _coerce_mat(self.B))
        n, r = self.A.shape
        if self.B.shape != (r, n):
            raise DimensionMismatch(
                f"incompatible shapes A{self.A.shape} B{self.B.shape}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def r(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class InterventionSet:
    """Columns are shift vectors c_i added to the drift."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, float)
        if C.ndim != 2:
            raise DimensionMismatch("C must be an n x k matrix")
        object.__setattr__(self, "C", C)

    @property
    def k(self):
        return self.C.shape[1]

    def column(self, i):
        return self.C[:, i]


def eval_drift(d, x, c=None):
    """v(x) + c for either drift family."""
    x = jnp.asarray(x)
    if c is None:
        c = jnp.zeros_like(x)
    if isinstance(d, LinearDrift):
        if x.shape[-1] != d.n:
            raise DimensionMismatch("x dimension does not match drift")
        return x @ d.L.T + c
    if isinstance(d, NonlinearDrift):
        if x.shape[-1] != d.n:
            raise DimensionMismatch("x dimension does not match drift")
        return d.act.value(x @ d.B.T) @ d.A.T - x + c
    raise DimensionMismatch(f"not a drift: {type(d)!r}")


def drift_jacobian(d, x):
    """Jacobian of v at x: A diag(sigma'(Bx)) B - I (nonlinear) or AB - D."""
    if isinstance(d, LinearDrift):
        return d.L
    sp = d.act.deriv(jnp.asarray(x) @ d.B.T)
    return np.asarray(d.A * np.asarray(sp)[None, :] @ d.B - np.eye(d.n))


def fixed_point(d: NonlinearDrift, c, tol: float = 1e-12) -> np.ndarray:
    """Unique x* with v(x*) + c = 0, by Banach iteration from x = c.

    Requires the map x -> A sigma(Bx) + c to be a contraction, which
    holds when the activation slopes stay below 1 and ||A||, ||B|| <= 1.
    """
    c = np.asarray(c, float)
    if isinstance(d, LinearDrift):
        return -np.linalg.solve(np.asarray(d.L), c)
    gamma = min(d.act.gamma, 0.999)
    denom = abs(math.log(gamma)) if gamma > 0 else 1.0
    max_iter = int(math.ceil(math.log(max(tol, 1e-300) /
                                      max(np.linalg.norm(c), 1.0)) / -denom)) + 100
    x = c.copy()
    for _ in range(max(max_iter, 50)):
        x_new = np.asarray(d.act.value(jnp.asarray(d.B @ x))) @ d.A.T + c
        if np.linalg.norm(x_new - x) <= 0.5 * tol:
            x = x_new
            break
        x = x_new
    resid = np.linalg.norm(np.asarray(eval_drift(d, x, c)))
    if resid > tol:
        raise NoConvergence(f"fixed point residual {resid:.3e} > {tol:.1e}")
    return x


# ----------------------------------------------------------------------
# plain-text serialization (versioned, row-major entries)

_HEADER = "sde-identify-drift v1"


def _write_mat(buf, name, M):
    M = np.atleast_2d(np.asarray(M, float))
    buf.write(f"{name} {M.shape[0]} {M.shape[1]}\n")
    for row in M:
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")


def _read_mat(lines, expect_name):
    name, rows, cols = lines.pop(0).split()
    if name != expect_name:
        raise InvalidParam(f"expected matrix {expect_name}, got {name}")
    rows, cols = int(rows), int(cols)
    data = [list(map(float, lines.pop(0).split())) for _ in range(rows)]
    return np.asarray(data).reshape(rows, cols)


def drift_to_text(d) -> str:
    buf = io.StringIO()
    buf.write(_HEADER + "\n")
    if isinstance(d, LinearDrift):
        buf.write("kind linear\n")
        _write_mat(buf, "A", d.A)
        _write_mat(buf, "B", d.B)
        _write_mat(buf, "D", d.D.reshape(1, -1))
    elif isinstance(d, NonlinearDrift):
        buf.write("kind nonlinear\n")
        buf.write(f"activation {d.act.kind}")
        if d.act.kind == "leaky_logistic":
            buf.write(f" tau={d.act.params['tau']} scale={d.act.params['scale']}")
        elif d.act.kind == "linear":
            buf.write(f" gamma={d.act.params['gamma']}")
        buf.write("\n")
        _write_mat(buf, "A", d.A)
        _write_mat(buf, "B", d.B)
        if d.act.kind == "learnable":
            for k in ("w1", "b1", "w2", "b2"):
                _write_mat(buf, k, np.atleast_2d(np.asarray(d.act.params[k])))
    else:
        raise InvalidParam(f"not a drift: {type(d)!r}")
    return buf.getvalue()


def drift_from_text(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines.pop(0).strip() != _HEADER:
        raise InvalidParam("unrecognized drift file header")
    kind = lines.pop(0).split()[1]
    if kind == "linear":
        A = _read_mat(lines, "A")
        B = _read_mat(lines, "B")
        D = _read_mat(lines, "D").ravel()
        return LinearDrift(A, B, D)
    if kind == "nonlinear":
        parts = lines.pop(0).split()
        act_kind = parts[1]
        kv = dict(p.split("=") for p in parts[2:])
        A = _read_mat(lines, "A")
        B = _read_mat(lines, "B")
        if act_kind == "leaky_logistic":
            tau, scale = float(kv["tau"]), float(kv["scale"])
            act = make_activation("leaky_logistic", tau=tau,
                                  gamma=tau + scale / 4.0)
        elif act_kind == "linear":
            act = make_activation("linear", gamma=float(kv["gamma"]))
        elif act_kind == "learnable":
            r = B.shape[0]
            params = {k: jnp.asarray(_read_mat(lines, k))
                      for k in ("w1", "b1", "w2")}
            params["b2"] = jnp.asarray(_read_mat(lines, "b2")).ravel()
            act = Activation("learnable", gamma=1.0, tau=0.0, curvature=1.0,
                             params=params)
        else:
            act = make_activation(act_kind)
        return NonlinearDrift(A, B, act)
    raise InvalidParam(f"unknown drift kind {kind!r}")
