"""Semi-synthetic gene-regulatory-network simulator and GRN scoring.

The simulator is a small BoolODE-style model: per-gene mRNA x_i and
protein p_i, Hill-kinetics production from the regulators' proteins,
linear degradation, sqrt-concentration diffusion clamped at zero.
Overexpression interventions zero a gene's regulation and add a
constant production shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import jax
import jax.numpy as jnp
import numpy as np

from .errors import (ConfigError, DimensionMismatch, Diverged, InvalidParam,
                     IoError)
from .losses import sinkhorn_divergence
from .models import Activation, make_activation
from .simulate import DIVERGENCE_THRESHOLD, SamplerConfig

# Hill kinetics defaults
HILL_H = 2.0
HILL_THETA = 1.0
HILL_KAPPA = 2.0
HILL_BASAL = 0.01


@dataclass(frozen=True)
class GRNSpec:
    """Boolean circuit with Hill-function kinetics.

    edges: list of (src, dst, sign) with sign +1 (activation) or -1
    (repression): src's protein regulates dst's mRNA production.
    """

    n_genes: int
    edges: Tuple[Tuple[int, int, int], ...]
    rho: float = 1.0       # translation rate
    l_x: float = 1.0       # mRNA degradation
    l_p: float = 1.0       # protein degradation
    noise: float = 0.05    # diffusion scale s
    hill_h: float = HILL_H
    hill_theta: float = HILL_THETA
    hill_kappa: float = HILL_KAPPA
    basal: float = HILL_BASAL

    def __post_init__(self):
        if min(self.rho, self.l_x, self.l_p) <= 0 or self.noise < 0:
            raise InvalidParam("rates must be positive")
        for s, d, sg in self.edges:
            if not (0 <= s < self.n_genes and 0 <= d < self.n_genes):
                raise InvalidParam(f"edge ({s},{d}) out of range")
            if sg not in (1, -1):
                raise InvalidParam("edge sign must be +1 or -1")

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with [i, j] = True iff gene j regulates gene i
        (row = target), matching the (A B)_{ij} dependency convention."""
        adj = np.zeros((self.n_genes, self.n_genes), dtype=bool)
        for s, d, _ in self.edges:
            adj[d, s] = True
        return adj

    def regulators(self, i: int):
        acts = [s for s, d, sg in self.edges if d == i and sg == 1]
        reps = [s for s, d, sg in self.edges if d == i and sg == -1]
        return acts, reps


@dataclass(frozen=True)
class InterventionRegime:
    index: int
    intervened: Tuple[int, ...] = ()
    shift: float = 20.0

    def __post_init__(self):
        if self.index == 0 and len(self.intervened) > 0:
            raise InvalidParam("regime 0 is observational (no interventions)")


def read_network(path: str) -> GRNSpec:
    """Parse the plain-text network format.

    Header block of "name value" rate lines, then an "edges" line, then
    one "src dst sign" line per edge (sign is +/-).  Lines starting with
    # are comments.
    """
    rates = {}
    edges = []
    n_genes = None
    in_edges = False
    try:
        lines = open(path).read().splitlines()
    except OSError as e:
        raise IoError(str(e))
    for ln in lines:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if ln == "edges":
            in_edges = True
            continue
        parts = ln.split()
        if not in_edges:
            if parts[0] == "genes":
                n_genes = int(parts[1])
            elif len(parts) == 2:
                rates[parts[0]] = float(parts[1])
            else:
                raise ConfigError(f"bad header line: {ln!r}")
        else:
            if len(parts) != 3 or parts[2] not in ("+", "-"):
                raise ConfigError(f"bad edge line: {ln!r}")
            edges.append((int(parts[0]), int(parts[1]),
                          1 if parts[2] == "+" else -1))
    if n_genes is None:
        raise ConfigError("network file missing 'genes N' header")
    known = {"rho", "l_x", "l_p", "noise", "hill_h", "hill_theta",
             "hill_kappa", "basal"}
    bad = set(rates) - known
    if bad:
        raise ConfigError(f"unknown rate keys {sorted(bad)}")
    return GRNSpec(n_genes=n_genes, edges=tuple(edges), **rates)


def write_network(spec: GRNSpec, path: str) -> None:
    lines = [f"genes {spec.n_genes}"]
    for name in ("rho", "l_x", "l_p", "noise", "hill_h", "hill_theta",
                 "hill_kappa", "basal"):
        lines.append(f"{name} {getattr(spec, name)}")
    lines.append("edges")
    for s, d, sg in spec.edges:
        lines.append(f"{s} {d} {'+' if sg == 1 else '-'}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def _production_masks(spec: GRNSpec):
    """Dense (n, n) activation / repression masks for vectorized Hill."""
    n = spec.n_genes
    act = np.zeros((n, n))
    rep = np.zeros((n, n))
    for s, d, sg in spec.edges:
        (act if sg == 1 else rep)[d, s] = 1.0
    return jnp.asarray(act), jnp.asarray(rep)


def simulate_grn(spec: GRNSpec, regime: InterventionRegime,
                 cfg: SamplerConfig, init, return_traj: bool = False):
    """Push a batch of cells through the GRN SDE; return mRNA states.

    init: (m, n_genes) nonnegative mRNA concentrations; proteins start
    at their quasi-steady value rho*x/l_p.  Integrates
    (burnin + n_samples) * thinning Euler-Maruyama steps of size dt and
    returns the final (m, n) mRNA batch, or the thinned trajectory
    (m, n_samples, n) after burnin when return_traj=True.  Intervened
    genes lose their regulation term and gain +shift production.
    States are clamped at 0 after every step.
    """
    init = np.atleast_2d(np.asarray(init, float))
    if init.shape[1] != spec.n_genes:
        raise DimensionMismatch("init width must equal gene count")
    if np.any(init < 0):
        raise InvalidParam("init must be nonnegative")
    n = spec.n_genes
    act_mask, rep_mask = _production_masks(spec)
    keep = np.ones(n)
    shift_vec = np.zeros(n)
    for j in regime.intervened:
        keep[j] = 0.0
        shift_vec[j] = regime.shift
    keep, shift_vec = jnp.asarray(keep), jnp.asarray(shift_vec)
    h, th, kap, basal = spec.hill_h, spec.hill_theta, spec.hill_kappa, spec.basal
    s_noise = spec.noise
    dt = cfg.dt
    sq = float(np.sqrt(dt))

    def production(p):
        r = (p / th) ** h  # (m, n)
        up = r / (1.0 + r)
        down = 1.0 / (1.0 + r)
        # sum of activator Hill terms, times product over repressors
        act_term = basal + kap * (up @ act_mask.T)
        # product via sum of logs over present repressors
        rep_term = jnp.exp(jnp.log(down) @ rep_mask.T)
        return act_term * rep_term

    def step(carry, _):
        x, p, key = carry
        key, k1, k2 = jax.random.split(key, 3)
        f = production(p) * keep[None, :] + shift_vec[None, :]
        dx = (f - spec.l_x * x) * dt + s_noise * jnp.sqrt(x) * sq \
            * jax.random.normal(k1, x.shape)
        dp = (spec.rho * x - spec.l_p * p) * dt + s_noise * jnp.sqrt(p) * sq \
            * jax.random.normal(k2, p.shape)
        x = jnp.maximum(x + dx, 0.0)
        p = jnp.maximum(p + dp, 0.0)
        return (x, p, key), None

    def thin_block(carry, _):
        carry, _ = jax.lax.scan(step, carry, None, length=cfg.thinning)
        return carry, carry[0]

    @partial(jax.jit, static_argnums=(1, 2))
    def run(carry, n_burn, n_rec):
        carry, _ = jax.lax.scan(thin_block, carry, None, length=n_burn)
        carry, xs = jax.lax.scan(thin_block, carry, None, length=n_rec)
        return carry[0], xs

    x0 = jnp.asarray(init)
    p0 = spec.rho * x0 / spec.l_p
    key = jax.random.PRNGKey(cfg.seed)
    xf, traj = run((x0, p0, key), cfg.burnin, cfg.n_samples)
    xf, traj = np.asarray(xf), np.asarray(traj)
    out = np.swapaxes(traj, 0, 1) if return_traj else xf
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > DIVERGENCE_THRESHOLD:
        raise Diverged("GRN trajectory exceeded divergence threshold")
    return out


# ----------------------------------------------------------------------
# modular drift model and GRN scoring


@dataclass(frozen=True)
class ModularDriftModel:
    """Low-rank interventional drift over mRNA space.

    Drift under regime k:  m_k * (A sigma(alpha * (B x - beta))) - D x + shift_k
    where m_k zeroes the rows of intervened genes.  act=None means the
    standard logistic; otherwise act supplies a (learnable) activation
    applied coordinate-wise to the r-vector.
    """

    A: np.ndarray
    B: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    D: np.ndarray
    diffusion: float = 0.05
    act: Optional[Activation] = None

    @property
    def n(self):
        return np.shape(self.A)[0]

    @property
    def r(self):
        return np.shape(self.A)[1]

    def hidden(self, x):
        """sigma(alpha * (B x - beta)) for a batch x."""
        z = jnp.asarray(self.alpha) * (x @ jnp.asarray(self.B).T
                                       - jnp.asarray(self.beta))
        if self.act is None:
            return jax.nn.sigmoid(z)
        return self.act.value(z)

    def drift(self, x, keep, shift_vec):
        reg = self.hidden(x) @ jnp.asarray(self.A).T
        return keep[None, :] * reg - x * jnp.asarray(self.D)[None, :] \
            + shift_vec[None, :]


def extract_grn(model: ModularDriftModel, batch=None) -> np.ndarray:
    """Edge scores A diag(alpha) B.

    With a learnable activation the per-coordinate slope is not the
    constant sigmoid scale, so the diagonal becomes
    alpha * mean slope of the activation over the supplied batch
    (artifact convention; batch required in that case).
    """
    A = np.asarray(model.A, float)
    B = np.asarray(model.B, float)
    alpha = np.asarray(model.alpha, float).ravel()
    if model.act is None:
        return A @ np.diag(alpha) @ B
    if batch is None:
        raise InvalidParam("learnable extraction needs a reference batch")
    x = jnp.asarray(np.atleast_2d(batch))
    z = jnp.asarray(alpha) * (x @ jnp.asarray(B).T - jnp.asarray(model.beta))
    slopes = np.asarray(jnp.mean(model.act.deriv(z), axis=0))
    return A @ np.diag(alpha * slopes) @ B


def auprc(scores, truth) -> float:
    """Area under the precision-recall curve for off-diagonal edges.

    Edges ranked by |score| descending, ties broken by stable index
    order; trapezoidal integration over (recall, precision).
    """
    scores = np.asarray(scores, float)
    truth = np.asarray(truth, bool)
    if scores.shape != truth.shape or scores.shape[0] != scores.shape[1]:
        raise DimensionMismatch("scores and truth must be square and equal")
    n = scores.shape[0]
    off = ~np.eye(n, dtype=bool)
    s = np.abs(scores[off])
    t = truth[off]
    npos = int(t.sum())
    if npos == 0:
        raise InvalidParam("truth has no edges")
    order = np.argsort(-s, kind="stable")
    tp = np.cumsum(t[order])
    ranks = np.arange(1, s.size + 1)
    precision = tp / ranks
    recall = tp / npos
    # prepend the (0, first precision) anchor
    recall = np.concatenate([[0.0], recall])
    precision = np.concatenate([[precision[0]], precision])
    return float(np.trapezoid(precision, recall))


# ----------------------------------------------------------------------
# fitting


def _regime_vectors(regimes: Sequence[InterventionRegime], n: int):
    keeps, shifts = [], []
    for reg in regimes:
        keep = np.ones(n)
        shift = np.zeros(n)
        for j in reg.intervened:
            keep[j] = 0.0
            shift[j] = reg.shift
        keeps.append(keep)
        shifts.append(shift)
    return jnp.asarray(np.stack(keeps)), jnp.asarray(np.stack(shifts))


def fit_grn_model(data: Dict[int, np.ndarray],
                  regimes: Sequence[InterventionRegime], r: int,
                  activation: str = "logistic", cfg=None,
                  unroll_steps: int = 40, dt: float = 0.05,
                  batch_size: int = 100, sinkhorn_reg: float = 1.0,
                  sinkhorn_iters: int = 100, diffusion: float = 0.05,
                  act_decay: float = 0.0,
                  act_hidden: int = 10) -> ModularDriftModel:
    """Fit a ModularDriftModel by matching per-regime pushforwards.

    data maps regime index -> (m, n) mRNA batch; regime 0 must be
    present and acts as the initial distribution for every pushforward.
    The objective sums the (debiased) Sinkhorn divergence between the
    model's Euler-Maruyama pushforward of a fixed subsample of regime-0
    cells (with that regime's mask and shift, and a frozen noise
    realization so the objective is deterministic) and a fixed subsample
    of the observed batch.  Optimized with Adam.
    """
    from .fit import FitConfig, _make_adam_runner

    if activation not in ("logistic", "learnable"):
        raise InvalidParam(f"unknown activation {activation!r}")
    if cfg is None:
        cfg = FitConfig(lr=0.01, iters=600, restarts=1)
    if 0 not in data:
        raise InvalidParam("regime 0 (observational) batch required")
    regimes = sorted(regimes, key=lambda g: g.index)
    idx = [g.index for g in regimes]
    if idx[0] != 0 or any(i not in data for i in idx):
        raise InvalidParam("regimes must start at 0 and all have data")
    n = np.asarray(data[0]).shape[1]
    keeps, shifts = _regime_vectors(regimes, n)

    rng = np.random.default_rng(cfg.seed)
    m = min(batch_size, *(np.asarray(data[i]).shape[0] for i in idx))
    x0 = np.asarray(data[0], float)
    x0 = jnp.asarray(x0[rng.choice(x0.shape[0], size=m, replace=False)])
    targets = []
    for i in idx:
        di = np.asarray(data[i], float)
        targets.append(jnp.asarray(
            di[rng.choice(di.shape[0], size=m, replace=False)]))
    targets = jnp.stack(targets)
    noise = jnp.asarray(rng.normal(size=(len(idx), unroll_steps, m, n)))

    act_proto = None
    n_act = 0
    if activation == "learnable":
        act_proto = make_activation("learnable", hidden=act_hidden,
                                    seed=cfg.seed, n_coords=r)
        n_act = act_proto.flat_params().size
    nab = n * r
    sq = float(np.sqrt(dt))

    def unpack(p):
        A = p[:nab].reshape(n, r)
        B = p[nab:2 * nab].reshape(r, n)
        alpha = p[2 * nab:2 * nab + r]
        beta = p[2 * nab + r:2 * nab + 2 * r]
        D = 0.05 + jax.nn.softplus(p[2 * nab + 2 * r:2 * nab + 2 * r + n])
        act = None
        if act_proto is not None:
            act = act_proto.with_params(p[2 * nab + 2 * r + n:])
        return ModularDriftModel(A, B, alpha, beta, D, diffusion, act)

    def pushforward(model, k):
        def step(x, z):
            v = model.drift(x, keeps[k], shifts[k])
            # floor inside the sqrt keeps its gradient finite at 0
            x = x + dt * v + diffusion * jnp.sqrt(jnp.maximum(x, 1e-6)) * sq * z
            return jnp.maximum(x, 0.0), None

        x, _ = jax.lax.scan(step, x0, noise[k])
        return x

    def objective(p):
        model = unpack(p)
        total = 0.0
        for k in range(len(idx)):
            sim = pushforward(model, k)
            total = total + sinkhorn_divergence(sim, targets[k],
                                                reg=sinkhorn_reg,
                                                max_iter=sinkhorn_iters)
        if cfg.l1_weight > 0:
            total = total + cfg.l1_weight * jnp.sum(jnp.abs(p[:2 * nab]))
        if n_act and act_decay > 0:
            # shrink the activation net toward its warm-start logistic
            # shape; unregularized it overfits the pushforward match
            total = total + act_decay * jnp.sum(
                p[2 * nab + 2 * r + n:] ** 2)
        return total

    run = _make_adam_runner(objective, cfg, None)
    best = None
    for restart in range(cfg.restarts):
        rr = np.random.default_rng(cfg.seed * 100003 + restart)
        p0 = np.concatenate([
            rr.normal(size=nab) / np.sqrt(n * r),
            rr.normal(size=nab) / np.sqrt(n * r),
            np.ones(r),
            np.zeros(r),
            np.zeros(n),
            (make_activation("learnable", hidden=act_hidden,
                             seed=cfg.seed * 100003 + restart,
                             n_coords=r).flat_params()
             if act_proto is not None else np.zeros(0)),
        ])
        p, trace = run(jnp.asarray(p0))
        final = float(trace[-1])
        if np.isfinite(final) and (best is None or final < best[0]):
            best = (final, np.asarray(p), np.asarray(trace))
    if best is None:
        raise Diverged("all restarts produced non-finite losses")
    _, p, trace = best
    model = unpack(jnp.asarray(p))
    model = ModularDriftModel(np.asarray(model.A), np.asarray(model.B),
                              np.asarray(model.alpha), np.asarray(model.beta),
                              np.asarray(model.D), diffusion, model.act)
    object.__setattr__(model, "train_trace", trace)
    return model
