"""Constructive recovery algorithms and counterexample constructors.

The nonlinear recovery follows the constructive uniqueness argument:
project out the range of A using the intervention means, read off
candidate kernels from the projected Lyapunov identities, reduce to a
simultaneous-diagonalization ("low-rank game") instance, and close with
a small linear solve for the remaining diagonal ambiguity.  With exact
zero-noise moments the pipeline is optimization-free and exact; with
estimated moments an optional Gauss-Newton refinement of the Lyapunov
residuals (seeded at the pipeline output) absorbs the noise
amplification of the sequential algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from . import linalg
from .errors import (AlphaDegenerate, DegenerateSpectrum, DimensionMismatch,
                     InvalidParam, NotHurwitz, RankDeficient)
from .models import NonlinearDrift, fixed_point, make_activation
from .simulate import linearized_nonlinear_moments

GAP_RATIO = 1e3  # singular-value gap required for rank decisions


@dataclass(frozen=True)
class MomentOracle:
    """Per-intervention zero-noise moments (c_i, x*_i, W_i).

    W_i is the epsilon-scaled stationary covariance (Sigma_i / eps in
    the small-noise limit).  Index 0 plays the role of the reference
    intervention.
    """

    interventions: Tuple[np.ndarray, ...]
    means: Tuple[np.ndarray, ...]
    covs: Tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.interventions)

    @property
    def n(self) -> int:
        return self.interventions[0].shape[0]

    @classmethod
    def from_lists(cls, cs, xstars, Ws) -> "MomentOracle":
        if not (len(cs) == len(xstars) == len(Ws)) or len(cs) < 1:
            raise DimensionMismatch("need equally many c, x*, W with k >= 1")
        return cls(tuple(np.asarray(c, float) for c in cs),
                   tuple(np.asarray(x, float) for x in xstars),
                   tuple(linalg.sym(np.asarray(W, float)) for W in Ws))

    @classmethod
    def exact(cls, drift: NonlinearDrift, C) -> "MomentOracle":
        """Zero-noise oracle from the linearized stationary law."""
        C = np.asarray(C, float)
        cs, xs, Ws = [], [], []
        for i in range(C.shape[1]):
            x, w = linearized_nonlinear_moments(drift, C[:, i])
            cs.append(C[:, i])
            xs.append(x)
            Ws.append(w)
        return cls.from_lists(cs, xs, Ws)


@dataclass
class Certificate:
    """Outcome of a counterexample construction's verification."""

    kind: str  # same_distribution | distinct_drift
    checks: List[dict] = field(default_factory=list)

    def add(self, name: str, value: float, tol: float, larger: bool = False):
        ok = value > tol if larger else value <= tol
        self.checks.append({"name": name, "value": float(value),
                            "tol": float(tol), "ok": bool(ok)})

    @property
    def passed(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def to_text(self) -> str:
        lines = [f"certificate kind={self.kind} passed={self.passed}"]
        for c in self.checks:
            lines.append(f"  [{'PASS' if c['ok'] else 'FAIL'}] {c['name']}: "
                         f"{c['value']:.3e} (tol {c['tol']:.1e})")
        return "\n".join(lines)


# ----------------------------------------------------------------------
# linear closed form


def recover_linear_closedform(C, means, omega, D, epsilon: float) -> np.ndarray:
    """Reconstruct L = AB - D from k = r interventions exactly.

    Uses the two linear identities satisfied by L^{-1}:
        L^{-1} C = -means
        L^{-1} (omega D - eps I) P = omega P       (P = projector onto im(A)^perp)
    im(A) itself is read off from D*means - C, whose columns lie in
    im(A).  Stacking both identities gives L^{-1} on a full-rank set of
    directions; inverting yields L.
    """
    C = np.atleast_2d(np.asarray(C, float))
    means = np.atleast_2d(np.asarray(means, float))
    omega = np.asarray(omega, float)
    D = np.asarray(D, float).ravel()
    n = omega.shape[0]
    # columns of D*means - C span im(A) when k = r (generic draw)
    G = D[:, None] * means - C
    P_A = linalg.range_projector(G)
    P = np.eye(n) - P_A
    K = np.hstack([(omega * D[None, :] - epsilon * np.eye(n)) @ P, C])
    V = np.hstack([omega @ P, -means])
    s = np.linalg.svd(K, compute_uv=False)
    if s[n - 1] <= 0 or s[0] / s[n - 1] > 1e10:
        raise RankDeficient("stacked direction matrix is not full rank")
    Linv = V @ linalg.pinv(K)
    return np.linalg.inv(Linv)


# ----------------------------------------------------------------------
# low-rank game (simultaneous diagonalization)


def _als_refine(S_list, X, r, iters=60):
    """Alternating least squares on sum_i |X diag(e_i) Y - S_i|^2."""
    Y = linalg.pinv(X) @ S_list[0]
    for _ in range(iters):
        G = np.stack([np.outer(X[:, j], Y[j, :]).ravel() for j in range(r)],
                     axis=1)
        Gp = linalg.pinv(G)
        E = np.stack([Gp @ Si.ravel() for Si in S_list])
        K = np.hstack([np.diag(E[i]) @ Y for i in range(len(S_list))])
        X = np.hstack(S_list) @ linalg.pinv(K)
        nrm = np.linalg.norm(X, axis=0, keepdims=True)
        if np.any(nrm < 1e-14):
            break
        X = X / nrm
        L = np.vstack([X @ np.diag(E[i]) for i in range(len(S_list))])
        Y = linalg.pinv(L) @ np.vstack(S_list)
    return X, Y


def low_rank_game(S: Sequence[np.ndarray], r: int, seed: int = 0,
                  max_retries: int = 50, refine: bool = True):
    """Recover X (up to column perm/scale) from observations S_i = X D_i Y.

    Jennrich-style: for random weight vectors w, w', the eigenvectors of
    pinv(S(w)) S(w') reveal Y's row space and X = S(w) V.  Draws are
    retried while the eigenvalue separation is poor; the best-separated
    draw wins, optionally polished by alternating least squares (which
    is a no-op at an exact solution but suppresses noise amplification).
    Returns (X_hat, Y_hat) with Y_hat = pinv(X_hat) @ S[0].
    """
    S = [np.atleast_2d(np.asarray(Si, float)) for Si in S]
    if len(S) < 2 and r > 1:
        raise DimensionMismatch("need at least two observation matrices")
    rng = np.random.default_rng(seed)
    if r == 1:
        # rank-one factorization of S[0]
        U, sv, Vt = np.linalg.svd(S[0])
        X = U[:, :1]
        return X, linalg.pinv(X) @ S[0]
    best = None
    best_score = -np.inf
    for _ in range(max_retries):
        w1 = rng.normal(size=len(S))
        w2 = rng.normal(size=len(S))
        Sa = sum(w * Si for w, Si in zip(w1, S))
        Sb = sum(w * Si for w, Si in zip(w2, S))
        T = linalg.pinv(Sa) @ Sb
        ev, V = np.linalg.eig(T)
        # keep the r largest eigenvalues; the rest are pinv artifacts
        # when the observations have more columns than r
        top = np.argsort(-np.abs(ev))[:r]
        ev, V = ev[top], V[:, top]
        scale = max(np.max(np.abs(ev)), 1e-300)
        gap = np.min(np.abs(ev[:, None] - ev[None, :])
                     + np.eye(r) * 10 * scale) / scale
        imag = np.max(np.abs(ev.imag)) / scale
        score = gap - 10.0 * imag
        if score > best_score:
            best_score = score
            best = (Sa, np.real(V), gap)
    if best is None or best[2] < 1e-6:
        raise DegenerateSpectrum(
            f"eigenvalue separation {0 if best is None else best[2]:.2e} "
            f"below 1e-6 after {max_retries} draws")
    Sa, V, _ = best
    X = Sa @ V
    nrm = np.linalg.norm(X, axis=0, keepdims=True)
    if np.any(nrm < 1e-12):
        raise DegenerateSpectrum("collapsed eigenvector column")
    X = X / nrm
    if refine:
        X, _ = _als_refine(S, X, r)
    return X, linalg.pinv(X) @ S[0]


# ----------------------------------------------------------------------
# nonlinear closed form


def _null_basis_gap(M, expected_dim, what):
    """Null basis with the 1e3 singular-value gap-ratio rule."""
    M = np.asarray(M, float)
    _, s, Vt = np.linalg.svd(M)
    n = M.shape[1]
    d = expected_dim
    if d <= 0 or d >= n:
        raise RankDeficient(f"bad expected dimension for {what}")
    kept, dropped = s[n - d - 1], s[n - d]
    if dropped > 0 and kept / max(dropped, 1e-300) < GAP_RATIO:
        raise RankDeficient(
            f"{what}: singular-value gap {kept:.2e}/{dropped:.2e} below 1e3")
    return Vt[n - d:].T


def recover_nonlinear_closedform(oracle: MomentOracle, r: int, seed: int = 0,
                                 refine: bool = False, dt: float = 0.0):
    """Recover (A, B) up to simultaneous permutation/scaling from k = r+1
    interventional zero-noise moments.

    Pipeline (all steps are linear algebra):
      1. P_A from the intervention means (x*_i - c_i spans im(A));
      2. per-intervention kernels Z_i of P W_i, aligned to a shared
         basis S_i = Z_i M_i;
      3. the differences S_i - S_0 form a low-rank-game instance whose
         solution gives the columns of (A^dag)^T;
      4. two linear solves recover the remaining pieces of B, including
         a per-column diagonal fixed by least squares over all
         interventions (median across interventions for robustness).

    refine=True runs a bounded Gauss-Newton pass on the Lyapunov
    residuals seeded at the pipeline output (recommended whenever the
    moments are estimated rather than exact); dt > 0 targets the
    discrete-time stationarity equation of an Euler-Maruyama chain with
    that step, removing discretization bias.
    """
    k = oracle.k
    if k != r + 1:
        raise DimensionMismatch(f"need k = r+1 interventions, got {k}")
    n = oracle.n
    if n <= 2 * r:
        raise InvalidParam("pipeline needs n > 2r")
    rng = np.random.default_rng(seed)
    cs, xs, Ws = oracle.interventions, oracle.means, oracle.covs

    # (1) range of A from the means
    G = np.stack([xs[i] - cs[i] for i in range(1, k)], axis=1)
    P_A = linalg.range_projector(G)
    P = np.eye(n) - P_A

    # (2) kernels of the projected scaled covariances
    Z = [_null_basis_gap(P @ Ws[i], r, f"P W_{i}") for i in range(k)]
    M = [linalg.pinv(P @ Z[i]) @ (P @ Z[0]) for i in range(k)]
    S = [Z[i] @ M[i] for i in range(k)]
    S[0] = Z[0]

    # (3) game on the differences: each S_i - S_0 = X D_i Y with shared
    # X = (A^dag)^T and Y, D_i diagonal
    deltas = [S[i] - S[0] for i in range(1, k)]
    Uhat, _ = low_rank_game(deltas, r, seed=seed)
    w3 = rng.normal(size=r)
    Rhat = linalg.pinv(Uhat) @ sum(w * Di for w, Di in zip(w3, deltas))
    if np.linalg.cond(Rhat) > 1e12:
        raise RankDeficient("game recombination is singular")

    # (4) close: split B into its components along / against im(A)
    Kperp = ((-2.0 * P @ S[0]) @ np.linalg.inv(Rhat)).T
    Ahat = linalg.pinv(Uhat.T)
    Adag = linalg.pinv(Ahat)
    F0 = 2.0 * Adag @ (2.0 * Ws[0] @ P - P) @ linalg.pinv(Kperp)
    if np.linalg.cond(F0) > 1e12:
        raise RankDeficient("inner closing matrix is singular")
    H0 = np.linalg.inv(F0)
    G1 = Kperp - 2.0 * H0 @ Adag

    # per-intervention least squares for the diagonal scaling of B
    lam_all = []
    eye = np.eye(n)
    for i in range(k):
        W = Ws[i]
        cols = []
        for j in range(r):
            Ej = np.zeros((r, r))
            Ej[j, j] = 1.0
            X1 = Ahat @ Ej @ G1 @ W
            cols.append((X1 + X1.T).ravel())
        for j in range(r):
            Ej = np.zeros((r, r))
            Ej[j, j] = 1.0
            X2 = 2.0 * Ahat @ Ej @ Adag @ W
            cols.append((X2 + X2.T).ravel())
        sol, *_ = np.linalg.lstsq(np.stack(cols, axis=1),
                                  (2.0 * W - eye).ravel(), rcond=None)
        s_part, t_part = sol[:r], sol[r:]
        if np.any(np.abs(s_part) < 1e-12):
            raise AlphaDegenerate("vanishing slope coefficient in closing solve")
        lam_all.append(t_part / s_part)
    lam = np.median(np.stack(lam_all), axis=0)
    Bhat = G1 + 2.0 * np.diag(lam) @ Adag

    if refine:
        Ahat, Bhat = _refine_lyapunov_fit(Ahat, Bhat, oracle, r, P_A, dt)
    return Ahat, Bhat


def _refine_lyapunov_fit(A0, B0, oracle: MomentOracle, r: int, P_A,
                         dt: float = 0.0):
    """Gauss-Newton polish of (A, B, per-intervention slopes) against the
    stationarity equations of every intervention.

    Residuals: upper triangle of A_d W A_d^T - W + dt*I (discrete form,
    dt > 0) or L W + W L^T + I (continuous form), plus a soft unit-norm
    gauge on A's columns and a penalty keeping A inside the observed
    range of the means.  Slopes are box-constrained to (0, 1].
    """
    n = A0.shape[0]
    k = oracle.k
    Ws = oracle.covs
    iu = np.triu_indices(n)
    Pperp = np.eye(n) - np.asarray(P_A)
    eye = np.eye(n)

    def slopes_init(A, B, W):
        cols = []
        for j in range(r):
            Lj = np.outer(A[:, j], B[j, :]) @ W
            cols.append((Lj + Lj.T)[iu])
        t = (2.0 * W - eye)[iu]
        s, *_ = np.linalg.lstsq(np.stack(cols, axis=1), t, rcond=None)
        return np.clip(s, 0.02, 0.98)

    A0n = A0 / np.linalg.norm(A0, axis=0, keepdims=True)
    s0 = np.concatenate([slopes_init(A0n, B0, W) for W in Ws])
    th0 = np.concatenate([A0n.ravel(), B0.ravel(), s0])

    def unpack(th):
        A = th[:n * r].reshape(n, r)
        B = th[n * r:2 * n * r].reshape(r, n)
        s = th[2 * n * r:].reshape(k, r)
        return A, B, s

    def resid(th):
        A, B, s = unpack(th)
        out = []
        for i in range(k):
            L = (A * s[i][None, :]) @ B - eye
            if dt > 0:
                Ad = eye + dt * L
                R = (Ad @ Ws[i] @ Ad.T - Ws[i]) / dt + eye
            else:
                R = L @ Ws[i] + Ws[i] @ L.T + eye
            out.append(R[iu])
        out.append(0.1 * (np.linalg.norm(A, axis=0) - 1.0))
        out.append((Pperp @ A).ravel())
        return np.concatenate(out)

    lb = np.concatenate([np.full(2 * n * r, -np.inf), np.full(k * r, 1e-3)])
    ub = np.concatenate([np.full(2 * n * r, np.inf), np.full(k * r, 1.0)])
    th0 = np.clip(th0, lb, ub)
    sol = scipy.optimize.least_squares(resid, th0, bounds=(lb, ub),
                                       method="trf", xtol=1e-14, ftol=1e-14,
                                       max_nfev=2000)
    A, B, _ = unpack(sol.x)
    return A, B


# ----------------------------------------------------------------------
# counterexample constructions


def counterexample_linear_adversarial(n: int, r: int, seed: int = 0):
    """Two distinct linear drifts sharing means and covariance.

    Block construction: A = B = blockdiag(I_r / sqrt(2), 0), D = I,
    omega = blockdiag(I_r, I_{n-r}/2); adding a small skew top-left
    block to L leaves the Lyapunov equation and all means -L^{-1} e_i
    (i > r) untouched.  Needs r >= 2 for a nonzero skew block.
    """
    if not (n > r >= 2):
        raise InvalidParam("construction needs n > r >= 2")
    rng = np.random.default_rng(seed)
    AB = np.zeros((n, n))
    AB[:r, :r] = 0.5 * np.eye(r)
    L = AB - np.eye(n)
    omega = np.eye(n)
    omega[r:, r:] *= 0.5
    Qs = rng.normal(size=(r, r))
    Qs = Qs - Qs.T
    Qs *= 0.05 / max(np.linalg.norm(Qs), 1e-300)
    Q = np.zeros((n, n))
    Q[:r, :r] = Qs
    # omega^{-1} restricted to the top-left block is the identity
    Lhat = L + Q
    interventions = np.eye(n)[:, r:]

    cert = Certificate(kind="same_distribution")
    cert.add("lyapunov residual (L)",
             np.linalg.norm(L @ omega + omega @ L.T + np.eye(n)), 1e-10)
    cert.add("lyapunov residual (L_hat)",
             np.linalg.norm(Lhat @ omega + omega @ Lhat.T + np.eye(n)), 1e-10)
    mean_diff = np.linalg.norm(np.linalg.solve(Lhat, interventions)
                               - np.linalg.solve(L, interventions))
    cert.add("mean difference on untouched interventions", mean_diff, 1e-10)
    cert.add("drift separation |L - L_hat|_F",
             np.linalg.norm(L - Lhat), 0.01, larger=True)
    return L, Lhat, interventions, cert


def counterexample_linear_lower(A, B, C, seed: int = 0):
    """Distinct drift matching all k = r-2 interventional laws (D = I).

    Picks u, v inside im(A) but orthogonal to im(AB L^{-1} C); the skew
    perturbation L_hat = L + omega Q with Q = B^T A^T (u v^T - v u^T) A B
    preserves every mean and the Lyapunov equation while moving the
    drift.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    C = np.atleast_2d(np.asarray(C, float))
    n, r = A.shape
    k = C.shape[1]
    if k != r - 2:
        raise InvalidParam("construction needs k = r - 2 interventions")
    L = A @ B - np.eye(n)
    if not linalg.is_hurwitz(L):
        raise NotHurwitz("A B - I is not Hurwitz")
    omega = linalg.solve_lyapunov(L, np.eye(n))
    span = A @ B @ np.linalg.solve(L, C)  # im(AB L^{-1} C), dim k
    # orthonormal basis of im(A) minus that span
    UA, sA, _ = np.linalg.svd(A, full_matrices=False)
    if sA[-1] < 1e-10 * sA[0]:
        raise RankDeficient("A is column-rank deficient")
    proj = UA @ UA.T - linalg.range_projector(span)
    w, vecs = np.linalg.eigh(linalg.sym(proj))
    free = vecs[:, w > 0.5]
    if free.shape[1] < 2:
        raise RankDeficient("no 2-dimensional orthogonal subspace available")
    u, v = free[:, 0], free[:, 1]
    Qstar = np.outer(u, v) - np.outer(v, u)
    Q = B.T @ A.T @ Qstar @ A @ B
    scale = 1e-2 / max(np.linalg.norm(omega @ Q), 1e-300)
    for _ in range(60):
        Lhat = L + scale * omega @ Q
        if linalg.is_hurwitz(Lhat):
            break
        scale *= 0.5
    else:
        raise RankDeficient("could not keep perturbed drift Hurwitz")

    cert = Certificate(kind="same_distribution")
    if k > 0:
        cert.add("mean preservation |L_hat^{-1}C - L^{-1}C|",
                 np.linalg.norm(np.linalg.solve(Lhat, C)
                                - np.linalg.solve(L, C)), 1e-9)
    cert.add("covariance preservation",
             np.linalg.norm((Lhat @ omega + omega @ Lhat.T)
                            - (L @ omega + omega @ L.T)), 1e-9)
    sv = np.linalg.svd(Lhat + np.eye(n), compute_uv=False)
    rank_gap = sv[r] / max(sv[r - 1], 1e-300) if r < n else 0.0
    cert.add("rank(L_hat + I) = r (relative spill)", rank_gap, 1e-9)
    cert.add("drift separation |L - L_hat|_F",
             np.linalg.norm(L - Lhat), 1e-8, larger=True)
    return Lhat, cert


def counterexample_ode(A, B, C, seed: int = 0, act=None):
    """Distinct B with identical ODE fixed points for all interventions.

    With k <= n - r - 1 there is a unit u orthogonal to im(A) and all
    c_i; every fixed point lies in im(A) + im(C), so B_hat = B + b u^T
    changes nothing at any x*_i while being genuinely different.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    C = np.atleast_2d(np.asarray(C, float))
    n, r = A.shape
    k = C.shape[1]
    if k > n - r - 1:
        raise RankDeficient("no orthogonal direction left: k > n - r - 1")
    if act is None:
        act = make_activation("leaky_logistic", tau=0.1, gamma=0.8)
    rng = np.random.default_rng(seed)
    basis = linalg.null_space_basis(np.hstack([A, C]).T)
    if basis.shape[1] < 1:
        raise RankDeficient("no orthogonal direction found")
    u = basis[:, 0]
    b = rng.normal(size=r)
    b *= 0.5 / max(np.linalg.norm(b), 1e-300)
    Bhat = B + np.outer(b, u)

    drift = NonlinearDrift(A, B, act)
    drift_hat = NonlinearDrift(A, Bhat, act)
    cert = Certificate(kind="distinct_drift")
    worst = 0.0
    for i in range(k):
        xstar = fixed_point(drift, C[:, i])
        resid = np.linalg.norm(
            A @ np.asarray(act.value(Bhat @ xstar)) - xstar + C[:, i])
        worst = max(worst, resid)
    cert.add("fixed points preserved (worst residual)", worst, 1e-9)
    from .fit import align_up_to_perm_scale
    err, _, _ = align_up_to_perm_scale(Bhat.T, B.T)
    cert.add("B separation beyond perm/scale", err, 0.01, larger=True)
    return Bhat, cert
