"""Quantitative inverse function theorem: radii, map constants, certificates.

For a C^2 map ``F`` on the ball ``B(x0, R)`` with ``L = |DF(x0)|``,
``M = |DF(x0)^{-1}|`` and ``K = sup |D^2 F|``, the radii are

``R1 = min(1 / (2 K M), R)``, ``R2 = min(1 / R1, 1 / (2 M (L + K R1)))``
and ``R3 = R2 / (2 L)``.

The first branch of ``R2`` is reported exactly as stated; ``alt_R2`` uses
``min(R1, ...)`` instead and is labelled as a comparison value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .curvature import curvature_norm_estimate
from .errors import (
    LeftDomain,
    NoConvergence,
    NonPositiveInput,
    OutOfNormalBall,
    SingularJacobian,
)
from .geodesics import Frame, default_step, flow
from .metric_fields import MetricField, _same_chart


# ---------------------------------------------------------------------------
# radii


@dataclass(frozen=True)
class IFTBounds:
    L: float
    M: float
    K: float
    R: float
    R1: float
    R2: float
    R3: float
    alt_R2: float
    alt_R3: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("L", "M", "K", "R", "R1", "R2", "R3", "alt_R2", "alt_R3")}


def ift_bounds(L: float, M: float, K: float, R: float) -> IFTBounds:
    """Radii of the quantitative inverse function theorem."""
    if not (L > 0 and M > 0 and R > 0):
        raise NonPositiveInput("L, M and R must be positive")
    if not K >= 0:
        raise NonPositiveInput("K must be non-negative")
    inv_2KM = math.inf if K == 0 else 1.0 / (2.0 * K * M)
    R1 = min(inv_2KM, R)
    second = 1.0 / (2.0 * M * (L + K * R1))
    R2 = min(1.0 / R1, second)
    R3 = R2 / (2.0 * L)
    alt_R2 = min(R1, second)
    return IFTBounds(L, M, K, R, R1, R2, R3, alt_R2, alt_R2 / (2.0 * L))


# ---------------------------------------------------------------------------
# map constants


def _as_map(F: Callable, n: int) -> Callable:
    """Wrap ``F`` so it maps ``(B, n)`` arrays to ``(B, n)`` arrays."""

    def G(X):
        X = np.asarray(X, dtype=float).reshape(-1, n)
        return np.asarray(F(X), dtype=float).reshape(len(X), n)

    return G


def central_jacobian(F: Callable, X, h: float) -> np.ndarray:
    """Central-difference Jacobians ``dF^k / dx^i`` at a batch, shape ``(B, n, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B, n = X.shape
    E = np.eye(n) * h
    pts = np.concatenate([X[:, None, :] + E[None], X[:, None, :] - E[None]], axis=1)
    vals = F(pts.reshape(-1, n)).reshape(B, 2, n, n)
    return np.swapaxes((vals[:, 0] - vals[:, 1]) / (2 * h), 1, 2)


def second_differences(F: Callable, X, h: float) -> np.ndarray:
    """Central second differences ``H[b, k, i, j] = d_i d_j F^k``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B, n = X.shape
    offs, w = [], []
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    for i, j in pairs:
        for si in (1, -1):
            for sj in (1, -1):
                o = np.zeros(n)
                o[i] += si * h
                o[j] += sj * h
                offs.append(o)
                w.append(si * sj)
    offs = np.array(offs)
    vals = F((X[:, None, :] + offs[None]).reshape(-1, n)).reshape(B, len(pairs), 4, n)
    d = np.einsum("bpsk,s->bpk", vals, np.array(w, dtype=float).reshape(-1, 4)[0]) / (4 * h * h)
    H = np.zeros((B, n, n, n))
    for q, (i, j) in enumerate(pairs):
        H[:, :, i, j] = d[:, q]
        H[:, :, j, i] = d[:, q]
    return H


def unit_direction_set(n: int, count: int = 32) -> np.ndarray:
    """Deterministic unit vectors used to evaluate bilinear-map norms."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    W = np.random.default_rng(12345).standard_normal((count, n))
    W = np.concatenate([np.eye(n), W])
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def bilinear_norm(H, directions) -> np.ndarray:
    """``max |H[u, v]|`` over pairs from ``directions`` (batched over ``H``)."""
    Huv = np.einsum("bkij,ui,vj->buvk", H, directions, directions)
    return np.max(np.linalg.norm(Huv, axis=-1), axis=(1, 2))


def ball_grid(x0, R: float, m: int) -> np.ndarray:
    """Tensor grid with ``m`` nodes per axis on the cube, clipped to the closed ball."""
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    ax = np.linspace(-R, R, m)
    P = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    P = P[np.linalg.norm(P, axis=1) <= R * (1 + 1e-12)]
    return x0 + P


@dataclass
class SmoothMapSample:
    """A map on a ball with its estimated first and second derivative data."""

    F: Callable = dc_field(repr=False)
    x0: np.ndarray = None
    R: float = 0.0
    DF: np.ndarray = None
    DF_inv: np.ndarray = None
    K: float = 0.0
    grid: int = 0
    L: float = 0.0
    M: float = 0.0

    def bounds(self) -> IFTBounds:
        return ift_bounds(self.L, self.M, self.K, self.R)

    def identity_defect(self) -> float:
        return float(np.max(np.abs(self.DF @ self.DF_inv - np.eye(len(self.x0)))))

    def as_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "R": self.R, "L": self.L, "M": self.M, "K": self.K,
                "grid": self.grid, "DF": self.DF.tolist()}


def estimate_map_constants(F: Callable, x0, R: float, grid: int = 9,
                           jacobian: Callable | None = None, directions: int = 32,
                           h1: float | None = None, h2: float | None = None) -> SmoothMapSample:
    """Estimate ``L``, ``M`` and ``K`` for ``F`` on the ball ``B(x0, R)``.

    Parameters
    ----------
    F : callable
        Vectorized map, ``(B, n) -> (B, n)``.
    grid : int
        Nodes per axis for the grid supremum of ``|D^2 F|``.
    jacobian : callable, optional
        Exact derivative ``x -> DF(x)``; central differences otherwise.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = len(x0)
    Fv = _as_map(F, n)
    h1 = 1e-5 * max(R, 1e-3) if h1 is None else h1
    h2 = 1e-3 * R if h2 is None else h2
    DF = np.asarray(jacobian(x0), dtype=float).reshape(n, n) if jacobian else \
        central_jacobian(Fv, x0[None], h1)[0]
    sv = np.linalg.svd(DF, compute_uv=False)
    if sv[-1] < 1e-12:
        raise SingularJacobian(f"smallest singular value {sv[-1]:.3g} of DF(x0)")
    DF_inv = np.linalg.inv(DF)
    pts = ball_grid(x0, R, grid)
    H = second_differences(Fv, pts, h2)
    K = float(bilinear_norm(H, unit_direction_set(n, directions)).max())
    return SmoothMapSample(Fv, x0, float(R), DF, DF_inv, K, grid, float(sv[0]), float(1 / sv[-1]))


# ---------------------------------------------------------------------------
# transition maps


class TransitionMap:
    """``F = (psi_a)^{-1} o psi_b`` with ``psi = exp_p o (frame isometry)``.

    Both exponential maps use the same fixed number of RK4 steps for every
    input so that ``F`` is a smooth function of its argument at the level of
    rounding error; this matters for second differences.
    """

    def __init__(self, g_a: MetricField, g_b: MetricField, p, frame_a: Frame | None = None,
                 frame_b: Frame | None = None, radius: float = 1.0, h: float | None = None,
                 tol: float = 1e-13, max_iter: int = 30):
        _same_chart(g_a, g_b)
        self.g_a, self.g_b = g_a, g_b
        self.p = np.asarray(p, dtype=float)
        self.frame_a = frame_a or Frame.orthonormal(g_a, self.p)
        self.frame_b = frame_b or Frame.orthonormal(g_b, self.p)
        h = default_step(g_a) if h is None else h
        self.dt = 1.0 / max(1, int(math.ceil(max(1.0, radius) / h)))
        self.tol = tol
        self.max_iter = max_iter
        self.Ea_inv = np.linalg.inv(self.frame_a.vectors)

    def psi_b(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        P = np.tile(self.p, (len(X), 1))
        res = flow(self.g_b, P, X @ self.frame_b.vectors.T, 1.0, self.dt)
        if np.any(res.left):
            raise OutOfNormalBall("psi_b image left the chart")
        return res.x

    def psi_a_inverse(self, Z) -> np.ndarray:
        Z = np.atleast_2d(Z)
        dom = self.g_a.domain
        n = self.g_a.dim
        P = np.tile(self.p, (len(Z), 1))
        Y = dom.wrap(Z - P) @ self.Ea_inv.T
        Ea = np.broadcast_to(self.frame_a.vectors, (len(Z), n, n))
        scale = max(1.0, float(np.max(np.abs(Z))))
        best = math.inf
        for _ in range(self.max_iter):
            res = flow(self.g_a, P, Y @ self.frame_a.vectors.T, 1.0, self.dt,
                       J0=np.zeros((len(Z), n, n)), Jd0=Ea)
            if np.any(res.left):
                raise OutOfNormalBall("shooting geodesic of g_a left the chart")
            r = dom.wrap(res.x - Z)
            err = float(np.max(np.abs(r)))
            best = min(best, err)
            if err <= self.tol * scale:
                return Y
            if np.any(np.linalg.det(res.J) <= 0):
                raise OutOfNormalBall("d psi_a is singular or reverses orientation")
            Y = Y - np.linalg.solve(res.J, r[..., None])[..., 0]
        raise NoConvergence("inverse exponential map did not converge", best)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        shape = X.shape
        out = self.psi_a_inverse(self.psi_b(X.reshape(-1, shape[-1])))
        return out.reshape(shape)


def transition_map(g_a: MetricField, g_b: MetricField, p, frame_a: Frame, frame_b: Frame,
                   x) -> np.ndarray:
    """``(psi_p^{g_a})^{-1}(psi_p^{g_b}(x))`` for a single vector ``x``."""
    x = np.asarray(x, dtype=float)
    Fm = TransitionMap(g_a, g_b, p, frame_a, frame_b, radius=max(1.0, float(np.linalg.norm(x))))
    return Fm(x[None])[0]


# ---------------------------------------------------------------------------
# certificates


@dataclass
class Certificate:
    """Sampling-based injectivity and inverse-Lipschitz check."""

    bounds: IFTBounds
    seed: int
    pairs: int
    collisions: int
    min_separation_ratio: float
    collision_witness: dict | None
    lipschitz_pairs: int
    lipschitz_violations: int
    lipschitz_worst_ratio: float
    lipschitz_witness: dict | None
    inverse_failures: int
    injective_pass: bool
    lipschitz_pass: bool

    @property
    def passed(self) -> bool:
        return self.injective_pass and self.lipschitz_pass

    def as_dict(self) -> dict:
        return {"constants": self.bounds.as_dict(), "seed": self.seed, "pairs": self.pairs,
                "collisions": self.collisions,
                "min_separation_ratio": self.min_separation_ratio,
                "collision_witness": self.collision_witness,
                "lipschitz_pairs": self.lipschitz_pairs,
                "lipschitz_violations": self.lipschitz_violations,
                "lipschitz_worst_ratio_over_2L": self.lipschitz_worst_ratio,
                "lipschitz_witness": self.lipschitz_witness,
                "inverse_failures": self.inverse_failures,
                "injective_pass": self.injective_pass, "lipschitz_pass": self.lipschitz_pass}


def _ball_samples(rng, center, R, count):
    n = len(center)
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = R * rng.random(count) ** (1.0 / n)
    return center + d * r[:, None]


def invert_map(sample: SmoothMapSample, Y, tol: float = 1e-12, max_iter: int = 50):
    """Damped Newton for ``F(x) = y`` seeded by the linearization at ``x0``."""
    F = sample.F
    Y = np.atleast_2d(Y)
    y0 = F(sample.x0[None])[0]
    X = sample.x0 + (Y - y0) @ sample.DF_inv.T
    h = 1e-6 * max(sample.R, 1e-3)
    ok = np.zeros(len(Y), dtype=bool)
    for _ in range(max_iter):
        r = F(X) - Y
        nr = np.linalg.norm(r, axis=1)
        ok = nr <= tol * np.maximum(1.0, np.linalg.norm(Y, axis=1))
        if np.all(ok):
            break
        Jm = central_jacobian(F, X, h)
        step = -np.linalg.solve(Jm, r[..., None])[..., 0]
        lam = np.ones(len(Y))
        for _ in range(20):
            trial = X + lam[:, None] * step
            better = np.linalg.norm(F(trial) - Y, axis=1) < nr
            if np.all(better | ok):
                break
            lam = np.where(better | ok, lam, 0.5 * lam)
        X = np.where(ok[:, None], X, X + lam[:, None] * step)
    return X, ok


def certify_injectivity(F: SmoothMapSample, bounds: IFTBounds, pair_samples: int = 10_000,
                        seed: int = 0, separation_tol: float = 1e-9,
                        lipschitz_pairs: int | None = None) -> Certificate:
    """Look for collisions on the ``R2``-ball and test the inverse-Lipschitz bound.

    Part (a) samples pairs in ``B(x0, R2)`` and counts pairs at distance at
    least ``1e-6`` whose images are closer than ``separation_tol``. Part (b)
    samples image pairs in ``B(F(x0), R3)``, inverts them by Newton and
    checks ``|F^{-1}(y1) - F^{-1}(y2)| <= 2 L |y1 - y2|``.
    """
    rng = np.random.default_rng(seed)
    x0 = F.x0
    Fm = F.F
    X1 = _ball_samples(rng, x0, bounds.R2, pair_samples)
    X2 = _ball_samples(rng, x0, bounds.R2, pair_samples)
    Y = Fm(np.concatenate([X1, X2]))
    Y1, Y2 = Y[:pair_samples], Y[pair_samples:]
    dx = np.linalg.norm(X1 - X2, axis=1)
    dy = np.linalg.norm(Y1 - Y2, axis=1)
    considered = dx >= 1e-6
    coll = considered & (dy < separation_tol)
    ratio = np.where(considered, dy / np.where(considered, dx, 1.0), np.inf)
    min_ratio = float(ratio.min()) if np.any(considered) else math.inf
    cw = None
    if np.any(coll):
        k = int(np.flatnonzero(coll)[0])
        cw = {"x1": X1[k].tolist(), "x2": X2[k].tolist(), "image_gap": float(dy[k])}

    m = pair_samples if lipschitz_pairs is None else lipschitz_pairs
    y0 = Fm(x0[None])[0]
    Z1 = _ball_samples(rng, y0, bounds.R3, m)
    Z2 = _ball_samples(rng, y0, bounds.R3, m)
    W, ok = invert_map(F, np.concatenate([Z1, Z2]))
    ok_pair = ok[:m] & ok[m:]
    W1, W2 = W[:m], W[m:]
    dz = np.linalg.norm(Z1 - Z2, axis=1)
    dw = np.linalg.norm(W1 - W2, axis=1)
    valid = ok_pair & (dz > 0)
    lip_ratio = np.where(valid, dw / np.where(dz > 0, dz, 1.0) / (2 * bounds.L), 0.0)
    viol = valid & (lip_ratio > 1 + 1e-9)
    lw = None
    worst = float(lip_ratio.max()) if m else 0.0
    if np.any(viol):
        k = int(np.argmax(lip_ratio))
        lw = {"y1": Z1[k].tolist(), "y2": Z2[k].tolist(), "ratio_over_2L": float(lip_ratio[k])}
    return Certificate(bounds, int(seed), int(pair_samples), int(coll.sum()), min_ratio, cw,
                       int(valid.sum()), int(viol.sum()), worst, lw, int((~ok_pair).sum()),
                       not np.any(coll), not np.any(viol))


# ---------------------------------------------------------------------------
# second derivatives of transition maps


@dataclass
class SecondDerivativeReport:
    """Grid suprema of ``|D^2 F|`` for transition maps at several base points."""

    S: float
    S1: float
    measured_sup_R: float
    measured_sup_DR: float
    premise_ok: bool
    per_point: list
    max_coarse: float
    max_fine: float
    finite: bool
    stable: bool

    @property
    def passed(self) -> bool:
        return self.finite and self.stable

    def as_dict(self) -> dict:
        return {"S": self.S, "S1": self.S1, "measured_sup_R": self.measured_sup_R,
                "measured_sup_DR": self.measured_sup_DR, "premise_ok": self.premise_ok,
                "per_point": self.per_point, "max_coarse": self.max_coarse,
                "max_fine": self.max_fine, "finite": self.finite, "stable": self.stable}


def transition_second_derivative(Fm: TransitionMap, R: float, m: int, h2: float | None = None,
                                 directions: int = 32) -> float:
    n = Fm.g_a.dim
    pts = ball_grid(np.zeros(n), R, m)
    H = second_differences(Fm, pts, 1e-3 * R if h2 is None else h2)
    return float(bilinear_norm(H, unit_direction_set(n, directions)).max())


def second_derivative_bound_check(g_a: MetricField, g_b: MetricField, base_points, S: float,
                                  S1: float, R: float = 0.25, grid: int = 5,
                                  rel_tol: float = 0.1, abs_tol: float = 1e-6,
                                  samples=None) -> SecondDerivativeReport:
    """Grid-sup of ``|D^2 F|`` on ``B(0, R)`` with grid ``m`` and refined ``2m - 1``.

    Stability means the refined supremum is within ``rel_tol`` of the coarse
    one (up to ``abs_tol`` for near-zero values).
    """
    _same_chart(g_a, g_b)
    base_points = np.atleast_2d(np.asarray(base_points, dtype=float))
    if samples is None:
        samples = g_a.domain.sample(64, seed=0)
    est = [curvature_norm_estimate(g, samples) for g in (g_a, g_b)]
    sup_R = max(e.sup_R for e in est)
    sup_DR = max(e.sup_DR for e in est)
    rows = []
    for p in base_points:
        Fm = TransitionMap(g_a, g_b, p, radius=R)
        coarse = transition_second_derivative(Fm, R, grid)
        fine = transition_second_derivative(Fm, R, 2 * grid - 1)
        stable = abs(fine - coarse) <= rel_tol * coarse + abs_tol
        rows.append({"p": p.tolist(), "coarse": coarse, "fine": fine, "stable": bool(stable)})
    max_c = max(r["coarse"] for r in rows)
    max_f = max(r["fine"] for r in rows)
    finite = bool(np.isfinite(max_c) and np.isfinite(max_f))
    return SecondDerivativeReport(S, S1, sup_R, sup_DR, sup_R < S and sup_DR < S1, rows,
                                  max_c, max_f, finite, all(r["stable"] for r in rows))
