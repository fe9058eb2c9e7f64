"""Riemannian metrics on coordinate charts.

A metric field is a map from points of a coordinate ball to symmetric
positive definite matrices, together with access to partial derivatives
up to third order. Closed-form fields are written once as ``jax.numpy``
functions ``fn(x, params)``; their partials come from forward-mode
autodiff and are compiled once per family. Any field can be switched to
central finite differences for dual-route comparisons.

Derivative arrays carry the differentiation indices last:
``dg[..., i, j, a] = d_a g_ij`` and ``d2g[..., i, j, a, b] = d_a d_b g_ij``.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import (
    BadSymmetry,
    DimensionMismatch,
    NotSPD,
    OutOfDomain,
    StepTooLarge,
)

jax.config.update("jax_enable_x64", True)

_BUCKETS = (4, 16, 64, 256, 1024, 4096)


def _bucket(n: int) -> int:
    for b in _BUCKETS:
        if n <= b:
            return b
    return _BUCKETS[-1]


# ---------------------------------------------------------------------------
# chart domains


@dataclass(frozen=True)
class ChartDomain:
    """Coordinate ball ``B^n(r)`` around ``center``.

    Parameters
    ----------
    center : tuple of float
        Chart coordinates of the ball center.
    radius : float
        Ball radius, measured over the non-periodic axes only.
    period : tuple of (float or None), optional
        Coordinate period per axis. Periodic axes are unconstrained by the
        ball and are wrapped when comparing points.
    """

    center: tuple
    radius: float
    period: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("chart radius must be positive")
        if len(self.center) < 2:
            raise ValueError("chart dimension must be at least 2")
        if self.period is not None:
            per = tuple(None if p is None else float(p) for p in self.period)
            if len(per) != len(self.center):
                raise ValueError("period must list one entry per axis")
            object.__setattr__(self, "period", per)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def bounded_axes(self) -> np.ndarray:
        if self.period is None:
            return np.ones(self.dim, dtype=bool)
        return np.array([p is None for p in self.period])

    def distance_from_center(self, X) -> np.ndarray:
        """Euclidean distance to the center over the bounded axes."""
        X = np.asarray(X, dtype=float)
        d = (X - np.asarray(self.center))[..., self.bounded_axes]
        return np.sqrt(np.sum(d * d, axis=-1))

    def margin(self, X) -> np.ndarray:
        """Signed distance from ``X`` to the ball boundary (positive inside)."""
        return self.radius - self.distance_from_center(X)

    def contains(self, X, margin: float = 0.0) -> np.ndarray:
        tol = 1e-12 * self.radius
        return self.margin(X) >= margin - tol

    def wrap(self, delta) -> np.ndarray:
        """Reduce coordinate differences on periodic axes to ``[-P/2, P/2)``."""
        delta = np.array(delta, dtype=float, copy=True)
        if self.period is None:
            return delta
        for k, p in enumerate(self.period):
            if p is not None:
                delta[..., k] = (delta[..., k] + p / 2) % p - p / 2
        return delta

    def sample(self, count: int, seed: int, fill: float = 0.9) -> np.ndarray:
        """Seeded uniform points in the ball of radius ``fill * radius``.

        Periodic axes are sampled over one period centered at the center.
        """
        rng = np.random.default_rng(seed)
        n = self.dim
        mask = self.bounded_axes
        k = int(mask.sum())
        out = np.tile(np.asarray(self.center), (count, 1))
        if k:
            d = rng.standard_normal((count, k))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r = fill * self.radius * rng.random(count) ** (1.0 / k)
            out[:, mask] += d * r[:, None]
        for j in range(n):
            if not mask[j]:
                out[:, j] += (rng.random(count) - 0.5) * self.period[j]
        return out

    def grid(self, m: int, fill: float = 0.9) -> np.ndarray:
        """Tensor grid with ``m`` nodes per axis clipped to the ball."""
        n = self.dim
        axes = []
        for j in range(n):
            c = self.center[j]
            if self.period is not None and self.period[j] is not None:
                half = 0.5 * self.period[j] * (m - 1) / m
            else:
                half = fill * self.radius
            axes.append(np.linspace(c - half, c + half, m))
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        return pts[self.contains(pts, margin=(1 - fill) * self.radius)]


# ---------------------------------------------------------------------------
# coefficient sources


class _Family:
    """A jax coefficient function ``fn(x, params)`` with compiled jets."""

    def __init__(self, name: str, fn: Callable):
        self.name = name
        self.fn = fn
        self._compiled: dict = {}
        self._lock = threading.Lock()

    def _get(self, order: int):
        with self._lock:
            f = self._compiled.get(order)
            if f is None:
                fn = self.fn

                def jet(x, params):
                    out = [fn(x, params)]
                    d = fn
                    for _ in range(order):
                        d = jax.jacfwd(d, argnums=0)
                        out.append(d(x, params))
                    return tuple(out)

                f = jax.jit(jax.vmap(jet, in_axes=(0, None)))
                self._compiled[order] = f
            return f

    def evaluate(self, X: np.ndarray, params, order: int) -> list:
        f = self._get(order)
        B = X.shape[0]
        cap = _BUCKETS[-1]
        chunks = []
        for start in range(0, B, cap):
            part = X[start:start + cap]
            m = part.shape[0]
            size = _bucket(m)
            if size > m:
                part = np.concatenate([part, np.repeat(part[:1], size - m, axis=0)])
            res = f(part, params)
            chunks.append([np.asarray(r)[:m] for r in res])
        if len(chunks) == 1:
            return chunks[0]
        return [np.concatenate([c[k] for c in chunks]) for k in range(order + 1)]


class _FamilySource:
    analytic = True

    def __init__(self, family: _Family, params):
        self.family = family
        self.params = params

    def jet(self, X, order):
        return self.family.evaluate(X, self.params, order)

    def values(self, X):
        return self.family.evaluate(X, self.params, 0)[0]


class _AffineSource:
    """Weighted sum of sources; jets combine linearly."""

    def __init__(self, terms):
        self.terms = [(float(w), src) for w, src in terms if w != 0.0] or [
            (0.0, terms[0][1])
        ]
        self.analytic = all(src.analytic for _, src in self.terms)

    def jet(self, X, order):
        out = None
        for w, src in self.terms:
            parts = src.jet(X, order)
            if out is None:
                out = [w * p for p in parts]
            else:
                for k in range(order + 1):
                    out[k] = out[k] + w * parts[k]
        return out

    def values(self, X):
        out = None
        for w, src in self.terms:
            v = w * src.values(X)
            out = v if out is None else out + v
        return out


class _CallableSource:
    """Plain numpy callable ``fn(x) -> (n, n)``; no analytic partials."""

    analytic = False

    def __init__(self, fn):
        self.fn = fn

    def values(self, X):
        return np.stack([np.asarray(self.fn(x), dtype=float) for x in X])

    def jet(self, X, order):
        raise NotImplementedError("callable fields only support finite differences")


def _fd_stencil(n: int, m: int):
    idx = np.array(list(itertools.product(range(n), repeat=m)), dtype=int)
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=m)))
    weights = np.prod(signs, axis=1)
    offsets = np.zeros((len(idx), len(signs), n))
    for a, multi in enumerate(idx):
        for s, sig in enumerate(signs):
            for k in range(m):
                offsets[a, s, multi[k]] += sig[k]
    return offsets, weights


def _symmetrize_trailing(T: np.ndarray, m: int) -> np.ndarray:
    if m < 2:
        return T
    lead = T.ndim - m
    acc = np.zeros_like(T)
    perms = list(itertools.permutations(range(m)))
    for p in perms:
        acc += np.transpose(T, tuple(range(lead)) + tuple(lead + q for q in p))
    return acc / len(perms)


# ---------------------------------------------------------------------------
# metric fields


@dataclass(frozen=True, eq=False)
class MetricField:
    """Smooth metric coefficient field on a chart ball.

    Parameters
    ----------
    dim : int
        Chart dimension.
    domain : ChartDomain
        Coordinate ball on which the field is used.
    label : str
        Human-readable name, e.g. a gallery label.
    source : object
        Coefficient provider (internal).
    deriv_mode : {"analytic", "finite-difference"}
        How partial derivatives are obtained.
    steps : tuple of float, optional
        Finite-difference steps for orders 1, 2, 3. Defaults to
        ``(1e-4, 1e-3, 1e-3) * radius``.
    """

    dim: int
    domain: ChartDomain
    label: str
    source: object = dc_field(repr=False)
    deriv_mode: str = "analytic"
    steps: tuple | None = None

    def __post_init__(self):
        if self.domain.dim != self.dim:
            raise DimensionMismatch("domain dimension differs from field dimension")
        if self.deriv_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown deriv_mode {self.deriv_mode!r}")
        if self.deriv_mode == "analytic" and not self.source.analytic:
            object.__setattr__(self, "deriv_mode", "finite-difference")

    # construction helpers

    @classmethod
    def from_callable(cls, fn, dim: int, domain: ChartDomain, label: str = "custom",
                      steps=None) -> "MetricField":
        """Wrap ``fn(x) -> (n, n)`` evaluated per point; partials come from finite differences."""
        return cls(dim, domain, label, _CallableSource(fn), "finite-difference", steps)

    def with_fd(self, steps=None) -> "MetricField":
        """Same coefficients, finite-difference partials."""
        if steps is not None and np.isscalar(steps):
            steps = (float(steps),) * 3
        return MetricField(self.dim, self.domain, self.label, self.source,
                           "finite-difference", steps)

    def with_analytic(self) -> "MetricField":
        if not self.source.analytic:
            raise ValueError("field has no closed-form partials")
        return MetricField(self.dim, self.domain, self.label, self.source, "analytic")

    def with_domain(self, domain: ChartDomain) -> "MetricField":
        return MetricField(self.dim, domain, self.label, self.source,
                           self.deriv_mode, self.steps)

    def fd_steps(self) -> tuple:
        if self.steps is not None:
            return tuple(float(h) for h in self.steps)
        r = self.domain.radius
        return (1e-4 * r, 1e-3 * r, 1e-3 * r)

    # evaluation

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected points of length {self.dim}, got {X.shape[-1]}")
        return X.reshape(-1, self.dim)

    def _check_domain(self, X, order: int):
        if not np.all(self.domain.contains(X)):
            bad = X[~self.domain.contains(X)][0]
            raise OutOfDomain(f"point {bad.tolist()} lies outside the chart ball of {self.label}")
        if self.deriv_mode == "finite-difference" and order > 0:
            h = self.fd_steps()
            need = max((k + 1) * h[k] for k in range(order))
            margin = self.domain.margin(X)
            if np.any(margin < need - 1e-12 * self.domain.radius):
                raise StepTooLarge(
                    f"finite-difference stencil of width {need:.3g} exceeds the "
                    f"domain margin {float(margin.min()):.3g}")

    def values(self, X, check: bool = True) -> np.ndarray:
        """Metric matrices at a batch of points, shape ``(B, n, n)``."""
        X = self._points(X)
        if check:
            self._check_domain(X, 0)
        g = self.source.values(X)
        if check:
            _require_spd(g, self.label)
        return g

    def jet(self, X, order: int, check: bool = True) -> list:
        """``[g, dg, ..., d^order g]`` at a batch of points."""
        if not 0 <= order <= 3:
            raise ValueError("order must be between 0 and 3")
        X = self._points(X)
        if check:
            self._check_domain(X, order)
        if self.deriv_mode == "analytic":
            out = list(self.source.jet(X, order))
        else:
            out = [self.source.values(X)]
            h = self.fd_steps()
            for m in range(1, order + 1):
                out.append(self._fd_partial(X, m, h[m - 1]))
        if check:
            _require_spd(out[0], self.label)
        return out

    def _fd_partial(self, X: np.ndarray, m: int, h: float) -> np.ndarray:
        n = self.dim
        offsets, weights = _fd_stencil(n, m)
        A, S = offsets.shape[:2]
        pts = X[:, None, None, :] + h * offsets[None]
        vals = self.source.values(pts.reshape(-1, n)).reshape(len(X), A, S, n, n)
        d = np.einsum("basij,s->baij", vals, weights) / (2.0 * h) ** m
        d = d.reshape((len(X),) + (n,) * m + (n, n))
        d = np.moveaxis(d, (-2, -1), (1, 2))
        return _symmetrize_trailing(d, m)

    def metric(self, x) -> np.ndarray:
        """Metric matrix at a single point."""
        return self.values(np.asarray(x, dtype=float)[None])[0]

    def partials(self, x, order: int):
        """Partial derivatives at a single point.

        Returns
        -------
        list of ndarray
            ``[dg, ..., d^order g]``; ``dg`` has shape ``(n, n, n)``.
        """
        if not 1 <= order <= 3:
            raise ValueError("order must be 1, 2 or 3")
        out = self.jet(np.asarray(x, dtype=float)[None], order)
        return [a[0] for a in out[1:]]


def _require_spd(g: np.ndarray, label: str = "field"):
    asym = np.max(np.abs(g - np.swapaxes(g, -1, -2))) if g.size else 0.0
    scale = max(1.0, float(np.max(np.abs(g)))) if g.size else 1.0
    if asym > 1e-12 * scale:
        raise NotSPD(f"{label}: metric matrix not symmetric (defect {asym:.3g})")
    if not np.all(np.isfinite(g)):
        raise NotSPD(f"{label}: metric matrix has non-finite entries")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"{label}: metric matrix not positive definite") from exc


def eval_metric(field: MetricField, x) -> np.ndarray:
    return field.metric(x)


def metric_partials(field: MetricField, x, order: int):
    return field.partials(x, order)


# ---------------------------------------------------------------------------
# convex sums


def _same_chart(g0: MetricField, g1: MetricField):
    if g0.dim != g1.dim:
        raise DimensionMismatch(f"dimensions differ: {g0.dim} vs {g1.dim}")
    a, b = g0.domain, g1.domain
    if a.center != b.center or a.radius != b.radius or a.period != b.period:
        raise DimensionMismatch("fields live on different chart domains")


def convex_sum(g0: MetricField, g1: MetricField, s: float) -> MetricField:
    """The field ``(1 - s) g0 + s g1``."""
    _same_chart(g0, g1)
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return g0
    if s == 1.0:
        return g1
    src = _AffineSource([(1.0 - s, g0.source), (s, g1.source)])
    fd = "finite-difference" in (g0.deriv_mode, g1.deriv_mode)
    return MetricField(g0.dim, g0.domain, f"({1 - s:g})*{g0.label}+({s:g})*{g1.label}",
                       src, "finite-difference" if fd else "analytic",
                       g0.steps if g0.deriv_mode == "finite-difference" else g1.steps)


class MetricPath:
    """The segment ``s -> (1 - s) g0 + s g1`` of metrics."""

    def __init__(self, g0: MetricField, g1: MetricField):
        _same_chart(g0, g1)
        self.g0 = g0
        self.g1 = g1

    def __call__(self, s: float) -> MetricField:
        return convex_sum(self.g0, self.g1, s)

    at = __call__


# ---------------------------------------------------------------------------
# quasi-isometry constants


def generalized_eigenvalues(G0: np.ndarray, G1: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``G0^{-1} G1`` for batches of SPD pairs, ascending."""
    L = np.linalg.cholesky(G0)
    Linv = np.linalg.inv(L)
    W = Linv @ G1 @ np.swapaxes(Linv, -1, -2)
    W = 0.5 * (W + np.swapaxes(W, -1, -2))
    return np.linalg.eigvalsh(W)


def quadratic_quasi_isometry_constant(g0: MetricField, g1: MetricField, samples) -> float:
    """Smallest ``A`` with ``g0/A <= g1 <= A g0`` on the samples (quadratic forms)."""
    _same_chart(g0, g1)
    X = np.asarray(samples, dtype=float).reshape(-1, g0.dim)
    if len(X) == 0:
        raise ValueError("sample set is empty")
    lam = generalized_eigenvalues(g0.values(X), g1.values(X))
    return float(max(1.0, lam[:, -1].max(), 1.0 / lam[:, 0].min()))


# ---------------------------------------------------------------------------
# gallery


def _const_fn(x, p):
    return p[0] * jnp.eye(x.shape[0], dtype=x.dtype)


def _sphere_fn(x, p):
    r2 = p[0] ** 2
    return jnp.diag(jnp.stack([r2, r2 * jnp.sin(x[0]) ** 2]))


def _disk_fn(x, p):
    f = 4.0 / (1.0 - jnp.dot(x, x)) ** 2
    return f * jnp.eye(x.shape[0], dtype=x.dtype)


def _half_plane_fn(x, p):
    return jnp.eye(x.shape[0], dtype=x.dtype) / x[-1] ** 2


def _smooth_step(t):
    """C^3 step: 0 for t <= 0, 1 for t >= 1, septic in between."""
    t = jnp.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)


def _cigar_profile(r, p):
    """Radius of the parallel at distance ``r`` from the tip."""
    seam, width = p[0], p[1]
    beta = _smooth_step((r - (seam - width)) / (2.0 * width))
    return (1.0 - beta) * jnp.sin(r) + beta


def _cigar_fn(x, p):
    r2 = jnp.dot(x, x)
    r = jnp.sqrt(r2)
    rho = _cigar_profile(r, p)
    radial = jnp.outer(x, x) / r2
    eye = jnp.eye(2, dtype=x.dtype)
    return radial + (rho ** 2 / r2) * (eye - radial)


_POLY_MAX_DEGREE = 8


def _poly_fn(x, p):
    coeffs, exps = p
    # repeated products: a float power x ** k has a NaN derivative at x = 0
    pw = [jnp.ones_like(x)]
    for _ in range(_POLY_MAX_DEGREE):
        pw.append(pw[-1] * x)
    pw = jnp.stack(pw)
    mono = jnp.prod(pw[exps, jnp.arange(x.shape[0])], axis=1)
    S = jnp.tensordot(coeffs, mono, axes=([2], [0]))
    return jnp.eye(x.shape[0], dtype=x.dtype) + S


def _taylor_fn(x, p):
    c2, c3, c4 = p
    g = (jnp.eye(x.shape[0], dtype=x.dtype)
         + jnp.einsum("ijkl,k,l->ij", c2, x, x)
         + jnp.einsum("ijklm,k,l,m->ij", c3, x, x, x)
         + jnp.einsum("ijklmn,k,l,m,n->ij", c4, x, x, x, x))
    return 0.5 * (g + g.T)


_FAMILIES = {
    "const": _Family("const", _const_fn),
    "sphere": _Family("sphere", _sphere_fn),
    "disk": _Family("disk", _disk_fn),
    "half-plane": _Family("half-plane", _half_plane_fn),
    "cigar": _Family("cigar", _cigar_fn),
    "poly": _Family("poly", _poly_fn),
    "taylor": _Family("taylor", _taylor_fn),
}


def _field(family: str, params, dim, domain, label) -> MetricField:
    params = jax.tree_util.tree_map(lambda a: jnp.asarray(a), params)
    return MetricField(dim, domain, label, _FamilySource(_FAMILIES[family], params))


def flat(dim: int = 2, radius: float = 1.0, center=None) -> MetricField:
    """Euclidean metric ``delta``."""
    center = tuple(center) if center is not None else (0.0,) * dim
    return _field("const", (np.array(1.0),), dim, ChartDomain(center, radius), "flat")


def scaled_flat(c: float, dim: int = 2, radius: float = 1.0, center=None) -> MetricField:
    """Constant multiple ``c * delta``."""
    if not c > 0:
        raise ValueError("scale must be positive")
    center = tuple(center) if center is not None else (0.0,) * dim
    return _field("const", (np.array(float(c)),), dim, ChartDomain(center, radius),
                  f"scaled:{c:g}")


def sphere(r: float = 1.0, radius: float = 1.3) -> MetricField:
    """Round sphere of radius ``r`` in the chart ``(theta, phi)``.

    The chart is centered on the equator point ``(pi/2, 0)``; the azimuth is
    periodic so geodesics may wrap around.
    """
    if not r > 0:
        raise ValueError("sphere radius must be positive")
    if not radius < math.pi / 2:
        raise ValueError("chart must avoid the poles")
    dom = ChartDomain((math.pi / 2, 0.0), radius, (None, 2 * math.pi))
    return _field("sphere", (np.array(float(r)),), 2, dom, f"sphere:{r:g}")


def poincare_disk(radius: float = 0.9) -> MetricField:
    """Curvature -1 disk model ``4|dx|^2 / (1 - |x|^2)^2``."""
    if not 0 < radius < 1:
        raise ValueError("chart must stay inside the unit disk")
    return _field("disk", (np.array(0.0),), 2, ChartDomain((0.0, 0.0), radius),
                  "poincare-disk")


def half_plane(center=(0.0, 1.5), radius: float = 1.0) -> MetricField:
    """Upper half-plane model ``|dx|^2 / y^2``."""
    if not radius < center[1]:
        raise ValueError("chart must stay above the boundary y = 0")
    return _field("half-plane", (np.array(0.0),), 2, ChartDomain(center, radius),
                  "half-plane")


def cigar(seam_width: float = 0.1, center=(1.8, 0.0), radius: float = 1.2) -> MetricField:
    """Cigar surface: hemispherical cap joined to a unit cylinder.

    Written in Cartesian geodesic-polar coordinates about the tip. The
    profile blends ``sin`` into the constant 1 with a smooth step supported
    on ``|r - pi/2| <= seam_width``. The default chart straddles the seam
    and stays away from the tip.
    """
    c = np.asarray(center, dtype=float)
    if np.linalg.norm(c) <= radius:
        raise ValueError("chart must avoid the tip")
    params = (np.array(math.pi / 2), np.array(float(seam_width)))
    return _field("cigar", params, 2, ChartDomain(tuple(c), radius), "cigar")


def cylinder(circumference_radius: float = 1.0, radius: float = 2.0) -> MetricField:
    """Flat cylinder: Euclidean plane with ``x`` periodic of period ``2 pi R``."""
    dom = ChartDomain((0.0, 0.0), radius, (2 * math.pi * circumference_radius, None))
    return _field("const", (np.array(1.0),), 2, dom, f"cylinder:{circumference_radius:g}")


def _exponents(dim: int, degree: int) -> np.ndarray:
    out = [e for e in itertools.product(range(degree + 1), repeat=dim)
           if 1 <= sum(e) <= degree]
    out.sort(key=lambda e: (sum(e), tuple(-k for k in e)))
    return np.array(out, dtype=int)


def polyrand(seed: int, amplitude: float, dim: int = 2, radius: float = 1.0,
             degree: int = 4) -> MetricField:
    """Seeded polynomial perturbation ``delta + S(x)`` of the flat metric.

    Each entry of ``S`` is a polynomial with monomials of degree 1 to
    ``degree`` and no constant term. Coefficients are normalized so that
    ``|S_ij| <= amplitude / dim`` on the chart ball, hence the operator norm
    of ``S`` is at most ``amplitude`` there. The field is SPD for
    ``amplitude < 1``.
    """
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    if not 1 <= degree <= _POLY_MAX_DEGREE:
        raise ValueError(f"degree must lie in [1, {_POLY_MAX_DEGREE}]")
    rng = np.random.default_rng(seed)
    exps = _exponents(dim, degree)
    powers = radius ** exps.sum(axis=1)
    coeffs = np.zeros((dim, dim, len(exps)))
    for i in range(dim):
        for j in range(i, dim):
            c = rng.uniform(-1.0, 1.0, len(exps))
            c *= rng.uniform(0.5, 1.0) / np.sum(np.abs(c) * powers)
            coeffs[i, j] = coeffs[j, i] = c * amplitude / dim
    label = f"polyrand:{seed}:{amplitude:g}"
    return _field("poly", (coeffs, exps), dim, ChartDomain((0.0,) * dim, radius), label)


# ---------------------------------------------------------------------------
# metric from curvature data in normal coordinates


def constant_curvature_tensor(K: float, dim: int) -> np.ndarray:
    """Components ``R_iklj`` of constant curvature ``K`` at the origin.

    The sign follows the normal-coordinate expansion below, in which the
    component ``R_1221`` equals ``-K``.
    """
    d = np.eye(dim)
    return -K * (np.einsum("kl,ij->iklj", d, d) - np.einsum("il,kj->iklj", d, d))


def check_curvature_symmetries(R: np.ndarray, tol: float = 1e-10):
    """Raise ``BadSymmetry`` unless ``R`` has the algebraic curvature symmetries."""
    scale = max(1.0, float(np.max(np.abs(R))))
    defects = {
        "antisymmetry in the first pair": R + np.swapaxes(R, 0, 1),
        "antisymmetry in the second pair": R + np.swapaxes(R, 2, 3),
        "pair symmetry": R - np.transpose(R, (2, 3, 0, 1)),
        "first Bianchi identity": (R + np.transpose(R, (0, 2, 3, 1))
                                   + np.transpose(R, (0, 3, 1, 2))),
    }
    for name, d in defects.items():
        if np.max(np.abs(d)) > tol * scale:
            raise BadSymmetry(f"curvature data violates {name} "
                              f"(defect {np.max(np.abs(d)):.3g})")


def taylor_normal_metric(R, DR=None, D2R=None, radius: float = 1.0) -> MetricField:
    """Metric in normal coordinates from curvature data at the origin.

    Implements the fourth-order expansion

    ``g_ij = delta_ij + 1/3 R_iklj x^k x^l + 1/6 R_iklj;s x^k x^l x^s
    + (1/20 R_iklj;st + 2/45 R_iklm R_jstm) x^k x^l x^s x^t``

    symmetrized in ``(i, j)``.

    Parameters
    ----------
    R : array_like, shape (n, n, n, n)
        Components ``R_iklj``; ``R_1221 = -K`` for a surface of curvature ``K``.
    DR, D2R : array_like, optional
        First and second covariant derivatives with the derivative indices
        last. Default to zero.
    radius : float
        Chart radius.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if R.shape != (n,) * 4 or n < 2:
        raise BadSymmetry("curvature data must have shape (n, n, n, n) with n >= 2")
    check_curvature_symmetries(R)
    DR = np.zeros((n,) * 5) if DR is None else np.asarray(DR, dtype=float)
    D2R = np.zeros((n,) * 6) if D2R is None else np.asarray(D2R, dtype=float)
    if DR.shape != (n,) * 5 or D2R.shape != (n,) * 6:
        raise BadSymmetry("derivative data has the wrong shape")
    # reorder to (i, j, k, l, ...) with the free metric indices first
    c2 = np.einsum("iklj->ijkl", R) / 3.0
    c3 = np.einsum("ikljs->ijkls", DR) / 6.0
    c4 = (np.einsum("ikljst->ijklst", D2R) / 20.0
          + 2.0 / 45.0 * np.einsum("iklm,jstm->ijklst", R, R))
    params = (c2, c3, c4)
    return _field("taylor", params, n, ChartDomain((0.0,) * n, radius), "taylor-normal")


# ---------------------------------------------------------------------------
# labels


def from_label(label: str, dim: int = 2, radius: float | None = None) -> MetricField:
    """Build a gallery field from its string label.

    Recognized labels: ``flat``, ``scaled:<c>``, ``sphere:<r>``,
    ``poincare-disk``, ``half-plane``, ``cigar``,
    ``polyrand:<seed>:<amplitude>`` and ``cylinder:<R>``.
    """
    parts = label.strip().split(":")
    name, args = parts[0], parts[1:]
    kw = {} if radius is None else {"radius": float(radius)}
    try:
        if name == "flat" and not args:
            return flat(dim, **kw)
        if name == "scaled" and len(args) == 1:
            return scaled_flat(float(args[0]), dim, **kw)
        if name == "sphere" and len(args) <= 1:
            return sphere(float(args[0]) if args else 1.0, **kw)
        if name == "poincare-disk" and not args:
            return poincare_disk(**kw)
        if name == "half-plane" and not args:
            return half_plane(**kw)
        if name == "cigar" and not args:
            return cigar(**kw)
        if name == "polyrand" and len(args) == 2:
            return polyrand(int(args[0]), float(args[1]), dim, **kw)
        if name == "cylinder" and len(args) <= 1:
            return cylinder(float(args[0]) if args else 1.0, **kw)
    except ValueError as exc:
        raise ValueError(f"bad gallery label {label!r}: {exc}") from exc
    raise ValueError(f"unknown gallery label {label!r}")


GALLERY_LABELS: Sequence[str] = (
    "flat", "scaled:4", "sphere:1", "sphere:2", "poincare-disk", "half-plane",
    "cigar", "polyrand:1:0.5", "cylinder:1",
)
