"""Geodesic flow, exponential maps and injectivity-radius estimates.

All integrators are classical fixed-step RK4 applied to whole batches of
geodesics at once. A geodesic whose position leaves the chart ball is
frozen at its last interior state and its exit time is recorded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .curvature import connection_jet, orthonormal_frame
from .errors import LeftDomain, NoConvergence, StepRejected
from .metric_fields import MetricField


# ---------------------------------------------------------------------------
# states and frames


@dataclass(frozen=True)
class GeodesicState:
    """Position and velocity with the kinetic energy ``1/2 g(v, v)``."""

    x: np.ndarray
    v: np.ndarray
    energy: float

    @classmethod
    def from_xv(cls, field: MetricField, x, v) -> "GeodesicState":
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return cls(x, v, float(0.5 * v @ field.metric(x) @ v))


@dataclass(frozen=True)
class Frame:
    """Orthonormal basis of the tangent space at ``at`` (columns of ``vectors``)."""

    at: np.ndarray
    vectors: np.ndarray

    @classmethod
    def orthonormal(cls, field: MetricField, p) -> "Frame":
        """Gram-Schmidt of the coordinate basis with respect to ``field``."""
        p = np.asarray(p, dtype=float)
        return cls(p, orthonormal_frame(field.metric(p)))

    @classmethod
    def from_vectors(cls, field: MetricField, p, vectors) -> "Frame":
        """Gram-Schmidt of the columns of ``vectors`` with respect to ``field``."""
        p = np.asarray(p, dtype=float)
        g = field.metric(p)
        V = np.array(vectors, dtype=float)
        E = np.zeros_like(V)
        for k in range(V.shape[1]):
            w = V[:, k].copy()
            for j in range(k):
                w -= (E[:, j] @ g @ w) * E[:, j]
            nrm = math.sqrt(w @ g @ w)
            if nrm < 1e-12:
                raise ValueError("frame vectors are linearly dependent")
            E[:, k] = w / nrm
        return cls(p, E)

    def defect(self, field: MetricField) -> float:
        """``max |g(e_i, e_j) - delta_ij|``."""
        G = self.vectors.T @ field.metric(self.at) @ self.vectors
        return float(np.max(np.abs(G - np.eye(len(G)))))

    def apply(self, a) -> np.ndarray:
        return self.vectors @ np.asarray(a, dtype=float)


def default_step(field: MetricField) -> float:
    return min(1e-2, field.domain.radius / 100.0)


def _check_step(field: MetricField, h: float):
    if not h > 0:
        raise StepRejected("step must be positive")
    if h > field.domain.radius / 10.0:
        raise StepRejected(f"step {h:g} exceeds a tenth of the chart radius")


# ---------------------------------------------------------------------------
# batched flow


def _accelerations(field, x, v, J=None, Jd=None):
    order = 1 if J is None else 2
    c = connection_jet(field.jet(x, order, check=False), order - 1)
    G = c["gamma"]
    a = -np.einsum("bkij,bi,bj->bk", G, v, v)
    if J is None:
        return a, None
    dG = c["dgamma"]
    Jdd = (-np.einsum("bkija,bam,bi,bj->bkm", dG, J, v, v)
           - 2.0 * np.einsum("bkij,bi,bjm->bkm", G, v, Jd))
    return a, Jdd


def _rk4_step(field, x, v, J, Jd, dt):
    """One RK4 step of the geodesic equation and (optionally) its linearization."""
    jac = J is not None
    a1, j1 = _accelerations(field, x, v, J, Jd)
    x2, v2 = x + 0.5 * dt * v, v + 0.5 * dt * a1
    J2, Jd2 = (J + 0.5 * dt * Jd, Jd + 0.5 * dt * j1) if jac else (None, None)
    a2, j2 = _accelerations(field, x2, v2, J2, Jd2)
    x3, v3 = x + 0.5 * dt * v2, v + 0.5 * dt * a2
    J3, Jd3 = (J + 0.5 * dt * Jd2, Jd + 0.5 * dt * j2) if jac else (None, None)
    a3, j3 = _accelerations(field, x3, v3, J3, Jd3)
    x4, v4 = x + dt * v3, v + dt * a3
    J4, Jd4 = (J + dt * Jd3, Jd + dt * j3) if jac else (None, None)
    a4, j4 = _accelerations(field, x4, v4, J4, Jd4)
    xn = x + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    vn = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    if not jac:
        return xn, vn, None, None
    Jn = J + dt / 6.0 * (Jd + 2 * Jd2 + 2 * Jd3 + Jd4)
    Jdn = Jd + dt / 6.0 * (j1 + 2 * j2 + 2 * j3 + j4)
    return xn, vn, Jn, Jdn


@dataclass
class FlowResult:
    """Outcome of a batched integration.

    ``x`` and ``v`` are the final (or frozen) states. ``exit_time`` is
    ``inf`` for geodesics that stayed inside. When recorded, ``xs`` and
    ``vs`` have shape ``(steps + 1, B, n)`` and frozen rows repeat their
    last interior state.
    """

    x: np.ndarray
    v: np.ndarray
    J: np.ndarray | None
    Jd: np.ndarray | None
    exit_time: np.ndarray
    dt: float
    steps: int
    xs: np.ndarray | None = None
    vs: np.ndarray | None = None
    Js: np.ndarray | None = None
    Jds: np.ndarray | None = None

    @property
    def left(self) -> np.ndarray:
        return np.isfinite(self.exit_time)


def flow(field: MetricField, X0, V0, T: float, h: float | None = None, J0=None, Jd0=None,
         record: bool = False, record_jacobi: bool = False) -> FlowResult:
    """Integrate geodesics from ``(X0, V0)`` for time ``T``.

    Parameters
    ----------
    X0, V0 : array_like, shape (B, n)
        Initial positions and velocities.
    T : float
        Final time (non-negative).
    h : float, optional
        Nominal step; the actual step is ``T / ceil(T / h)``.
    J0, Jd0 : array_like, shape (B, n, m), optional
        Initial Jacobi fields and their derivatives; integrated along.
    """
    h = default_step(field) if h is None else float(h)
    _check_step(field, h)
    x = np.array(X0, dtype=float, ndmin=2)
    v = np.array(V0, dtype=float, ndmin=2)
    B = len(x)
    jac = J0 is not None
    J = np.array(J0, dtype=float) if jac else None
    Jd = np.array(Jd0, dtype=float) if jac else None
    steps = max(1, int(math.ceil(T / h - 1e-9))) if T > 0 else 0
    dt = T / steps if steps else 0.0
    exit_time = np.full(B, np.inf)
    alive = field.domain.contains(x)
    exit_time[~alive] = 0.0
    xs = vs = Js = Jds = None
    if record:
        xs = np.empty((steps + 1, B, field.dim))
        vs = np.empty_like(xs)
        xs[0], vs[0] = x, v
        if record_jacobi and jac:
            Js = np.empty((steps + 1,) + J.shape)
            Jds = np.empty_like(Js)
            Js[0], Jds[0] = J, Jd
    for k in range(steps):
        idx = np.flatnonzero(alive)
        if len(idx):
            xn, vn, Jn, Jdn = _rk4_step(field, x[idx], v[idx],
                                        J[idx] if jac else None, Jd[idx] if jac else None, dt)
            ok = field.domain.contains(xn) & np.all(np.isfinite(xn), axis=1) \
                & np.all(np.isfinite(vn), axis=1)
            good, bad = idx[ok], idx[~ok]
            x[good], v[good] = xn[ok], vn[ok]
            if jac:
                J[good], Jd[good] = Jn[ok], Jdn[ok]
            exit_time[bad] = k * dt
            alive[bad] = False
        if record:
            xs[k + 1], vs[k + 1] = x, v
            if Js is not None:
                Js[k + 1], Jds[k + 1] = J, Jd
    return FlowResult(x, v, J, Jd, exit_time, dt, steps, xs, vs, Js, Jds)


# ---------------------------------------------------------------------------
# single geodesics


@dataclass
class Trajectory:
    """Sampled geodesic with energies; ``left_domain`` marks truncation."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    left_domain: bool
    exit_time: float

    @property
    def states(self) -> list:
        return [GeodesicState(self.x[k], self.v[k], float(self.energy[k]))
                for k in range(len(self.t))]

    def relative_energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / e0) if e0 > 0 else 0.0

    def csv_rows(self) -> tuple:
        n = self.x.shape[1]
        header = ["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)] + ["energy"]
        rows = [[self.t[k], *self.x[k], *self.v[k], self.energy[k]] for k in range(len(self.t))]
        return header, rows


def _energies(field, xs, vs):
    g = field.values(xs, check=False)
    return 0.5 * np.einsum("ti,tij,tj->t", vs, g, vs)


def integrate_geodesic(field: MetricField, start: GeodesicState, T: float,
                       h: float | None = None, raise_on_exit: bool = False) -> Trajectory:
    """RK4 trajectory from ``start`` over ``[0, T]``, truncated at chart exit."""
    if not field.domain.contains(start.x[None])[0]:
        from .errors import OutOfDomain
        raise OutOfDomain("start point outside the chart ball")
    res = flow(field, start.x[None], start.v[None], T, h, record=True)
    exit_t = float(res.exit_time[0])
    n_keep = res.steps + 1
    if math.isfinite(exit_t):
        if raise_on_exit:
            raise LeftDomain(f"geodesic left the chart at t = {exit_t:.6g}", exit_t)
        n_keep = int(round(exit_t / res.dt)) + 1 if res.dt > 0 else 1
    t = np.arange(n_keep) * res.dt
    xs, vs = res.xs[:n_keep, 0], res.vs[:n_keep, 0]
    return Trajectory(t, xs, vs, _energies(field, xs, vs), math.isfinite(exit_t), exit_t)


def _speed(field, p, v):
    return float(np.sqrt(v @ field.metric(p) @ v))


def exp_map(field: MetricField, p, v, h: float | None = None) -> np.ndarray:
    """Endpoint of the unit-time geodesic with initial velocity ``v``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    speed = _speed(field, p, v)
    if speed == 0.0:
        return p.copy()
    h = default_step(field) if h is None else h
    res = flow(field, p[None], v[None], 1.0, h / max(1.0, speed))
    if res.left[0]:
        raise LeftDomain("geodesic left the chart before time 1", res.exit_time[0])
    return res.x[0]


def exp_map_batch(field: MetricField, p, V, h: float | None = None) -> FlowResult:
    """Unit-time flow of several initial velocities at ``p``."""
    p = np.asarray(p, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    g = field.metric(p)
    speed = float(np.sqrt(np.max(np.einsum("bi,ij,bj->b", V, g, V))))
    h = default_step(field) if h is None else h
    return flow(field, np.tile(p, (len(V), 1)), V, 1.0, h / max(1.0, speed))


def psi_map(field: MetricField, p, frame: Frame, a, h: float | None = None) -> np.ndarray:
    """``exp_p`` composed with the frame isometry ``a -> sum a_i e_i``."""
    return exp_map(field, p, frame.apply(a), h)


# ---------------------------------------------------------------------------
# direction sets


def unit_directions(field: MetricField, p, count: int) -> np.ndarray:
    """``count`` g-unit vectors at ``p``, spread evenly in an orthonormal frame."""
    n = field.dim
    E = Frame.orthonormal(field, p).vectors
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        W = np.stack([np.cos(th), np.sin(th)], axis=1)
    elif n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        r = np.sqrt(1 - z * z)
        W = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        W = np.random.default_rng(0).standard_normal((count, n))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
    return W @ E.T


# ---------------------------------------------------------------------------
# radius searches


@dataclass
class RadiusSearch:
    """Result of a conjugate-point or loop search along sampled directions.

    ``value`` equals ``r_max`` with ``capped`` set when nothing was found.
    ``censored`` counts directions that left the chart before ``r_max``
    (their search is incomplete) and ``min_exit_radius`` the earliest exit.
    """

    value: float
    capped: bool
    r_max: float
    directions: int
    censored: int
    min_exit_radius: float
    witness: dict = dc_field(default_factory=dict)

    def __float__(self):
        return self.value

    def as_dict(self) -> dict:
        return {"value": self.value, "capped": self.capped, "r_max": self.r_max,
                "directions": self.directions, "censored": self.censored,
                "min_exit_radius": self.min_exit_radius, "witness": self.witness}


def _transverse_det(v, J):
    return np.linalg.det(np.concatenate([v[:, :, None], J], axis=2))


def jacobi_conjugate_radius(field: MetricField, p, directions: int = 64, r_max: float = 5.0,
                            h: float | None = None) -> RadiusSearch:
    """Smallest radius where the transverse Jacobi determinant changes sign."""
    if directions < 8:
        raise ValueError("need at least 8 directions")
    p = np.asarray(p, dtype=float)
    n = field.dim
    V = unit_directions(field, p, directions)
    E = Frame.orthonormal(field, p).vectors
    g = field.metric(p)
    # initial derivatives: frame vectors projected orthogonally to each direction
    W = np.empty((directions, n, n - 1))
    for b in range(directions):
        basis = [V[b]]
        for k in range(n):
            w = E[:, k] - sum((u @ g @ E[:, k]) * u for u in basis)
            nrm = math.sqrt(w @ g @ w)
            if nrm > 1e-8 and len(basis) < n:
                basis.append(w / nrm)
        W[b] = np.stack(basis[1:], axis=1)
    X0 = np.tile(p, (directions, 1))
    res = flow(field, X0, V, r_max, h, J0=np.zeros_like(W), Jd0=W, record=True,
               record_jacobi=True)
    dt = res.dt
    dets = np.stack([_transverse_det(res.vs[k], res.Js[k]) for k in range(res.steps + 1)])
    last = np.where(res.left, np.round(np.where(res.left, res.exit_time, 0.0) / dt).astype(int), res.steps)
    best = math.inf
    best_dir = -1
    for b in range(directions):
        d = dets[1:last[b] + 1, b]
        if len(d) < 2:
            continue
        ref = np.sign(d[0])
        change = np.flatnonzero(np.sign(d[1:]) != ref)
        if not len(change):
            continue
        k = int(change[0]) + 1       # sign differs at step k + 1 relative to step 1
        r = _bisect_conjugate(field, res, b, k, ref)
        if r < best:
            best, best_dir = r, b
    exit_r = res.exit_time[res.left]
    censored = int(np.sum(res.left))
    min_exit = float(exit_r.min()) if len(exit_r) else math.inf
    if math.isfinite(best):
        return RadiusSearch(best, False, r_max, directions, censored, min_exit,
                            {"direction": V[best_dir].tolist()})
    return RadiusSearch(float(r_max), True, r_max, directions, censored, min_exit)


def _bisect_conjugate(field, res, b, k, ref, rtol=1e-7):
    """Refine a sign change of the Jacobi determinant between steps k and k + 1."""
    x, v = res.xs[k, b][None], res.vs[k, b][None]
    J, Jd = res.Js[k, b][None], res.Jds[k, b][None]
    lo, hi = 0.0, res.dt
    t0 = k * res.dt
    while hi - lo > rtol * max(t0, res.dt):
        mid = 0.5 * (lo + hi)
        _, vn, Jn, _ = _rk4_step(field, x, v, J, Jd, mid)
        if np.sign(_transverse_det(vn, Jn)[0]) == ref:
            lo = mid
        else:
            hi = mid
    return t0 + 0.5 * (lo + hi)


def _hermite(xs, vs, dt, rows, t):
    """Cubic Hermite interpolation of recorded trajectories ``rows`` at times ``t``."""
    k = np.clip((t // dt).astype(int), 0, xs.shape[0] - 2)
    tau = (t / dt - k)[:, None]
    x0, x1 = xs[k, rows], xs[k + 1, rows]
    m0, m1 = vs[k, rows] * dt, vs[k + 1, rows] * dt
    t2, t3 = tau * tau, tau * tau * tau
    pos = ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + tau) * m0
           + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * m1)
    dpos = ((6 * t2 - 6 * tau) * x0 + (3 * t2 - 4 * tau + 1) * m0
            + (-6 * t2 + 6 * tau) * x1 + (3 * t2 - 2 * tau) * m1) / dt
    return pos, dpos


def _refine_meetings(domain, xs, vs, dt, I, J, L1, L2, lo, H1, H2, iters=40):
    """Minimize meeting defects of ray pairs ``(I, J)`` over their lengths.

    Coordinate descent with step halving, followed by a Gauss-Newton polish;
    all candidates are processed together.
    """

    def defect(a, b):
        xa, va = _hermite(xs, vs, dt, I, a)
        xb, vb = _hermite(xs, vs, dt, J, b)
        return domain.wrap(xa - xb), va, vb

    L1, L2 = L1.astype(float).copy(), L2.astype(float).copy()
    best = np.linalg.norm(defect(L1, L2)[0], axis=1)
    step = np.full(len(I), 2.0 * dt)
    for _ in range(iters):
        improved = np.zeros(len(I), dtype=bool)
        for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a = np.clip(L1 + da * step, lo, H1)
            b = np.clip(L2 + db * step, lo, H2)
            val = np.linalg.norm(defect(a, b)[0], axis=1)
            better = val < best
            L1, L2 = np.where(better, a, L1), np.where(better, b, L2)
            best = np.where(better, val, best)
            improved |= better
        step = np.where(improved, step, 0.5 * step)
    for _ in range(20):
        r, va, vb = defect(L1, L2)
        Jm = np.stack([va, -vb], axis=2)
        delta = -np.einsum("bij,bj->bi", np.linalg.pinv(Jm), r)
        a = np.clip(L1 + delta[:, 0], lo, H1)
        b = np.clip(L2 + delta[:, 1], lo, H2)
        val = np.linalg.norm(defect(a, b)[0], axis=1)
        better = val < best
        if not np.any(better):
            break
        L1, L2 = np.where(better, a, L1), np.where(better, b, L2)
        best = np.where(better, val, best)
    return L1, L2, best


def shortest_geodesic_loop(field: MetricField, p, directions: int = 64, r_max: float = 5.0,
                           h: float | None = None, tol: float = 1e-6,
                           max_candidates: int = 400) -> RadiusSearch:
    """Half-length of the shortest geodesic loop found from pairs of rays.

    Rays ``exp_p(l v)`` are sampled for all unit directions. For each pair
    the meeting defect ``|exp_p(l1 v1) - exp_p(l2 v2)|`` (coordinates, wrapped
    on periodic axes) is scanned on a coarse grid; interior local minima are
    refined by coordinate descent and a Gauss-Newton polish, then verified by
    integrating the two geodesics afresh.
    """
    if directions < 16:
        raise ValueError("need at least 16 directions")
    p = np.asarray(p, dtype=float)
    V = unit_directions(field, p, directions)
    X0 = np.tile(p, (directions, 1))
    res = flow(field, X0, V, r_max, h, record=True)
    dt = res.dt
    last = np.where(res.left, np.round(np.where(res.left, res.exit_time, 0.0) / dt).astype(int), res.steps)
    censored = int(np.sum(res.left))
    exit_r = res.exit_time[res.left]
    min_exit = float(exit_r.min()) if len(exit_r) else math.inf

    stride = max(1, int(round(r_max / 80 / dt)))
    cidx = np.arange(0, res.steps + 1, stride)
    ds = stride * dt
    Xc = res.xs[cidx]                                   # (M, B, n)
    valid = cidx[:, None] <= last[None, :]              # (M, B)
    speeds = np.linalg.norm(res.vs, axis=2)
    vmax = float(np.max(speeds))
    thr = 2.0 * ds * vmax
    M = len(cidx)
    candidates = []
    for i in range(directions - 1):
        js = np.arange(i + 1, directions)
        diff = Xc[:, i][:, None, None, :] - Xc[:, js][None, :, :, :]   # (M, M, J, n)
        dist = np.linalg.norm(field.domain.wrap(diff), axis=-1)
        mask = valid[:, i][:, None, None] & valid[:, js][None, :, :]
        dist = np.where(mask, dist, np.inf)
        pad = np.pad(dist, ((1, 1), (1, 1), (0, 0)), constant_values=np.inf)
        is_min = np.ones_like(dist, dtype=bool)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                if da or db:
                    nb = pad[1 + da:M + 1 + da, 1 + db:M + 1 + db]
                    is_min &= dist <= nb
        is_min &= dist < thr
        # every neighbour must be a valid sample, so exits cannot fake a minimum
        finite = np.isfinite(pad)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                is_min &= finite[1 + da:M + 1 + da, 1 + db:M + 1 + db]
        is_min[0, :, :] = False
        is_min[:, 0, :] = False
        for a, b, q in zip(*np.nonzero(is_min)):
            # reject minima hugging the short-length boundary
            if a <= 1 or b <= 1:
                continue
            candidates.append((cidx[a] * dt + cidx[b] * dt, float(dist[a, b, q]), i,
                               int(js[q]), cidx[a] * dt, cidx[b] * dt))
    candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
    candidates = candidates[:max_candidates]
    best = None
    if candidates:
        C = np.array(candidates)
        I, J = C[:, 2].astype(int), C[:, 3].astype(int)
        H1 = np.minimum(r_max, last[I] * dt)
        H2 = np.minimum(r_max, last[J] * dt)
        L1, L2, d = _refine_meetings(field.domain, res.xs, res.vs, dt, I, J, C[:, 4],
                                     C[:, 5], 2.0 * ds, H1, H2)
        half = 0.5 * (L1 + L2)
        order = np.lexsort((J, I, half))
        hv = (default_step(field) if h is None else h)
        for c in order:
            if d[c] > tol:
                continue
            i, j, l1, l2 = int(I[c]), int(J[c]), float(L1[c]), float(L2[c])
            ver = flow(field, np.stack([p, p]), np.stack([V[i] * l1, V[j] * l2]), 1.0,
                       hv / max(1.0, l1, l2))
            if np.any(ver.left):
                continue
            vd = float(np.linalg.norm(field.domain.wrap(ver.x[0] - ver.x[1])))
            if vd > tol:
                continue
            best = (float(half[c]), {"directions": [V[i].tolist(), V[j].tolist()],
                                     "lengths": [l1, l2], "defect": vd})
            break
    if best is None or best[0] > r_max:
        return RadiusSearch(float(r_max), True, r_max, directions, censored, min_exit)
    return RadiusSearch(best[0], False, r_max, directions, censored, min_exit, best[1])


@dataclass
class InjectivityEstimate:
    """Lower estimate ``min(conjugate radius, half loop length)`` at a point."""

    at: np.ndarray
    conjugate_radius: float
    half_loop_length: float
    lower_bound: float
    search_radius: float
    conjugate_capped: bool
    loop_capped: bool
    capped: bool
    min_exit_radius: float
    censored_directions: int

    def as_dict(self) -> dict:
        return {"at": self.at.tolist(), "conjugate_radius": self.conjugate_radius,
                "half_loop_length": self.half_loop_length, "lower_bound": self.lower_bound,
                "search_radius": self.search_radius, "conjugate_capped": self.conjugate_capped,
                "loop_capped": self.loop_capped, "capped": self.capped,
                "min_exit_radius": self.min_exit_radius,
                "censored_directions": self.censored_directions}


def injectivity_radius_estimate(field: MetricField, p, r_max: float = 5.0,
                                directions: int = 64, h: float | None = None
                                ) -> InjectivityEstimate:
    p = np.asarray(p, dtype=float)
    conj = jacobi_conjugate_radius(field, p, directions, r_max, h)
    loop = shortest_geodesic_loop(field, p, directions, r_max, h)
    lower = min(conj.value, loop.value)
    capped = conj.capped and loop.capped
    return InjectivityEstimate(p, conj.value, loop.value, lower, float(r_max), conj.capped,
                               loop.capped, capped,
                               min(conj.min_exit_radius, loop.min_exit_radius),
                               max(conj.censored, loop.censored))


# ---------------------------------------------------------------------------
# distance


@dataclass
class DistanceResult:
    distance: float
    method: str
    defect: float
    velocity: np.ndarray | None = None
    iterations: int = 0

    def __float__(self):
        return self.distance


def _exp_with_derivative(field, p, v, h):
    n = field.dim
    speed = _speed(field, p, v)
    res = flow(field, p[None], v[None], 1.0, h / max(1.0, speed),
               J0=np.zeros((1, n, n)), Jd0=np.eye(n)[None])
    return res.x[0], res.J[0], bool(res.left[0])


def shoot(field: MetricField, p, q, h: float | None = None, max_iter: int = 50,
          tol: float = 1e-12) -> DistanceResult:
    """Solve ``exp_p(v) = q`` by damped Newton using Jacobi fields for ``d exp``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    h = default_step(field) if h is None else h
    dom = field.domain
    v = dom.wrap(q - p)
    if np.linalg.norm(v) == 0:
        return DistanceResult(0.0, "shooting", 0.0, v, 0)
    scale = max(1.0, float(np.linalg.norm(v)))
    best_res = math.inf
    for it in range(max_iter):
        x, Dexp, left = _exp_with_derivative(field, p, v, h)
        if left:
            raise NoConvergence("shooting geodesic left the chart", best_res)
        r = dom.wrap(x - q)
        nr = float(np.linalg.norm(r))
        best_res = min(best_res, nr)
        if nr <= tol * scale:
            return DistanceResult(_speed(field, p, v), "shooting", nr, v, it)
        step = np.linalg.solve(Dexp, -r)
        lam = 1.0
        while lam > 1e-4:
            trial = v + lam * step
            try:
                xt = exp_map(field, p, trial, h)
            except LeftDomain:
                lam *= 0.5
                continue
            if np.linalg.norm(dom.wrap(xt - q)) < nr:
                break
            lam *= 0.5
        else:
            raise NoConvergence("shooting stalled", best_res)
        v = trial
    raise NoConvergence("shooting did not converge", best_res)


def grid_distance(field: MetricField, p, q, m: int = 81) -> float:
    """Graph distance on a chart grid with 16-neighbour stencil (coarse fallback)."""
    dom = field.domain
    if field.dim != 2 or dom.period is not None:
        raise NoConvergence("grid fallback supports non-periodic 2D charts only")
    c = np.asarray(dom.center)
    ax = [np.linspace(c[k] - dom.radius, c[k] + dom.radius, m) for k in range(2)]
    P = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 2)
    inside = dom.contains(P)
    idx = -np.ones(len(P), dtype=int)
    idx[inside] = np.arange(inside.sum())
    pts = P[inside]
    grid_id = idx.reshape(m, m)
    offs = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]
    rows, cols, w = [], [], []
    I, Jg = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    for di, dj in offs:
        I2, J2 = I + di, Jg + dj
        ok = (I2 >= 0) & (I2 < m) & (J2 >= 0) & (J2 < m)
        a = grid_id[I[ok], Jg[ok]]
        b = grid_id[I2[ok], J2[ok]]
        keep = (a >= 0) & (b >= 0)
        a, b = a[keep], b[keep]
        mid = 0.5 * (pts[a] + pts[b])
        d = pts[b] - pts[a]
        g = field.values(mid, check=False)
        rows.append(a)
        cols.append(b)
        w.append(np.sqrt(np.einsum("bi,bij,bj->b", d, g, d)))
    rows, cols, w = map(np.concatenate, (rows, cols, w))
    G = coo_matrix((w, (rows, cols)), shape=(len(pts), len(pts))).tocsr()
    src = int(np.argmin(np.linalg.norm(pts - p, axis=1)))
    dst = int(np.argmin(np.linalg.norm(pts - q, axis=1)))
    return float(dijkstra(G, directed=False, indices=src)[dst])


def geodesic_distance_report(field: MetricField, p, q, h: float | None = None) -> DistanceResult:
    try:
        return shoot(field, p, q, h)
    except NoConvergence as exc:
        try:
            d = grid_distance(field, np.asarray(p, float), np.asarray(q, float))
        except NoConvergence:
            raise exc
        return DistanceResult(d, "grid-dijkstra", exc.best_defect)


def geodesic_distance(field: MetricField, p, q, h: float | None = None) -> float:
    """Length of the chart geodesic from ``p`` to ``q``."""
    return geodesic_distance_report(field, p, q, h).distance
