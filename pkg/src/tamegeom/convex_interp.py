"""Curvature of convex sums of two metrics.

For ``g_s = (1 - s) g0 + s g1`` let ``P = g0^{-1} g1``, ``Q = (1 - s) I + s P``
and let ``D = Gamma(g1) - Gamma(g0)`` be the difference of the Levi-Civita
connections, a symmetric (1,2)-tensor. Writing ``h(a, b) = g1(Q^{-1} a, b)``
(a symmetric form, the parallel sum of ``g0`` and ``g1`` up to scaling),
the lowered curvature of ``g_s`` is

``R_s(X, Y, Z, W) = (1 - s) R0 + s R1
+ s (1 - s) [h(D(X, W), D(Y, Z)) - h(D(Y, W), D(X, Z))]``.

On the sectional numerator ``(u, v, v, u)`` the bracket becomes
``h(D(u, u), D(v, v)) - h(D(v, u), D(u, v))``. A variant that pairs
``D(u, v)`` with ``D(v, u)`` in both terms (called the *symmetric-pairing*
reading here) has an identically vanishing bracket because ``D`` and ``h``
are symmetric; it is evaluated alongside for diagnostics only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .curvature import geometry, tensor_norm
from .errors import DimensionMismatch, NotSPD, SingularOperator
from .metric_fields import MetricField, _same_chart, convex_sum, generalized_eigenvalues


# ---------------------------------------------------------------------------
# pointwise objects


@dataclass(frozen=True)
class EndoP:
    """The operator ``P`` with ``g0(P X, Y) = g1(X, Y)`` at a point."""

    at: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    g0: np.ndarray = dc_field(repr=False)

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def endo_P(g0: MetricField, g1: MetricField, x) -> EndoP:
    _same_chart(g0, g1)
    x = np.asarray(x, dtype=float)
    G0, G1 = g0.metric(x), g1.metric(x)
    P = np.linalg.solve(G0, G1)
    lam = generalized_eigenvalues(G0, G1)
    if lam[0] <= 0:
        raise NotSPD("P has a non-positive eigenvalue")
    return EndoP(x, P, lam, G0)


@dataclass(frozen=True)
class ConnectionDifference:
    """``D^k_ij = Gamma^k_ij(g1) - Gamma^k_ij(g0)`` at a point, norm w.r.t. g0."""

    at: np.ndarray
    components: np.ndarray
    norm: float


def connection_difference(g0: MetricField, g1: MetricField, x) -> ConnectionDifference:
    _same_chart(g0, g1)
    X = np.asarray(x, dtype=float)[None]
    from .curvature import connection_jet
    c0 = connection_jet(g0.jet(X, 1), 0)
    c1 = connection_jet(g1.jet(X, 1), 0)
    D = c1["gamma"][0] - c0["gamma"][0]
    return ConnectionDifference(X[0], D, float(tensor_norm(D, c0["g"][0], "ull")))


# ---------------------------------------------------------------------------
# the curvature formula


def _parallel_form(G0, G1, s):
    """Matrix of ``h(a, b) = g1(Q^{-1} a, b)`` (batched), checked for singularity."""
    n = G0.shape[-1]
    P = np.linalg.solve(G0, G1)
    Q = (1.0 - s) * np.eye(n) + s * P
    cond = np.linalg.cond(Q)
    if not np.all(np.isfinite(cond)) or np.any(cond > 1e12):
        raise SingularOperator("(1 - s) Id + s P is numerically singular")
    Qinv = np.linalg.inv(Q)
    H = np.einsum("...ab,...ac->...cb", G1, Qinv)   # H[c, b] = g1(Q^{-1} e_c, e_b)
    return 0.5 * (H + np.swapaxes(H, -1, -2)), Qinv


def formula_tensor(geo0: dict, geo1: dict, s: float) -> np.ndarray:
    """Full lowered curvature of ``g_s`` assembled from endpoint data."""
    G0, G1 = geo0["g"], geo1["g"]
    D = geo1["gamma"] - geo0["gamma"]
    H, _ = _parallel_form(G0, G1, s)
    # T_ijkl = h(D_il, D_jk) - h(D_jl, D_ik)
    A = np.einsum("...pq,...pil,...qjk->...ijkl", H, D, D)
    T = A - np.swapaxes(A, -4, -3)
    return (1.0 - s) * geo0["riemann"] + s * geo1["riemann"] + s * (1.0 - s) * T


@dataclass(frozen=True)
class FormulaTerms:
    """Pieces of the convex-sum formula on the numerator ``(u, v, v, u)``."""

    r0: np.ndarray
    r1: np.ndarray
    bracket: np.ndarray
    bracket_symmetric_pairing: np.ndarray
    s: float

    @property
    def value(self) -> np.ndarray:
        s = self.s
        return (1 - s) * self.r0 + s * self.r1 + s * (1 - s) * self.bracket

    @property
    def value_symmetric_pairing(self) -> np.ndarray:
        s = self.s
        return (1 - s) * self.r0 + s * self.r1 + s * (1 - s) * self.bracket_symmetric_pairing

    @property
    def scale(self) -> np.ndarray:
        """Sum of absolute contributions; the yardstick for relative errors."""
        s = self.s
        return (np.abs((1 - s) * self.r0) + np.abs(s * self.r1)
                + np.abs(s * (1 - s) * self.bracket))


def formula_terms(geo0: dict, geo1: dict, s: float, U, V) -> FormulaTerms:
    """Evaluate both pairings of the formula at a batch of points and planes."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    D = geo1["gamma"] - geo0["gamma"]
    H, _ = _parallel_form(geo0["g"], geo1["g"], s)
    Duu = np.einsum("...kij,...i,...j->...k", D, U, U)
    Dvv = np.einsum("...kij,...i,...j->...k", D, V, V)
    Duv = np.einsum("...kij,...i,...j->...k", D, U, V)
    Dvu = np.einsum("...kij,...i,...j->...k", D, V, U)
    h = lambda a, b: np.einsum("...p,...pq,...q->...", a, H, b)
    bracket = h(Duu, Dvv) - h(Dvu, Duv)
    bracket_sym = h(Duv, Dvu) - h(Dvu, Duv)
    r0 = np.einsum("...ijkl,...i,...j,...k,...l->...", geo0["riemann"], U, V, V, U)
    r1 = np.einsum("...ijkl,...i,...j,...k,...l->...", geo1["riemann"], U, V, V, U)
    return FormulaTerms(r0, r1, bracket, bracket_sym, float(s))


def curvature_via_formula(g0: MetricField, g1: MetricField, s: float, x, u, v,
                          pairing: str = "derived") -> float:
    """``R_s(u, v, v, u)`` from endpoint curvature and the connection difference.

    Parameters
    ----------
    pairing : {"derived", "symmetric"}
        ``"derived"`` is the correct formula; ``"symmetric"`` evaluates the
        variant whose bracket pairs ``D(u, v)`` with ``D(v, u)`` twice.
    """
    _same_chart(g0, g1)
    X = np.asarray(x, dtype=float)[None]
    terms = formula_terms(geometry(g0, X), geometry(g1, X), s,
                          np.asarray(u, dtype=float)[None], np.asarray(v, dtype=float)[None])
    if pairing == "derived":
        return float(terms.value[0])
    if pairing == "symmetric":
        return float(terms.value_symmetric_pairing[0])
    raise ValueError(f"unknown pairing {pairing!r}")


def curvature_direct(g0: MetricField, g1: MetricField, s: float, x, u, v) -> float:
    """``R_s(u, v, v, u)`` from the curvature of the convex sum itself."""
    R = geometry(convex_sum(g0, g1, s), np.asarray(x, dtype=float)[None])["riemann"][0]
    return float(np.einsum("ijkl,i,j,k,l->", R, u, v, v, u))


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class InverseNormBound:
    """``1 / (1 - s + s lambda_P)`` with the measured norm it dominates."""

    value: float
    measured: float
    ceiling: float
    holds: bool

    def __float__(self):
        return self.value


def inverse_norm_bound(P: EndoP, s: float) -> InverseNormBound:
    """Bound on the g0-operator norm of ``((1 - s) Id + s P)^{-1}``."""
    lam = P.lambda_min
    value = 1.0 / (1.0 - s + s * lam)
    n = P.matrix.shape[0]
    Qinv = np.linalg.inv((1.0 - s) * np.eye(n) + s * P.matrix)
    L = np.linalg.cholesky(P.g0)
    measured = float(np.linalg.norm(L.T @ Qinv @ np.linalg.inv(L.T), 2))
    ceiling = 1.0 / min(1.0, lam)
    holds = measured <= value * (1 + 1e-10) and value <= ceiling * (1 + 1e-12)
    return InverseNormBound(value, measured, ceiling, holds)


def rs_bound(C0: float, C1: float, Cprime: float, lambda_P: float, s: float) -> float:
    """``(1 - s) C0 + s C1 + 2 s (1 - s) C'^2 / min(1, lambda_P)``."""
    for name, val in (("C0", C0), ("C1", C1), ("Cprime", Cprime)):
        if val < 0:
            raise ValueError(f"{name} must be non-negative")
    if not lambda_P > 0:
        raise ValueError("lambda_P must be positive")
    return (1 - s) * C0 + s * C1 + 2 * s * (1 - s) * Cprime ** 2 / min(1.0, lambda_P)


# ---------------------------------------------------------------------------
# quasi-isometric ratio


@dataclass(frozen=True)
class QuasiIsometryReport:
    """Norm-level comparison constants of two metrics over samples.

    ``A_plus`` and ``A_minus`` are the largest and smallest stretch factors
    ``|v|_{g1} / |v|_{g0}``. ``A`` is the norm-level constant, whose square
    is the quadratic-form constant. ``M`` is ``max |log(stretch)|`` per point.
    """

    samples: np.ndarray
    A_plus: np.ndarray
    A_minus: np.ndarray
    A: float
    M: np.ndarray
    log_relation_defect: float

    @property
    def A_quadratic(self) -> float:
        return self.A ** 2

    def as_dict(self) -> dict:
        return {"A_norm": self.A, "A_quadratic": self.A_quadratic,
                "sup_M": float(self.M.max()), "log_relation_defect": self.log_relation_defect,
                "count": int(len(self.samples))}


def quasi_isometric_ratio(g0: MetricField, g1: MetricField, samples) -> QuasiIsometryReport:
    _same_chart(g0, g1)
    X = np.asarray(samples, dtype=float).reshape(-1, g0.dim)
    if len(X) == 0:
        raise ValueError("sample set is empty")
    lam = generalized_eigenvalues(g0.values(X), g1.values(X))
    if np.any(lam <= 0):
        raise NotSPD("generalized eigenvalue not positive")
    Ap = np.sqrt(lam[:, -1])
    Am = np.sqrt(lam[:, 0])
    A = float(np.max(np.maximum(Ap, 1.0 / Am)))
    M = np.max(np.abs(0.5 * np.log(lam)), axis=1)
    defect = abs(math.log(A) - float(M.max()))
    return QuasiIsometryReport(X, Ap, Am, A, M, defect)


@dataclass
class BilipschitzReport:
    passed: bool
    checked: int
    violations: list

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checked": self.checked,
                "violations": self.violations[:10]}


def distance_convex_bilipschitz_check(d0: Callable, d1: Callable, A: float, s: float,
                                      pairs: Sequence, rtol: float = 1e-9) -> BilipschitzReport:
    """Check the two-sided comparisons of ``d_s = (1 - s) d0 + s d1``."""
    violations = []
    for p, q in pairs:
        a, b = float(d0(p, q)), float(d1(p, q))
        ds = (1 - s) * a + s * b
        checks = [
            ("lower_vs_d0", ((1 - s) + s / A) * a, ds),
            ("upper_vs_d0", ds, ((1 - s) + s * A) * a),
            ("lower_vs_d1", ((1 - s) / A + s) * b, ds),
            ("upper_vs_d1", ds, ((1 - s) * A + s) * b),
        ]
        for name, lo, hi in checks:
            if lo > hi * (1 + rtol) + rtol:
                violations.append({"pair": [np.asarray(p).tolist(), np.asarray(q).tolist()],
                                   "inequality": name, "lhs": lo, "rhs": hi})
    return BilipschitzReport(not violations, len(pairs), violations)


# ---------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ("s", "x", "R_formula", "R_direct", "abs_err", "rel_err", "bound",
                 "sup_norm_Rs")


@dataclass
class SweepResult:
    """Formula-versus-direct comparison and bound check along an s-grid."""

    header: list
    rows: list
    max_abs_err: float
    max_rel_err: float
    symmetric_pairing_flags: int
    bound_ok: bool
    bound_margin: float
    constants: dict
    per_s: list

    def as_dict(self) -> dict:
        return {"max_abs_err": self.max_abs_err, "max_rel_err": self.max_rel_err,
                "symmetric_pairing_flags": self.symmetric_pairing_flags,
                "bound_ok": self.bound_ok, "bound_margin": self.bound_margin,
                "constants": self.constants, "per_s": self.per_s}


def _random_planes(n: int, count: int, rng) -> tuple:
    U = rng.standard_normal((count, n))
    V = rng.standard_normal((count, n))
    return U, V


def convex_path_sweep(g0: MetricField, g1: MetricField, samples, s_values, seed: int = 0,
                      flag_tol: float = 1e-8) -> SweepResult:
    """Compare formula and direct curvature on ``s_values x samples``.

    Bound constants are measured on the same samples with all norms taken
    in a g0-orthonormal frame: ``C0 = sup |R0|``, ``C1 = sup |R1|``,
    ``C' = sup |D| * sqrt(max(1, sup lambda_max(P)))`` and
    ``lambda_P = inf lambda_min(P)``. With these choices the bound dominates
    ``sup |R_s|`` rigorously at the sampled points.
    """
    _same_chart(g0, g1)
    X = np.asarray(samples, dtype=float).reshape(-1, g0.dim)
    rng = np.random.default_rng(seed)
    U, V = _random_planes(g0.dim, len(X), rng)
    geo0 = geometry(g0, X, with_derivative=True)
    geo1 = geometry(g1, X, with_derivative=True)
    G0 = geo0["g"]
    D = geo1["gamma"] - geo0["gamma"]
    lam = generalized_eigenvalues(G0, geo1["g"])
    C0 = float(tensor_norm(geo0["riemann"], G0, "llll").max())
    C1 = float(tensor_norm(geo1["riemann"], G0, "llll").max())
    sup_D = float(tensor_norm(D, G0, "ull").max())
    stretch = math.sqrt(max(1.0, float(lam[:, -1].max())))
    Cprime = sup_D * stretch
    lambda_P = float(lam[:, 0].min())
    constants = {"C0": C0, "C1": C1, "sup_D": sup_D, "margin_factor": stretch,
                 "Cprime": Cprime, "lambda_P": lambda_P,
                 "sup_DR0": float(tensor_norm(geo0["covd_riemann"], G0, "lllll").max()),
                 "sup_DR1": float(tensor_norm(geo1["covd_riemann"], geo1["g"], "lllll").max())}
    rows = []
    per_s = []
    max_abs = max_rel = 0.0
    flags = 0
    bound_ok = True
    bound_margin = math.inf
    for s in s_values:
        s = float(s)
        gs = convex_sum(g0, g1, s)
        geos = geometry(gs, X, with_derivative=True)
        terms = formula_terms(geo0, geo1, s, U, V)
        direct = np.einsum("bijkl,bi,bj,bk,bl->b", geos["riemann"], U, V, V, U)
        formula = terms.value
        abs_err = np.abs(formula - direct)
        scale = np.maximum(terms.scale, np.abs(direct))
        rel_err = np.where(scale > 0, abs_err / np.where(scale > 0, scale, 1.0), abs_err)
        sym_gap = np.abs(terms.value_symmetric_pairing - formula)
        flags += int(np.sum(sym_gap > flag_tol * np.maximum(scale, 1e-300)))
        norm_Rs = tensor_norm(geos["riemann"], G0, "llll")
        sup_Rs = float(norm_Rs.max())
        sup_DRs = float(tensor_norm(geos["covd_riemann"], geos["g"], "lllll").max())
        bound = rs_bound(C0, C1, Cprime, lambda_P, s)
        ok = sup_Rs <= bound * (1 + 1e-9) + 1e-12
        bound_ok &= ok
        bound_margin = min(bound_margin, bound - sup_Rs)
        max_abs = max(max_abs, float(abs_err.max()))
        max_rel = max(max_rel, float(rel_err.max()))
        per_s.append({"s": s, "sup_norm_Rs": sup_Rs, "bound": bound, "bound_ok": bool(ok),
                      "sup_norm_DRs": sup_DRs, "max_rel_err": float(rel_err.max())})
        for b in range(len(X)):
            rows.append([s, *X[b], float(formula[b]), float(direct[b]), float(abs_err[b]),
                         float(rel_err[b]), bound, float(norm_Rs[b])])
    header = ["s"] + [f"x{i}" for i in range(g0.dim)] + list(SWEEP_COLUMNS[2:])
    return SweepResult(header, rows, max_abs, max_rel, flags, bool(bound_ok),
                       float(bound_margin), constants, per_s)
