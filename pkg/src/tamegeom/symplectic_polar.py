"""Polar decomposition of a symplectic form against a metric, and J-paths.

Everything here is pointwise linear algebra on a symplectic vector space
``(V, Omega)``. A metric ``G`` determines ``A`` through
``G(A u, v) = Omega(u, v)``; its polar factor ``J = sqrt(A A*)^{-1} A`` is an
``Omega``-compatible almost complex structure, and ``g_J = sym(Omega J)``
sends it back to a metric. Along ``g_t = (1 - t) g_0 + t g_1`` the
eigenvalues of ``A_t A_t*`` satisfy

``1 / lambda_{i,t} = 1 + t (1 - t) (lambda_i + 1 / lambda_i - 2)``

with ``lambda_i`` the eigenvalues of ``-J_1 J_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import mpmath
import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import (
    DegenerateForm,
    DimensionMismatch,
    NotAlmostComplex,
    NotSPD,
    NotTame,
    SingularA,
    SingularMatrix,
    Unclassifiable,
)

_W = np.array([[0.0, 1.0], [-1.0, 0.0]])


# ---------------------------------------------------------------------------
# forms and basic operators


class SymplecticForm:
    """Nondegenerate antisymmetric form ``Omega(u, v) = u^T W v``."""

    def __init__(self, matrix=None, dim: int = 2):
        if matrix is None:
            if dim % 2:
                raise DimensionMismatch("a symplectic form needs even dimension")
            matrix = np.kron(np.eye(dim // 2), _W)
        W = np.array(matrix, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] % 2:
            raise DimensionMismatch(f"form matrix has shape {W.shape}")
        scale = max(1.0, float(np.max(np.abs(W))))
        if np.max(np.abs(W + W.T)) > 1e-12 * scale:
            raise DegenerateForm("form matrix is not antisymmetric")
        if abs(np.linalg.det(W)) < 1e-12 * scale ** len(W):
            raise DegenerateForm("form matrix is singular")
        self.matrix = W
        self.dim = len(W)

    @classmethod
    def standard(cls, dim: int = 2) -> "SymplecticForm":
        return cls(None, dim)

    def __call__(self, u, v):
        return np.einsum("...i,ij,...j->...", u, self.matrix, v)

    def __repr__(self):
        return f"SymplecticForm(dim={self.dim})"


def _check_spd(G, name="G") -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"{name} has shape {G.shape}")
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G - G.T)) > 1e-10 * scale:
        raise NotSPD(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise NotSPD(f"{name} is not positive definite") from None
    return 0.5 * (G + G.T)


def _sym(M):
    return 0.5 * (M + M.T)


def adjoint(A, G) -> np.ndarray:
    """``G``-adjoint ``A* = G^{-1} A^T G``."""
    return np.linalg.solve(G, A.T @ G)


def polar_A(Omega: SymplecticForm, G) -> np.ndarray:
    """The endomorphism ``A`` with ``G(A u, v) = Omega(u, v)``, i.e. ``A = -G^{-1} W``."""
    G = _check_spd(G)
    if G.shape[0] != Omega.dim:
        raise DimensionMismatch("metric and form dimensions differ")
    return -np.linalg.solve(G, Omega.matrix)


def spd_sqrt(S, G=None) -> np.ndarray:
    """Square root of a ``G``-symmetric positive definite ``S``.

    Solves the generalized symmetric problem ``(G S) v = mu G v`` so that the
    root is ``G``-symmetric; ``G`` defaults to the identity.
    """
    S = np.asarray(S, dtype=float)
    G = np.eye(len(S)) if G is None else _check_spd(G)
    GS = G @ S
    scale = max(1.0, float(np.max(np.abs(GS))))
    if np.max(np.abs(GS - GS.T)) > 1e-9 * scale:
        raise NotSPD("S is not symmetric in the G inner product")
    mu, V = sla.eigh(_sym(GS), G)
    if mu[0] <= 0:
        raise NotSPD(f"S has a non-positive eigenvalue {mu[0]:.3g}")
    return (V * np.sqrt(mu)) @ V.T @ G


def polar_J(A, G) -> np.ndarray:
    """Polar factor ``J = sqrt(A A*)^{-1} A`` of a ``G``-skew invertible ``A``."""
    A = np.asarray(A, dtype=float)
    G = _check_spd(G)
    if np.linalg.cond(A) > 1e12:
        raise SingularA("A is numerically singular")
    S = spd_sqrt(A @ adjoint(A, G), G)
    return np.linalg.solve(S, A)


def _check_almost_complex(J, tol=1e-10):
    J = np.asarray(J, dtype=float)
    d = np.max(np.abs(J @ J + np.eye(len(J))))
    if d > tol * max(1.0, float(np.max(np.abs(J))) ** 2):
        raise NotAlmostComplex(f"|J^2 + Id| = {d:.3g}")
    return J


def metric_from_J(Omega: SymplecticForm, J) -> np.ndarray:
    """``g_J(u, v) = (Omega(u, J v) + Omega(v, J u)) / 2``; ``NotTame`` unless positive."""
    J = _check_almost_complex(J)
    g = _sym(Omega.matrix @ J)
    lo = np.linalg.eigvalsh(g)[0]
    if lo <= 0:
        raise NotTame(f"g_J has eigenvalue {lo:.3g}")
    return g


@dataclass
class PolarDecomposition:
    G: np.ndarray
    A: np.ndarray
    AAstar: np.ndarray
    sqrtAAstar: np.ndarray
    J: np.ndarray
    eigenvalues: np.ndarray

    def residuals(self, Omega: SymplecticForm, samples: int = 100, seed: int = 0) -> dict:
        rng = np.random.default_rng(seed)
        n = len(self.G)
        U, V = rng.standard_normal((2, samples, n))
        I = np.eye(n)
        GA = np.einsum("si,ij,sj->s", U @ self.A.T, self.G, V)
        return {
            "defining_relation": float(np.max(np.abs(GA - Omega(U, V)))),
            "skew": float(np.max(np.abs(adjoint(self.A, self.G) + self.A))),
            "sqrt_square": float(np.max(np.abs(self.sqrtAAstar @ self.sqrtAAstar - self.AAstar))),
            "sqrt_symmetry": float(np.max(np.abs(self.G @ self.sqrtAAstar
                                                 - (self.G @ self.sqrtAAstar).T))),
            "J_squared": float(np.max(np.abs(self.J @ self.J + I))),
            "J_orthogonal": float(np.max(np.abs(self.J.T @ self.G @ self.J - self.G))),
        }


def polar_decomposition(Omega: SymplecticForm, G) -> PolarDecomposition:
    G = _check_spd(G)
    A = polar_A(Omega, G)
    AA = A @ adjoint(A, G)
    S = spd_sqrt(AA, G)
    J = np.linalg.solve(S, A)
    lam = sla.eigh(_sym(G @ AA), G, eigvals_only=True)
    return PolarDecomposition(G, A, AA, S, J, lam)


def retraction_check(Omega: SymplecticForm, J) -> float:
    """``|polar_J(polar_A(Omega, g_J)) - J|`` (max entry)."""
    g = metric_from_J(Omega, J)
    return float(np.max(np.abs(polar_J(polar_A(Omega, g), g) - J)))


def inverse_identity_check(J0, J1, tol: float = 1e-10) -> bool:
    """``(-J1 J0)(-J0 J1) = Id`` within ``tol``."""
    J0 = _check_almost_complex(J0)
    J1 = _check_almost_complex(J1)
    d = np.max(np.abs((J1 @ J0) @ (J0 @ J1) - np.eye(len(J0))))
    return bool(d <= tol)


# ---------------------------------------------------------------------------
# eigenvalue cases and pinching


REAL, UNIT = "real", "unit-modulus"


def case_classification(lambdas, tol: float = 1e-10) -> list:
    """Tag eigenvalues of ``-J1 J0`` as real or unit-modulus.

    Returns a list of ``(lambda, tag)``. Tolerances are relative to
    ``max(1, |lambda|)``.
    """
    out = []
    for lam in np.asarray(lambdas, dtype=complex):
        s = max(1.0, abs(lam))
        if abs(lam.imag) <= tol * s and lam.real > 0:
            out.append((complex(lam.real, 0.0), REAL))
        elif abs(abs(lam) - 1.0) <= tol * s:
            if (lam + 1 / lam).real < -tol:
                raise Unclassifiable(f"unit-modulus eigenvalue {lam} has lambda + 1/lambda < 0")
            out.append((complex(lam), UNIT))
        else:
            raise Unclassifiable(f"eigenvalue {lam} is neither real positive nor unit-modulus")
    return out


def pinching_bounds(C: float):
    """Intervals for ``1 / lambda_{i,t}``: real case and unit-modulus case."""
    if not C >= 1:
        raise ValueError("C must be at least 1")
    return (1.0, 0.5 + (C + 1.0 / C) / 4.0), (0.5, 1.0)


def pinching_envelope(C: float):
    real, unit = pinching_bounds(C)
    return unit[0], real[1]


def predicted_reciprocals(lambdas, t: float) -> np.ndarray:
    """``1 + t (1 - t) (lambda + 1/lambda - 2)`` (real part)."""
    lam = np.asarray(lambdas, dtype=complex)
    return np.real(1.0 + t * (1.0 - t) * (lam + 1.0 / lam - 2.0))


@dataclass
class SandwichReport:
    samples: int
    lower: float
    upper: float
    residual: float
    violations: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def sandwich_check(g_t, g_Jt, lambdas, samples: int = 10_000, seed: int = 0,
                   tol: float = 1e-10) -> SandwichReport:
    """Check ``min sqrt(lambda) g_t <= g_{J_t} <= max sqrt(lambda) g_t`` on random vectors.

    ``residual`` is the worst signed violation relative to ``g_t(u, u)``;
    negative values mean every sample is strictly inside.
    """
    g_t = np.asarray(g_t, dtype=float)
    g_Jt = np.asarray(g_Jt, dtype=float)
    if g_t.shape != g_Jt.shape:
        raise DimensionMismatch("metric shapes differ")
    lam = np.real(np.asarray(lambdas))
    lo, hi = math.sqrt(lam.min()), math.sqrt(lam.max())
    U = np.random.default_rng(seed).standard_normal((samples, len(g_t)))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    a = np.einsum("si,ij,sj->s", U, g_t, U)
    b = np.einsum("si,ij,sj->s", U, g_Jt, U)
    r = np.maximum(lo - b / a, b / a - hi)
    return SandwichReport(samples, lo, hi, float(r.max()), int(np.sum(r > tol)), tol)


# ---------------------------------------------------------------------------
# random structures


def random_spd(dim: int, rng, spread: float = 1.0) -> np.ndarray:
    """SPD matrix ``Q diag(exp(spread * z)) Q^T`` with Haar-like ``Q``."""
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return _sym((Q * np.exp(spread * rng.uniform(-1, 1, dim))) @ Q.T)


def random_compatible_J(Omega: SymplecticForm, rng, spread: float = 1.0) -> np.ndarray:
    G = random_spd(Omega.dim, rng, spread)
    return polar_J(polar_A(Omega, G), G)


def random_compatible_pair(Omega: SymplecticForm, seed: int, spread: float = 1.0):
    """Two compatible metrics ``(g0, g1)`` obtained as ``g_J`` of polar factors."""
    rng = np.random.default_rng(seed)
    return tuple(metric_from_J(Omega, random_compatible_J(Omega, rng, spread)) for _ in range(2))


def rotated_tame_pair(angle: float, dim: int = 4, planes=((0, 2),)):
    """Standard ``J0`` and ``J1 = R J0 R^T`` with ``R`` a rotation mixing two symplectic planes.

    ``R`` is orthogonal but not symplectic, so ``J1`` is tame without being
    compatible and ``-J1 J0`` has eigenvalues ``exp(+-i angle)``.
    """
    Omega = SymplecticForm.standard(dim)
    J0 = -Omega.matrix
    R = np.eye(dim)
    for a, b in planes:
        c, s = math.cos(angle), math.sin(angle)
        Q = np.eye(dim)
        Q[a, a] = Q[b, b] = c
        Q[a, b], Q[b, a] = -s, s
        R = Q @ R
    return Omega, J0, R @ J0 @ R.T


# ---------------------------------------------------------------------------
# interpolation


@dataclass
class InterpolationDiagnostics:
    """Per-``t`` eigenvalue data along ``g_t = (1 - t) g0 + t g1``."""

    t: np.ndarray
    C: float
    lambdas: np.ndarray
    tags: list
    pinching: tuple
    envelope: tuple
    measured: np.ndarray
    predicted: np.ndarray
    row_tags: list
    eigen_residual: np.ndarray
    identity_residual: np.ndarray
    symmetry_defect: np.ndarray
    symmetry_flags: list
    sandwich: list
    J_squared: np.ndarray
    symplectic_defect: np.ndarray
    taming_min: np.ndarray
    endpoint_residual: float
    inverse_identity: bool
    tol: float = 1e-10
    extras: dict = dc_field(default_factory=dict)

    @property
    def in_envelope(self) -> bool:
        lo, hi = self.envelope
        return bool(np.all(self.measured >= lo - self.tol) and np.all(self.measured <= hi + self.tol))

    def checks(self) -> dict:
        tol = self.tol
        return {
            "prediction": float(self.eigen_residual.max()) <= tol,
            "identity": float(self.identity_residual.max()) <= tol,
            "envelope": self.in_envelope,
            "J_squared": float(self.J_squared.max()) <= tol,
            "symplectic": float(self.symplectic_defect.max()) <= tol,
            "taming": float(self.taming_min.min()) > 0,
            "sandwich": all(s.passed for s in self.sandwich),
            "endpoints": self.endpoint_residual <= tol,
            "inverse_identity": self.inverse_identity,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    CSV_HEADER = ("t", "i", "lambda_measured", "lambda_predicted", "residual", "case_tag",
                  "bound_lo", "bound_hi")

    def csv_rows(self):
        """Rows of the reciprocal eigenvalues ``1 / lambda_{i,t}`` with case bounds."""
        real, unit = self.pinching
        for k, t in enumerate(self.t):
            for i in range(self.measured.shape[1]):
                tag = self.row_tags[k][i]
                lo, hi = real if tag == REAL else unit
                m, p = self.measured[k, i], self.predicted[k, i]
                yield (float(t), i, float(m), float(p), float(abs(m - p)), tag, lo, hi)

    def summary(self) -> dict:
        return {
            "C": self.C,
            "lambdas": [[float(z.real), float(z.imag)] for z in self.lambdas],
            "tags": self.tags,
            "pinching_real": list(self.pinching[0]),
            "pinching_unit_modulus": list(self.pinching[1]),
            "envelope": list(self.envelope),
            "min_reciprocal": float(self.measured.min()),
            "max_reciprocal": float(self.measured.max()),
            "max_prediction_residual": float(self.eigen_residual.max()),
            "max_identity_residual": float(self.identity_residual.max()),
            "max_symmetry_defect": float(self.symmetry_defect.max()),
            "symmetry_flags": self.symmetry_flags,
            "max_J_squared": float(self.J_squared.max()),
            "max_symplectic_defect": float(self.symplectic_defect.max()),
            "min_taming": float(self.taming_min.min()),
            "max_sandwich_residual": max(s.residual for s in self.sandwich),
            "sandwich_violations": sum(s.violations for s in self.sandwich),
            "endpoint_residual": self.endpoint_residual,
            "inverse_identity": self.inverse_identity,
            "checks": self.checks(),
            "passed": self.passed,
        }


def _compatible_J(Omega, g, name):
    J = polar_J(polar_A(Omega, g), g)
    back = metric_from_J(Omega, J)
    if np.max(np.abs(back - g)) > 1e-9 * max(1.0, float(np.max(np.abs(g)))):
        raise NotTame(f"{name} is not an Omega-compatible metric")
    return J


def interpolate_J_path(Omega: SymplecticForm, g0, g1, t_grid=None, vectors: int = 10_000,
                       seed: int = 0, tol: float = 1e-10) -> InterpolationDiagnostics:
    """Polar factors along the convex sum of two compatible metrics.

    Parameters
    ----------
    vectors : int
        Random vectors per ``t`` for the symplectic, taming and sandwich checks.
    """
    g0, g1 = _check_spd(g0, "g0"), _check_spd(g1, "g1")
    t_grid = np.linspace(0.0, 1.0, 11) if t_grid is None else np.asarray(t_grid, dtype=float)
    n = Omega.dim
    I = np.eye(n)
    J0 = _compatible_J(Omega, g0, "g0")
    J1 = _compatible_J(Omega, g1, "g1")
    lambdas = np.linalg.eigvals(-J1 @ J0)
    lambdas = lambdas[np.lexsort((lambdas.imag, lambdas.real))]
    tagged = case_classification(lambdas)
    tags = [tg for _, tg in tagged]
    mu = np.linalg.eigvalsh(_sym(np.linalg.solve(np.linalg.cholesky(g0), np.linalg.solve(
        np.linalg.cholesky(g0), g1).T)))
    C = float(max(1.0, mu.max(), 1.0 / mu.min()))
    pinch = pinching_bounds(C)
    sym_sum = -J1 @ J0 - J0 @ J1
    rng = np.random.default_rng(seed)

    measured, predicted, row_tags = [], [], []
    eig_res, id_res, sym_def, flags = [], [], [], []
    sandwiches, jsq, sympl, taming = [], [], [], []
    endpoint = 0.0
    for t in t_grid:
        g = (1 - t) * g0 + t * g1
        pd = polar_decomposition(Omega, g)
        A, J = pd.A, pd.J
        m = np.sort(1.0 / pd.eigenvalues)
        pr = predicted_reciprocals(lambdas, t)
        order = np.argsort(pr, kind="stable")
        measured.append(m)
        predicted.append(pr[order])
        row_tags.append([tags[i] for i in order])
        eig_res.append(float(np.max(np.abs(m - pr[order]))))
        Ainv = np.linalg.inv(A)
        lhs = np.linalg.inv(adjoint(A, g)) @ Ainv
        rhs = I + t * (1 - t) * (sym_sum - 2 * I)
        ir = float(np.max(np.abs(lhs - rhs)))
        id_res.append(ir)
        gs = g @ sym_sum
        sd = float(np.max(np.abs(gs - gs.T)))
        sym_def.append(sd)
        if sd > 10 * max(ir, 1e-14):
            flags.append(float(t))
        if t == 0.0:
            endpoint = max(endpoint, float(np.max(np.abs(J - J0))), float(np.max(np.abs(A - J0))))
        if t == 1.0:
            endpoint = max(endpoint, float(np.max(np.abs(J - J1))), float(np.max(np.abs(A - J1))))
        jsq.append(float(np.max(np.abs(J @ J + I))))
        U, V = rng.standard_normal((2, vectors, n))
        sympl.append(float(np.max(np.abs(Omega(U @ J.T, V @ J.T) - Omega(U, V)))))
        taming.append(float(np.min(Omega(U, U @ J.T) / np.sum(U * U, axis=1))))
        gJ = metric_from_J(Omega, J)
        sandwiches.append(sandwich_check(g, gJ, pd.eigenvalues, vectors,
                                         int(rng.integers(2 ** 31)), tol))
    return InterpolationDiagnostics(
        t_grid, C, lambdas, tags, pinch, pinching_envelope(C), np.array(measured),
        np.array(predicted), row_tags, np.array(eig_res), np.array(id_res), np.array(sym_def),
        flags, sandwiches, np.array(jsq), np.array(sympl), np.array(taming), endpoint,
        inverse_identity_check(J0, J1, tol), tol)


# ---------------------------------------------------------------------------
# eigenvalues of M + M^{-1}


@dataclass
class JordanReport:
    lambdas: np.ndarray
    mus: np.ndarray
    max_mismatch: float
    tol: float
    precision: str

    @property
    def passed(self) -> bool:
        return self.max_mismatch <= self.tol


def _match(targets, mus) -> float:
    cost = np.abs(targets[:, None] - mus[None, :])
    r, c = linear_sum_assignment(cost)
    scale = np.maximum(1.0, np.abs(targets[r]))
    return float(np.max(cost[r, c] / scale))


def _mp_eigenvalues(M, dps):
    with mpmath.workdps(dps):
        A = mpmath.matrix(M.tolist())
        lam = mpmath.eig(A, left=False, right=False)
        B = A + mpmath.inverse(A)
        mu = mpmath.eig(B, left=False, right=False)
        lam = np.array([complex(z) for z in lam])
        mu = np.array([complex(z) for z in mu])
    return lam, mu


def jordan_sum_eigenvalues(M, tol: float = 1e-8) -> JordanReport:
    """Compare eigenvalues of ``M + M^{-1}`` with ``{lambda + 1/lambda}``.

    Uses double precision first. Defective matrices have eigenvalues that
    are ill-conditioned (errors of order ``eps^{1/k}`` for a block of size
    ``k``), so whenever the double-precision mismatch exceeds ``tol / 100``
    the eigenvalues are recomputed with mpmath at a working precision that
    grows with the dimension.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"matrix has shape {M.shape}")
    if abs(np.linalg.det(M)) <= 1e-12:
        raise SingularMatrix("matrix is singular")
    lam = np.linalg.eigvals(M)
    mu = np.linalg.eigvals(M + np.linalg.inv(M))
    mism = _match(lam + 1 / lam, mu)
    precision = "double"
    if mism > 0.01 * tol:
        dps = 12 * len(M) + 20
        lam, mu = _mp_eigenvalues(M, dps)
        mism = _match(lam + 1 / lam, mu)
        precision = f"mp{dps}"
    return JordanReport(lam, mu, mism, tol, precision)


_JORDAN_VALUES = (0.25, 0.5, 1.0, 2.0, 3.0, -0.5, -1.0, -2.0)


def _unimodular(dim, rng):
    P = np.eye(dim)
    for _ in range(2 * dim):
        i, j = rng.choice(dim, 2, replace=False)
        E = np.eye(dim)
        E[i, j] = rng.choice([-1.0, 1.0])
        P = E @ P
    return P


def jordan_test_matrix(dim: int, rng, defective: bool) -> np.ndarray:
    """Random invertible matrix; if ``defective``, conjugate of a Jordan form by an integer unimodular matrix."""
    if not defective:
        while True:
            M = rng.standard_normal((dim, dim))
            if abs(np.linalg.det(M)) > 1e-3:
                return M
    sizes = []
    left = dim
    while left:
        k = int(rng.integers(1, left + 1))
        sizes.append(k)
        left -= k
    if max(sizes) < 2:
        sizes = [2] + sizes[2:]
    U = np.zeros((dim, dim))
    pos = 0
    for k in sizes:
        lam = rng.choice(_JORDAN_VALUES)
        for a in range(k):
            U[pos + a, pos + a] = lam
            if a + 1 < k:
                U[pos + a, pos + a + 1] = 1.0
        pos += k
    P = _unimodular(dim, rng)
    return P @ U @ np.round(np.linalg.inv(P))


def jordan_test_matrices(count: int = 1000, seed: int = 0, dims=range(2, 9),
                         defective_fraction: float = 0.25):
    rng = np.random.default_rng(seed)
    dims = list(dims)
    out = []
    for k in range(count):
        d = dims[k % len(dims)]
        out.append(jordan_test_matrix(d, rng, bool(rng.random() < defective_fraction)))
    return out
