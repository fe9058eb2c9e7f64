"""Christoffel symbols, curvature tensors and their norms.

Conventions
-----------
``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z`` and
``R_ijkl = g(R(d_i, d_j) d_k, d_l)``, so ``R(u, v, v, u)`` is the numerator
of the sectional curvature. Covariant derivatives carry the derivative
index last: ``DR[i, j, k, l, m] = R_ijkl;m``.

Every routine works on batches of points; the single-point functions are
thin wrappers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DegeneratePlane, NotSPD
from .metric_fields import MetricField


# ---------------------------------------------------------------------------
# jets of the connection


def _first_kind(dg):
    """``G1[l, i, j] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)`` plus derivatives."""
    return 0.5 * (np.swapaxes(dg, -1, -2) + dg - np.moveaxis(dg, -1, -3))


def _first_kind_d(d2g):
    # d2g[..., p, q, a, b]; entry [l, i, j, b] of the derivative of G1
    t1 = np.einsum("...ljib->...lijb", d2g)
    t2 = d2g
    t3 = np.einsum("...ijlb->...lijb", d2g)
    return 0.5 * (t1 + t2 - t3)


def _first_kind_d2(d3g):
    t1 = np.einsum("...ljibc->...lijbc", d3g)
    t3 = np.einsum("...ijlbc->...lijbc", d3g)
    return 0.5 * (t1 + d3g - t3)


def _inverse(g):
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotSPD("metric matrix not positive definite") from exc
    ginv = np.linalg.inv(g)
    return 0.5 * (ginv + np.swapaxes(ginv, -1, -2))


def connection_jet(jet, order: int = 1) -> dict:
    """Christoffel symbols and their partials from metric partials.

    Parameters
    ----------
    jet : list of ndarray
        ``[g, dg, d2g, d3g]`` truncated to at least ``order + 1`` entries.
    order : int
        0 for symbols only, 1 to add ``dgamma``, 2 to add ``d2gamma``.

    Returns
    -------
    dict
        Keys ``g``, ``ginv``, ``gamma`` and, by order, ``dgamma`` with
        ``dgamma[k, i, j, a] = d_a Gamma^k_ij`` and ``d2gamma``.
    """
    g, dg = jet[0], jet[1]
    ginv = _inverse(g)
    G1 = _first_kind(dg)
    gamma = np.einsum("...kl,...lij->...kij", ginv, G1)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    out = {"g": g, "dg": dg, "ginv": ginv, "gamma": gamma}
    if order >= 1:
        d2g = jet[2]
        dginv = -np.einsum("...kp,...pqa,...ql->...kla", ginv, dg, ginv)
        dG1 = _first_kind_d(d2g)
        dgamma = (np.einsum("...kla,...lij->...kija", dginv, G1)
                  + np.einsum("...kl,...lija->...kija", ginv, dG1))
        out.update(d2g=d2g, dginv=dginv, dgamma=dgamma)
        if order >= 2:
            d3g = jet[3]
            d2ginv = -(np.einsum("...kpb,...pqa,...ql->...klab", dginv, dg, ginv)
                       + np.einsum("...kp,...pqab,...ql->...klab", ginv, d2g, ginv)
                       + np.einsum("...kp,...pqa,...qlb->...klab", ginv, dg, dginv))
            d2G1 = _first_kind_d2(d3g)
            d2gamma = (np.einsum("...klab,...lij->...kijab", d2ginv, G1)
                       + np.einsum("...kla,...lijb->...kijab", dginv, dG1)
                       + np.einsum("...klb,...lija->...kijab", dginv, dG1)
                       + np.einsum("...kl,...lijab->...kijab", ginv, d2G1))
            out.update(d3g=d3g, d2gamma=d2gamma)
    return out


def curvature_from_jet(jet, with_derivative: bool = False) -> dict:
    """Riemann tensor (and optionally its covariant derivative) from a jet.

    ``jet`` must contain ``[g, dg, d2g]`` and, when ``with_derivative``,
    also ``d3g``.
    """
    c = connection_jet(jet, 2 if with_derivative else 1)
    G, dG, g = c["gamma"], c["dgamma"], c["g"]
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    d_i = np.einsum("...ljki->...lijk", dG)
    quad = np.einsum("...lim,...mjk->...lijk", G, G)
    Rup = d_i - np.swapaxes(d_i, -3, -2) + quad - np.swapaxes(quad, -3, -2)
    R = np.einsum("...lp,...pijk->...ijkl", g, Rup)
    c["riemann"] = R
    if with_derivative:
        d2G = c["d2gamma"]
        dRup_a = np.einsum("...ljkia->...lijka", d2G)
        dquad = (np.einsum("...lima,...mjk->...lijka", dG, G)
                 + np.einsum("...lim,...mjka->...lijka", G, dG))
        dRup = dRup_a - np.swapaxes(dRup_a, -4, -3) + dquad - np.swapaxes(dquad, -4, -3)
        dR = (np.einsum("...lpa,...pijk->...ijkla", c["dg"], Rup)
              + np.einsum("...lp,...pijka->...ijkla", g, dRup))
        DR = (dR
              - np.einsum("...pai,...pjkl->...ijkla", G, R)
              - np.einsum("...paj,...ipkl->...ijkla", G, R)
              - np.einsum("...pak,...ijpl->...ijkla", G, R)
              - np.einsum("...pal,...ijkp->...ijkla", G, R))
        c["covd_riemann"] = DR
    return c


def geometry(field: MetricField, X, with_derivative: bool = False,
             check: bool = True) -> dict:
    """Batched connection and curvature data of ``field`` at points ``X``."""
    jet = field.jet(X, 3 if with_derivative else 2, check=check)
    return curvature_from_jet(jet, with_derivative)


# ---------------------------------------------------------------------------
# norms


def orthonormal_frame(g) -> np.ndarray:
    """Columns of the returned matrix are ``g``-orthonormal (``E^T g E = I``)."""
    L = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(L), -1, -2)


def tensor_norm(T, g, kinds: str) -> np.ndarray:
    """Frobenius norm of tensor components in a ``g``-orthonormal frame.

    Parameters
    ----------
    T : ndarray, shape (..., n, ..., n)
        Components; the trailing ``len(kinds)`` axes are tensor indices.
    g : ndarray, shape (..., n, n)
        Metric defining the frame.
    kinds : str
        One letter per index: ``"u"`` for upper (vector), ``"l"`` for lower.
    """
    E = orthonormal_frame(g)
    Einv_t = np.swapaxes(np.linalg.inv(E), -1, -2)
    k = len(kinds)
    out = T
    for pos, kind in enumerate(kinds):
        axis = out.ndim - k + pos
        M = _broadcast_frame(E if kind == "l" else Einv_t, k)
        out = np.moveaxis(out, axis, -1)
        out = np.einsum("...a,...ab->...b", out, M)
        out = np.moveaxis(out, -1, axis)
    flat = out.reshape(out.shape[: out.ndim - k] + (-1,))
    return np.sqrt(np.sum(flat * flat, axis=-1))


def _broadcast_frame(M, k):
    # insert singleton axes so M broadcasts over the k-1 untouched tensor axes
    return M.reshape(M.shape[:-2] + (1,) * (k - 1) + M.shape[-2:])


# ---------------------------------------------------------------------------
# single-point operations


def christoffel(field: MetricField, x) -> np.ndarray:
    """``Gamma^k_ij`` at ``x`` as an array indexed ``[k, i, j]``."""
    jet = field.jet(np.asarray(x, dtype=float)[None], 1)
    return connection_jet(jet, 0)["gamma"][0]


def riemann(field: MetricField, x) -> np.ndarray:
    """Lowered curvature tensor ``R_ijkl`` at ``x``."""
    return geometry(field, np.asarray(x, dtype=float)[None])["riemann"][0]


def sectional_from_tensor(R, g, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    num = np.einsum("ijkl,i,j,k,l->", R, u, v, v, u)
    guu, gvv, guv = u @ g @ u, v @ g @ v, u @ g @ v
    den = guu * gvv - guv * guv
    if den <= 1e-12 * guu * gvv:
        raise DegeneratePlane("u and v are (numerically) linearly dependent")
    return float(num / den)


def sectional(field: MetricField, x, u, v) -> float:
    """Sectional curvature of the plane spanned by ``u`` and ``v``."""
    geo = geometry(field, np.asarray(x, dtype=float)[None])
    return sectional_from_tensor(geo["riemann"][0], geo["g"][0], u, v)


def covariant_derivative_R(field: MetricField, x):
    """``R_ijkl;m`` at ``x`` and its pointwise norm."""
    geo = geometry(field, np.asarray(x, dtype=float)[None], with_derivative=True)
    DR = geo["covd_riemann"][0]
    return DR, float(tensor_norm(DR, geo["g"][0], "lllll"))


def symmetry_defects(R) -> dict:
    """Largest violation of each algebraic identity of a curvature tensor."""
    R = np.asarray(R)
    sw = lambda a, b: np.swapaxes(R, a, b)
    nd = R.ndim
    first_pair = (nd - 4, nd - 3)
    second_pair = (nd - 2, nd - 1)
    perm_pairs = list(range(nd - 4)) + [nd - 2, nd - 1, nd - 4, nd - 3]
    cyc1 = list(range(nd - 4)) + [nd - 4, nd - 2, nd - 1, nd - 3]
    cyc2 = list(range(nd - 4)) + [nd - 4, nd - 1, nd - 3, nd - 2]
    return {
        "antisym_ij": float(np.max(np.abs(R + sw(*first_pair)))),
        "antisym_kl": float(np.max(np.abs(R + sw(*second_pair)))),
        "pair_sym": float(np.max(np.abs(R - np.transpose(R, perm_pairs)))),
        "bianchi": float(np.max(np.abs(R + np.transpose(R, cyc1) + np.transpose(R, cyc2)))),
    }


def second_bianchi_defect(DR) -> float:
    """Largest entry of ``R_ijkl;m + R_ijlm;k + R_ijmk;l``."""
    DR = np.asarray(DR)
    nd = DR.ndim
    base = list(range(nd - 3))
    k, l, m = nd - 3, nd - 2, nd - 1
    # entry [k, l, m] of the permuted arrays: R_ijlm;k and R_ijmk;l
    t2 = np.transpose(DR, base + [m, k, l])
    t3 = np.transpose(DR, base + [l, m, k])
    return float(np.max(np.abs(DR + t2 + t3)))


# ---------------------------------------------------------------------------
# estimates over sample sets


@dataclass(frozen=True)
class NormEstimate:
    """Suprema of pointwise norms over a finite sample set (estimates only)."""

    sup_R: float
    sup_DR: float
    sup_gamma: float
    sectional_min: float
    sectional_max: float
    count: int

    def as_dict(self) -> dict:
        return dict(sup_R=self.sup_R, sup_DR=self.sup_DR, sup_gamma=self.sup_gamma,
                    sectional_min=self.sectional_min, sectional_max=self.sectional_max,
                    count=self.count)


def coordinate_sectionals(R, g) -> np.ndarray:
    """Sectional curvatures of all coordinate planes, shape ``(B, n(n-1)/2)``."""
    n = g.shape[-1]
    vals = []
    for i in range(n):
        for j in range(i + 1, n):
            num = R[..., i, j, j, i]
            den = g[..., i, i] * g[..., j, j] - g[..., i, j] ** 2
            vals.append(num / den)
    return np.stack(vals, axis=-1)


def curvature_norm_estimate(field: MetricField, samples) -> NormEstimate:
    """``(sup |R|, sup |DR|, sup |Gamma|)`` over samples, norms w.r.t. the field."""
    X = np.asarray(samples, dtype=float).reshape(-1, field.dim)
    if len(X) == 0:
        raise ValueError("sample set is empty")
    geo = geometry(field, X, with_derivative=True)
    g = geo["g"]
    nR = tensor_norm(geo["riemann"], g, "llll")
    nDR = tensor_norm(geo["covd_riemann"], g, "lllll")
    nG = tensor_norm(geo["gamma"], g, "ull")
    sec = coordinate_sectionals(geo["riemann"], g)
    return NormEstimate(float(nR.max()), float(nDR.max()), float(nG.max()),
                        float(sec.min()), float(sec.max()), len(X))


# ---------------------------------------------------------------------------
# serializable samples


@dataclass
class CurvatureSample:
    """Curvature data at one point."""

    at: np.ndarray
    gamma: np.ndarray
    riemann_lowered: np.ndarray
    covd_riemann: np.ndarray
    sectional: list = dc_field(default_factory=list)
    norm_R: float = 0.0
    norm_DR: float = 0.0

    @staticmethod
    def csv_header(n: int) -> list:
        idx = lambda k: ["".join(str(a) for a in t) for t in np.ndindex(*(n,) * k)]
        return ([f"x{i}" for i in range(n)]
                + [f"Gamma_{t}" for t in idx(3)]
                + [f"R_{t}" for t in idx(4)]
                + ["sectional_" + "".join(str(a) for a in p) for p in _coordinate_planes(n)]
                + ["norm_R", "norm_DR"])

    def csv_row(self) -> list:
        return (list(self.at) + list(self.gamma.ravel()) + list(self.riemann_lowered.ravel())
                + [k for _, k in self.sectional] + [self.norm_R, self.norm_DR])

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def as_dict(self) -> dict:
        return {
            "at": self.at.tolist(),
            "gamma": self.gamma.tolist(),
            "riemann_lowered": self.riemann_lowered.tolist(),
            "covd_riemann": self.covd_riemann.tolist(),
            "sectional": [{"plane": list(p), "K": k} for p, k in self.sectional],
            "norms": {"R": self.norm_R, "DR": self.norm_DR},
        }


def _coordinate_planes(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def curvature_samples(field: MetricField, samples) -> list:
    """``CurvatureSample`` records for a batch of points."""
    X = np.asarray(samples, dtype=float).reshape(-1, field.dim)
    geo = geometry(field, X, with_derivative=True)
    g = geo["g"]
    nR = tensor_norm(geo["riemann"], g, "llll")
    nDR = tensor_norm(geo["covd_riemann"], g, "lllll")
    sec = coordinate_sectionals(geo["riemann"], g)
    planes = _coordinate_planes(field.dim)
    return [
        CurvatureSample(X[b].copy(), geo["gamma"][b], geo["riemann"][b],
                        geo["covd_riemann"][b],
                        [(p, float(sec[b, q])) for q, p in enumerate(planes)],
                        float(nR[b]), float(nDR[b]))
        for b in range(len(X))
    ]


def curvature_sample(field: MetricField, x) -> CurvatureSample:
    return curvature_samples(field, np.asarray(x, dtype=float)[None])[0]
