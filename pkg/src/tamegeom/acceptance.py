"""The acceptance suite: twelve numbered criteria with deterministic reports.

``run_acceptance`` returns a report whose JSON form depends only on the
seeds; wall-clock timings are kept in a separate structure so two runs can
be compared byte for byte.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import geodesics as gd
from . import metric_fields as mf
from . import qift
from . import symplectic_polar as sp
from .convex_interp import convex_path_sweep
from .reporting import dumps

S_GRID = np.linspace(0.0, 1.0, 11)
T_GRID = np.linspace(0.0, 1.0, 11)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict
    seconds: float = dc_field(default=0.0, compare=False)
    timing: dict = dc_field(default_factory=dict, compare=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d}: {self.title}"


@dataclass
class AcceptanceReport:
    results: list
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def by_number(self, k: int) -> CriterionResult:
        return next(r for r in self.results if r.number == k)

    def as_dict(self) -> dict:
        from . import __version__
        return {"version": __version__, "seed": self.seed, "passed": self.passed,
                "criteria": [{"number": r.number, "title": r.title, "passed": r.passed,
                              "detail": r.detail} for r in self.results]}

    def to_json(self) -> str:
        return dumps(self.as_dict())

    def timings(self) -> dict:
        return {f"criterion_{r.number}": r.seconds for r in self.results}

    def lines(self) -> list:
        return [r.line() for r in self.results]


# ---------------------------------------------------------------------------
# 1-2: convex-sum curvature


def convex_test_pairs(seed: int = 0) -> list:
    """Twenty seeded pairs of 2D analytic metrics sharing a chart."""
    rng = np.random.default_rng(seed)
    pairs = [(mf.flat(), mf.polyrand(7, 0.05)),
             (mf.flat(), mf.scaled_flat(4.0)),
             (mf.poincare_disk(), mf.polyrand(11, 0.4, radius=0.9)),
             (mf.scaled_flat(2.0), mf.polyrand(13, 0.6))]
    while len(pairs) < 20:
        a, b = (int(v) for v in rng.integers(1, 10_000, 2))
        amp = rng.uniform(0.2, 0.7, 2)
        pairs.append((mf.polyrand(a, float(amp[0])), mf.polyrand(b, float(amp[1]))))
    return pairs


def criteria_convex(seed: int = 0, points: int = 50):
    pairs = convex_test_pairs(seed)
    rows, max_an, max_fd, bound_ok, flags = [], 0.0, 0.0, True, 0
    t_an = t_fd = 0.0
    for k, (g0, g1) in enumerate(pairs):
        X = g0.domain.sample(points, seed + 1000 + k)
        t = time.perf_counter()
        an = convex_path_sweep(g0, g1, X, S_GRID, seed=seed + k)
        t_an += time.perf_counter() - t
        t = time.perf_counter()
        fd = convex_path_sweep(g0.with_fd(), g1.with_fd(), X, S_GRID, seed=seed + k)
        t_fd += time.perf_counter() - t
        max_an = max(max_an, an.max_rel_err)
        max_fd = max(max_fd, fd.max_rel_err)
        bound_ok &= an.bound_ok
        flags += an.symmetric_pairing_flags
        rows.append({"g0": g0.label, "g1": g1.label, "max_rel_err_analytic": an.max_rel_err,
                     "max_rel_err_fd": fd.max_rel_err, "bound_ok": an.bound_ok,
                     "bound_margin": an.bound_margin, "constants": an.constants,
                     "per_s": [{"s": r["s"], "sup_norm_Rs": r["sup_norm_Rs"],
                                "bound": r["bound"]} for r in an.per_s]})
    c1 = CriterionResult(1, "convex-sum curvature formula vs direct curvature",
                         max_an <= 1e-6 and max_fd <= 5e-3,
                         {"pairs": len(pairs), "s_values": len(S_GRID), "points": points,
                          "max_rel_err_analytic": max_an, "tol_analytic": 1e-6,
                          "max_rel_err_fd": max_fd, "tol_fd": 5e-3,
                          "symmetric_pairing_flags": flags,
                          "per_pair": [{k: r[k] for k in ("g0", "g1", "max_rel_err_analytic",
                                                          "max_rel_err_fd")} for r in rows]})
    c2 = CriterionResult(2, "explicit curvature bound along the convex sum", bool(bound_ok),
                         {"per_pair": [{k: r[k] for k in ("g0", "g1", "bound_ok", "bound_margin",
                                                          "constants", "per_s")} for r in rows]})
    return c1, c2, {"analytic_seconds": t_an, "fd_seconds": t_fd}


# ---------------------------------------------------------------------------
# 3-7: symplectic polar decomposition


def criteria_polar(seed: int = 0, pairs_per_dim: int = 50, vectors: int = 10_000):
    O2 = sp.SymplecticForm.standard(2)
    diag = sp.interpolate_J_path(O2, np.eye(2), np.diag([2.0, 0.5]), T_GRID, vectors, seed)
    half = int(np.argmin(np.abs(T_GRID - 0.5)))
    attained = abs(diag.measured[half].max() - diag.pinching[0][1]) <= 1e-10
    runs = [("diag(2,1/2)", diag)]
    for dim in (2, 4, 6):
        O = sp.SymplecticForm.standard(dim)
        for k in range(pairs_per_dim):
            g0, g1 = sp.random_compatible_pair(O, seed + 100 * dim + k)
            runs.append((f"dim{dim}-pair{k}",
                         sp.interpolate_J_path(O, g0, g1, T_GRID, vectors, seed + k)))

    def worst(key):
        return max(d.summary()[key] for _, d in runs)

    pred = worst("max_prediction_residual")
    env_ok = all(d.in_envelope for _, d in runs)
    c3 = CriterionResult(3, "pinching: predicted reciprocals and envelope",
                         pred <= 1e-10 and env_ok and attained,
                         {"runs": len(runs), "max_prediction_residual": pred, "tol": 1e-10,
                          "all_in_envelope": env_ok,
                          "diag_example": {"C": diag.C, "value_at_half": diag.measured[half].tolist(),
                                           "upper_bound": diag.pinching[0][1],
                                           "attained": bool(attained)},
                          "max_C": max(d.C for _, d in runs),
                          "min_reciprocal": min(d.summary()["min_reciprocal"] for _, d in runs),
                          "max_reciprocal": worst("max_reciprocal")})
    ident = worst("max_identity_residual")
    c4 = CriterionResult(4, "matrix identity for (A_t*)^-1 A_t^-1", ident <= 1e-10,
                         {"max_identity_residual": ident, "tol": 1e-10,
                          "max_symmetry_defect": worst("max_symmetry_defect"),
                          "symmetry_flag_count": sum(len(d.symmetry_flags) for _, d in runs)})
    jsq, sym = worst("max_J_squared"), worst("max_symplectic_defect")
    tame = min(d.summary()["min_taming"] for _, d in runs)
    viol = sum(d.summary()["sandwich_violations"] for _, d in runs)
    c5 = CriterionResult(5, "J-path invariants and sandwich inequality",
                         jsq <= 1e-10 and sym <= 1e-10 and tame > 0 and viol == 0,
                         {"vectors_per_t": vectors, "max_J_squared": jsq,
                          "max_symplectic_defect": sym, "min_taming": tame,
                          "sandwich_violations": viol,
                          "max_sandwich_residual": worst("max_sandwich_residual"),
                          "endpoint_residual": worst("endpoint_residual")})
    rng = np.random.default_rng(seed + 6)
    res = []
    for k in range(100):
        O = sp.SymplecticForm.standard((2, 4, 6)[k % 3])
        res.append(sp.retraction_check(O, sp.random_compatible_J(O, rng)))
    c6 = CriterionResult(6, "retraction round trip", max(res) <= 1e-10,
                         {"structures": len(res), "max_residual": max(res), "tol": 1e-10})
    mats = sp.jordan_test_matrices(1000, seed + 7)
    reps = [sp.jordan_sum_eigenvalues(M) for M in mats]
    defective = sum(r.precision != "double" for r in reps)
    c7 = CriterionResult(7, "eigenvalues of M + M^-1", all(r.passed for r in reps),
                         {"matrices": len(reps), "failures": sum(not r.passed for r in reps),
                          "max_mismatch": max(r.max_mismatch for r in reps), "tol": 1e-8,
                          "high_precision_cases": defective})
    return c3, c4, c5, c6, c7


# ---------------------------------------------------------------------------
# 8: geodesics


def criterion_geodesics(seed: int = 0, starts: int = 4, T: float = 10.0):
    drift = {}
    ok = True
    full = 0
    total = 0
    for lab in mf.GALLERY_LABELS:
        f = mf.from_label(lab)
        worst = 0.0
        X = f.domain.sample(starts, seed, fill=0.5)
        for x in X:
            for v in gd.unit_directions(f, x, 4)[:2]:
                tr = gd.integrate_geodesic(f, gd.GeodesicState.from_xv(f, x, v), T)
                worst = max(worst, tr.relative_energy_drift())
                full += not tr.left_domain
                total += 1
        drift[lab] = worst
        ok &= worst <= 1e-8 * T
    closed = {}
    for lab, x, v in (("sphere:1", [np.pi / 2, 0.0], [0.0, 1.0]),
                      ("cylinder:1", [0.0, 0.0], [1.0, 0.0])):
        f = mf.from_label(lab)
        tr = gd.integrate_geodesic(f, gd.GeodesicState.from_xv(f, x, v), T)
        closed[lab] = {"drift": tr.relative_energy_drift(), "reached_T": not tr.left_domain}
        ok &= closed[lab]["drift"] <= 1e-8 * T and not tr.left_domain
    sphere = gd.injectivity_radius_estimate(mf.sphere(1.0), [np.pi / 2, 0.0])
    cyl = gd.injectivity_radius_estimate(mf.cylinder(1.0), [0.0, 0.0])
    disk = gd.injectivity_radius_estimate(mf.poincare_disk(), [0.0, 0.0])
    s_ok = abs(sphere.lower_bound - np.pi) <= 0.02 * np.pi
    c_ok = abs(cyl.lower_bound - np.pi) <= 0.02 * np.pi
    d_ok = disk.capped
    return CriterionResult(8, "geodesic energy drift and injectivity estimates",
                           bool(ok and s_ok and c_ok and d_ok),
                           {"T": T, "drift_tol": 1e-8 * T, "max_drift": drift,
                            "trajectories": total, "reached_T": full, "closed_geodesics": closed,
                            "sphere": sphere.as_dict(), "sphere_ok": bool(s_ok),
                            "cylinder": cyl.as_dict(), "cylinder_ok": bool(c_ok),
                            "disk": disk.as_dict(), "disk_capped": bool(d_ok)})


# ---------------------------------------------------------------------------
# 9-10: inverse function theorem


def criterion_ift(seed: int = 0):
    hand = [((1, 1, 0, 1), (1.0, 0.5, 0.25)), ((2, 0.5, 0, 1), (1.0, 0.5, 0.125)),
            ((1, 1, 1, 0.5), (0.5, 1 / 3, 1 / 6))]
    plug = []
    exact = True
    for args, want in hand:
        b = qift.ift_bounds(*args)
        got = (b.R1, b.R2, b.R3)
        exact &= got == want
        plug.append({"L_M_K_R": list(args), "R1_R2_R3": list(got), "expected": list(want)})
    sample = qift.estimate_map_constants(lambda X: X + 0.5 * X ** 2, [0.0], 0.5, grid=9)
    bounds = qift.ift_bounds(1.0, 1.0, 1.0, 0.5)
    const_ok = (abs(sample.L - 1) <= 1e-8 and abs(sample.M - 1) <= 1e-8
                and abs(sample.K - 1) <= 1e-6)
    cert = qift.certify_injectivity(sample, bounds, 10_000, seed)
    return CriterionResult(9, "inverse function theorem constants and certificate",
                           bool(exact and const_ok and cert.injective_pass),
                           {"plug_in": plug, "exact": bool(exact),
                            "quadratic_constants": {"L": sample.L, "M": sample.M, "K": sample.K},
                            "constants_ok": bool(const_ok), "certificate": cert.as_dict(),
                            "lipschitz_2L_recorded": cert.lipschitz_pass})


BASE_POINTS = [[0.0, 0.0], [0.3, 0.1], [-0.2, 0.3], [0.1, -0.35], [-0.3, -0.2]]


def criterion_transition():
    rep = qift.second_derivative_bound_check(mf.flat(), mf.polyrand(7, 0.05), BASE_POINTS,
                                             S=1.0, S1=1.0, R=0.25, grid=5)
    return CriterionResult(10, "transition-map second derivatives under grid refinement",
                           rep.passed, rep.as_dict())


# ---------------------------------------------------------------------------
# 11: injectivity along paths


def _path_estimates(g0, g1, points, r_max, directions):
    table = []
    for s in S_GRID:
        gs = mf.convex_sum(g0, g1, float(s))
        table.append([gd.injectivity_radius_estimate(gs, p, r_max, directions) for p in points])
    return table


def _path_summary(label, table, points):
    vals = np.array([[e.lower_bound for e in row] for row in table])
    jumps = np.abs(np.diff(vals, axis=0)) / vals[:-1]
    end_min = float(min(vals[0].min(), vals[-1].min()))
    path_min = float(vals.min())
    return {"path": label, "points": [list(map(float, p)) for p in points],
            "estimates": vals.tolist(),
            "capped": [[bool(e.capped) for e in row] for row in table],
            "max_adjacent_change": float(jumps.max()), "path_min": path_min,
            "endpoint_min": end_min,
            "ok": bool(jumps.max() <= 0.1 and path_min >= 0.5 * end_min)}


def criterion_inj_path(directions: int = 48):
    pts_flat = [[0.0, 0.0], [0.3, -0.2]]
    flat_path = _path_summary("flat -> polyrand:7:0.05",
                              _path_estimates(mf.flat(), mf.polyrand(7, 0.05), pts_flat, 5.0,
                                              directions), pts_flat)
    pts_sph = [[np.pi / 2, 0.0], [np.pi / 2 + 0.3, 1.0]]
    sph_path = _path_summary("sphere:1 -> sphere:1.2",
                             _path_estimates(mf.sphere(1.0), mf.sphere(1.2), pts_sph, 5.0,
                                             directions), pts_sph)
    return CriterionResult(11, "injectivity estimates along convex paths",
                           flat_path["ok"] and sph_path["ok"], {"paths": [flat_path, sph_path]})


# ---------------------------------------------------------------------------
# suite


def run_acceptance(seed: int = 0, progress=None) -> AcceptanceReport:
    """Criteria 1-11. Criterion 12 compares two such runs (see ``determinism``)."""
    results = []

    def timed(fn, *a):
        t = time.perf_counter()
        out = fn(*a)
        dt = time.perf_counter() - t
        out = out if isinstance(out, tuple) else (out,)
        crit = [o for o in out if isinstance(o, CriterionResult)]
        for c in crit:
            c.seconds = dt / len(crit)
            results.append(c)
            if progress:
                progress(c)
        return out

    out = timed(criteria_convex, seed)
    results[0].seconds = out[2]["analytic_seconds"] + out[2]["fd_seconds"]
    results[0].timing = out[2]
    timed(criteria_polar, seed)
    timed(criterion_geodesics, seed)
    timed(criterion_ift, seed)
    timed(criterion_transition)
    timed(criterion_inj_path)
    return AcceptanceReport(results, seed)


def determinism(first: AcceptanceReport, second: AcceptanceReport, total_seconds: float,
                budget: float = 600.0) -> CriterionResult:
    a, b = first.to_json(), second.to_json()
    same = a == b
    return CriterionResult(12, "byte-identical reports across runs",
                           bool(same), {"identical": bool(same), "bytes": len(a)},
                           total_seconds)


def timing_report(first: AcceptanceReport, seconds_per_run: list, budget: float = 600.0) -> dict:
    c1 = first.by_number(1)
    t1 = c1.timing
    return {"per_criterion_seconds": first.timings(), "criterion_1": t1,
            "criterion_1_budget": 60.0,
            "criterion_1_within_budget": t1.get("analytic_seconds", math.inf) <= 60.0,
            "suite_seconds": seconds_per_run, "suite_budget": budget,
            "suite_within_budget": max(seconds_per_run) <= budget}
