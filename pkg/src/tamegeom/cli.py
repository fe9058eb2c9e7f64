"""Command-line harness: ``tamegeom <command> [options]``.

Each command writes ``<command>.csv``, ``<command>.json`` (config echo,
results and checks), ``<command>.gp`` (gnuplot script) and
``<command>_timing.json`` into the output directory. The first three are
byte-identical across runs with the same configuration; wall-clock time
lives only in the timing file. Exit status is 0 when every check passes,
1 when a check fails and 2 on configuration or geometry errors.
"""
from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import acceptance as ac
from . import geodesics as gd
from . import metric_fields as mf
from . import qift
from . import symplectic_polar as sp
from .config import ExperimentConfig
from .convex_interp import convex_path_sweep
from .curvature import (
    curvature_norm_estimate,
    curvature_samples,
    geometry,
    second_bianchi_defect,
    symmetry_defects,
)
from .errors import ConfigError, GeometryError
from .reporting import output_dir, write_csv, write_json, write_plot_script


@dataclass
class Report:
    command: str
    config: ExperimentConfig
    results: dict
    checks: list = dc_field(default_factory=list)
    header: list = dc_field(default_factory=list)
    rows: list = dc_field(default_factory=list)
    seconds: float = 0.0

    def check(self, name, value, tol, passed):
        self.checks.append({"name": name, "value": value, "tol": tol, "passed": bool(passed)})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def as_dict(self) -> dict:
        return {"command": self.command, "version": __version__, "config": self.config.as_dict(),
                "results": self.results, "checks": self.checks, "passed": self.passed}

    def write(self, out: Path) -> list:
        out.mkdir(parents=True, exist_ok=True)
        name = self.command
        files = [write_csv(out / f"{name}.csv", self.header, self.rows),
                 write_json(out / f"{name}.json", self.as_dict()),
                 write_plot_script(out / f"{name}.gp", name, f"{name}.csv", self.header),
                 write_json(out / f"{name}_timing.json", {"seconds": self.seconds})]
        return files


def _field(cfg, label):
    return mf.from_label(label, cfg.dim, cfg.radius or None)


def _pair(cfg):
    if not cfg.metric_b:
        raise ConfigError("this command needs two metrics", field="metric_b")
    return _field(cfg, cfg.metric_a), _field(cfg, cfg.metric_b)


def _base_points(cfg, field):
    pts = cfg.base_points or [list(field.domain.center)]
    return [np.asarray(p, dtype=float) for p in pts]


def _map(cfg, fn, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# commands

_KNOWN_CURVATURE = {"flat": 0.0, "scaled": 0.0, "cylinder": 0.0, "poincare-disk": -1.0,
                    "half-plane": -1.0}


def expected_sectional(label: str):
    """Constant sectional curvature of a gallery label, if it has one."""
    name, *args = label.split(":")
    if name == "sphere":
        r = float(args[0]) if args else 1.0
        return 1.0 / r ** 2
    return _KNOWN_CURVATURE.get(name)


def run_curvature_scan(cfg: ExperimentConfig) -> Report:
    field = _field(cfg, cfg.metric_a)
    X = field.domain.grid(cfg.grid)
    samples = curvature_samples(field, X)
    est = curvature_norm_estimate(field, X)
    geo = geometry(field, X, with_derivative=True)
    scale = max(1.0, est.sup_R)
    sym = symmetry_defects(geo["riemann"])
    rep = Report("curvature-scan", cfg, {"label": field.label, "points": len(X),
                                         "norms": est.as_dict(), "symmetry_defects": sym})
    rep.header = samples[0].csv_header(field.dim)
    rep.rows = [s.csv_row() for s in samples]
    rep.check("algebraic_symmetries", max(sym.values()), 1e-10 * scale,
              max(sym.values()) <= 1e-10 * scale)
    b2 = second_bianchi_defect(geo["covd_riemann"])
    rep.check("second_bianchi", b2, 1e-8 * max(1.0, est.sup_DR),
              b2 <= 1e-8 * max(1.0, est.sup_DR))
    rep.check("finite", bool(np.all(np.isfinite(rep.rows))), None,
              bool(np.all(np.isfinite(rep.rows))))
    K = expected_sectional(cfg.metric_a)
    if K is not None:
        err = max(abs(k - K) for s in samples for _, k in s.sectional)
        rep.results["expected_sectional"] = K
        rep.check("sectional_matches_closed_form", err, 1e-6, err <= 1e-6)
    return rep


def run_convex_path(cfg: ExperimentConfig) -> Report:
    g0, g1 = _pair(cfg)
    X = g0.domain.grid(cfg.grid)
    sweep = convex_path_sweep(g0, g1, X, np.linspace(0, 1, cfg.s_steps), seed=cfg.seed)
    rep = Report("convex-path", cfg, {"labels": [g0.label, g1.label], "points": len(X),
                                      **sweep.as_dict()})
    rep.header, rep.rows = sweep.header, sweep.rows
    rep.check("max_relative_residual", sweep.max_rel_err, cfg.tol, sweep.max_rel_err <= cfg.tol)
    rep.check("curvature_bound", sweep.bound_margin, 0.0, sweep.bound_ok)
    return rep


def run_inj_estimate(cfg: ExperimentConfig) -> Report:
    g0 = _field(cfg, cfg.metric_a)
    path = bool(cfg.metric_b)
    g1 = _field(cfg, cfg.metric_b) if path else g0
    mf._same_chart(g0, g1)
    s_values = np.linspace(0, 1, cfg.s_steps) if path else np.array([0.0])
    points = _base_points(cfg, g0)
    cells = [(float(s), p) for s in s_values for p in points]

    def cell(c):
        s, p = c
        return gd.injectivity_radius_estimate(mf.convex_sum(g0, g1, s), p, cfg.r_max,
                                              cfg.directions)

    ests = _map(cfg, cell, cells)
    n = g0.dim
    rep = Report("inj-estimate", cfg, {})
    rep.header = (["s"] + [f"x{i}" for i in range(n)]
                  + ["conjugate_radius", "half_loop_length", "lower_bound", "capped",
                     "min_exit_radius", "censored_directions"])
    rep.rows = [[s, *p, e.conjugate_radius, e.half_loop_length, e.lower_bound, e.capped,
                 e.min_exit_radius, e.censored_directions] for (s, p), e in zip(cells, ests)]
    vals = np.array([e.lower_bound for e in ests]).reshape(len(s_values), len(points))
    k = int(np.argmin(vals))
    rep.results = {"labels": [g0.label, g1.label], "s_values": s_values.tolist(),
                   "estimates": vals.tolist(),
                   "all_capped": all(e.capped for e in ests),
                   "minimum": {"value": float(vals.flat[k]), "s": float(cells[k][0]),
                               "point": cells[k][1].tolist()}}
    ok = bool(np.all(np.isfinite(vals)) and np.all(vals > 0))
    rep.check("positive_estimates", float(vals.min()), 0.0, ok)
    if path:
        jumps = float((np.abs(np.diff(vals, axis=0)) / vals[:-1]).max())
        end_min = float(min(vals[0].min(), vals[-1].min()))
        rep.check("adjacent_variation", jumps, 0.1, jumps <= 0.1)
        rep.check("path_minimum_ratio", float(vals.min()) / end_min, 0.5,
                  vals.min() >= 0.5 * end_min)
    return rep


def _quadratic(X):
    return X + 0.5 * X ** 2


def run_ift_certify(cfg: ExperimentConfig) -> Report:
    rep = Report("ift-certify", cfg, {"points": []})
    rep.header = ["index", "L", "M", "K", "R1", "R2", "R3", "collisions", "injective_pass",
                  "lipschitz_2L_holds", "lipschitz_worst_ratio"]
    lip_pairs = max(1, cfg.pair_samples // 10)
    if cfg.metric_a == "quadratic-1d":
        jobs = [("quadratic-1d", lambda: qift.estimate_map_constants(_quadratic, [0.0], 0.5,
                                                                      grid=cfg.grid))]
    else:
        g_a, g_b = _pair(cfg)
        jobs = []
        for p in _base_points(cfg, g_a):
            def make(p=p):
                Fm = qift.TransitionMap(g_a, g_b, p, radius=cfg.ball)
                return qift.estimate_map_constants(Fm, np.zeros(g_a.dim), cfg.ball,
                                                   grid=cfg.grid)
            jobs.append((p.tolist(), make))

    def run(job):
        where, make = job
        sample = make()
        bounds = sample.bounds()
        cert = qift.certify_injectivity(sample, bounds, cfg.pair_samples, cfg.seed,
                                        lipschitz_pairs=lip_pairs)
        return where, sample, bounds, cert

    for k, (where, sample, b, cert) in enumerate(_map(cfg, run, jobs)):
        rep.results["points"].append({"base": where, "constants": b.as_dict(),
                                      "certificate": cert.as_dict()})
        rep.rows.append([k, b.L, b.M, b.K, b.R1, b.R2, b.R3, cert.collisions,
                         cert.injective_pass, cert.lipschitz_pass, cert.lipschitz_worst_ratio])
        rep.check(f"injective[{k}]", cert.collisions, 0, cert.injective_pass)
    rep.results["note"] = ("lipschitz_2L_holds records the inverse-Lipschitz inequality with "
                           "constant 2L; it is reported, not required")
    return rep


def _polar_metric(spec: str, Omega, seed: int):
    spec = spec.strip()
    n = Omega.dim
    if spec in ("identity", "flat", "standard"):
        return np.eye(n)
    if spec.startswith("diag:"):
        vals = [float(v) for v in spec[5:].split(",")]
        if len(vals) != n:
            raise ConfigError(f"diag spec has {len(vals)} entries, dimension is {n}",
                              field="metric")
        return np.diag(vals)
    if spec.startswith("random"):
        parts = spec.split(":")
        s = int(parts[1]) if len(parts) > 1 else seed
        return sp.metric_from_J(Omega, sp.random_compatible_J(Omega, np.random.default_rng(s)))
    raise ConfigError(f"unknown endpoint spec {spec!r} (identity, diag:a,b,..., random:<seed>)",
                      field="metric")


def run_polar_path(cfg: ExperimentConfig) -> Report:
    if cfg.dim % 2:
        raise ConfigError("polar-path needs an even dimension", field="dim")
    Omega = sp.SymplecticForm.standard(cfg.dim)
    a = cfg.metric_a if cfg.metric_a != "flat" else "identity"
    b = cfg.metric_b or ("diag:2,0.5" if cfg.dim == 2 else f"random:{cfg.seed + 1}")
    g0 = _polar_metric(a, Omega, cfg.seed)
    g1 = _polar_metric(b, Omega, cfg.seed + 1)
    diag = sp.interpolate_J_path(Omega, g0, g1, np.linspace(0, 1, cfg.s_steps), 10_000, cfg.seed)
    rep = Report("polar-path", cfg, {"endpoints": [a, b], "g0": g0.tolist(), "g1": g1.tolist(),
                                     **diag.summary()})
    rep.header = list(diag.CSV_HEADER)
    rep.rows = [list(r) for r in diag.csv_rows()]
    for name, ok in diag.checks().items():
        rep.check(name, None, diag.tol, ok)
    return rep


RUNNERS = {"curvature-scan": run_curvature_scan, "convex-path": run_convex_path,
           "inj-estimate": run_inj_estimate, "ift-certify": run_ift_certify,
           "polar-path": run_polar_path}


def run_command(cfg: ExperimentConfig) -> Report:
    t = time.perf_counter()
    rep = RUNNERS[cfg.command](cfg)
    rep.seconds = time.perf_counter() - t
    return rep


def run_all(out: Path, seed: int = 0, echo=print) -> bool:
    """Run the acceptance suite twice and write the report, timings and determinism check."""
    reports, seconds = [], []
    for k in range(2):
        t = time.perf_counter()
        reports.append(ac.run_acceptance(seed, progress=(lambda c: echo(c.line())) if k == 0
                                         else None))
        seconds.append(time.perf_counter() - t)
    c12 = ac.determinism(reports[0], reports[1], sum(seconds))
    echo(c12.line())
    out.mkdir(parents=True, exist_ok=True)
    (out / "acceptance.json").write_text(reports[0].to_json())
    write_json(out / "acceptance_determinism.json",
               {"number": 12, "passed": c12.passed, "detail": c12.detail})
    timing = ac.timing_report(reports[0], seconds)
    write_json(out / "acceptance_timing.json", timing)
    ok = reports[0].passed and c12.passed
    if not timing["suite_within_budget"] or not timing["criterion_1_within_budget"]:
        echo("runtime budget exceeded; see acceptance_timing.json")
        ok = False
    return ok


# ---------------------------------------------------------------------------
# click wiring


def _options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="Configuration file; flags override its keys."),
        click.option("--metric-a", help="Gallery label of the first metric."),
        click.option("--metric-b", help="Gallery label of the second metric."),
        click.option("--dim", type=int, help="Dimension."),
        click.option("--radius", type=float, help="Chart radius (0 keeps the gallery default)."),
        click.option("--grid", type=int, help="Sample grid size per axis."),
        click.option("--s-steps", type=int, help="Number of s (or t) grid values."),
        click.option("--seed", type=int, help="Random seed."),
        click.option("--tol", type=float, help="Tolerance for the main check."),
        click.option("--out", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--workers", type=int, help="Worker threads for independent cells."),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _load(command, config_path, **flags) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()
    return cfg.replace(command=command, **flags)


def _finish(cfg: ExperimentConfig, rep: Report, out_flag=None):
    # --out flag, then the environment, then the config file
    out = Path(out_flag) if out_flag else output_dir(cfg.out or "reports")
    files = rep.write(out)
    for c in rep.checks:
        click.echo(f"[{'PASS' if c['passed'] else 'FAIL'}] {c['name']}")
    click.echo(f"wrote {', '.join(str(f) for f in files)}")
    sys.exit(0 if rep.passed else 1)


def _command(name):
    @_options
    def cmd(config_path, metric_a, metric_b, dim, radius, grid, s_steps, seed, tol, out,
            workers):
        try:
            cfg = _load(name, config_path, metric_a=metric_a, metric_b=metric_b, dim=dim,
                        radius=radius, grid=grid, s_steps=s_steps, seed=seed, tol=tol, out=out,
                        workers=workers)
            rep = run_command(cfg)
        except (ConfigError, GeometryError, ValueError) as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(2)
        _finish(cfg, rep, out)

    cmd.__doc__ = RUNNERS[name].__doc__ or f"Run {name}."
    return click.command(name)(cmd)


@click.group()
@click.version_option(__version__)
def main():
    """Curvature, geodesic and symplectic checks for convex sums of metrics."""


for _name, _help in (("curvature-scan", "Curvature tensors and norms on a sample grid."),
                     ("convex-path", "Convex-sum curvature formula against direct curvature."),
                     ("inj-estimate", "Injectivity radius estimates along an s-path."),
                     ("ift-certify", "Inverse function theorem constants and certificates."),
                     ("polar-path", "Polar decomposition along a path of compatible metrics.")):
    RUNNERS[_name].__doc__ = _help
    main.add_command(_command(_name))


@main.command("all")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True, help="Suite seed.")
def all_command(out, seed):
    """Run the acceptance suite (twice, for the determinism check)."""
    target = Path(out) if out else output_dir("reports")
    sys.exit(0 if run_all(target, seed, click.echo) else 1)


if __name__ == "__main__":
    main()
