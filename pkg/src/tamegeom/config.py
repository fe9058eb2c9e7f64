"""Experiment configuration in a sectioned key-value text format.

Example::

    [experiment]
    command = convex-path
    seed = 0

    [metrics]
    metric_a = flat
    metric_b = polyrand:7:0.05

Unknown sections or keys, bad types and out-of-range values raise
``ConfigError`` naming the line and field.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field as dc_field, fields

from .errors import ConfigError

COMMANDS = ("curvature-scan", "convex-path", "inj-estimate", "ift-certify", "polar-path", "all")


def _points_to_text(points) -> str:
    return "; ".join(",".join(format(float(c), ".17g") for c in p) for p in points)


def _points_from_text(text: str):
    text = text.strip()
    if not text:
        return []
    return [[float(c) for c in chunk.split(",")] for chunk in text.split(";")]


@dataclass
class ExperimentConfig:
    command: str = "convex-path"
    metric_a: str = "flat"
    metric_b: str = ""
    dim: int = 2
    radius: float = 0.0
    s_steps: int = 11
    grid: int = 7
    seed: int = 0
    tol: float = 1e-6
    out: str = ""
    workers: int = 1
    base_points: list = dc_field(default_factory=list)
    directions: int = 48
    r_max: float = 5.0
    ball: float = 0.25
    pair_samples: int = 2000

    SECTIONS = {
        "experiment": ("command", "seed", "out", "workers"),
        "metrics": ("metric_a", "metric_b", "dim", "radius"),
        "grid": ("s_steps", "grid", "base_points", "directions", "r_max", "ball",
                 "pair_samples"),
        "tolerances": ("tol",),
    }

    def validate(self, lines: dict | None = None) -> "ExperimentConfig":
        lines = lines or {}

        def fail(name, msg):
            raise ConfigError(msg, field=name, line=lines.get(name))

        if self.command not in COMMANDS:
            fail("command", f"unknown command {self.command!r}")
        for name in ("s_steps", "grid"):
            if getattr(self, name) < 2:
                fail(name, f"{name} must be at least 2")
        if not self.tol > 0:
            fail("tol", "tolerance must be positive")
        if self.dim < 1:
            fail("dim", "dimension must be positive")
        if self.radius < 0:
            fail("radius", "radius must be non-negative (0 selects the gallery default)")
        if self.workers < 1:
            fail("workers", "workers must be at least 1")
        for name in ("r_max", "ball"):
            if not getattr(self, name) > 0:
                fail(name, f"{name} must be positive")
        if self.directions < 4:
            fail("directions", "directions must be at least 4")
        if self.pair_samples < 1:
            fail("pair_samples", "pair_samples must be positive")
        for p in self.base_points:
            if len(p) != self.dim:
                fail("base_points", f"base point {p} does not have dimension {self.dim}")
        return self

    # -- text format ---------------------------------------------------------

    def to_text(self) -> str:
        out = []
        for sec, names in self.SECTIONS.items():
            out.append(f"[{sec}]")
            for name in names:
                v = getattr(self, name)
                if name == "base_points":
                    v = _points_to_text(v)
                elif isinstance(v, float):
                    v = format(v, ".17g")
                out.append(f"{name} = {v}")
            out.append("")
        return "\n".join(out)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                           comment_prefixes=("#", ";"),
                                           inline_comment_prefixes=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"cannot parse configuration: {exc.message}", line=line) from None
        lines = _key_lines(text)
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for sec in parser.sections():
            if sec not in cls.SECTIONS:
                raise ConfigError(f"unknown section [{sec}]", line=lines.get(f"[{sec}]"))
            for key, raw in parser.items(sec):
                if key not in cls.SECTIONS[sec]:
                    raise ConfigError(f"unknown key in [{sec}]", field=key,
                                      line=lines.get(key))
                values[key] = _convert(key, raw, types[key], lines.get(key))
        cfg = cls(**values)
        return cfg.validate(lines)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def replace(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes).validate()

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _key_lines(text: str) -> dict:
    lines = {}
    for k, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*(\[[^\]]+\]|[A-Za-z_]\w*)\s*(=|$)", line)
        if m:
            lines.setdefault(m.group(1), k)
    return lines


def _convert(key, raw, typ, line):
    raw = raw.strip()
    try:
        if key == "base_points":
            return _points_from_text(raw)
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {typ}", field=key, line=line) from None
