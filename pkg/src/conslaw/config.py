"""Experiment configuration files.

Flat ``key = value`` text with ``[section]`` headers, read with
:mod:`configparser` (no interpolation, ``#`` and ``;`` comments). Every
section is optional except ``[flux]`` for the experiments that need one.
All fields are validated before anything runs; every problem is reported.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .flux import Flux, parse_flux_spec

KINDS = ("degeneracy", "variation", "cheng", "wkb", "sweep", "oracle-check")
DEFAULT_COST_CEILING = 1e9
DEFAULT_SEED = 20240601


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (converter, default)
SCHEMA = {
    "run": {
        "out": (str, "out"),
        "cost_ceiling": (float, DEFAULT_COST_CEILING),
        "seed": (int, DEFAULT_SEED),
        "threads": (int, 1),
    },
    "degeneracy": {
        "kmax": (int, 8),
        "grid_size": (int, 201),
        "directions": (int, 64),
        "resolution": (int, 2000),
        "expect_d": (float, math.nan),
        "expect_alpha": (float, math.nan),
        "alpha_tol": (float, 0.05),
        "expect_p": (float, math.nan),
        "p_rel_tol": (float, 0.05),
    },
    "variation": {
        "s": (float, 0.5),
        "eta": (float, 0.25),
        "n_terms": (int, 10_000),
        "samples": (int, 4001),
        "q_convergent": (float, math.nan),
        "q_divergent": (float, math.nan),
        "decade_tol": (float, 0.02),
        "min_quality": (float, 0.99),
    },
    "cheng": {
        "s": (float, 0.5),
        "eta": (float, 0.25),
        "base_state": (float, math.nan),
        "T": (float, 1.0),
        "margin": (float, 1e-6),
        "times": (_floats, (0.25, 0.5, 1.0)),
        "dx": (_floats, (1e-3, 5e-4, 2.5e-4)),
        "window": (_floats, (-1.5, 2.0)),
        "cfl": (float, 0.9),
        "min_order": (float, 0.8),
    },
    "wkb": {
        "epsilons": (_floats, (0.2, 0.1, 0.05)),
        "base_state": (float, math.nan),
        "amplitude": (float, math.nan),
        "T_fraction": (float, 0.8),
        "t_fraction": (float, 1.0),
        "cells_per_period": (int, 4096),
        "cfl": (float, 0.9),
        "min_slope": (float, 0.8),
    },
    "sweep": {
        "s_primes": (_floats, (0.5, 0.7)),
        "t_fraction": (float, 0.5),
        "per_period": (int, 256),
        "slope_tol": (float, 0.2),
    },
    "oracle": {
        "cases": (int, 500),
        "max_len": (int, 12),
        "s_values": (_floats, (0.25, 0.5, 1.0)),
        "dyadic": (_bool, True),
    },
}

NEEDS_FLUX = {"degeneracy", "cheng", "wkb", "sweep"}


@dataclass
class ExperimentConfig:
    kind: str
    flux: Flux | None
    params: dict
    out_dir: Path
    cost_ceiling: float
    seed: int
    threads: int
    text: str = field(repr=False, default="")
    path: str | None = None

    @property
    def config_hash(self):
        return hashlib.sha256(self.text.encode()).hexdigest()[:16]

    def section(self, name):
        return self.params[name]


def read_sections(text: str) -> dict:
    """Raw ``{section: {key: value}}``; raises :class:`ParseError` with the
    offending line number."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()}", lineno) from None
    except (configparser.MissingSectionHeaderError, configparser.DuplicateOptionError,
            configparser.DuplicateSectionError) as exc:
        msg = str(exc).split("\n")[0]
        raise ParseError(msg.split(": ", 1)[-1], exc.lineno) from None
    return {name: dict(cp[name]) for name in cp.sections()}


def _estimate_cost(kind, flux, p):
    """Rough cell-update count of the run."""
    if kind == "degeneracy":
        d = p["degeneracy"]
        return (d["directions"] + 2) * d["resolution"] * 5
    if kind == "variation":
        v = p["variation"]
        return v["n_terms"] + v["samples"] ** 2
    if kind == "cheng":
        c = p["cheng"]
        width = abs(c["window"][1] - c["window"][0]) if len(c["window"]) == 2 else 1.0
        speed = float(abs(flux.wave_speed(flux.domain.grid(65))).max()) if flux else 1.0
        total = 0.0
        for dx in c["dx"]:
            if dx > 0:
                steps = max(c["times"] or (0,)) * speed / (max(c["cfl"], 1e-12) * dx)
                total += (width / dx) * steps
        return total
    if kind in ("wkb", "sweep"):
        w = p["wkb"]
        n = w["cells_per_period"]
        if kind == "sweep":
            sw = p["sweep"]
            return len(w["epsilons"]) * len(sw["s_primes"]) * (sw["per_period"] ** 2 + 1e6)
        return len(w["epsilons"]) * n * n
    if kind == "oracle-check":
        o = p["oracle"]
        return o["cases"] * len(o["s_values"]) * 2 ** o["max_len"]
    return 0


def _validate(kind, flux, p, problems):
    def need(cond, msg):
        if not cond:
            problems.append(msg)

    if kind == "degeneracy":
        d = p["degeneracy"]
        need(d["kmax"] >= 1, "degeneracy.kmax must be >= 1")
        need(d["grid_size"] >= 3, "degeneracy.grid_size must be >= 3")
        need(d["directions"] >= 1, "degeneracy.directions must be >= 1")
        need(d["resolution"] >= 1000, "degeneracy.resolution must be >= 1000")
    elif kind == "variation":
        v = p["variation"]
        need(0 < v["s"] < 1, "variation.s must lie in (0, 1)")
        need(0 < v["eta"] < 1 - v["s"], "variation.eta must lie in (0, 1 - s)")
        need(v["n_terms"] >= 10, "variation.n_terms must be >= 10")
        need(v["samples"] >= 2, "variation.samples must be >= 2")
    elif kind == "cheng":
        c = p["cheng"]
        need(0 < c["s"] < 1, "cheng.s must lie in (0, 1)")
        need(0 < c["eta"] < 1 - c["s"], "cheng.eta must lie in (0, 1 - s)")
        need(c["T"] >= 0, "cheng.T must be nonnegative")
        need(c["margin"] > 0, "cheng.margin must be positive")
        need(all(0 <= t <= c["T"] for t in c["times"]), "cheng.times must lie in [0, T]")
        need(len(c["dx"]) >= 2 and all(dx > 0 for dx in c["dx"]),
             "cheng.dx needs at least two positive values")
        need(len(c["window"]) == 2 and c["window"][0] < 0 and c["window"][1] > 1,
             "cheng.window must be 'lo, hi' with lo < 0 and hi > 1")
        need(0 < c["cfl"] < 1, "cheng.cfl must lie in (0, 1)")
    if kind in ("wkb", "sweep"):
        w = p["wkb"]
        need(len(w["epsilons"]) >= 2 and all(0 < e <= 1 for e in w["epsilons"]),
             "wkb.epsilons needs at least two values in (0, 1]")
        need(0 < w["T_fraction"] < 1, "wkb.T_fraction must lie in (0, 1)")
        need(0 <= w["t_fraction"] <= 1, "wkb.t_fraction must lie in [0, 1]")
        need(w["cells_per_period"] >= 16, "wkb.cells_per_period must be >= 16")
        need(0 < w["cfl"] < 1, "wkb.cfl must lie in (0, 1)")
    if kind == "sweep":
        sw = p["sweep"]
        need(len(sw["s_primes"]) >= 1 and all(0 < s < 1 for s in sw["s_primes"]),
             "sweep.s_primes must lie in (0, 1)")
        need(0 <= sw["t_fraction"] <= 1, "sweep.t_fraction must lie in [0, 1]")
        need(sw["per_period"] >= 8, "sweep.per_period must be >= 8")
    if kind == "oracle-check":
        o = p["oracle"]
        need(o["cases"] >= 1, "oracle.cases must be >= 1")
        need(2 <= o["max_len"] <= 14, "oracle.max_len must lie in [2, 14]")
        need(all(s > 0 for s in o["s_values"]), "oracle.s_values must be positive")
    r = p["run"]
    need(r["cost_ceiling"] > 0, "run.cost_ceiling must be positive")
    need(r["threads"] >= 1, "run.threads must be >= 1")


def parse_config_text(text: str, kind: str, path=None) -> ExperimentConfig:
    if kind not in KINDS:
        raise ValidationError([f"unknown experiment kind {kind!r}"])
    raw = read_sections(text)
    problems = []
    for name in raw:
        if name not in SCHEMA and name != "flux":
            problems.append(f"unknown section [{name}]")
    params = {}
    for name, keys in SCHEMA.items():
        given = raw.get(name, {})
        out = {}
        for key, value in given.items():
            if key not in keys:
                problems.append(f"{name}.{key} is not a known field")
        for key, (conv, default) in keys.items():
            if key in given:
                try:
                    out[key] = conv(given[key])
                except ValueError:
                    problems.append(f"{name}.{key}: cannot read {given[key]!r}")
                    out[key] = default
            else:
                out[key] = default
        params[name] = out

    flux = None
    if "flux" in raw:
        try:
            flux = parse_flux_spec(raw["flux"])
        except ValidationError as exc:
            problems.extend(exc.problems)
    elif kind in NEEDS_FLUX:
        problems.append("section [flux] is required")

    _validate(kind, flux, params, problems)
    if not problems:
        cost = _estimate_cost(kind, flux, params)
        if cost > params["run"]["cost_ceiling"]:
            problems.append(f"estimated cost {cost:.3g} exceeds run.cost_ceiling "
                            f"{params['run']['cost_ceiling']:.3g}")
    if problems:
        raise ValidationError(problems)
    r = params["run"]
    return ExperimentConfig(kind, flux, params, Path(r["out"]), r["cost_ceiling"], r["seed"],
                            r["threads"], text, None if path is None else str(path))


def parse_config(path, kind: str) -> ExperimentConfig:
    """Read and validate a config file for experiment ``kind``."""
    text = Path(path).read_text()
    return parse_config_text(text, kind, path)
