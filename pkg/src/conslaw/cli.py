"""``conslaw`` command line.

    conslaw KIND --config PATH [--out DIR] [--seed N] [--threads N]

Each run writes its CSVs and a ``manifest.json`` into the output
directory. The manifest is written on failure too and names the stage
that failed. Exit status is 0 iff every configured check passed, 1 if a
check failed and 2 if the run could not complete.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import constructions as cons
from .config import KINDS, ExperimentConfig, parse_config
from .csvio import write_csv
from .errors import ConslawError, Inconclusive
from .flux import degeneracy_report, smooth_degeneracy
from .transport import (GodunovConfig, characteristic_flow, godunov_solve,
                        transported_samples)
from .variation import (SampledFunction, SeriesProbe, classify_growth,
                        partial_variation_series, tv_s, tv_s_bruteforce)


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


@dataclass
class RunManifest:
    kind: str
    config_path: str | None
    config_hash: str | None = None
    config_echo: str | None = None
    version: str = field(default_factory=tool_version)
    seed: int | None = None
    threads: int | None = None
    wall_time_s: float = 0.0
    status: str = "running"
    failed_stage: str | None = None
    error: str | None = None
    checks: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)

    @property
    def passed(self):
        return self.status == "ok" and all(self.checks.values())

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=str) + "\n")
        return path


class _Run:
    """Collects outputs and checks for one experiment."""

    def __init__(self, cfg: ExperimentConfig, manifest: RunManifest):
        self.cfg = cfg
        self.manifest = manifest

    def csv(self, name, header, rows):
        path = write_csv(self.cfg.out_dir / name, header, rows, self.cfg.config_hash)
        self.manifest.outputs.append(name)
        return path

    def check(self, name, ok, value=None):
        self.manifest.checks[name] = bool(ok)
        if value is not None:
            self.manifest.values[name] = value


def _fit_order(dxs, errs):
    if any(e <= 0 for e in errs):
        return math.inf
    return float(np.polyfit(np.log(dxs), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------
# pipelines


def run_degeneracy(run: _Run):
    p = run.cfg.section("degeneracy")
    rep = degeneracy_report(run.cfg.flux)
    row = rep.as_row(run.cfg.flux.label)
    run.csv("degeneracy.csv", list(row), [row])
    if not math.isnan(p["expect_d"]):
        run.check("d", rep.d == p["expect_d"], rep.d)
    if not math.isnan(p["expect_alpha"]):
        run.check("alpha", abs(rep.alpha_fit - p["expect_alpha"]) <= p["alpha_tol"],
                  rep.alpha_fit)
    if not math.isnan(p["expect_p"]):
        run.check("p_holder", abs(rep.p_holder - p["expect_p"]) <= p["p_rel_tol"] * p["expect_p"],
                  rep.p_holder)


def _growth_row(q, partial, decade_tol, min_quality):
    try:
        g = classify_growth(partial, decade_tol=decade_tol, min_quality=min_quality)
        return g, [q, g.verdict, g.model, g.limit_or_rate, g.fit_quality, g.tail_exponent,
                   g.decade_increase]
    except Inconclusive:
        return None, [q, "inconclusive", "", math.nan, math.nan, math.nan, math.nan]


def run_variation(run: _Run):
    v = run.cfg.section("variation")
    params = cons.OscillatorParams(v["s"], v["eta"])
    xk, _ = cons.oscillator_extrema(params, v["samples"])
    x = np.unique(np.concatenate([[0.0], xk, np.linspace(0.0, 1.0, v["samples"])]))
    f = SampledFunction(x, cons.oscillator(params, x))
    rows = []
    for s in (params.s, params.s + params.eta):
        res = tv_s(f, s)
        rows.append([s, res.p, res.value, len(res.partition)])
        idx = np.asarray(res.partition, dtype=int)
        run.csv(f"variation_partition_s={s!r}.csv", ["index", "x", "u"],
                zip(idx.tolist(), x[idx].tolist(), f.values[idx].tolist()))
    run.csv("variation.csv", ["s", "p", "value", "partition_length"], rows)

    amps = cons.oscillator_amplitudes(params, v["n_terms"])
    q_conv = v["q_convergent"] if not math.isnan(v["q_convergent"]) else 1.0 / params.s
    q_div = (v["q_divergent"] if not math.isnan(v["q_divergent"])
             else 1.0 / (params.s + params.eta))
    grows = []
    verdicts = {}
    for q in (q_conv, q_div):
        partial = partial_variation_series(SeriesProbe(lambda k, a=amps: a[k.astype(int) - 1],
                                                       q, v["n_terms"]))
        g, row = _growth_row(q, partial, v["decade_tol"], v["min_quality"])
        grows.append(row)
        verdicts[q] = g
    run.csv("growth.csv", ["q", "verdict", "model", "limit_or_rate", "fit_quality",
                           "tail_exponent", "decade_increase"], grows)
    gc, gd = verdicts[q_conv], verdicts[q_div]
    run.check("q_convergent", gc is not None and gc.verdict == "convergent",
              None if gc is None else gc.decade_increase)
    if gc is not None:
        want = q_conv * (params.s + params.eta)
        run.check("tail_exponent", abs(gc.tail_exponent - want) <= 0.1, gc.tail_exponent)
    run.check("q_divergent", gd is not None and gd.verdict == "divergent"
              and gd.fit_quality >= v["min_quality"], None if gd is None else gd.fit_quality)


def run_cheng(run: _Run):
    c = run.cfg.section("cheng")
    flux = run.cfg.flux
    params = cons.OscillatorParams(c["s"], c["eta"])
    base = c["base_state"]
    if math.isnan(base):
        base = smooth_degeneracy(flux)[1]
    y = cons.cheng_y_grid(params)
    data = cons.select_delta(flux, base, params, c["T"], margin=c["margin"], y_grid=y)
    run.csv("cheng_delta.csv", ["base_state", "delta", "target_T", "certified_T_delta",
                                "margin", "orientation"],
            [[data.base_state, data.delta, data.target_T, data.certified_T_delta,
              data.monotonicity_margin, data.orientation]])
    init = SampledFunction(y, data.u0(y))
    tv0 = tv_s(init, params.s).value
    flows = []
    for t in c["times"]:
        fl = characteristic_flow(flux, data.u0, t, y, margin=c["margin"])
        tvt = tv_s(transported_samples(flux, data.u0, t, y), params.s).value
        flows.append([t, fl.min_slope, tv0, tvt])
        run.check(f"min_slope_t={t!r}", fl.min_slope > c["margin"], fl.min_slope)
        run.check(f"tv_identity_t={t!r}", tvt == tv0)
    run.csv("cheng_flow.csv", ["t", "min_slope", "tvs_initial", "tvs_transported"], flows)

    lo, hi = c["window"]
    conv = []
    diag_rows = []
    for t in c["times"]:
        errs = []
        for dx in c["dx"]:
            gcfg = GodunovConfig(dx=dx, cfl=c["cfl"], domain=(lo, hi))
            x = gcfg.centers()
            diag = []
            num = godunov_solve(flux, SampledFunction(x, data.u0(x)), t, gcfg,
                                diagnostics=diag, frames=4)
            u_lo, u_hi = diag[0][1], diag[0][2]
            diag_rows.extend([t, dx, *d] for d in diag)
            run.check(f"max_principle_t={t!r}_dx={dx!r}",
                      all(u_lo - 1e-12 <= d[1] and d[2] <= u_hi + 1e-12 for d in diag))
            ex = cons.cheng_solution(data, t, x, y_grid=y).solution
            err = float(np.sum(np.abs(num.values - ex.values)) * (hi - lo) / len(x))
            errs.append(err)
            conv.append([t, dx, err])
        if t > 0:
            order = _fit_order(c["dx"], errs)
            run.check(f"l1_order_t={t!r}", order >= c["min_order"], order)
    run.csv("cheng_convergence.csv", ["t", "dx", "l1"], conv)
    run.csv("cheng_godunov.csv", ["t_end", "dx", "t", "min", "max", "mass"], diag_rows)


def _wkb_config(run: _Run, epsilons=None):
    w = run.cfg.section("wkb")
    base = None if math.isnan(w["base_state"]) else w["base_state"]
    amp = None if math.isnan(w["amplitude"]) else w["amplitude"]
    return cons.build_wkb_config(run.cfg.flux, base_state=base, amplitude=amp,
                                 epsilons=epsilons or w["epsilons"], T_fraction=w["T_fraction"])


def run_wkb(run: _Run):
    w = run.cfg.section("wkb")
    wc = _wkb_config(run)
    t = w["t_fraction"] * wc.T
    run.csv("wkb_config.csv", ["base_state", "d", "lambda", "b", "T", "profile_shock_time", "t"],
            [[wc.base_state, wc.d, wc.lam, wc.b_coeff, wc.T, wc.profile_shock_time, t]])
    gcfg = GodunovConfig(dx=1.0 / w["cells_per_period"], cfl=w["cfl"], domain=(0.0, 1.0),
                         boundary="periodic")
    eps = sorted(wc.epsilons, reverse=True)
    rows = [[e, *cons.wkb_residual(wc, e, t, gcfg)] for e in eps]
    run.csv("wkb_residual.csv", ["epsilon", "l1", "linf", "relative"], rows)
    rel = [r[3] for r in rows]
    run.check("strictly_decreasing", all(b < a for a, b in zip(rel, rel[1:])))
    if all(r > 0 for r in rel):
        slope, _, r2 = cons.fit_loglog(eps, rel)
    else:
        slope = r2 = math.nan
    run.check("residual_slope", slope >= w["min_slope"], slope)
    run.manifest.values["residual_fit_quality"] = r2


def run_sweep(run: _Run):
    sw = run.cfg.section("sweep")
    wc = _wkb_config(run)
    t = sw["t_fraction"] * wc.T
    rep = cons.sobolev_scaling_sweep(wc, sw["s_primes"], t, per_period=sw["per_period"],
                                     threads=run.cfg.threads)
    run.csv("sweep.csv", ["epsilon", "s_prime", "gagliardo", "tvs"], rep.rows)
    rows = []
    for sp in sorted(rep.slopes):
        expected = 1.0 - sp * wc.d
        gs, gq = rep.slopes[sp]["gagliardo"]
        ts, tq = rep.slopes[sp]["tvs"]
        rows.append([sp, gs, gq, ts, tq, expected])
        run.check(f"gagliardo_slope_s={sp!r}", abs(gs - expected) <= sw["slope_tol"], gs)
    run.csv("sweep_slopes.csv", ["s_prime", "gagliardo_slope", "gagliardo_fit_quality",
                                 "tvs_slope", "tvs_fit_quality", "expected"], rows)


def oracle_cases(seed, cases, max_len, dyadic=True):
    """Reproducible random samples for the DP oracle check."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(cases):
        n = int(rng.integers(2, max_len + 1))
        if dyadic:
            vals = rng.integers(-32, 33, size=n) / 16.0
        else:
            vals = rng.normal(size=n)
        out.append(vals)
    return out


def run_oracle(run: _Run):
    o = run.cfg.section("oracle")
    rows = []
    mismatches = 0
    for i, vals in enumerate(oracle_cases(run.cfg.seed, o["cases"], o["max_len"], o["dyadic"])):
        x = np.arange(len(vals), dtype=float)
        f = SampledFunction(x, vals)
        for s in o["s_values"]:
            dp = tv_s(f, s).value
            bf = tv_s_bruteforce(f, s)
            mismatches += dp != bf
            rows.append([i, len(vals), s, dp, bf, dp == bf])
    run.csv("oracle.csv", ["case", "n", "s", "dp", "bruteforce", "match"], rows)
    run.check("dp_equals_bruteforce", mismatches == 0, int(mismatches))


PIPELINES = {
    "degeneracy": run_degeneracy,
    "variation": run_variation,
    "cheng": run_cheng,
    "wkb": run_wkb,
    "sweep": run_sweep,
    "oracle-check": run_oracle,
}


def run(cfg: ExperimentConfig, manifest: RunManifest | None = None) -> RunManifest:
    """Execute a validated config; the manifest is written whatever happens."""
    if manifest is None:
        manifest = RunManifest(cfg.kind, cfg.path)
    manifest.config_hash = cfg.config_hash
    manifest.config_echo = cfg.text
    manifest.seed = cfg.seed
    manifest.threads = cfg.threads
    start = time.perf_counter()
    try:
        PIPELINES[cfg.kind](_Run(cfg, manifest))
        manifest.status = "ok"
    except (ConslawError, ValueError, ArithmeticError) as exc:
        manifest.status = "failed"
        manifest.failed_stage = cfg.kind
        manifest.error = f"{type(exc).__name__}: {exc}"
    finally:
        manifest.wall_time_s = time.perf_counter() - start
        manifest.write(cfg.out_dir)
    return manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="conslaw", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", help="output directory (overrides run.out)")
        sp.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
        sp.add_argument("--threads", type=int, help="worker threads (overrides run.threads)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    manifest = RunManifest(args.kind, args.config)
    fallback_out = Path(args.out) if args.out else Path("out")
    try:
        cfg = parse_config(args.config, args.kind)
    except (ConslawError, OSError) as exc:
        manifest.status = "failed"
        manifest.failed_stage = "config"
        manifest.error = f"{type(exc).__name__}: {exc}"
        manifest.write(fallback_out)
        print(f"conslaw: {manifest.error}", file=sys.stderr)
        return 2
    if args.out:
        cfg.out_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            print("conslaw: --threads must be >= 1", file=sys.stderr)
            return 2
        cfg.threads = args.threads
    manifest = run(cfg, manifest)
    for name, ok in manifest.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if manifest.status != "ok":
        print(f"conslaw: {manifest.failed_stage} failed: {manifest.error}", file=sys.stderr)
        return 2
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    sys.exit(main())
