"""Command-line orchestration: validate and run experiment configs, emit
plot-ready series from saved reports.

Exit codes: 0 success, 2 validation failure, 3 resource refusal.
All output files are written atomically (temp file + rename).  Reports are
deterministic for a fixed config and seed: wall-clock fields live outside
the digested payload and CSV bodies carry no timestamps except the
wall_time_ms column, which comparisons are expected to exclude.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Dict, List, Optional

from . import __version__
from .config import (ExperimentConfig, ConfigError, build_family,
                     build_measure, parse_config)
from .coarse import (CoarseSpec, EntropyEstimate, exact_conditional_entropy,
                     exact_partition_entropy, plugin_partition_entropy)
from .entropy import avez_profile, continuity_experiment, semicontinuity_check
from .errors import ResourceError, UsageError
from .groups import GeneratingSet, LatticeGroup
from .heatkernel import sup_kernel_profile, tail_model_from_profile, verify_comparison
from .measures import EXACT, ProbMeasure, shannon_entropy
from .walks import (WalkConfig, chung_fuchs_escape, escape_from_green,
                    escape_mc, green_sum, range_rate_profile,
                    symmetry_certificate, _green_terms)


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(rows: List[List], header: List[str]) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _audit(config: ExperimentConfig,
           measures: Dict[str, ProbMeasure]) -> dict:
    """Hypothesis audit attached to every report."""
    out = {
        "declared_growth_degree":
            config.group.spec.declared_growth_degree,
        "symmetry_certificate_depth": {},
        "nondegeneracy_witness": {},
        "truncation_deficits": {name: mu.mass_deficit
                                for name, mu in measures.items()},
    }
    for name, mu in measures.items():
        out["symmetry_certificate_depth"][name] = symmetry_certificate(mu)
        if mu.support_size <= 32:
            gens = GeneratingSet(tuple(mu.support()) +
                                 (mu.group.identity(),))
            from .groups import ball_size
            out["nondegeneracy_witness"][name] = [
                ball_size(gens, w) for w in range(1, 5)]
        else:
            out["nondegeneracy_witness"][name] = "skipped(support too large)"
    return out


# -- experiment runners -------------------------------------------------------------

def _estimate_rows(estimates, seed: int, wall_ms: int) -> List[List]:
    return [[e.method, e.point, e.std_error, e.samples, seed, wall_ms]
            for e in estimates]


def _run_escape(config: ExperimentConfig) -> dict:
    mu = build_measure(config)
    sc = config.scales
    cfg = WalkConfig(steps=sc["steps"], samples=sc["samples"],
                     master_seed=config.master_seed)
    t0 = time.monotonic()
    mc = escape_mc(mu, cfg)
    estimates = [mc.first_return, mc.range_rate]
    results = {
        "first_return": vars(mc.first_return),
        "range_rate": vars(mc.range_rate),
    }
    n_max = sc["green_n_max"]
    terms, _ = _green_terms(mu, n_max, EXACT)
    tail_model = None
    group = config.group
    if isinstance(group, LatticeGroup) and group.d >= 3:
        prof = sup_kernel_profile(mu, sc["tail_fit_hi"], EXACT)
        tail_model = tail_model_from_profile(
            prof, group.d, range(sc["tail_fit_lo"], sc["tail_fit_hi"] + 1),
            inflation=sc["tail_inflation"])
    green = escape_from_green(mu, n_max, tail_model)
    results["green"] = {
        "point": green.point, "lower": green.lower, "upper": green.upper,
        "verdict": green.verdict, "partial_sum": green.partial_sum,
        "last_term": green.last_term,
    }
    if green.conclusive:
        estimates.append(green.as_estimate())
    if isinstance(group, LatticeGroup):
        try:
            cf = chung_fuchs_escape(mu, grid=sc["grid"],
                                    refinements=sc["refinements"])
        except UsageError as exc:
            results["chung_fuchs"] = {"skipped": str(exc)}
        else:
            if cf == "recurrent":
                results["chung_fuchs"] = {"verdict": "recurrent"}
            else:
                results["chung_fuchs"] = vars(cf)
                estimates.append(cf)
    wall = int((time.monotonic() - t0) * 1000)
    return {
        "results": results,
        "csv": _csv(_estimate_rows(estimates, config.master_seed, wall),
                    ["method", "point", "std_error", "samples", "seed",
                     "wall_time_ms"]),
        "series": {"green_partial": {
            "x": list(range(len(terms))),
            "y": [sum(terms[:i + 1]) for i in range(len(terms))],
            "x_label": "steps", "y_label": "partial green sum"}},
        "measures": {"measure": mu},
    }


def _run_entropy_profile(config: ExperimentConfig) -> dict:
    mu = build_measure(config)
    prof = avez_profile(mu, config.scales["n_max"])
    from .entropy import entropy_bracket
    bracket = entropy_bracket(prof)
    rows = [[n, h, d] for n, h, d in prof.entries]
    return {
        "results": {
            "profile": prof.entries,
            "bracket": vars(bracket),
        },
        "csv": _csv(rows, ["n", "entropy_nats", "mass_deficit"]),
        "series": {"entropy_profile": {
            "x": [n for n, _, _ in prof.entries],
            "y": [h for _, h, _ in prof.entries],
            "x_label": "steps", "y_label": "nats"}},
        "measures": {"measure": mu},
    }


def _run_continuity(config: ExperimentConfig) -> dict:
    family = build_family(config)
    table = continuity_experiment(family, config.scales["k_list"],
                                  config.scales["n_max"])
    verdict = semicontinuity_check(
        table, config.tolerances.get("semicontinuity", 1e-9))
    rows = []
    for row in table.rows:
        rows.append([row.k, row.step_entropy,
                     row.profile.entries[-1][1], row.diffs[-1],
                     row.bracket.lower if row.bracket else "",
                     row.bracket.upper if row.bracket else ""])
    n_max = table.n_max
    return {
        "results": {
            "limit_entropy": table.limit_step_entropy,
            "limit_profile": table.limit_profile.entries,
            "rows": [{"k": r.k, "step_entropy": r.step_entropy,
                      "diffs": r.diffs,
                      "bracket": vars(r.bracket) if r.bracket else None}
                     for r in table.rows],
            "semicontinuity": vars(verdict),
            "warnings": table.warnings,
        },
        "csv": _csv(rows, ["k", "step_entropy", f"entropy_at_n{n_max}",
                           f"abs_diff_at_n{n_max}", "bracket_lower",
                           "bracket_upper"]),
        "series": {"entropy_diff_vs_k": {
            "x": [r.k for r in table.rows],
            "y": [r.diffs[-1] for r in table.rows],
            "x_label": "k", "y_label": "nats"}},
        "measures": {"limit": family.limit},
    }


def _run_discontinuity(config: ExperimentConfig) -> dict:
    family = build_family(config)
    sc = config.scales
    steps_list = sorted(sc["steps_list"])
    ks = list(sc["k_list"])
    rows = []
    results = {"members": []}
    proxy_k = config.record["family"].get("proxy_k", 4096)
    series_x, series_y, series_err = [], [], []
    for k in ks + [proxy_k]:
        mu = family(k)
        cfg = WalkConfig(steps=steps_list[-1], samples=sc["samples"],
                         master_seed=config.master_seed)
        prof = range_rate_profile(mu, cfg, steps_list)
        member = {"k": k, "entries": [
            {"steps": h, "point": e.point, "std_error": e.std_error}
            for h, e in prof.entries],
            "gaps": [{"point": g.point, "std_error": g.std_error}
                     for g in prof.gaps]}
        results["members"].append(member)
        for h, e in prof.entries:
            rows.append([k, h, e.point, e.std_error, e.samples])
        series_x.append(k)
        series_y.append(prof.entries[-1][1].point)
        series_err.append(prof.entries[-1][1].std_error)
    return {
        "results": results,
        "csv": _csv(rows, ["k", "steps", "range_rate", "std_error",
                           "samples"]),
        "series": {"escape_vs_k": {
            "x": series_x, "y": series_y, "yerr": series_err,
            "x_label": "k", "y_label": "range rate"}},
        "measures": {f"k={proxy_k}": family(proxy_k)},
    }


def _run_heatkernel(config: ExperimentConfig) -> dict:
    mu1 = build_measure(config, "measure_symmetric")
    mu2 = build_measure(config, "measure_compared")
    sc = config.scales
    report = verify_comparison(
        mu1, mu2, config.record["d"], sc["n_max"],
        fit_range=range(sc["fit_lo"], sc["fit_hi"] + 1))
    results = {
        "symmetric_ok": report.symmetric_ok,
        "dominance_failures": [k.hex() for k in report.dominance_failures],
        "c1": report.c1, "c1_clamped": report.c1_clamped, "c2": report.c2,
        "bound_ok": report.bound_ok, "min_margin": report.min_margin,
        "passed": report.passed,
        "trace": json.loads(report.trace.to_json()) if report.trace else None,
    }
    rows = [["passed", report.passed], ["c1", report.c1],
            ["c2", report.c2], ["min_margin", report.min_margin],
            ["C_out", report.trace.C_out if report.trace else ""]]
    return {
        "results": results,
        "csv": _csv(rows, ["quantity", "value"]),
        "series": {},
        "measures": {"measure_symmetric": mu1, "measure_compared": mu2},
    }


def _run_coarse(config: ExperimentConfig) -> dict:
    mu = build_measure(config)
    from .config import _Collector, _validate_coarse
    errors = _Collector("")
    parsed = _validate_coarse(config.group, config.record["coarse"], errors)
    errors.finish()
    spec = CoarseSpec(t0=parsed["t0"], N=parsed["N"], n0=parsed["n0"],
                      L=tuple(parsed["L"]), R=tuple(parsed["R"]),
                      F=tuple(parsed["F"]) if "F" in parsed else None)
    n = config.scales["n"]
    cfg = WalkConfig(steps=n, samples=config.scales["samples"],
                     master_seed=config.master_seed)
    rows = []
    results = {}
    for stat in ("coarse_trajectory", "bad_increments",
                 "coarse_slices_wreath"):
        exact = exact_partition_entropy(mu, stat, n, spec)
        plug = plugin_partition_entropy(mu, stat, n, spec, cfg)
        results[stat] = {"exact": exact.point, "plug_in": plug.point,
                         "miller_madow": plug.miller_madow,
                         "low_confidence": plug.low_confidence}
        rows.append([stat, "exact-enumeration", exact.point])
        rows.append([stat, "plug-in", plug.point])
        rows.append([stat, "plug-in+miller-madow", plug.miller_madow])
    lamps_out_given = exact_conditional_entropy(
        mu, ["lamps_out_coarse"], ["coarse_trajectory", "bad_increments"],
        n, spec)
    lamps_in_given = exact_conditional_entropy(
        mu, ["lamps_in_coarse"],
        ["walk_endpoint", "coarse_trajectory", "bad_increments"], n, spec)
    results["lamps_out_given_coarse_and_bad"] = lamps_out_given
    results["lamps_in_given_endpoint_coarse_bad"] = lamps_in_given
    rows.append(["lamps_out|coarse,bad", "exact-enumeration",
                 lamps_out_given])
    rows.append(["lamps_in|endpoint,coarse,bad", "exact-enumeration",
                 lamps_in_given])
    return {
        "results": results,
        "csv": _csv(rows, ["statistic", "method", "entropy_nats"]),
        "series": {},
        "measures": {"measure": mu},
    }


_RUNNERS = {
    "escape": _run_escape,
    "entropy-profile": _run_entropy_profile,
    "continuity": _run_continuity,
    "discontinuity-demo": _run_discontinuity,
    "heat-kernel-compare": _run_heatkernel,
    "coarse-diagnostics": _run_coarse,
}


def run(config: ExperimentConfig, output_dir: Optional[str] = None) -> dict:
    """Execute one experiment; returns the report record and writes
    report.json plus results.csv under the output directory."""
    started = time.monotonic()
    out = _RUNNERS[config.kind](config)
    report = {
        "tool_version": __version__,
        "kind": config.kind,
        "config_digest": config.digest(),
        "config": config.record,
        "results": out["results"],
        "series": out["series"],
        "hypothesis_audit": _audit(config, out["measures"]),
        "wall_time_ms": int((time.monotonic() - started) * 1000),
    }
    target = output_dir or config.record.get("output_dir")
    if target:
        os.makedirs(target, exist_ok=True)
        body = dict(report)
        wall = body.pop("wall_time_ms")
        text = json.dumps(body, indent=1, sort_keys=True)
        # wall time rides along outside the deterministic payload
        _atomic_write(os.path.join(target, "report.json"),
                      json.dumps({**body, "wall_time_ms": wall},
                                 indent=1, sort_keys=True))
        _atomic_write(os.path.join(target, "results.csv"), out["csv"])
    report["_csv"] = out["csv"]
    return report


def emit_series(report: dict, which: str) -> str:
    """Two-column (x, y [, yerr]) text for one series of a saved report."""
    series = report.get("series", {})
    if which not in series or not series[which].get("x"):
        available = sorted(k for k, v in series.items() if v.get("x"))
        raise UsageError(
            f"series {which!r} not present; available: {available}")
    s = series[which]
    lines = [f"# x: {s.get('x_label', 'x')}  y: {s.get('y_label', 'y')}"]
    yerr = s.get("yerr")
    for i, (x, y) in enumerate(zip(s["x"], s["y"])):
        if yerr:
            lines.append(f"{_fmt(x)} {_fmt(y)} {_fmt(yerr[i])}")
        else:
            lines.append(f"{_fmt(x)} {_fmt(y)}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="groupwalks",
        description="random walks on countable groups: entropy, escape "
                    "probabilities, heat kernels, coarse diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config")
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_emit = sub.add_parser("emit", help="emit a series from a report")
    p_emit.add_argument("report")
    p_emit.add_argument("series")
    p_emit.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            with open(args.config, encoding="utf-8") as fh:
                parse_config(fh.read())
        except ConfigError as exc:
            for ln, path, reason in exc.errors:
                loc = f"line {ln}, " if ln else ""
                print(f"error: {loc}{path}: {reason}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print("ok")
        return 0

    if args.command == "run":
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = parse_config(fh.read())
        except (ConfigError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        try:
            report = run(config, args.output_dir)
        except ResourceError as exc:
            print(f"resource refusal: {exc}", file=sys.stderr)
            return 3
        if not (args.output_dir or config.record.get("output_dir")):
            print(json.dumps({k: v for k, v in report.items()
                              if k not in ("_csv",)}, indent=1,
                             sort_keys=True))
        return 0

    if args.command == "emit":
        try:
            with open(args.report, encoding="utf-8") as fh:
                report = json.load(fh)
            text = emit_series(report, args.series)
        except (UsageError, OSError, json.JSONDecodeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.out:
            _atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
