"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 no
candidate sample size qualified.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, RunConfig, claim_inputs, float_list, load_config, search_spec
from .decision_rules import PValueVector, bonferroni, hochberg, holm, rejected_endpoints
from .designs import (
    BorrowingBinaryDesign,
    MultiplicityDesign,
    evaluate,
    has_exact_oracle,
    prior_claim_probability,
    prior_claim_probability_mc,
    run_multiplicity,
    search_sample_size,
)
from .engine import power_curve
from .trial_model import ScenarioSpec

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_NOT_FOUND = 0, 1, 2, 3

ENV_SEED = "BAYESTRIAL_SEED"
ENV_THREADS = "BAYESTRIAL_THREADS"


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.4f}"
    if isinstance(value, (tuple, list, frozenset)):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, default=_json_default) + "\n"
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\r\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (frozenset, set)):
        return sorted(obj)
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _require_designs(cfg: RunConfig):
    if not cfg.designs:
        raise ConfigError("at least one design is required", "design")


def _require_scenarios(cfg: RunConfig):
    if not cfg.scenarios:
        raise ConfigError("at least one scenario is required", "scenarios")


def _oc_row(name, design, scenario, oc, settings) -> dict:
    return {
        "design": name,
        "variant": design.variant.value,
        "scenario": scenario.label.value,
        "theta": ";".join(f"{t:g}" for t in scenario.true_params),
        "n": design.total_n,
        "reject_rate": oc.reject_rate,
        "ci_low": oc.ci_low,
        "ci_high": oc.ci_high,
        "pet": oc.pet,
        "expected_n": oc.expected_n,
        "per_stage_rejects": oc.per_stage_rejects,
        "exact": oc.exact,
        "master_seed": settings.master_seed,
        "replications": oc.replications,
    }


def cmd_oc(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    _require_designs(cfg)
    _require_scenarios(cfg)
    rows = []
    for name, design in zip(cfg.names, cfg.designs):
        if isinstance(design, MultiplicityDesign):
            raise ConfigError("use the 'multiplicity' command for MULTIPLICITY designs", "design.variant")
        for sc in cfg.scenarios:
            oc = evaluate(design, sc, cfg.settings, exact)
            rows.append(_oc_row(name, design, sc, oc, cfg.settings))
    return rows, EXIT_OK


def cmd_search_n(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    _require_designs(cfg)
    search = search_spec(cfg.extra, cfg.scenarios)
    result = search_sample_size(search, cfg.design, cfg.settings, exact)
    rows = [
        {
            "n": r.n,
            "type1": r.type1.reject_rate,
            "type1_ci_low": r.type1.ci_low,
            "type1_ci_high": r.type1.ci_high,
            "power": r.power.reject_rate,
            "power_ci_low": r.power.ci_low,
            "power_ci_high": r.power.ci_high,
            "meets": r.meets,
            "selected": result.chosen == r.n,
            "master_seed": cfg.settings.master_seed,
            "replications": r.type1.replications,
        }
        for r in result.rows
    ]
    if result.found:
        print(f"selected N={result.chosen}", file=sys.stderr)
        return rows, EXIT_OK
    print(f"NOT_FOUND: {result.message}", file=sys.stderr)
    return rows, EXIT_NOT_FOUND


def cmd_power_curve(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    _require_designs(cfg)
    grid = float_list(cfg.extra, "grid", ascending=True)
    rows = []
    for name, design in zip(cfg.names, cfg.designs):
        if exact and has_exact_oracle(design):
            ests = [evaluate(design, ScenarioSpec((g,)), cfg.settings, True) for g in grid]
        else:
            ests = power_curve(design, grid, cfg.settings, with_exact=has_exact_oracle(design)).estimates
        for g, oc in zip(grid, ests):
            rows.append({
                "design": name,
                "theta": g,
                "estimate": oc.reject_rate,
                "ci_low": oc.ci_low,
                "ci_high": oc.ci_high,
                "n": design.total_n,
                "exact": oc.exact,
                "master_seed": cfg.settings.master_seed,
                "replications": oc.replications,
            })
    return rows, EXIT_OK


def cmd_prior_claim(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    priors, n, rule = claim_inputs(cfg.extra)
    rows = []
    for p in priors:
        prob = prior_claim_probability(p, n, rule)
        row = {
            "prior_alpha": p.alpha,
            "prior_beta": p.beta,
            "n": n,
            "probability": prob,
            "mc_estimate": None,
            "mc_ci_low": None,
            "mc_ci_high": None,
            "master_seed": cfg.settings.master_seed,
            "replications": 0,
        }
        if not exact:
            mc = prior_claim_probability_mc(p, n, rule, cfg.settings)
            row.update(mc_estimate=mc.reject_rate, mc_ci_low=mc.ci_low, mc_ci_high=mc.ci_high,
                       replications=mc.replications)
        rows.append(row)
    return rows, EXIT_OK


def cmd_multiplicity(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    if "p_values" in cfg.extra:
        try:
            p = PValueVector(tuple(cfg.extra["p_values"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "p_values") from None
        alpha = float(cfg.extra.get("alpha", 0.025))
        if not 0 < alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)", "alpha")
        procs = (("BONFERRONI", bonferroni), ("HOLM", holm), ("HOCHBERG", hochberg))
        rows = [
            {"method": m, "alpha": alpha, "rejected": "{" + ",".join(map(str, sorted(rejected_endpoints(f(p, alpha))))) + "}"}
            for m, f in procs
        ]
        return rows, EXIT_OK
    _require_designs(cfg)
    _require_scenarios(cfg)
    rows = []
    for name, design in zip(cfg.names, cfg.designs):
        if not isinstance(design, MultiplicityDesign):
            raise ConfigError("the multiplicity command needs a MULTIPLICITY design", "design.variant")
        for sc in cfg.scenarios:
            results = run_multiplicity(design, sc, cfg.settings)
            for m, res in results.items():
                rows.append({
                    "design": name,
                    "k": design.k,
                    "scenario": sc.label.value,
                    "theta": ";".join(f"{t:g}" for t in sc.true_params),
                    "method": m,
                    "fwer": res.fwer,
                    "disjunctive": res.disjunctive,
                    "conjunctive": res.conjunctive,
                    "per_endpoint": res.per_endpoint,
                    "master_seed": cfg.settings.master_seed,
                    "replications": res.replications,
                })
    return rows, EXIT_OK


def cmd_borrow_sweep(cfg: RunConfig, exact: bool) -> tuple[list, int]:
    _require_designs(cfg)
    _require_scenarios(cfg)
    template = cfg.design
    if not isinstance(template, BorrowingBinaryDesign):
        raise ConfigError("borrow-sweep needs a BORROWING_BINARY design", "design.variant")
    a0_grid = float_list(cfg.extra, "a0_grid")
    n_grid = [int(v) for v in float_list(cfg.extra, "n_grid")] if "n_grid" in cfg.extra else [template.n]
    rows = []
    for n in n_grid:
        for a0 in a0_grid:
            try:
                design = replace(template, n=n, a0=a0)
            except ValueError as exc:
                raise ConfigError(str(exc), "a0_grid") from None
            for sc in cfg.scenarios:
                oc = evaluate(design, sc, cfg.settings, exact)
                rows.append({
                    "n": n,
                    "a0": a0,
                    "pilot": f"{template.pilot.x0}/{template.pilot.n0}",
                    "scenario": sc.label.value,
                    "theta": sc.theta,
                    "reject_rate": oc.reject_rate,
                    "ci_low": oc.ci_low,
                    "ci_high": oc.ci_high,
                    "exact": oc.exact,
                    "master_seed": cfg.settings.master_seed,
                    "replications": oc.replications,
                })
    return rows, EXIT_OK


COMMANDS = {
    "oc": (cmd_oc, "operating characteristics per design and scenario"),
    "search-n": (cmd_search_n, "smallest candidate N meeting type I error and power requirements"),
    "power-curve": (cmd_power_curve, "rejection rate over a grid of true parameter values"),
    "prior-claim": (cmd_prior_claim, "prior probability of the study claim"),
    "multiplicity": (cmd_multiplicity, "familywise error and power across endpoint families"),
    "borrow-sweep": (cmd_borrow_sweep, "power-prior borrowing over a0 and N grids"),
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=_u64, help=f"master seed (env {ENV_SEED})")
    common.add_argument("--replications", type=int, help="Monte Carlo replications R")
    common.add_argument("--inner-samples", type=int, help="post-burn-in MCMC draws S for MCMC designs")
    common.add_argument("--threads", type=int, help=f"worker processes (env {ENV_THREADS})")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default from config, else csv)")
    common.add_argument("--exact", action="store_true", help="prefer enumeration oracles where available")
    common.add_argument("--output", metavar="PATH", help="write results here instead of stdout")

    parser = argparse.ArgumentParser(prog="bayestrial", description="Operating characteristics of Bayesian trial designs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _env_int(name: str) -> Optional[int]:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}") from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, matching the config-error code
        return int(exc.code or 0)
    fn, _ = COMMANDS[args.command]
    try:
        overrides = {
            "master_seed": args.seed if args.seed is not None else _env_int(ENV_SEED),
            "parallelism": args.threads if args.threads is not None else _env_int(ENV_THREADS),
            "replications": args.replications,
            "inner_samples": args.inner_samples,
        }
        cfg = load_config(args.config, overrides)
        exact = args.exact or cfg.exact
        rows, code = fn(cfg, exact)
        fmt = args.format or cfg.output
        emit(render(rows, fmt), args.output or cfg.output_path)
        return code
    except ConfigError as exc:
        print(f"config error: {exc.describe()}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure maps to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
