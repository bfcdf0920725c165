"""Command-line surface for testing, selection, simulation and reporting.

Subcommands: test, select, path, calibrate, simulate, replay, report.
Every run writes its result files plus a manifest into --out; identical
inputs, seeds and configuration produce byte-identical result files at
any --jobs value. Exit codes: 0 ok, 2 input error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .data import load_csv
from .errors import InputError, NumericalError
from .families import Family
from .lasso import path_entry_order
from .manifest import RunManifest, config_hash, dumps, write_csv, write_json
from .pvalue import PValueVariant, empirical_p_value
from .selection import HaltCriterion, replay_selection, select
from .simstudy import ScenarioConfig, run_null_study, run_selection_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _default_seed() -> int:
    env = os.environ.get("SIMCAL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"SIMCAL_SEED must be an integer, got {env!r}") from exc


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV file")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument(
        "--family", required=True, choices=[f.value for f in Family]
    )


def _add_common_args(p: argparse.ArgumentParser, jobs: bool = True) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: SIMCAL_SEED or 0)")
    if jobs:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker parallelism cap")


def _parse_set(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _parse_alpha_grid(text: str) -> list[float]:
    """Comma list '0.05,0.1' or range 'start:stop:step' (stop inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InputError("alpha grid range must be start:stop:step")
        start, stop, step = (float(v) for v in parts)
        n = int(round((stop - start) / step)) + 1
        grid = [start + i * step for i in range(n) if start + i * step <= stop + 1e-12]
    else:
        grid = [float(v) for v in text.split(",") if v.strip()]
    if not grid or any(not 0.0 < a < 1.0 for a in grid):
        raise InputError("alpha grid values must lie in (0, 1)")
    return grid


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Path, subcommand: str, config: dict, seed: int,
            outputs: list[Path], t0: float) -> None:
    RunManifest(
        subcommand=subcommand,
        config_hash=config_hash(config),
        master_seed=seed,
        timing=time.perf_counter() - t0,
        outputs=sorted(p.name for p in outputs),
    ).write(out)


def cmd_test(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    seed = args.seed if args.seed is not None else _default_seed()
    dataset = load_csv(args.data, args.response, Family.parse(args.family))
    A = dataset.resolve_indices(_parse_set(args.restrict))
    variant = PValueVariant(args.variant)
    result = empirical_p_value(
        dataset, A, args.n_sims, variant, seed=seed, n_jobs=args.jobs
    )
    payload = {
        "p_value": result.value,
        "variant": result.variant.value,
        "estimand": result.estimand.value,
        "N": result.N,
        "exceed_count": result.exceed_count,
        "lambda_obs": result.lambda_obs,
        "lambdas_simulated": list(result.lambda_sims),
        "restrict": list(A),
        "family": dataset.family.value,
    }
    result_path = out / "test.json"
    write_json(result_path, payload)
    sys.stdout.write(dumps(payload))
    config = {
        "data": str(args.data), "response": args.response,
        "family": args.family, "restrict": list(A),
        "n_sims": args.n_sims, "variant": args.variant, "seed": seed,
    }
    _finish(out, "test", config, seed, [result_path], t0)
    return EXIT_OK


def cmd_select(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    seed = args.seed if args.seed is not None else _default_seed()
    dataset = load_csv(args.data, args.response, Family.parse(args.family))
    result = select(
        dataset,
        alpha=args.alpha,
        criterion=HaltCriterion(args.criterion),
        N=args.n_sims,
        max_steps=args.max_steps,
        seed=seed,
        variant=PValueVariant(args.variant),
        survey_alpha=args.survey_alpha,
        n_jobs=args.jobs,
    )
    payload = {
        "selected": list(result.selected),
        "p_seq": list(result.p_seq),
        "pfs_seq": list(result.pfs_seq),
        "criterion": result.criterion.value,
        "alpha": result.alpha,
        "halted_at_step": result.halted_at_step,
        "entry_lambdas": list(result.entry_lambdas),
        "halt_reason": result.halt_reason,
        "survey_alpha": result.survey_alpha,
    }
    json_path = out / "selection.json"
    write_json(json_path, payload)
    # one row per accepted step; survey mode records the whole walk
    trace_steps = (
        result.steps
        if args.survey_alpha is not None
        else result.steps[: result.halted_at_step]
    )
    trace_rows = [
        (s.step, ";".join(str(j) for j in s.entering), s.lambda_entry,
         s.p, s.p_fs, s.exceed_count, s.accepted)
        for s in trace_steps
    ]
    trace_path = out / "trace.csv"
    write_csv(
        trace_path,
        ["step", "entering", "lambda_entry", "p", "p_fs", "exceed_count", "accepted"],
        trace_rows,
    )
    sys.stdout.write(dumps(payload))
    config = {
        "data": str(args.data), "response": args.response, "family": args.family,
        "alpha": args.alpha, "criterion": args.criterion, "n_sims": args.n_sims,
        "max_steps": args.max_steps, "variant": args.variant,
        "survey_alpha": args.survey_alpha, "seed": seed,
    }
    _finish(out, "select", config, seed, [json_path, trace_path], t0)
    return EXIT_OK


def cmd_path(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    dataset = load_csv(args.data, args.response, Family.parse(args.family))
    max_steps = args.max_steps or min(dataset.p, dataset.n // 2)
    events = path_entry_order(dataset, max_steps, args.lambda_min_ratio)
    rows = [
        (i + 1, e.lambda_entry, ";".join(str(j) for j in e.entering))
        for i, e in enumerate(events)
    ]
    csv_path = out / "path.csv"
    write_csv(csv_path, ["step", "lambda_entry", "entering"], rows)
    payload = {
        "steps": [
            {"step": i + 1, "lambda_entry": e.lambda_entry,
             "entering": list(e.entering)}
            for i, e in enumerate(events)
        ]
    }
    json_path = out / "path.json"
    write_json(json_path, payload)
    sys.stdout.write(dumps(payload))
    config = {
        "data": str(args.data), "response": args.response, "family": args.family,
        "max_steps": max_steps, "lambda_min_ratio": args.lambda_min_ratio,
    }
    _finish(out, "path", config, 0, [csv_path, json_path], t0)
    return EXIT_OK


def _read_vector(path) -> np.ndarray:
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError as exc:
        raise InputError(f"vector file not found: {path}") from exc
    values = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise InputError(f"vector file has a non-numeric line: {line!r}") from exc
    if not values:
        raise InputError("vector file is empty")
    return np.asarray(values)


def cmd_calibrate(args) -> int:
    from .calibration import calibrate_iterative, calibrate_linear
    from .restricted import fit_restricted, restricted_design

    t0 = time.perf_counter()
    out = _prepare_out(args)
    seed = args.seed if args.seed is not None else _default_seed()
    family = Family.parse(args.family)
    dataset = load_csv(args.data, args.response, family)
    A = dataset.resolve_indices(_parse_set(args.restrict))
    X_A = restricted_design(dataset, A)
    y_sim = _read_vector(args.vector)
    if y_sim.size != dataset.n:
        raise InputError(
            f"vector length {y_sim.size} does not match dataset rows {dataset.n}"
        )
    if args.target_beta is not None:
        beta_target = np.asarray(
            [float(v) for v in args.target_beta.split(",")]
        )
        if beta_target.size != len(A) + 1:
            raise InputError("target beta must have |A| + 1 entries")
        sigma_target = args.target_sigma
    else:
        obs_fit = fit_restricted(dataset, A)
        beta_target = obs_fit.beta_A
        sigma_target = obs_fit.sigma_A
    payload = {
        "restrict": list(A),
        "family": family.value,
        "target_beta": [float(v) for v in beta_target],
    }
    sim_ds = dataset.with_response(y_sim)  # validates y_sim for the family
    if family is Family.LINEAR:
        if sigma_target is None:
            raise InputError("--target-sigma is required with --target-beta (linear)")
        from_fit = fit_restricted(sim_ds, A)
        y_cal = calibrate_linear(
            y_sim, from_fit.beta_A, from_fit.sigma_A,
            beta_target, float(sigma_target), X_A,
        )
        payload["target_sigma"] = float(sigma_target)
        payload["trace"] = None
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        y_cal, trace = calibrate_iterative(y_sim, beta_target, X_A, family, rng)
        payload["trace"] = {
            "iterations": trace.iterations,
            "mse_history": list(trace.mse_history),
            "rejected_steps": trace.rejected_steps,
            "terminated_by": trace.terminated_by.value,
        }
    payload["calibrated"] = [float(v) for v in y_cal]
    json_path = out / "calibrate.json"
    write_json(json_path, payload)
    csv_path = out / "calibrated.csv"
    write_csv(csv_path, ["calibrated"], [(float(v),) for v in y_cal])
    sys.stdout.write(dumps(payload))
    config = {
        "data": str(args.data), "response": args.response, "family": args.family,
        "restrict": list(A), "vector": str(args.vector),
        "target_beta": args.target_beta, "target_sigma": args.target_sigma,
        "seed": seed,
    }
    _finish(out, "calibrate", config, seed, [json_path, csv_path], t0)
    return EXIT_OK


def _load_scenario(args) -> ScenarioConfig:
    try:
        raw = json.loads(Path(args.config).read_text("utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("scenario config must be a JSON object")
    if args.seed is not None:
        raw["master_seed"] = args.seed
    return ScenarioConfig.from_dict(raw)


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    config = _load_scenario(args)
    outputs = []
    if args.study == "null":
        metrics = run_null_study(config, n_jobs=args.jobs)
        m = config.n_replicates
        p_sorted = np.sort(metrics.replicate_p_values)
        pv_rows = [(r + 1, p) for r, p in enumerate(metrics.replicate_p_values)]
        header = ["replicate", "p_value"]
        if metrics.naive_p_values:
            header.append("naive_p_value")
            pv_rows = [
                (r + 1, p, q)
                for r, (p, q) in enumerate(
                    zip(metrics.replicate_p_values, metrics.naive_p_values)
                )
            ]
        pv_path = out / "p_values.csv"
        write_csv(pv_path, header, pv_rows)
        qq_path = out / "qq.csv"
        write_csv(
            qq_path,
            ["uniform_quantile", "sorted_p_value"],
            [((s + 1) / m, p_sorted[s]) for s in range(m)],
        )
        outputs += [pv_path, qq_path]
    else:
        metrics = run_selection_study(config, n_jobs=args.jobs)
        rows = [
            (crit, alpha, v["fwer"], v["fdr"], v["sensitivity"])
            for crit, table in sorted(metrics.per_alpha.items())
            for alpha, v in sorted(table.items())
        ]
        am_path = out / "alpha_metrics.csv"
        write_csv(am_path, ["criterion", "alpha", "fwer", "fdr", "sensitivity"], rows)
        outputs.append(am_path)
    metrics_path = out / "metrics.json"
    write_json(metrics_path, metrics.to_dict())
    config_path = out / "resolved_config.json"
    resolved = {**config.to_dict(), "study": args.study}
    write_json(config_path, resolved)
    outputs += [metrics_path, config_path]
    _finish(out, "simulate", resolved, config.master_seed, outputs, t0)
    return EXIT_OK


def cmd_replay(args) -> int:
    t0 = time.perf_counter()
    out = _prepare_out(args)
    try:
        payload = json.loads(Path(args.selection).read_text("utf-8"))
        p_seq = [float(v) for v in payload["p_seq"]]
    except FileNotFoundError as exc:
        raise InputError(f"selection file not found: {args.selection}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a selection result file: {exc}") from exc
    grid = _parse_alpha_grid(args.alpha_grid)
    rows = []
    for criterion in HaltCriterion:
        halts = replay_selection(p_seq, grid, criterion)
        rows += [(criterion.value, a, h) for a, h in zip(grid, halts)]
    csv_path = out / "replay.csv"
    write_csv(csv_path, ["criterion", "alpha", "halted_at_step"], rows)
    sys.stdout.write(dumps({"alpha_grid": grid, "n_steps": len(p_seq)}))
    config = {"selection": str(args.selection), "alpha_grid": grid}
    _finish(out, "replay", config, 0, [csv_path], t0)
    return EXIT_OK


def cmd_report(args) -> int:
    from . import plots

    t0 = time.perf_counter()
    out = _prepare_out(args)
    in_dirs = [Path(d) for d in args.inputs]
    scenarios = []
    for d in in_dirs:
        mpath = d / "metrics.json"
        cpath = d / "resolved_config.json"
        if not mpath.exists() or not cpath.exists():
            raise InputError(f"{d} is not a simulate output directory")
        scenarios.append(
            (d, json.loads(mpath.read_text("utf-8")),
             json.loads(cpath.read_text("utf-8")))
        )
    outputs = []
    summary_rows = []
    n_scen = len(scenarios)
    for d, metrics, cfg in scenarios:
        name = d.name
        if metrics["kind"] == "null":
            fig_path = out / f"{name}_qq.png"
            plots.render_qq(
                metrics["replicate_p_values"],
                fig_path,
                title=f"{name}: p-value q-q",
                naive_p_values=metrics.get("naive_p_values"),
            )
            outputs.append(fig_path)
            ks = metrics["ks_two_sided"]
            raw = ks["p_value"]
            summary_rows.append(
                (name, cfg["family"], cfg["rho"], cfg["snr_target"],
                 ks["statistic"], raw, min(1.0, raw * n_scen))
            )
        else:
            fig_path = out / f"{name}_metrics.png"
            plots.render_metric_curves(
                metrics["per_alpha"], fig_path, title=f"{name}: selection metrics"
            )
            outputs.append(fig_path)
    if summary_rows:
        summary_path = out / "ks_summary.csv"
        write_csv(
            summary_path,
            ["scenario", "family", "rho", "snr_target",
             "ks_statistic", "ks_p_value", "ks_p_value_bonferroni"],
            summary_rows,
        )
        outputs.append(summary_path)
    table_rows = []
    for d, metrics, _ in scenarios:
        if metrics["kind"] == "selection":
            for crit, table in sorted(metrics["per_alpha"].items()):
                for alpha, v in sorted(table.items(), key=lambda kv: float(kv[0])):
                    table_rows.append(
                        (d.name, crit, float(alpha),
                         v["fwer"], v["fdr"], v["sensitivity"])
                    )
    if table_rows:
        table_path = out / "selection_summary.csv"
        write_csv(
            table_path,
            ["scenario", "criterion", "alpha", "fwer", "fdr", "sensitivity"],
            table_rows,
        )
        outputs.append(table_path)
    config = {"inputs": sorted(str(d) for d in in_dirs)}
    _finish(out, "report", config, 0, outputs, t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simcal",
        description="Significance testing of Lasso path entries by "
        "simulation-calibration.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("test", help="conditional p-value of the next path entry")
    _add_data_args(p)
    p.add_argument("--restrict", default="",
                   help="comma-separated indices or names for the tested set A")
    p.add_argument("--n-sims", type=int, default=100)
    p.add_argument("--variant", default="plain",
                   choices=[v.value for v in PValueVariant])
    _add_common_args(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("select", help="sequential selection along the path")
    _add_data_args(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--criterion", default="threshold",
                   choices=[c.value for c in HaltCriterion])
    p.add_argument("--n-sims", type=int, default=100)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--variant", default="plus",
                   choices=[PValueVariant.PLAIN.value, PValueVariant.PLUS.value])
    p.add_argument("--survey-alpha", type=float, default=None)
    _add_common_args(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("path", help="entry order of the full path")
    _add_data_args(p)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    _add_common_args(p, jobs=False)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("calibrate",
                       help="calibrate a response vector toward target "
                       "restricted-model parameters")
    _add_data_args(p)
    p.add_argument("--restrict", default="",
                   help="comma-separated indices or names for the set A")
    p.add_argument("--vector", required=True,
                   help="CSV file with one value per line (the vector to calibrate)")
    p.add_argument("--target-beta", default=None,
                   help="comma-separated target coefficients, intercept first "
                   "(default: the restricted fit of the observed response)")
    p.add_argument("--target-sigma", type=float, default=None,
                   help="target residual sd (linear family)")
    _add_common_args(p, jobs=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="replicated scenario study")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--study", default="null", choices=["null", "selection"])
    _add_common_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay",
                       help="re-evaluate halting over an alpha grid from a "
                       "recorded p-value sequence")
    p.add_argument("--selection", required=True, help="selection.json from select")
    p.add_argument("--alpha-grid", required=True,
                   help="comma list or start:stop:step")
    _add_common_args(p, jobs=False)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report",
                       help="figures and summary tables from simulate outputs")
    p.add_argument("inputs", nargs="+", help="simulate output directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
