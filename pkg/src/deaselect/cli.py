"""Command-line interface.

Subcommands:

* ``generate`` — write one synthetic scenario panel as CSV.
* ``score`` — efficiency scores for a CSV panel.
* ``select`` — run one input-selection method on a CSV panel.
* ``experiment`` — run a full experiment suite from a JSON config.
* ``report`` — re-emit report files from a stored report JSON.

Exit codes: 0 success; 1 bad input, arguments, or config; 2 a solver
gave up; 3 file I/O failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .benchmarks import EcmParams, RbParams, ecm_backward_select, rb_select
from .data import read_panel_csv, write_panel_csv
from .datagen import generate_scenario, standard_scenario
from .dea import additive_scores, bcc_output_scores, ccr_output_scores, efficient_set
from .exceptions import InputError, SolverFailure
from .grouplasso import AdmmOptions, admm_solve, assemble_gl_problem
from .harness import (
    emit_report,
    load_config,
    load_report,
    merge_timings,
    penalty_scale,
    run_experiment,
)

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """Argument errors surface as InputError so they exit with code 1
    (argparse's default exit code would collide with the solver-failure
    code)."""

    def error(self, message):
        raise InputError(message)


def _parse_inputs(text):
    if text is None:
        return None
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise InputError(f"--inputs must be a comma-separated index list, got {text!r}") from exc


def _write_or_print(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deaselect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write one synthetic scenario panel as CSV")
    p_gen.add_argument("--scenario", type=int, required=True, help="stock scenario id (1-12)")
    p_gen.add_argument("--rts", choices=("crs", "vrs"), default="crs")
    p_gen.add_argument("--seed", type=int, required=True, help="generation seed")
    p_gen.add_argument("--n", type=int, default=None, help="override the panel size")
    p_gen.add_argument("--out", required=True, help="panel CSV destination")
    p_gen.add_argument(
        "--truth", default=None, help="optional JSON destination for the ground truth"
    )
    p_gen.set_defaults(func=_cmd_generate)

    p_score = sub.add_parser("score", help="efficiency scores for a CSV panel")
    p_score.add_argument("--panel", required=True, help="panel CSV path")
    p_score.add_argument("--model", choices=("ccr", "bcc", "additive"), default="ccr")
    p_score.add_argument(
        "--rts",
        choices=("crs", "vrs"),
        default=None,
        help="returns to scale; the radial models imply theirs, the additive model defaults to vrs",
    )
    p_score.add_argument("--inputs", default=None, help="comma-separated input indices (0-based)")
    p_score.add_argument("--tol", type=float, default=1e-6, help="frontier-membership cutoff")
    p_score.add_argument("--out", default=None, help="CSV destination (default: stdout)")
    p_score.set_defaults(func=_cmd_score)

    p_sel = sub.add_parser("select", help="run one input-selection method on a CSV panel")
    p_sel.add_argument("--panel", required=True, help="panel CSV path")
    p_sel.add_argument("--method", choices=("gl", "ecm", "rb"), required=True)
    p_sel.add_argument("--out", default=None, help="JSON destination (default: stdout)")
    gl = p_sel.add_argument_group("gl options")
    gl.add_argument("--lam", type=float, default=0.45, help="penalty weight (grid units)")
    gl.add_argument(
        "--lambda-scaling",
        choices=("collinearity", "absolute"),
        default="collinearity",
        help="how --lam maps onto the panel",
    )
    gl.add_argument(
        "--gl-model",
        choices=("additive", "ccr", "bcc"),
        default="additive",
        help="envelopment program the penalty is attached to",
    )
    gl.add_argument("--mu", type=float, default=150.0)
    gl.add_argument("--max-iter", type=int, default=5000)
    gl.add_argument("--primal-tol", type=float, default=5e-3)
    gl.add_argument("--dual-tol", type=float, default=8e-3)
    gl.add_argument("--eps-select", type=float, default=0.05)
    bench = p_sel.add_argument_group("ecm / rb options")
    bench.add_argument("--rts", choices=("crs", "vrs"), default="crs")
    bench.add_argument("--p0", type=float, default=0.15)
    bench.add_argument("--gamma-bar", type=float, default=1.10)
    bench.add_argument("--alpha", type=float, default=0.05)
    bench.add_argument("--confidence", type=float, default=0.90)
    bench.add_argument("--seed-input", type=int, default=0)
    p_sel.set_defaults(func=_cmd_select)

    p_exp = sub.add_parser("experiment", help="run a full experiment suite from a JSON config")
    p_exp.add_argument("--config", required=True, help="experiment config JSON path")
    p_exp.add_argument(
        "--output-dir", default=None, help="override the config's output directory"
    )
    p_exp.set_defaults(func=_cmd_experiment)

    p_rep = sub.add_parser("report", help="re-emit report files from a stored report JSON")
    p_rep.add_argument("--report", required=True, help="stored report.json path")
    p_rep.add_argument(
        "--timings", default=None, help="optional timings.json to merge back in"
    )
    p_rep.add_argument("--output-dir", required=True, help="where to write the files")
    p_rep.add_argument(
        "--formats",
        default=None,
        help="comma-separated subset of json,timings,tables,long (default: all)",
    )
    p_rep.set_defaults(func=_cmd_report)

    return parser


def _cmd_generate(args) -> None:
    overrides = {} if args.n is None else {"n": args.n}
    scenario = standard_scenario(args.scenario, args.rts, **overrides)
    if args.seed < 0:
        raise InputError("--seed must be nonnegative")
    data, truth = generate_scenario(scenario, args.seed)
    write_panel_csv(data, args.out)
    if args.truth is not None:
        doc = {
            "scenario": scenario.id,
            "rts": scenario.rts,
            "seed": args.seed,
            "true_inputs": list(truth.true_inputs),
            "sigma": truth.sigma,
            "efficiency": [float(e) for e in truth.epsilon],
        }
        Path(args.truth).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {scenario.n} units x {scenario.n_inputs} inputs to {args.out}")


def _score_panel(data, model, rts, inputs):
    if model == "ccr":
        if rts == "vrs":
            raise InputError("--model ccr implies constant returns; drop --rts or use bcc")
        return ccr_output_scores(data, inputs)
    if model == "bcc":
        if rts == "crs":
            raise InputError("--model bcc implies variable returns; drop --rts or use ccr")
        return bcc_output_scores(data, inputs)
    return additive_scores(data, inputs, rts=rts or "vrs")


def _cmd_score(args) -> None:
    data = read_panel_csv(args.panel)
    result = _score_panel(data, args.model, args.rts, _parse_inputs(args.inputs))
    mask = efficient_set(result, tol=args.tol)
    lines = ["unit,score,status,efficient"]
    for k in range(data.n):
        lines.append(f"{k},{float(result.scores[k])!r},{result.statuses[k]},{int(mask[k])}")
    _write_or_print("\n".join(lines) + "\n", args.out)


def _cmd_select(args) -> None:
    data = read_panel_csv(args.panel)
    extra = {}
    if args.method == "gl":
        lam_abs = args.lam * penalty_scale(args.lambda_scaling, data)
        problem = assemble_gl_problem(data, args.gl_model, lam=lam_abs)
        options = AdmmOptions(
            mu=args.mu,
            max_iter=args.max_iter,
            primal_tol=args.primal_tol,
            dual_tol=args.dual_tol,
            eps_select=args.eps_select,
        )
        state, selection = admm_solve(problem, options)
        extra = {"lambda": lam_abs, "primal_residual": state.primal_residual}
    elif args.method == "ecm":
        params = EcmParams(p0=args.p0, gamma_bar=args.gamma_bar, alpha=args.alpha, rts=args.rts)
        selection = ecm_backward_select(data, range(data.m), params)
    else:
        params = RbParams(confidence=args.confidence, seed_input=args.seed_input, rts=args.rts)
        selection = rb_select(data, range(data.m), params)
    doc = {
        "method": selection.method,
        "selected": sorted(int(i) for i in selection.selected),
        "selected_labels": [data.input_labels[i] for i in sorted(selection.selected)],
        "group_norms": [float(v) for v in selection.group_norms],
        "converged": selection.converged,
        "iterations": selection.iterations,
        **extra,
    }
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)


def _cmd_experiment(args) -> None:
    config = load_config(args.config)
    if args.output_dir is not None:
        config = replace(config, output_dir=args.output_dir)
    report = run_experiment(config)
    written = emit_report(report)
    for line in report.errors:
        print(f"warning: {line}", file=sys.stderr)
    for agg in report.aggregates:
        bits = [f"scenario {agg.scenario_id} ({agg.rts}) {agg.method}:"]
        if agg.mse is not None:
            bits.append(f"mse={agg.mse:.5f}")
        if agg.pct_efficient_correct is not None:
            bits.append(f"pct_eff={agg.pct_efficient_correct:.3f}")
        if agg.seconds is not None:
            bits.append(f"sec={agg.seconds:.2f}")
        if agg.n_failed:
            bits.append(f"failed={agg.n_failed}")
        print(" ".join(bits))
    print(f"report written to {written['report.json'].parent}")


def _cmd_report(args) -> None:
    report = load_report(args.report)
    if args.timings is not None:
        text = Path(args.timings).read_text(encoding="utf-8")
        try:
            timings = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"timings file is not valid JSON: {exc}") from exc
        merge_timings(report, timings)
    formats = None if args.formats is None else tuple(args.formats.split(","))
    written = emit_report(report, output_dir=args.output_dir, formats=formats)
    print(f"wrote {', '.join(sorted(written))} to {args.output_dir}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
