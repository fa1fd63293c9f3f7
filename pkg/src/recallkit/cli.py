"""Batch command line: fit, predict, evaluate, simulate, serve.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .charts import BarGroup, bar_chart_csv, bar_chart_svg
from .domain import (
    Direction,
    FormatKind,
    KCHistory,
    QuestionFormat,
    group_histories,
    parse_trial_log,
)
from .evaluation import (
    MLRPredictor,
    RPLPredictor,
    SingleClassError,
    evaluate_model,
)
from .mlr import (
    CollinearFeaturesError,
    PerfectSeparationError,
    build_training_examples,
    extract_features,
    fit_mlr,
    predict_mlr,
    select_windows,
)
from .params import (
    ParamsError,
    load_mlr_params,
    load_rpl_params,
    save_mlr_params,
    save_rpl_params,
)
from .rpl import evolve_states, fit_rpl, predict_rpl
from .simulator import SimulationConfig, simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def _load_histories(path: str) -> dict[tuple[str, str], KCHistory]:
    try:
        with open(path, "rb") as fh:
            records, skipped = parse_trial_log(fh)
    except OSError as exc:
        raise DataError(f"cannot read log {path!r}: {exc}") from exc
    if skipped:
        print(f"skipped {skipped} malformed line(s) in {path}", file=sys.stderr)
    if not records:
        raise DataError(f"log {path!r} contains no valid trials")
    return group_histories(records)


def _parse_format(name: str, options_count: int | None) -> QuestionFormat:
    try:
        kind = FormatKind(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if kind in (FormatKind.MULTIPLE_CHOICE, FormatKind.MULTIPLE_CHOICE_WITH_NONE, FormatKind.TRUE_FALSE):
        defaults = {
            FormatKind.MULTIPLE_CHOICE: 4,
            FormatKind.MULTIPLE_CHOICE_WITH_NONE: 5,
            FormatKind.TRUE_FALSE: 2,
        }
        return QuestionFormat(kind, options_count or defaults[kind])
    return QuestionFormat(kind)


def _cmd_fit_mlr(args: argparse.Namespace) -> int:
    histories = _load_histories(args.log)
    if args.windows:
        try:
            n, m, l = (int(v) for v in args.windows.split(","))
        except ValueError as exc:
            raise UsageError(f"--windows expects n,m,l integers: {exc}") from exc
        windows = (n, m, l)
        examples = build_training_examples(histories.values(), windows)
    else:
        bound = (args.max_window,) * 3
        examples = build_training_examples(histories.values(), bound)
        windows = select_windows(examples, alpha=args.alpha, max_windows=bound)
        print(f"selected windows n={windows[0]} m={windows[1]} l={windows[2]}")
    try:
        fit = fit_mlr(examples, windows)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    save_mlr_params(fit.params, args.out)
    print(fit.report_table())
    print(f"log likelihood {fit.log_likelihood:.3f} over {len(examples)} trials")
    if not fit.converged:
        print("warning: fit did not converge", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(json.dumps(fit.to_json_dict(), indent=2, allow_nan=False) + "\n")
    return EXIT_OK


def _cmd_fit_rpl(args: argparse.Namespace) -> int:
    histories = _load_histories(args.log)
    try:
        fit = fit_rpl(
            histories.values(),
            restarts=args.restarts,
            seed=args.seed,
            cold_start=args.cold_start,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    save_rpl_params(fit.params, args.out)
    print(
        f"mean log likelihood {fit.mean_log_likelihood:.6f} nats/trial "
        f"over {fit.n_trials} trials ({fit.restarts} restarts)"
    )
    return EXIT_OK


def _cmd_predict(args: argparse.Namespace) -> int:
    try:
        direction = Direction(args.direction)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    fmt = _parse_format(args.format, args.options_count)
    try:
        with open(args.history, "rb") as fh:
            records, skipped = parse_trial_log(fh)
    except OSError as exc:
        raise DataError(f"cannot read history {args.history!r}: {exc}") from exc
    if skipped:
        print(f"skipped {skipped} malformed line(s)", file=sys.stderr)
    keys = {(r.student_id, r.kc_id) for r in records}
    if len(keys) > 1:
        raise DataError(f"history file mixes {len(keys)} (student, kc) pairs")
    trials = tuple(sorted(records, key=lambda r: r.timestamp_s))

    try:
        if args.model == "mlr":
            params = load_mlr_params(args.params)
            features = extract_features(trials, args.at, direction, params.windows)
            p = predict_mlr(params, features)
        else:
            params = load_rpl_params(args.params)
            states = evolve_states(params, trials)
            p = predict_rpl(
                params, states, direction, fmt, args.at, cold_start=args.cold_start
            ).probability
    except ValueError as exc:
        # e.g. --at not after the last trial: the query contradicts the data.
        raise DataError(str(exc)) from exc
    print(f"{p:.6f}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    histories = _load_histories(args.log)
    if args.model == "mlr":
        predictor = MLRPredictor(load_mlr_params(args.params))
    else:
        predictor = RPLPredictor(load_rpl_params(args.params), cold_start=args.cold_start)
    try:
        report = evaluate_model(predictor, histories.values())
    except SingleClassError as exc:
        raise DataError(str(exc)) from exc
    Path(args.report).write_text(json.dumps(report.to_json_dict(), indent=2, allow_nan=False) + "\n")
    print(
        f"auc {report.auc:.4f} (se {report.auc_se:.4f}, n {report.n}); "
        f"mean ll {report.mean_log_likelihood:.4f}"
    )
    if args.plot or args.csv:
        groups = [
            BarGroup(
                label=f"{label} past",
                bars=((args.model, st.auc, st.standard_error),),
            )
            for label, st in report.segments.items()
            if not math.isnan(st.auc)
        ]
        title = f"AUC by past-trial count ({report.source})"
        if args.plot:
            Path(args.plot).write_text(bar_chart_svg(groups, title=title))
        if args.csv:
            Path(args.csv).write_text(bar_chart_csv(groups))
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config_data = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {args.config!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config is not valid JSON: {exc}") from exc
    try:
        config = SimulationConfig.from_json_dict(config_data)
    except (ValueError, TypeError, ParamsError) as exc:
        raise DataError(f"bad simulation config: {exc}") from exc
    result = simulate(config)
    with open(args.out, "w") as fh:
        for record in result.records:
            fh.write(json.dumps(record.to_json_dict()) + "\n")
    truth_path = args.truth or f"{args.out}.truth.jsonl"
    with open(truth_path, "w") as fh:
        for index, p in enumerate(result.true_probabilities):
            fh.write(json.dumps({"trial_index": index, "p_true": p}) + "\n")
    print(f"wrote {len(result.records)} trials to {args.out} (truth: {truth_path})")
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(snapshot_dir=args.snapshot_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recallkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-mlr", help="fit the logistic history model")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--windows", help="skip selection and use fixed n,m,l")
    p.add_argument("--max-window", type=int, default=8, help="selection search bound")
    p.add_argument("--report", help="also write the fit report as JSON")
    p.set_defaults(func=_cmd_fit_mlr)

    p = sub.add_parser("fit-rpl", help="fit the power-law forgetting model")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cold-start", type=float, default=0.5,
                   help="prediction for never-studied items")
    p.set_defaults(func=_cmd_fit_rpl)

    p = sub.add_parser("predict", help="predict recall for one history")
    p.add_argument("--model", choices=("mlr", "rpl"), required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--history", required=True)
    p.add_argument("--at", type=int, required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--format", default="cued_recall")
    p.add_argument("--options-count", type=int)
    p.add_argument("--cold-start", type=float, default=0.5,
                   help="prediction for never-studied items (rpl)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="AUC / likelihood report for a log")
    p.add_argument("--model", choices=("mlr", "rpl"), required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--plot", help="write a segment bar chart SVG")
    p.add_argument("--csv", help="write the segment bars as CSV")
    p.add_argument("--cold-start", type=float, default=0.5,
                   help="prediction for never-studied items (rpl)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic trial log")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="sidecar path (default <out>.truth.jsonl)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--snapshot-dir", help="persist sessions as JSON here")
    p.add_argument("--static-dir", help="serve a UI bundle at /ui")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParamsError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (
        PerfectSeparationError,
        CollinearFeaturesError,
        FloatingPointError,
        ZeroDivisionError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
