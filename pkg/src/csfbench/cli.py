"""Command-line entry point: generate / ingest / train / evaluate / run / acf.

Exit codes: 0 success, 1 usage error (usage text on stderr), 2 runtime or
data error (diagnostic on stderr). All artifacts are written under --out-dir;
progress lines go to stderr so stdout stays clean for piping.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, generate, io, learners, smcsf
from .errors import CsfBenchError, UsageError
from .patterns import enumerate_vocabulary
from .series import autocorrelation


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); we want exit(1)
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _log(args, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> _Parser:
    parser = _Parser(prog="csfbench", description=__doc__)
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--family", choices=("csf", "ncsf", "random"), required=True)
    p.add_argument("--n", type=int, default=20_000, help="number of windows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=generate.DEFAULT_WINDOW)
    p.add_argument("--k-effective", type=int, default=10)
    p.add_argument("--p-signal", type=float, default=generate.DEFAULT_P_SIGNAL)
    p.add_argument("--base-rate", type=float, default=generate.DEFAULT_BASE_RATE)
    p.add_argument("--sigma", type=float, default=generate.DEFAULT_SIGMA)
    p.add_argument("--quantile", type=float, default=generate.DEFAULT_CSF_QUANTILE)
    p.add_argument("--ratio", type=float, default=generate.DEFAULT_NCSF_RATIO)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("ingest", parents=[common], help="ingest a close-price CSV into a real-family dataset")
    p.add_argument("--csv", required=True)
    p.add_argument("--date-col", default="Date")
    p.add_argument("--price-col", default="Close")
    p.add_argument("--window", type=int, default=generate.DEFAULT_WINDOW)
    p.add_argument("--use-adjusted", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("train", parents=[common], help="train one model on a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=bench.MODEL_NAMES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="score a pred-v1 file against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("run", parents=[common], help="run a full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("acf", parents=[common], help="autocorrelation of an ingested price series")
    p.add_argument("--csv", required=True)
    p.add_argument("--date-col", default="Date")
    p.add_argument("--price-col", default="Close")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--on-returns", action="store_true")
    p.add_argument("--out-dir", required=True)
    return parser


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    out = _out_dir(args)
    config = generate.GenConfig(
        n_windows=args.n, seed=args.seed, window=args.window, sigma=args.sigma
    )
    rule = None
    if args.family == "csf":
        rule = generate.sample_csf_rule(
            enumerate_vocabulary(), k_effective=args.k_effective, seed=args.seed,
            p_signal=args.p_signal, base_rate=args.base_rate,
        )
        generate.calibrate_threshold(
            rule, quantile=args.quantile, seed=args.seed, window=args.window
        )
        dataset = generate.generate_csf(rule, config)
    elif args.family == "ncsf":
        rule = generate.NcsfRule(
            window=args.window, ratio=args.ratio,
            p_signal=args.p_signal, base_rate=args.base_rate,
        )
        dataset = generate.generate_ncsf(rule, config)
    else:
        dataset = generate.generate_random(config, base_rate=args.base_rate)
    io.write_dataset(dataset, out / "dataset.jsonl")
    if rule is not None:
        (out / "rule.json").write_text(
            json.dumps(rule.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    _log(args, f"wrote {len(dataset)} {args.family} windows to {out / 'dataset.jsonl'}")
    return 0


def _cmd_ingest(args) -> int:
    out = _out_dir(args)
    spec = io.CsvSpec(
        path=args.csv, date_col=args.date_col, price_col=args.price_col,
        use_adjusted=args.use_adjusted,
    )
    result = io.ingest_csv(spec)
    for rownum, reason in result.rejected_rows:
        _log(args, f"warning: row {rownum} rejected ({reason})")
    if result.was_descending:
        _log(args, "dates were descending; series reversed to chronological order")
    dataset = io.real_to_dataset(result.series, window=args.window)
    io.write_dataset(dataset, out / "dataset.jsonl")
    _log(args, f"ingested {len(result.series)} prices -> {len(dataset)} windows")
    return 0


def _cmd_train(args) -> int:
    out = _out_dir(args)
    dataset = io.read_dataset(args.dataset)
    if args.model == "sm-csf":
        model = smcsf.train(dataset, replace(smcsf.SmCsfConfig(), split_seed=args.seed))
        payload = model.to_json()
    else:
        fm = learners.build_features(dataset)
        if args.model == "nb":
            payload = learners.train_naive_bayes(fm.X, fm.y).to_json()
        elif args.model == "svm":
            payload = learners.train_linear_svm(fm.X, fm.y, seed=args.seed).to_json()
        else:
            payload = learners.train_mlp(
                fm.X, fm.y, replace(learners.MlpConfig(), seed=args.seed)
            ).to_json()
    path = out / f"model-{args.model}.json"
    path.write_text(payload + "\n")
    _log(args, f"trained {args.model} on {len(dataset)} windows -> {path}")
    return 0


def _cmd_evaluate(args) -> int:
    out = _out_dir(args)
    dataset = io.read_dataset(args.dataset)
    preds = bench.read_predictions(args.predictions)
    report = bench.precision_of_selected(preds, dataset)
    bench.write_reports_json(out / "report.json", [report])
    bench.write_reports_csv(out / "report.csv", [report])
    _log(
        args,
        f"{report.model}: precision {report.precision_pos} over "
        f"{report.n_selected}/{report.n_test} selected (base rate {report.base_rate:.4f})",
    )
    return 0


def _cmd_run(args) -> int:
    out = _out_dir(args)
    config = io.load_run_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    results = bench.run_experiment(config, out_dir=out)
    for res in results:
        for report in res.reports:
            prec = "n/a" if report.precision_pos is None else f"{report.precision_pos:.4f}"
            _log(args, f"[{res.family}] {report.model}: precision {prec}")
    _log(args, f"artifacts under {out}")
    return 0


def _cmd_acf(args) -> int:
    out = _out_dir(args)
    result = io.ingest_csv(
        io.CsvSpec(path=args.csv, date_col=args.date_col, price_col=args.price_col)
    )
    acf = autocorrelation(result.series, max_lag=args.max_lag, on_returns=args.on_returns)
    path = out / "acf.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "acf"])
        for lag, value in zip(acf.lags, acf.values):
            writer.writerow([int(lag), repr(float(value))])
    _log(args, f"wrote ACF (lags 0..{args.max_lag}) to {path}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
    "acf": _cmd_acf,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except CsfBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
