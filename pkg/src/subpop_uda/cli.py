"""Command-line interface: ``subpop-uda <command> ...``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 estimation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .adapt import TargetPredictor, classify
from .core import load_csv, load_truth, write_csv, write_truth
from .errors import ConfigError, DataError, UDAError
from .experiment import (
    BETA01_METHODS,
    BETA_METHODS,
    TAGS,
    ExperimentConfig,
    ExperimentFailed,
    _parse_means,
    fit_pipeline,
    metric_accuracy,
    metric_f1,
    run_experiment,
)
from .synthgen import PartitionSpec, SyntheticSpec, generate, partition_pool

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

PRED_HEADER = ("row_index", "eta1", "eta0", "tau0", "eta", "xi", "xi0", "xi1", "label_eta", "label_xi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def truth_path(out: Path) -> Path:
    return out.with_name(out.stem + ".truth.csv")


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _pick(args, cfg, name, default=None):
    v = getattr(args, name, None)
    return v if v is not None else cfg.get(name, default)


def cmd_simulate(args):
    cfg = _read_toml(args.config) if args.config else {}
    kwargs = {}
    if cfg.get("means"):
        kwargs["means"] = _parse_means(cfg["means"])
    spec = SyntheticSpec(int(_pick(args, cfg, "n1", 4000)), int(_pick(args, cfg, "n0", 4000)),
                         int(_pick(args, cfg, "seed", 0)), **kwargs)
    ds, truth = generate(spec)
    out = Path(args.out)
    write_csv(ds, out)
    write_truth(truth, truth_path(out))
    print(f"wrote {out} ({ds.n} rows) and {truth_path(out)}")


def cmd_split(args):
    cfg = _read_toml(args.config) if args.config else {}
    rates = cfg.get("rates", {})
    ps = PartitionSpec(
        float(args.a if args.a is not None else rates.get("a", 0.5)),
        float(args.b if args.b is not None else rates.get("b", 0.5)),
        float(args.c if args.c is not None else rates.get("c", 0.5)),
        int(_pick(args, cfg, "seed", 0)),
    )
    pool = load_csv(args.pool, allow_forbidden_cell=True)
    ds, truth = partition_pool(pool, ps)
    out = Path(args.out)
    write_csv(ds, out)
    write_truth(truth, truth_path(out))
    print(f"wrote {out} ({int(ds.r.sum())} source / {int((ds.r == 0).sum())} target rows)")


def cmd_fit(args):
    ds = load_csv(args.data)
    moments = args.moment_coord if args.moment_coord is not None else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tp, report = fit_pipeline(
            ds, args.lam, args.beta_method, args.beta01_method, args.quantile, moments,
            beta10=args.beta10, beta00=args.beta00, beta01=args.beta01, threshold=args.threshold,
        )
    Path(args.out).write_text(json.dumps(tp.to_dict(report), indent=2) + "\n")
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    print(f"wrote {args.out}")


def predictions(tp: TargetPredictor, X) -> dict:
    cols = {
        "eta1": tp.eta1(X), "eta0": tp.eta0(X), "tau0": tp.tau0(X), "eta": tp.eta(X),
        "xi": tp.xi(X), "xi0": tp.xi0(X), "xi1": tp.xi1(X),
    }
    cols = {k: np.atleast_1d(v) for k, v in cols.items()}
    cols["label_eta"] = np.atleast_1d(classify(cols["eta"], tp.threshold))
    cols["label_xi"] = np.atleast_1d(classify(cols["xi"], tp.threshold))
    return cols


def cmd_predict(args):
    try:
        tp = TargetPredictor.from_dict(json.loads(Path(args.model).read_text()))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {args.model}: {exc}") from exc
    if args.threshold is not None:
        tp = TargetPredictor(tp.bundle, tp.source, tp.target, args.threshold)
    ds = load_csv(args.data, allow_forbidden_cell=True)
    idx = np.flatnonzero(ds.r == 0)
    cols = predictions(tp, ds.X[idx]) if idx.size else {k: [] for k in PRED_HEADER[1:]}
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRED_HEADER)
        for k, i in enumerate(idx):
            w.writerow([int(i)] + [repr(float(cols[c][k])) for c in PRED_HEADER[1:8]]
                       + [int(cols["label_eta"][k]), int(cols["label_xi"][k])])
    print(f"wrote {args.out} ({idx.size} target rows)")


def cmd_evaluate(args):
    truth = load_truth(args.truth)
    with open(args.pred, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{args.pred}: no predictions")
    rows = [r for r in rows if int(r["row_index"]) in truth]
    if not rows:
        raise DataError("no prediction rows have ground truth")
    index = np.array([int(r["row_index"]) for r in rows])
    y = np.array([truth[i] for i in index])
    a = None
    if args.data:
        ds = load_csv(args.data, allow_forbidden_cell=True)
        a = ds.a[index]
    out = {}
    for tag in TAGS:
        if tag[-1] in "01" and a is None:
            continue
        mask = np.ones(index.size, bool) if tag[-1] not in "01" else a == int(tag[-1])
        p = np.array([float(r[tag]) for r in rows])[mask]
        if p.size == 0:
            continue
        pred = classify(p, args.threshold)
        out[tag] = {"n_eval": int(p.size), "accuracy": metric_accuracy(pred, y[mask]),
                    "f1": metric_f1(pred, y[mask])}
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


_EXPERIMENT_FLAGS = ("data", "n1", "n0", "pool", "rate_a", "rate_b", "rate_c", "lam", "beta_method",
                     "beta01_method", "anchor_quantile", "beta10", "beta00", "beta01", "threshold",
                     "replications", "seed", "jobs", "out_dir")


def cmd_experiment(args):
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    cfg = cfg.merged(**{k: getattr(args, k) for k in _EXPERIMENT_FLAGS})
    out_dir = cfg.out_dir or "."
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            result = run_experiment(cfg)
        except ExperimentFailed as exc:
            exc.result.write(out_dir)
            raise
    result.write(out_dir)
    for tag, stats in result.summary["tags"].items():
        acc, f1 = stats["accuracy"]["mean"], stats["f1"]["mean"]
        print(f"{tag:5s} accuracy={acc:.4f} f1={f1:.4f}")
    print(f"wrote {Path(out_dir) / 'metrics.csv'} and {Path(out_dir) / 'summary.json'}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subpop-uda", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a synthetic source/target dataset")
    s.add_argument("--n1", type=int)
    s.add_argument("--n0", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--config", help="TOML with n1, n0, seed, means")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("split", help="partition a fully labeled pool into source and target")
    s.add_argument("--pool", required=True)
    s.add_argument("--a", type=float, help="source rate of the (y=0, a=1) cell")
    s.add_argument("--b", type=float, help="source rate of the (y=1, a=0) cell")
    s.add_argument("--c", type=float, help="source rate of the (y=0, a=0) cell")
    s.add_argument("--seed", type=int)
    s.add_argument("--config", help="TOML with seed and [rates] a, b, c")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("fit", help="fit nuisance models and proportions")
    s.add_argument("--data", required=True)
    s.add_argument("--beta-method", choices=[m for m in BETA_METHODS if m != "oracle"], default="kl")
    s.add_argument("--beta01-method", choices=[m for m in BETA01_METHODS if m != "oracle"],
                   default="anchor")
    s.add_argument("--lambda", dest="lam", type=float, default=1e-2)
    s.add_argument("--quantile", type=float, default=0.01, help="anchor-rule quantile")
    s.add_argument("--moment-coord", type=int, help="feature index for moment matching")
    s.add_argument("--beta10", type=float)
    s.add_argument("--beta00", type=float)
    s.add_argument("--beta01", type=float)
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="score the target rows of a CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--threshold", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="accuracy and F1 of predictions against ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--data", help="dataset CSV, needed for the per-background tags")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment", help="replicated simulation or pool experiment")
    s.add_argument("--config")
    s.add_argument("--data", choices=("synthetic", "pool"))
    s.add_argument("--n1", type=int)
    s.add_argument("--n0", type=int)
    s.add_argument("--pool")
    s.add_argument("--a", dest="rate_a", type=float)
    s.add_argument("--b", dest="rate_b", type=float)
    s.add_argument("--c", dest="rate_c", type=float)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--beta-method", choices=BETA_METHODS)
    s.add_argument("--beta01-method", choices=BETA01_METHODS)
    s.add_argument("--anchor-quantile", type=float)
    s.add_argument("--beta10", type=float)
    s.add_argument("--beta00", type=float)
    s.add_argument("--beta01", type=float)
    s.add_argument("--threshold", type=float)
    s.add_argument("--replications", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UDAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
