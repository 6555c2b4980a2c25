"""End-to-end pipeline and replicated experiments.

Replication ``i`` of an experiment with seed ``s`` uses the seed
``SeedSequence(s).spawn(n)[i].generate_state(1, uint64)[0]`` for its data
draw, so results do not depend on execution order or on ``jobs``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .adapt import TargetPredictor, classify, fit_nuisance
from .classify import DEFAULT_LAMBDA
from .core import Dataset, cell_counts, load_csv, select, validate
from .errors import ConfigError, DataError, EstimationError, UDAError
from .proportions import (
    DEFAULT_ANCHOR_QUANTILE,
    ProportionReport,
    TargetProportions,
    estimate_beta01_anchor,
    estimate_beta_kl,
    estimate_beta_moment,
    estimate_rho_b1,
    estimate_source_proportions,
)
from .synthgen import CELLS, PartitionSpec, SyntheticSpec, generate, oracle_spec, partition_pool

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

BETA_METHODS = ("kl", "moment", "oracle", "user")
BETA01_METHODS = ("anchor", "user", "oracle")
TAGS = ("eta", "eta1", "eta0", "xi", "xi1", "xi0")
METRICS = ("accuracy", "f1", "clamp_rate")
METRICS_HEADER = ("rep", "tag", "n_eval", "accuracy", "f1", "clamp_rate",
                  "beta10_hat", "beta00_hat", "beta01_hat", "beta11_hat", "failed")
MAX_FAILED_SHARE = 0.2


def metric_accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise DataError("cannot score an empty prediction vector")
    return float(np.mean(pred == truth))


def metric_f1(pred, truth) -> float:
    """2TP / (2TP + FP + FN), taken as 0 when nothing is positive."""
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError(f"length mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


# -- single-dataset pipeline ------------------------------------------------

def fit_pipeline(ds: Dataset, lam=DEFAULT_LAMBDA, beta_method="kl", beta01_method="anchor",
                 anchor_quantile=DEFAULT_ANCHOR_QUANTILE, moments=None,
                 beta10=None, beta00=None, beta01=None,
                 true_target: Optional[TargetProportions] = None, threshold=0.5):
    """Fit nuisances and proportions; return ``(TargetPredictor, ProportionReport)``.

    ``beta10``/``beta00``/``beta01`` are used by the ``user`` methods;
    ``true_target`` by the ``oracle`` methods.
    """
    if beta_method not in BETA_METHODS:
        raise ConfigError(f"beta method must be one of {BETA_METHODS}")
    if beta01_method not in BETA01_METHODS:
        raise ConfigError(f"beta01 method must be one of {BETA01_METHODS}")
    if "oracle" in (beta_method, beta01_method) and true_target is None:
        raise ConfigError("oracle methods need the true target proportions")

    notes = []
    counts = cell_counts(ds)
    sp = estimate_source_proportions(counts)
    rho, b1 = estimate_rho_b1(counts)
    bundle = fit_nuisance(ds, lam)
    target_a0 = select(ds, r=0, a=0)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if beta_method == "kl":
            b10, b00, w = estimate_beta_kl(bundle.xi0, target_a0, b1, rho)
            notes += w
        elif beta_method == "moment":
            b10, b00, w = estimate_beta_moment(moments, select(ds, r=1), target_a0, rho)
            notes += w
        elif beta_method == "oracle":
            b10, b00 = true_target.beta10, true_target.beta00
            rho = b10 + b00
        else:
            if beta10 is None or beta00 is None:
                raise ConfigError("beta method 'user' needs beta10 and beta00")
            b10, b00 = float(beta10), float(beta00)
            rho = b10 + b00
    if not 0.0 < rho < 1.0:
        raise EstimationError(f"target a=0 share must lie in (0, 1), got {rho}")

    if beta01_method == "anchor":
        b01, _ = estimate_beta01_anchor(bundle.kappa, select(ds, r=0, a=1), sp.alpha01, sp.pi,
                                        rho, anchor_quantile)
    elif beta01_method == "oracle":
        b01 = true_target.beta01
    else:
        if beta01 is None:
            raise ConfigError("beta01 method 'user' needs beta01")
        b01 = float(beta01)
    if not 0.0 <= b01 <= 1.0 - rho:
        notes.append(f"beta01={b01} capped into [0, {1.0 - rho}]")
        b01 = min(max(b01, 0.0), 1.0 - rho)

    tp = TargetProportions.from_blocks(b10, b00, b01, rho, b1)
    method = f"{beta_method}+{beta01_method}"
    return TargetPredictor(bundle, sp, tp, threshold), ProportionReport(sp, tp, method, notes)


def evaluate_predictor(tp: TargetPredictor, ds: Dataset, truth: dict) -> dict:
    """Score the six tags on the target rows of ``ds`` against ``truth``.

    ``eta0``/``xi0`` are scored on target ``a = 0`` rows, ``eta1``/``xi1`` on
    ``a = 1`` rows and ``eta``/``xi`` on all target rows (rows without a
    truth entry are skipped). Returns ``{tag: {n_eval, accuracy, f1, clamp_rate}}``.
    """
    idx = np.array(sorted(i for i in truth if 0 <= i < ds.n and ds.r[i] == 0), dtype=np.intp)
    if idx.size == 0:
        raise DataError("no target rows with ground truth")
    X, a = ds.X[idx], ds.a[idx]
    y = np.array([truth[int(i)] for i in idx], dtype=np.int8)
    out = {}
    for tag in TAGS:
        rows = {"1": a == 1, "0": a == 0}.get(tag[-1], np.ones(idx.size, bool))
        Xs, ys = X[rows], y[rows]
        if ys.size == 0:
            out[tag] = {"n_eval": 0, "accuracy": math.nan, "f1": math.nan, "clamp_rate": math.nan}
            continue
        p = np.atleast_1d(getattr(tp, tag)(Xs))
        if tag in ("eta1", "xi1"):
            clamp = tp.clamp_rate(tag, Xs)
        elif tag == "eta":
            clamp = tp.clamp_rate("eta1", Xs)
        else:
            clamp = 0.0
        pred = classify(p, tp.threshold)
        out[tag] = {"n_eval": int(ys.size), "accuracy": metric_accuracy(pred, ys),
                    "f1": metric_f1(pred, ys), "clamp_rate": clamp}
    return out


# -- experiments ------------------------------------------------------------

@dataclass
class ExperimentConfig:
    data: str = "synthetic"
    n1: int = 4000
    n0: int = 4000
    means: Optional[dict] = None
    pool: Optional[str] = None
    rate_a: float = 0.5
    rate_b: float = 0.5
    rate_c: float = 0.5
    lam: float = DEFAULT_LAMBDA
    beta_method: str = "kl"
    beta01_method: str = "anchor"
    anchor_quantile: float = DEFAULT_ANCHOR_QUANTILE
    beta10: Optional[float] = None
    beta00: Optional[float] = None
    beta01: Optional[float] = None
    threshold: float = 0.5
    replications: int = 50
    seed: int = 0
    jobs: int = 1
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.data not in ("synthetic", "pool"):
            raise ConfigError("data must be 'synthetic' or 'pool'")
        if self.data == "pool" and not self.pool:
            raise ConfigError("data = 'pool' needs a pool path")
        if self.beta_method not in BETA_METHODS:
            raise ConfigError(f"beta_method must be one of {BETA_METHODS}")
        if self.beta01_method not in BETA01_METHODS:
            raise ConfigError(f"beta01_method must be one of {BETA01_METHODS}")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        rates = d.pop("rates", None) or {}
        for k in ("a", "b", "c"):
            if k in rates:
                d[f"rate_{k}"] = rates[k]
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "means" in d and d["means"] is not None:
            d["means"] = _parse_means(d["means"])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                return cls.from_mapping(tomllib.load(fh))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def merged(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _parse_means(raw: dict) -> dict:
    out = {}
    for key, vec in raw.items():
        k = str(key).replace(",", "").replace("(", "").replace(")", "").strip()
        if len(k) != 2 or not set(k) <= {"0", "1"}:
            raise ConfigError(f"bad cell key in means: {key!r} (use '00', '01', '10', '11')")
        out[(int(k[0]), int(k[1]))] = tuple(float(v) for v in vec)
    if set(out) != set(CELLS):
        raise ConfigError("means must cover all four cells")
    return out


def replication_seeds(seed: int, n: int):
    return [int(c.generate_state(1, np.uint64)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class ExperimentResult:
    rows: list
    summary: dict
    n_failed: int = 0
    errors: dict = field(default_factory=dict)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in self.rows:
            w.writerow([_cell(row[k]) for k in METRICS_HEADER])
        return buf.getvalue()

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(self.metrics_csv())
        (out / "summary.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def _cell(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load_pool(cfg: ExperimentConfig) -> Dataset:
    return load_csv(cfg.pool, allow_forbidden_cell=True)


def _pool_truth_props(ds: Dataset, truth: dict) -> TargetProportions:
    idx = np.array(sorted(truth), dtype=np.intp)
    y = np.array([truth[int(i)] for i in idx])
    a = ds.a[idx]
    n = idx.size
    b = {c: float(np.sum((y == c[0]) & (a == c[1]))) / n for c in CELLS}
    rho = b[(1, 0)] + b[(0, 0)]
    return TargetProportions.from_blocks(b[(1, 0)], rho - b[(1, 0)], b[(0, 1)], rho, math.nan)


def run_replication(cfg: ExperimentConfig, rep: int, seed: int, pool: Optional[Dataset] = None) -> list:
    """One data draw, fit and evaluation. Returns one row per tag."""
    if cfg.data == "synthetic":
        spec = SyntheticSpec(cfg.n1, cfg.n0, seed, **({"means": cfg.means} if cfg.means else {}))
        ds, truth = generate(spec)
        true_tp = oracle_spec(spec).target
    else:
        ds, truth = partition_pool(pool, PartitionSpec(cfg.rate_a, cfg.rate_b, cfg.rate_c, seed))
        true_tp = _pool_truth_props(ds, truth)
    validate(ds)
    tp, _ = fit_pipeline(
        ds, cfg.lam, cfg.beta_method, cfg.beta01_method, cfg.anchor_quantile,
        beta10=cfg.beta10, beta00=cfg.beta00, beta01=cfg.beta01,
        true_target=true_tp, threshold=cfg.threshold,
    )
    scores = evaluate_predictor(tp, ds, truth)
    t = tp.target
    rows = []
    for tag in TAGS:
        rows.append({
            "rep": rep, "tag": tag, **scores[tag],
            "beta10_hat": t.beta10, "beta00_hat": t.beta00,
            "beta01_hat": t.beta01, "beta11_hat": t.beta11,
            "failed": 0,
            "_truth": (true_tp.beta10, true_tp.beta00, true_tp.beta01, true_tp.beta11),
        })
    return rows


def _failed_rows(rep):
    return [{"rep": rep, "tag": tag, "n_eval": 0, "accuracy": math.nan, "f1": math.nan,
             "clamp_rate": math.nan, "beta10_hat": math.nan, "beta00_hat": math.nan,
             "beta01_hat": math.nan, "beta11_hat": math.nan, "failed": 1} for tag in TAGS]


def _safe_replication(args):
    cfg, rep, seed, pool = args
    try:
        return run_replication(cfg, rep, seed, pool), None
    except (UDAError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _failed_rows(rep), f"{type(exc).__name__}: {exc}"


def _stats(values) -> dict:
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=np.float64)
    if v.size == 0:
        return {k: None for k in ("mean", "sd", "median", "q1", "q3")}
    return {
        "mean": float(v.mean()),
        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "median": float(np.median(v)),
        "q1": float(np.quantile(v, 0.25)),
        "q3": float(np.quantile(v, 0.75)),
    }


def summarize(rows: list, replications: int) -> dict:
    ok = [r for r in rows if not r["failed"]]
    summary = {"replications": replications,
               "n_failed": len({r["rep"] for r in rows if r["failed"]}),
               "tags": {}}
    for tag in TAGS:
        tag_rows = [r for r in ok if r["tag"] == tag]
        summary["tags"][tag] = {m: _stats([r[m] for r in tag_rows]) for m in METRICS}
        summary["tags"][tag]["n_eval"] = _stats([float(r["n_eval"]) for r in tag_rows])
    firsts = [r for r in ok if r["tag"] == TAGS[0] and "_truth" in r]
    if firsts:
        names = ("beta10", "beta00", "beta01", "beta11")
        summary["beta_abs_error"] = {
            name: float(np.mean([abs(r[f"{name}_hat"] - r["_truth"][k]) for r in firsts]))
            for k, name in enumerate(names)
        }
    return summary


class ExperimentFailed(EstimationError):
    def __init__(self, result: ExperimentResult):
        self.result = result
        super().__init__(
            f"{result.n_failed} of {result.summary['replications']} replications failed "
            f"(limit {MAX_FAILED_SHARE:.0%})"
        )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run all replications; raise :class:`ExperimentFailed` if too many fail."""
    pool = _load_pool(cfg) if cfg.data == "pool" else None
    seeds = replication_seeds(cfg.seed, cfg.replications)
    tasks = [(cfg, i, s, pool) for i, s in enumerate(seeds)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            outcomes = list(ex.map(_safe_replication, tasks))
    else:
        outcomes = [_safe_replication(t) for t in tasks]
    rows, errors = [], {}
    for (_, i, _, _), (rep_rows, err) in zip(tasks, outcomes):
        rows.extend(rep_rows)
        if err:
            errors[i] = err
            log.warning("replication %d failed: %s", i, err)
    result = ExperimentResult(rows, summarize(rows, cfg.replications), len(errors), errors)
    if len(errors) > MAX_FAILED_SHARE * cfg.replications:
        raise ExperimentFailed(result)
    return result
