"""Evaluation protocol: selected-sample positive precision vs baseline vs oracle.

Every trained model is scored on the held-out split and selects the same
fraction of windows (top selection_rate by score, stable tie-break), so
precisions are comparable across models. Oracles keep their native
thresholds: their selection set IS the signal definition. The random
baseline re-draws same-size selections many times.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import learners, oracles, smcsf
from .errors import InvalidConfigError, InvalidInputError, SchemaError
from .generate import (
    DEFAULT_BASE_RATE,
    DEFAULT_CALIBRATION_N,
    DEFAULT_CSF_QUANTILE,
    DEFAULT_MU,
    DEFAULT_NCSF_RATIO,
    DEFAULT_P_SIGNAL,
    DEFAULT_SIGMA,
    DEFAULT_WINDOW,
    CsfRule,
    Dataset,
    GenConfig,
    NcsfRule,
    calibrate_threshold,
    config_hash,
    generate_csf,
    generate_ncsf,
    generate_random,
    sample_csf_rule,
)
from .smcsf import SmCsfConfig, split_indices

Z_95 = 1.959963984540054  # two-sided 95% normal quantile

MODEL_NAMES = ("sm-csf", "nb", "svm", "mlp")


# ---------------------------------------------------------------------------
# Core metrics
# ---------------------------------------------------------------------------


def wilson_ci(successes: int, n: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise InvalidInputError("Wilson interval needs n > 0")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half


def select_top(scores: np.ndarray, rate: float) -> np.ndarray:
    """Boolean mask of the top `rate` fraction by score (stable tie-break)."""
    if not 0.0 < rate <= 1.0:
        raise InvalidConfigError(f"selection rate must lie in (0, 1], got {rate}")
    n = scores.shape[0]
    k = int(round(rate * n))
    mask = np.zeros(n, dtype=bool)
    if k > 0:
        mask[np.argsort(-scores, kind="stable")[:k]] = True
    return mask


@dataclass(frozen=True)
class PredictionSet:
    """One model's scores and selections over a set of windows."""

    model: str
    ids: tuple[str, ...]
    scores: np.ndarray
    selected: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.scores.shape != (n,) or self.selected.shape != (n,):
            raise InvalidInputError("prediction arrays disagree on length")


@dataclass(frozen=True)
class ModelReport:
    model: str
    family: str
    n_test: int
    n_selected: int
    precision_pos: float | None
    base_rate: float
    wilson_lo: float | None
    wilson_hi: float | None
    selection_rate: float
    oracle_precision: float | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "family": self.family,
            "n_test": self.n_test,
            "n_selected": self.n_selected,
            "precision_pos": self.precision_pos,
            "base_rate": self.base_rate,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "selection_rate": self.selection_rate,
            "oracle_precision": self.oracle_precision,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelReport":
        return cls(
            model=d["model"],
            family=d["family"],
            n_test=int(d["n_test"]),
            n_selected=int(d["n_selected"]),
            precision_pos=d["precision_pos"],
            base_rate=float(d["base_rate"]),
            wilson_lo=d["wilson_lo"],
            wilson_hi=d["wilson_hi"],
            selection_rate=float(d["selection_rate"]),
            oracle_precision=d.get("oracle_precision"),
            flags=tuple(d.get("flags", ())),
        )


def precision_of_selected(
    predictions: PredictionSet,
    dataset: Dataset,
    oracle_precision: float | None = None,
    extra_flags: tuple[str, ...] = (),
) -> ModelReport:
    """Fraction of positive labels among the selected windows, with Wilson CI."""
    id_to_row = {wid: i for i, wid in enumerate(dataset.ids)}
    try:
        rows = np.array([id_to_row[wid] for wid in predictions.ids])
    except KeyError as exc:
        raise InvalidInputError(f"prediction window id {exc.args[0]!r} not in dataset") from exc
    labels = dataset.labels[rows]
    selected = predictions.selected.astype(bool)
    n_sel = int(selected.sum())
    flags = list(extra_flags)
    if n_sel == 0:
        flags.append("empty-selection")
        precision = lo = hi = None
    else:
        hits = int(labels[selected].sum())
        precision = hits / n_sel
        lo, hi = wilson_ci(hits, n_sel)
    return ModelReport(
        model=predictions.model,
        family=dataset.family,
        n_test=len(predictions.ids),
        n_selected=n_sel,
        precision_pos=precision,
        base_rate=float(labels.mean()),
        wilson_lo=lo,
        wilson_hi=hi,
        selection_rate=n_sel / max(len(predictions.ids), 1),
        oracle_precision=oracle_precision,
        flags=tuple(flags),
    )


def random_baseline(
    dataset: Dataset,
    selection_rate: float,
    seed: int = 0,
    trials: int = 1000,
    oracle_precision: float | None = None,
) -> ModelReport:
    """Mean precision of repeated random same-size selections."""
    if len(dataset) == 0:
        raise InvalidInputError("dataset is empty")
    if trials < 1:
        raise InvalidConfigError("trials must be >= 1")
    if not 0.0 < selection_rate <= 1.0:
        raise InvalidConfigError(f"selection rate must lie in (0, 1], got {selection_rate}")
    n = len(dataset)
    k = max(1, int(round(selection_rate * n)))
    rng = np.random.default_rng([seed, 0xBA5E])
    labels = dataset.labels
    hits = 0
    for _ in range(trials):
        picks = rng.choice(n, size=k, replace=False)
        hits += int(labels[picks].sum())
    precision = hits / (k * trials)
    lo, hi = wilson_ci(hits, k * trials)
    return ModelReport(
        model="random-baseline",
        family=dataset.family,
        n_test=n,
        n_selected=k,
        precision_pos=precision,
        base_rate=dataset.base_rate,
        wilson_lo=lo,
        wilson_hi=hi,
        selection_rate=k / n,
        oracle_precision=oracle_precision,
        flags=("mean-over-%d-trials" % trials,),
    )


# ---------------------------------------------------------------------------
# pred-v1 / split-v1 interchange files
# ---------------------------------------------------------------------------


def write_predictions(path, preds: PredictionSet) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"schema": "pred-v1", "model": preds.model}) + "\n")
        for wid, score, sel in zip(preds.ids, preds.scores, preds.selected):
            fh.write(
                json.dumps(
                    {"id": wid, "score": float(score), "selected": int(sel)},
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_predictions(path) -> PredictionSet:
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise SchemaError(f"{path}: empty prediction file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:1: bad header: {exc}") from exc
        if header.get("schema") != "pred-v1":
            raise SchemaError(f"{path}: unsupported schema {header.get('schema')!r}")
        ids, scores, selected = [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(rec["id"])
                scores.append(float(rec["score"]))
                selected.append(bool(rec["selected"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad prediction line: {exc}") from exc
    return PredictionSet(
        model=str(header.get("model", "unknown")),
        ids=tuple(ids),
        scores=np.array(scores, dtype=np.float64),
        selected=np.array(selected, dtype=bool),
    )


def write_split(path, train_ids, test_ids) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"schema": "split-v1", "train_ids": list(train_ids), "test_ids": list(test_ids)},
            fh,
        )
        fh.write("\n")


def read_split(path) -> tuple[tuple[str, ...], tuple[str, ...]]:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema") != "split-v1":
        raise SchemaError(f"{path}: unsupported schema {d.get('schema')!r}")
    return tuple(d["train_ids"]), tuple(d["test_ids"])


# ---------------------------------------------------------------------------
# Experiment orchestration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    families: tuple[str, ...] = ("csf", "ncsf", "random")
    models: tuple[str, ...] = MODEL_NAMES
    n_windows: int = 20_000
    window: int = DEFAULT_WINDOW
    seed: int = 0
    selection_rate: float = 0.2
    test_fraction: float = 0.3
    k_folds: int = 1
    baseline_trials: int = 1000
    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA
    p_signal: float = DEFAULT_P_SIGNAL
    base_rate: float = DEFAULT_BASE_RATE
    csf_quantile: float = DEFAULT_CSF_QUANTILE
    k_effective: int = 10
    calibration_n: int = DEFAULT_CALIBRATION_N
    ncsf_ratio: float = DEFAULT_NCSF_RATIO
    real_csv: str | None = None
    date_col: str = "Date"
    price_col: str = "Close"
    smcsf: SmCsfConfig = SmCsfConfig()
    mlp: learners.MlpConfig = learners.MlpConfig()
    svm_epochs: int = 50
    svm_lr: float = 0.01
    svm_c: float = 1.0
    feature_mode: str = "standardize"

    def __post_init__(self) -> None:
        known = {"csf", "ncsf", "random", "real"}
        bad = set(self.families) - known
        if bad:
            raise InvalidConfigError(f"unknown families {sorted(bad)}")
        bad_models = set(self.models) - set(MODEL_NAMES)
        if bad_models:
            raise InvalidConfigError(f"unknown models {sorted(bad_models)}")
        if "real" in self.families and not self.real_csv:
            raise InvalidConfigError("family 'real' requires real_csv")
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfigError("test_fraction must lie in (0, 1)")
        if self.k_folds < 1:
            raise InvalidConfigError("k_folds must be >= 1")

    def to_dict(self) -> dict:
        d = {
            "families": list(self.families),
            "models": list(self.models),
            "n_windows": self.n_windows,
            "window": self.window,
            "seed": self.seed,
            "selection_rate": self.selection_rate,
            "test_fraction": self.test_fraction,
            "baseline_trials": self.baseline_trials,
            "mu": self.mu,
            "sigma": self.sigma,
            "p_signal": self.p_signal,
            "base_rate": self.base_rate,
            "csf_quantile": self.csf_quantile,
            "k_effective": self.k_effective,
            "calibration_n": self.calibration_n,
            "ncsf_ratio": self.ncsf_ratio,
            "real_csv": self.real_csv,
            "date_col": self.date_col,
            "price_col": self.price_col,
        }
        return d


def _family_seed(config: ExperimentConfig, family: str, purpose: int) -> int:
    offsets = {"csf": 1, "ncsf": 2, "random": 3, "real": 4}
    return (config.seed * 1000 + offsets[family] * 10 + purpose) % (2 ** 63)


def make_family_dataset(config: ExperimentConfig, family: str):
    """Generate (or ingest) one family; returns (dataset, rule_or_none)."""
    gen = GenConfig(
        n_windows=config.n_windows,
        seed=_family_seed(config, family, 0),
        window=config.window,
        mu=config.mu,
        sigma=config.sigma,
    )
    if family == "csf":
        from .patterns import enumerate_vocabulary

        rule = sample_csf_rule(
            enumerate_vocabulary(),
            k_effective=config.k_effective,
            seed=_family_seed(config, family, 1),
            p_signal=config.p_signal,
            base_rate=config.base_rate,
        )
        calibrate_threshold(
            rule,
            quantile=config.csf_quantile,
            calibration_n=config.calibration_n,
            seed=_family_seed(config, family, 2),
            window=config.window,
        )
        return generate_csf(rule, gen), rule
    if family == "ncsf":
        rule = NcsfRule(
            window=config.window,
            ratio=config.ncsf_ratio,
            p_signal=config.p_signal,
            base_rate=config.base_rate,
        )
        return generate_ncsf(rule, gen), rule
    if family == "random":
        return generate_random(gen, base_rate=config.base_rate), None
    if family == "real":
        from .io import CsvSpec, ingest_csv, real_to_dataset

        spec = CsvSpec(
            path=config.real_csv, date_col=config.date_col, price_col=config.price_col
        )
        result = ingest_csv(spec)
        return real_to_dataset(result.series, window=config.window), None
    raise InvalidConfigError(f"unknown family {family!r}")


def train_and_score(
    model_name: str,
    train_ds: Dataset,
    test_ds: Dataset,
    config: ExperimentConfig,
):
    """Train one model and return (test scores, flags, serialized model json)."""
    flags: tuple[str, ...] = ()
    if model_name == "sm-csf":
        model = smcsf.train(train_ds, config.smcsf)
        if model.fallback_used:
            flags = ("smcsf-fallback-top%d" % smcsf.FALLBACK_TOP_K,)
        return model.scores(test_ds.prices), flags, model.to_json()

    train_X = learners.window_returns(train_ds)
    scaler = learners.FeatureScaler(mode=config.feature_mode).fit(train_X)
    X_train = scaler.transform(train_X)
    X_test = scaler.transform(learners.window_returns(test_ds))
    y_train = train_ds.labels.astype(np.int64)
    if model_name == "nb":
        model = learners.train_naive_bayes(X_train, y_train)
    elif model_name == "svm":
        model = learners.train_linear_svm(
            X_train, y_train, epochs=config.svm_epochs, lr=config.svm_lr,
            C=config.svm_c, seed=config.seed,
        )
    elif model_name == "mlp":
        model = learners.train_mlp(
            X_train, y_train, replace(config.mlp, seed=config.seed)
        )
    else:
        raise InvalidConfigError(f"unknown model {model_name!r}")
    return model.scores(X_test), flags, model.to_json()


@dataclass(frozen=True)
class FamilyResult:
    family: str
    reports: tuple[ModelReport, ...]
    dataset: Dataset
    rule: object
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    predictions: tuple[PredictionSet, ...]
    models_json: dict = field(default_factory=dict)
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()


def _oracle_for(dataset: Dataset, rule, family: str):
    """(PredictionSet, report) for the family's ground-truth rule, or None."""
    if rule is None:
        return None
    if family == "csf":
        scores, selected = oracles.gt_csf_scores(dataset, rule)
        name = "gt-csf"
    else:
        scores, selected = oracles.gt_ncsf_scores(dataset, rule)
        name = "gt-ncsf"
    preds = PredictionSet(model=name, ids=dataset.ids, scores=scores, selected=selected)
    report = precision_of_selected(preds, dataset, extra_flags=("oracle-native-threshold",))
    return preds, report


def _fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng([seed, 0xF01D]).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def _run_family_kfold(config: ExperimentConfig, family: str, dataset, rule) -> FamilyResult:
    """Out-of-fold evaluation: every window is scored by a model that never saw it."""
    n = len(dataset)
    folds = _fold_indices(n, config.k_folds, _family_seed(config, family, 3))
    oracle = _oracle_for(dataset, rule, family)
    oracle_precision = oracle[1].precision_pos if oracle else None

    reports = []
    predictions = []
    if oracle:
        reports.append(replace(oracle[1], oracle_precision=oracle_precision))
        predictions.append(oracle[0])
    reports.append(
        random_baseline(
            dataset, config.selection_rate,
            seed=_family_seed(config, family, 4),
            trials=config.baseline_trials,
            oracle_precision=oracle_precision,
        )
    )
    fold_flag = f"k-fold={config.k_folds}"
    all_idx = np.arange(n)
    for name in config.models:
        scores_all = np.empty(n)
        selected_all = np.zeros(n, dtype=bool)
        flags: set[str] = set()
        for fold in folds:
            train_idx = np.setdiff1d(all_idx, fold)
            scores, fold_flags, _ = train_and_score(
                name, dataset.subset(train_idx), dataset.subset(fold), config
            )
            scores = np.asarray(scores, dtype=np.float64)
            scores_all[fold] = scores
            selected_all[fold] = select_top(scores, config.selection_rate)
            flags.update(fold_flags)
        preds = PredictionSet(
            model=name, ids=dataset.ids, scores=scores_all, selected=selected_all
        )
        predictions.append(preds)
        reports.append(
            precision_of_selected(
                preds, dataset,
                oracle_precision=oracle_precision,
                extra_flags=tuple(sorted(flags)) + (fold_flag,),
            )
        )
    reports.sort(key=lambda r: (-(r.precision_pos if r.precision_pos is not None else -1.0), r.model))
    fold_ids = tuple(
        (
            tuple(dataset.ids[i] for i in np.setdiff1d(all_idx, fold)),
            tuple(dataset.ids[i] for i in fold),
        )
        for fold in folds
    )
    return FamilyResult(
        family=family,
        reports=tuple(reports),
        dataset=dataset,
        rule=rule,
        train_ids=(),
        test_ids=dataset.ids,
        predictions=tuple(predictions),
        models_json={},
        folds=fold_ids,
    )


def run_family(config: ExperimentConfig, family: str) -> FamilyResult:
    dataset, rule = make_family_dataset(config, family)
    if config.k_folds > 1:
        return _run_family_kfold(config, family, dataset, rule)
    train_idx, test_idx = split_indices(
        len(dataset), config.test_fraction, _family_seed(config, family, 3)
    )
    train_ds = dataset.subset(train_idx)
    test_ds = dataset.subset(test_idx)

    oracle = _oracle_for(test_ds, rule, family)
    oracle_precision = oracle[1].precision_pos if oracle else None

    reports = []
    predictions = []
    models_json = {}
    if oracle:
        reports.append(replace(oracle[1], oracle_precision=oracle_precision))
        predictions.append(oracle[0])
    reports.append(
        random_baseline(
            test_ds,
            config.selection_rate,
            seed=_family_seed(config, family, 4),
            trials=config.baseline_trials,
            oracle_precision=oracle_precision,
        )
    )

    workers = _worker_count()
    def one_model(name: str):
        scores, flags, model_json = train_and_score(name, train_ds, test_ds, config)
        preds = PredictionSet(
            model=name,
            ids=test_ds.ids,
            scores=np.asarray(scores, dtype=np.float64),
            selected=select_top(np.asarray(scores, dtype=np.float64), config.selection_rate),
        )
        report = precision_of_selected(
            preds, test_ds, oracle_precision=oracle_precision, extra_flags=flags
        )
        return preds, report, model_json

    if workers > 1 and len(config.models) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one_model, config.models))
    else:
        outcomes = [one_model(name) for name in config.models]
    for name, (preds, report, model_json) in zip(config.models, outcomes):
        predictions.append(preds)
        reports.append(report)
        models_json[name] = model_json

    reports.sort(key=lambda r: (-(r.precision_pos if r.precision_pos is not None else -1.0), r.model))
    return FamilyResult(
        family=family,
        reports=tuple(reports),
        dataset=dataset,
        rule=rule,
        train_ids=train_ds.ids,
        test_ids=test_ds.ids,
        predictions=tuple(predictions),
        models_json=models_json,
    )


def _worker_count() -> int:
    raw = os.environ.get("CSFBENCH_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise InvalidConfigError(f"CSFBENCH_THREADS must be an integer, got {raw!r}")
    return 1


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None):
    """Run every configured family; optionally write all artifacts under out_dir."""
    results = [run_family(config, family) for family in config.families]
    if out_dir is not None:
        write_experiment_artifacts(Path(out_dir), config, results)
    return results


# ---------------------------------------------------------------------------
# Report / artifact writers
# ---------------------------------------------------------------------------


def write_reports_json(path, reports) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_reports_json(path) -> list[ModelReport]:
    with open(path) as fh:
        return [ModelReport.from_dict(d) for d in json.load(fh)]


_REPORT_COLUMNS = (
    "model", "family", "n_test", "n_selected", "precision_pos", "base_rate",
    "wilson_lo", "wilson_hi", "selection_rate", "oracle_precision", "flags",
)


def write_reports_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_REPORT_COLUMNS)
        for r in reports:
            d = r.to_dict()
            row = []
            for col in _REPORT_COLUMNS:
                v = d[col]
                if col == "flags":
                    v = ";".join(v)
                elif isinstance(v, float):
                    v = repr(float(v))
                row.append("" if v is None else v)
            writer.writerow(row)


def write_plot_csv(path, reports) -> None:
    """Plot-ready long format: one precision bar with CI bounds per model x family."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "model", "precision", "ci_lo", "ci_hi", "base_rate"])
        for r in reports:
            if r.precision_pos is None:
                continue
            writer.writerow(
                [r.family, r.model, repr(float(r.precision_pos)), repr(float(r.wilson_lo)),
                 repr(float(r.wilson_hi)), repr(float(r.base_rate))]
            )


def write_experiment_artifacts(out_dir: Path, config: ExperimentConfig, results) -> None:
    from .io import write_dataset

    out_dir.mkdir(parents=True, exist_ok=True)
    all_reports = []
    for res in results:
        fam_dir = out_dir / res.family
        fam_dir.mkdir(parents=True, exist_ok=True)
        write_dataset(res.dataset, fam_dir / "dataset.jsonl")
        if res.rule is not None:
            with open(fam_dir / "rule.json", "w") as fh:
                json.dump(res.rule.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        if res.folds:
            for k, (fold_train, fold_test) in enumerate(res.folds):
                write_split(fam_dir / f"split-fold{k}.json", fold_train, fold_test)
        else:
            write_split(fam_dir / "split.json", res.train_ids, res.test_ids)
        preds_dir = fam_dir / "predictions"
        preds_dir.mkdir(exist_ok=True)
        for preds in res.predictions:
            write_predictions(preds_dir / f"{preds.model}.jsonl", preds)
        for name, model_json in res.models_json.items():
            (fam_dir / f"model-{name}.json").write_text(model_json + "\n")
        all_reports.extend(res.reports)
    write_reports_json(out_dir / "reports.json", all_reports)
    write_reports_csv(out_dir / "reports.csv", all_reports)
    write_plot_csv(out_dir / "plot_precision.csv", all_reports)
