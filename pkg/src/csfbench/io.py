"""CSV ingestion, dataset JSONL serialization, run-config loading.

Formats are documented in FORMATS.md at the repo root; every file this
module writes round-trips losslessly (floats are serialized by shortest
round-trip representation).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields, replace
from datetime import date, datetime
from pathlib import Path

import numpy as np

from . import learners
from .bench import ExperimentConfig
from .errors import InvalidConfigError, InvalidInputError, SchemaError
from .generate import Dataset
from .series import PriceSeries
from .smcsf import SmCsfConfig

MIN_REAL_ROWS = 21  # one 20-price window plus its next-day label


# ---------------------------------------------------------------------------
# Real-series CSV ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsvSpec:
    path: str
    date_col: str = "Date"
    price_col: str = "Close"
    delimiter: str = ","
    use_adjusted: bool = False  # prefer "Adj Close" when that column exists


@dataclass(frozen=True)
class IngestResult:
    series: PriceSeries
    rejected_rows: tuple[tuple[int, str], ...]  # (1-based row number, reason)
    was_descending: bool


_DATE_FORMATS = ("%Y-%m-%d", "%Y/%m/%d", "%d-%m-%Y", "%d/%m/%Y", "%m/%d/%Y", "%Y%m%d")


def _parse_date(text: str) -> date | None:
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text.strip(), fmt).date()
        except ValueError:
            continue
    return None


def ingest_csv(spec: CsvSpec) -> IngestResult:
    """Chronological close-price series; bad rows are dropped and reported."""
    path = Path(spec.path)
    if not path.exists():
        raise InvalidInputError(f"CSV file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=spec.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        price_col = spec.price_col
        if spec.use_adjusted and "Adj Close" in header:
            price_col = "Adj Close"
        for col in (spec.date_col, price_col):
            if col not in header:
                raise InvalidInputError(
                    f"{path}: required column {col!r} missing (have {header})"
                )
        i_date = header.index(spec.date_col)
        i_price = header.index(price_col)

        dates: list[date | None] = []
        prices: list[float] = []
        rejected: list[tuple[int, str]] = []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(i_date, i_price):
                rejected.append((rownum, "too few columns"))
                continue
            raw = row[i_price].strip()
            try:
                value = float(raw)
            except ValueError:
                rejected.append((rownum, f"non-numeric price {raw!r}"))
                continue
            if not np.isfinite(value) or value <= 0:
                rejected.append((rownum, f"non-positive price {raw!r}"))
                continue
            dates.append(_parse_date(row[i_date]))
            prices.append(value)

    if len(prices) < MIN_REAL_ROWS:
        raise InvalidInputError(
            f"{path}: only {len(prices)} valid price rows, need >= {MIN_REAL_ROWS}"
        )
    descending = False
    first, last = dates[0], dates[-1]
    if first is not None and last is not None and first > last:
        descending = True
        prices.reverse()
    series = PriceSeries(
        id=path.stem,
        prices=np.array(prices),
        source="real",
        meta={"path": str(path), "price_col": price_col},
    )
    return IngestResult(
        series=series, rejected_rows=tuple(rejected), was_descending=descending
    )


def real_to_dataset(series: PriceSeries, window: int = 20) -> Dataset:
    """Overlapping stride-1 windows labeled by the sign of the next-day return."""
    p = series.prices
    if p.size < window + 1:
        raise InvalidInputError(
            f"series of {p.size} prices is too short for window {window} + 1 label day"
        )
    n = p.size - window
    idx = np.arange(n)[:, None] + np.arange(window)[None, :]
    prices = p[idx]
    nxt = p[window:]
    returns = nxt / p[window - 1: -1] - 1.0
    labels = (returns > 0).astype(np.int8)
    ids = tuple(f"real-{series.id}-{i:06d}" for i in range(n))
    return Dataset(
        ids=ids,
        prices=prices,
        labels=labels,
        returns=returns,
        family="real",
        provenance={
            "schema": "csfbench-v1",
            "config_hash": "",
            "seed": 0,
            "source_series": series.id,
            "overlapping_windows": True,
        },
    )


# ---------------------------------------------------------------------------
# Dataset JSONL (schema csfbench-v1)
# ---------------------------------------------------------------------------


def write_dataset(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(
            json.dumps(
                {
                    "schema": "csfbench-v1",
                    "config_hash": dataset.provenance.get("config_hash", ""),
                    "seed": dataset.provenance.get("seed", 0),
                },
                separators=(",", ":"),
            )
            + "\n"
        )
        # json serializes floats by shortest round-trip repr, so prices and
        # returns survive write/read bit-exactly
        for i in range(len(dataset)):
            fh.write(
                json.dumps(
                    {
                        "id": dataset.ids[i],
                        "family": dataset.family,
                        "prices": [float(x) for x in dataset.prices[i]],
                        "label": int(dataset.labels[i]),
                        "ret": float(dataset.returns[i]),
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_dataset(path) -> Dataset:
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise SchemaError(f"{path}: empty dataset file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:1: bad header: {exc}") from exc
        if header.get("schema") != "csfbench-v1":
            raise SchemaError(
                f"{path}: unsupported dataset schema {header.get('schema')!r}"
            )
        ids, prices, labels, returns, family = [], [], [], [], None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(rec["id"])
                prices.append(rec["prices"])
                labels.append(int(rec["label"]))
                returns.append(float(rec["ret"]))
                family = rec["family"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad dataset line: {exc}") from exc
    if not ids:
        raise SchemaError(f"{path}: dataset has a header but no windows")
    return Dataset(
        ids=tuple(ids),
        prices=np.array(prices, dtype=np.float64),
        labels=np.array(labels, dtype=np.int8),
        returns=np.array(returns, dtype=np.float64),
        family=family,
        provenance={
            "schema": "csfbench-v1",
            "config_hash": header.get("config_hash", ""),
            "seed": header.get("seed", 0),
        },
    )


# ---------------------------------------------------------------------------
# Run configuration (fail-closed JSON)
# ---------------------------------------------------------------------------

_RUNCONFIG_SCHEMA = "runconfig-v1"

_TOP_KEYS = {
    "schema", "families", "models", "n_windows", "window", "seed",
    "selection_rate", "test_fraction", "k_folds", "baseline_trials", "mu", "sigma",
    "p_signal", "base_rate", "csf_quantile", "k_effective", "calibration_n",
    "ncsf_ratio", "real_csv", "date_col", "price_col", "smcsf", "mlp",
    "svm_epochs", "svm_lr", "svm_c", "feature_mode",
}
_SMCSF_KEYS = {
    "window_sizes", "alpha", "tau", "ridge_lambda", "selection_rate",
    "validation_fraction", "split_seed", "count_mode", "target",
}
_MLP_KEYS = {"hidden", "lr", "epochs", "batch_size", "seed"}


def load_run_config(path) -> ExperimentConfig:
    """Parse a runconfig-v1 JSON file; unknown keys are rejected."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    if raw.get("schema") != _RUNCONFIG_SCHEMA:
        raise SchemaError(
            f"{path}: unsupported config schema {raw.get('schema')!r}, "
            f"expected {_RUNCONFIG_SCHEMA!r}"
        )
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")

    kwargs: dict = {}
    for key in _TOP_KEYS - {"schema", "smcsf", "mlp", "families", "models"}:
        if key in raw:
            kwargs[key] = raw[key]
    if "families" in raw:
        kwargs["families"] = tuple(raw["families"])
    if "models" in raw:
        kwargs["models"] = tuple(raw["models"])
    if "smcsf" in raw:
        sub = raw["smcsf"]
        unknown = set(sub) - _SMCSF_KEYS
        if unknown:
            raise SchemaError(f"{path}: unknown smcsf keys {sorted(unknown)}")
        if "window_sizes" in sub:
            sub = dict(sub, window_sizes=tuple(sub["window_sizes"]))
        kwargs["smcsf"] = SmCsfConfig(**sub)
    if "mlp" in raw:
        sub = raw["mlp"]
        unknown = set(sub) - _MLP_KEYS
        if unknown:
            raise SchemaError(f"{path}: unknown mlp keys {sorted(unknown)}")
        kwargs["mlp"] = learners.MlpConfig(**sub)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise SchemaError(f"{path}: bad config value: {exc}") from exc
