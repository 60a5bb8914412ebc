"""SM-CSF: select effective sign patterns, fit ridge weights on their counts.

Training: (1) split off a validation fraction, (2) screen patterns by
class-conditional occurrence log-odds on the training part, (3) fit
ridge-regularized least squares of the binary label on the selected counts
plus intercept via the normal equations, (4) place the decision threshold at
the validation score quantile matching the configured selection rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, TrainingError
from .generate import Dataset, config_hash
from .patterns import (
    DEFAULT_WINDOW_SIZES,
    PatternVocabulary,
    SignPattern,
    count_signs,
    effectiveness_scores,
    enumerate_vocabulary,
    occurrence_table,
    sign_matrix,
)

FALLBACK_TOP_K = 10


@dataclass(frozen=True)
class SmCsfConfig:
    window_sizes: tuple[int, ...] = DEFAULT_WINDOW_SIZES
    alpha: float = 1.0
    tau: float = 0.04
    ridge_lambda: float = 1e-3
    selection_rate: float = 0.2
    validation_fraction: float = 0.25
    split_seed: int = 0
    count_mode: str = "counts"  # or "presence"
    target: str = "label"  # or "return"

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise InvalidConfigError("alpha must be > 0")
        if self.tau < 0:
            raise InvalidConfigError("tau must be >= 0")
        if self.ridge_lambda < 0:
            raise InvalidConfigError("ridge_lambda must be >= 0")
        if not 0.0 < self.selection_rate < 1.0:
            raise InvalidConfigError("selection_rate must lie in (0, 1)")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidConfigError("validation_fraction must lie in (0, 1)")
        if self.count_mode not in ("counts", "presence"):
            raise InvalidConfigError(f"unknown count_mode {self.count_mode!r}")
        if self.target not in ("label", "return"):
            raise InvalidConfigError(f"unknown target {self.target!r}")


@dataclass
class TrainedSmCsf:
    config: SmCsfConfig
    patterns: tuple[SignPattern, ...]
    weights: np.ndarray
    intercept: float
    score_threshold: float
    fallback_used: bool
    provenance: dict = field(default_factory=dict)

    _vocab: PatternVocabulary = field(init=False, repr=False)
    _positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.patterns) < 1:
            raise TrainingError("a trained model needs at least one effective pattern")
        self._vocab = enumerate_vocabulary(self.config.window_sizes)
        self._positions = np.array([self._vocab.position(p) for p in self.patterns])

    def features(self, prices: np.ndarray) -> np.ndarray:
        """Per-window count (or presence) vector restricted to the effective patterns."""
        counts = count_signs(sign_matrix(prices), self._vocab)[:, self._positions]
        if self.config.count_mode == "presence":
            return (counts > 0).astype(np.float64)
        return counts.astype(np.float64)

    def scores(self, prices: np.ndarray) -> np.ndarray:
        return self.features(np.atleast_2d(prices)) @ self.weights + self.intercept

    def score(self, window) -> float:
        return float(self.scores(np.asarray(window, dtype=np.float64)[None, :])[0])

    def predict(self, window) -> bool:
        return self.score(window) > self.score_threshold

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "smcsf-v1",
                "window_sizes": list(self.config.window_sizes),
                "count_mode": self.config.count_mode,
                "patterns": [[p.length, p.bits] for p in self.patterns],
                "weights": [float(w) for w in self.weights],
                "intercept": self.intercept,
                "score_threshold": self.score_threshold,
                "fallback_used": self.fallback_used,
                "provenance": self.provenance,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedSmCsf":
        d = json.loads(text)
        if d.get("schema") != "smcsf-v1":
            raise InvalidConfigError(f"not an smcsf-v1 model: {d.get('schema')!r}")
        return cls(
            config=SmCsfConfig(
                window_sizes=tuple(d["window_sizes"]), count_mode=d["count_mode"]
            ),
            patterns=tuple(SignPattern(length=L, bits=b) for L, b in d["patterns"]),
            weights=np.array(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            score_threshold=float(d["score_threshold"]),
            fallback_used=bool(d["fallback_used"]),
            provenance=d.get("provenance", {}),
        )


def split_indices(n: int, holdout_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (main, holdout) index split by seeded permutation."""
    perm = np.random.default_rng([seed, 0x59117]).permutation(n)
    n_hold = int(round(n * holdout_fraction))
    return np.sort(perm[n_hold:]), np.sort(perm[:n_hold])


def ridge_fit(X: np.ndarray, y: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Solve (X'X + lambda I) w = X'y, intercept column included in X.

    One step of iterative refinement keeps the normal-equations residual near
    machine precision even when count sums make the Gram matrix large.
    """
    gram = X.T @ X + ridge_lambda * np.eye(X.shape[1])
    rhs = X.T @ y
    try:
        coef = np.linalg.solve(gram, rhs)
        coef += np.linalg.solve(gram, rhs - gram @ coef)
    except np.linalg.LinAlgError as exc:
        raise TrainingError(
            "normal equations are singular; raise ridge_lambda above 0"
        ) from exc
    return coef


def select_effective_patterns(dataset: Dataset, config: SmCsfConfig):
    """Screen the vocabulary on a training split; returns (positions, fallback_used, scores)."""
    vocab = enumerate_vocabulary(config.window_sizes)
    table = occurrence_table(dataset, vocab)
    scores = effectiveness_scores(table, alpha=config.alpha, tau=config.tau)
    positions = np.flatnonzero(scores.is_effective)
    fallback = positions.size == 0
    if fallback:
        positions = np.sort(np.argsort(-np.abs(scores.log_odds), kind="stable")[:FALLBACK_TOP_K])
    return positions, fallback, scores


def train(dataset: Dataset, config: SmCsfConfig = SmCsfConfig()) -> TrainedSmCsf:
    n = len(dataset)
    if n < 200:
        raise TrainingError(f"need >= 200 windows for a train/validation split, got {n}")
    labels = dataset.labels.astype(np.float64)
    if labels.min() == labels.max():
        raise TrainingError("dataset contains a single class; nothing to fit")

    train_idx, val_idx = split_indices(n, config.validation_fraction, config.split_seed)
    train_ds = dataset.subset(train_idx)
    if train_ds.labels.min() == train_ds.labels.max():
        raise TrainingError("training split contains a single class")

    vocab = enumerate_vocabulary(config.window_sizes)
    positions, fallback, _ = select_effective_patterns(train_ds, config)
    patterns = tuple(vocab.patterns[i] for i in positions)

    counts = count_signs(sign_matrix(dataset.prices), vocab)[:, positions].astype(np.float64)
    if config.count_mode == "presence":
        counts = (counts > 0).astype(np.float64)
    target = labels if config.target == "label" else dataset.returns

    X = np.column_stack([counts[train_idx], np.ones(train_idx.size)])
    y = target[train_idx]
    coef = ridge_fit(X, y, config.ridge_lambda)
    weights, intercept = coef[:-1], float(coef[-1])

    val_scores = counts[val_idx] @ weights + intercept
    threshold = float(np.quantile(val_scores, 1.0 - config.selection_rate))

    return TrainedSmCsf(
        config=config,
        patterns=patterns,
        weights=weights,
        intercept=intercept,
        score_threshold=threshold,
        fallback_used=fallback,
        provenance={
            "dataset_hash": dataset.provenance.get("config_hash", ""),
            "config_hash": config_hash(
                {
                    "window_sizes": list(config.window_sizes),
                    "alpha": config.alpha,
                    "tau": config.tau,
                    "ridge_lambda": config.ridge_lambda,
                    "selection_rate": config.selection_rate,
                    "validation_fraction": config.validation_fraction,
                    "split_seed": config.split_seed,
                    "count_mode": config.count_mode,
                    "target": config.target,
                }
            ),
        },
    )
