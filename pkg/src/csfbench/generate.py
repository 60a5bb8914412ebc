"""Synthetic dataset generators: CSF-mode, momentum (NCSF) mode, and random walks.

Every window is an independent multiplicative random walk: price factors are
exp(+/- m) with m ~ LogNormal(mu, sigma), so prices stay positive and step
signs are iid fair coins. The next-step return is drawn with a label
probability that depends on the window only through the generating rule's
signal condition; the unconditional positive rate is held at the configured
base rate by solving the mixture for the off-signal probability.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleCalibrationError, InvalidConfigError
from .patterns import PatternVocabulary, count_signs, enumerate_vocabulary

GENERATOR_VERSION = "csfbench-gen-1"

DEFAULT_WINDOW = 20
DEFAULT_MU = math.log(0.01)
DEFAULT_SIGMA = 0.1
DEFAULT_P_SIGNAL = 0.75
DEFAULT_BASE_RATE = 0.52
DEFAULT_CSF_QUANTILE = 0.8
DEFAULT_NCSF_RATIO = 0.7
DEFAULT_CALIBRATION_N = 10_000


# ---------------------------------------------------------------------------
# Rules and configuration
# ---------------------------------------------------------------------------


@dataclass
class CsfRule:
    """Sparse pattern-weight rule: signal when the weighted count score > threshold."""

    vocab: PatternVocabulary
    weights: np.ndarray
    p_signal: float = DEFAULT_P_SIGNAL
    base_rate: float = DEFAULT_BASE_RATE
    threshold: float | None = None
    calibration_quantile: float = DEFAULT_CSF_QUANTILE

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.vocab),):
            raise InvalidConfigError(
                f"weights length {self.weights.size} != vocabulary size {len(self.vocab)}"
            )
        if not self.base_rate < self.p_signal <= 1.0:
            raise InvalidConfigError(
                f"require base_rate < p_signal <= 1, got {self.base_rate}, {self.p_signal}"
            )
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise InvalidConfigError("threshold must be finite")

    @property
    def effective_positions(self) -> np.ndarray:
        return np.flatnonzero(self.weights)

    def to_dict(self) -> dict:
        return {
            "schema": "csfrule-v1",
            "window_sizes": list(self.vocab.window_sizes),
            "weights": {str(i): float(self.weights[i]) for i in self.effective_positions},
            "p_signal": self.p_signal,
            "base_rate": self.base_rate,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CsfRule":
        vocab = enumerate_vocabulary(tuple(d["window_sizes"]))
        weights = np.zeros(len(vocab))
        for pos, w in d["weights"].items():
            weights[int(pos)] = float(w)
        return cls(
            vocab=vocab,
            weights=weights,
            p_signal=float(d["p_signal"]),
            base_rate=float(d["base_rate"]),
            threshold=None if d.get("threshold") is None else float(d["threshold"]),
        )


@dataclass
class NcsfRule:
    """Momentum rule: signal when the up-step ratio of the window reaches `ratio`."""

    window: int = DEFAULT_WINDOW
    ratio: float = DEFAULT_NCSF_RATIO
    p_signal: float = DEFAULT_P_SIGNAL
    base_rate: float = DEFAULT_BASE_RATE

    def __post_init__(self) -> None:
        if self.window < 2:
            raise InvalidConfigError(f"window must be >= 2, got {self.window}")
        if not 0.5 < self.ratio <= 1.0:
            raise InvalidConfigError(f"ratio must lie in (0.5, 1], got {self.ratio}")
        if not self.base_rate < self.p_signal <= 1.0:
            raise InvalidConfigError(
                f"require base_rate < p_signal <= 1, got {self.base_rate}, {self.p_signal}"
            )

    def to_dict(self) -> dict:
        return {
            "schema": "ncsfrule-v1",
            "window": self.window,
            "ratio": self.ratio,
            "p_signal": self.p_signal,
            "base_rate": self.base_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NcsfRule":
        return cls(
            window=int(d["window"]),
            ratio=float(d["ratio"]),
            p_signal=float(d["p_signal"]),
            base_rate=float(d["base_rate"]),
        )


@dataclass(frozen=True)
class GenConfig:
    """How many windows to draw, from which seed, with which step magnitudes.

    long_path=True slices overlapping stride-1 windows from one sequential
    walk whose labeled step is generated from the rule applied to the
    trailing window (realistic, non-i.i.d.); the default draws independent
    windows so labels are i.i.d. given features.
    """

    n_windows: int
    seed: int
    window: int = DEFAULT_WINDOW
    mu: float = DEFAULT_MU
    sigma: float = DEFAULT_SIGMA
    start_price: float = 100.0
    long_path: bool = False

    def __post_init__(self) -> None:
        if self.n_windows <= 0:
            raise InvalidConfigError(f"n_windows must be > 0, got {self.n_windows}")
        if self.sigma <= 0:
            raise InvalidConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.window < 2:
            raise InvalidConfigError(f"window must be >= 2, got {self.window}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigError("seed must fit in 64 unsigned bits")
        if self.start_price <= 0:
            raise InvalidConfigError("start_price must be positive")


# ---------------------------------------------------------------------------
# Dataset container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledWindow:
    """One fixed-length history window with its realized next-step return."""

    window_id: str
    prices: np.ndarray
    label: int
    realized_return: float


@dataclass(frozen=True)
class Dataset:
    """Uniform-size labeled windows plus generation provenance."""

    ids: tuple[str, ...]
    prices: np.ndarray
    labels: np.ndarray
    returns: np.ndarray
    family: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.ids)
        if self.prices.shape[0] != n or self.labels.shape != (n,) or self.returns.shape != (n,):
            raise InvalidConfigError("dataset arrays disagree on the number of windows")
        if bool(np.any((self.returns > 0) != (self.labels == 1))):
            raise InvalidConfigError("label must be 1 exactly when the realized return is > 0")

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        for i in range(len(self.ids)):
            yield self.window(i)

    def window(self, i: int) -> LabeledWindow:
        return LabeledWindow(
            window_id=self.ids[i],
            prices=self.prices[i],
            label=int(self.labels[i]),
            realized_return=float(self.returns[i]),
        )

    @property
    def base_rate(self) -> float:
        return float(self.labels.mean())

    @property
    def window_size(self) -> int:
        return int(self.prices.shape[1])

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            ids=tuple(self.ids[i] for i in idx),
            prices=self.prices[idx],
            labels=self.labels[idx],
            returns=self.returns[idx],
            family=self.family,
            provenance=dict(self.provenance, subset=True),
        )


def config_hash(*parts: dict) -> str:
    """Stable short hash of one or more JSON-serializable dicts."""
    blob = json.dumps(list(parts), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Rule sampling and calibration
# ---------------------------------------------------------------------------


def sample_csf_rule(
    vocab: PatternVocabulary,
    k_effective: int,
    seed: int,
    p_signal: float = DEFAULT_P_SIGNAL,
    base_rate: float = DEFAULT_BASE_RATE,
) -> CsfRule:
    """Draw a sparse rule: k patterns chosen uniformly, weights in ±[0.2, 1]."""
    if not 1 <= k_effective <= len(vocab):
        raise InvalidConfigError(
            f"k_effective must lie in [1, {len(vocab)}], got {k_effective}"
        )
    rng = np.random.default_rng([seed, 0x5C5F])
    positions = rng.choice(len(vocab), size=k_effective, replace=False)
    magnitudes = rng.uniform(0.2, 1.0, size=k_effective)
    signs = rng.choice([-1.0, 1.0], size=k_effective)
    weights = np.zeros(len(vocab))
    weights[positions] = signs * magnitudes
    return CsfRule(vocab=vocab, weights=weights, p_signal=p_signal, base_rate=base_rate)


def csf_scores(signs: np.ndarray, rule: CsfRule) -> np.ndarray:
    """Weighted pattern-count score per window; shared by generator and oracle."""
    return count_signs(signs, rule.vocab) @ rule.weights


def ncsf_scores(signs: np.ndarray, rule: NcsfRule) -> np.ndarray:
    """Up-step ratio per window; shared by generator and oracle."""
    s = np.atleast_2d(np.asarray(signs, dtype=bool))
    return s.sum(axis=1) / s.shape[1]


def calibrate_threshold(
    rule: CsfRule,
    quantile: float = DEFAULT_CSF_QUANTILE,
    calibration_n: int = DEFAULT_CALIBRATION_N,
    seed: int = 0,
    window: int = DEFAULT_WINDOW,
) -> float:
    """Set the rule threshold to an empirical score quantile on fresh random walks."""
    if not 0.0 < quantile < 1.0:
        raise InvalidConfigError(f"quantile must be interior to (0, 1), got {quantile}")
    if calibration_n < 100:
        raise InvalidConfigError(f"calibration_n must be >= 100, got {calibration_n}")
    rng = np.random.default_rng([seed, 0xCA11])
    signs = rng.random((calibration_n, window - 1)) < 0.5
    scores = csf_scores(signs, rule)
    rule.threshold = float(np.quantile(scores, quantile))
    rule.calibration_quantile = quantile
    return rule.threshold


# ---------------------------------------------------------------------------
# Window generation
# ---------------------------------------------------------------------------


def _draw_walks(config: GenConfig):
    """All randomness for a dataset, drawn in one fixed order from one stream.

    Row i is window i regardless of how the caller iterates, so generation
    order cannot change the output.
    """
    rng = np.random.default_rng([config.seed, 0xD47A])
    steps = config.window - 1
    up = rng.random((config.n_windows, steps)) < 0.5
    mag = rng.lognormal(config.mu, config.sigma, size=(config.n_windows, steps))
    label_u = rng.random(config.n_windows)
    label_mag = rng.lognormal(config.mu, config.sigma, size=config.n_windows)
    factors = np.exp(np.where(up, mag, -mag))
    prices = np.empty((config.n_windows, config.window))
    prices[:, 0] = config.start_price
    prices[:, 1:] = config.start_price * np.cumprod(factors, axis=1)
    return up, prices, label_u, label_mag


def _realized_returns(positive: np.ndarray, label_mag: np.ndarray) -> np.ndarray:
    return np.exp(np.where(positive, label_mag, -label_mag)) - 1.0


def off_signal_probability(base_rate: float, p_signal: float, signal_frac: float) -> float:
    """Solve b = s*p + (1-s)*q for q, so the unconditional positive rate is b."""
    if signal_frac >= 1.0:
        raise InfeasibleCalibrationError(
            "every window is a signal window; base rate cannot be honored"
        )
    q_off = (base_rate - signal_frac * p_signal) / (1.0 - signal_frac)
    if not 0.0 <= q_off <= 1.0:
        raise InfeasibleCalibrationError(
            f"off-signal probability {q_off:.4f} outside [0, 1] "
            f"(base_rate={base_rate}, p_signal={p_signal}, signal_frac={signal_frac:.4f})"
        )
    return q_off


def _assemble(family: str, config: GenConfig, prices, labels, returns, extra_prov: dict) -> Dataset:
    ids = tuple(f"{family}-{config.seed:x}-{i:06d}" for i in range(config.n_windows))
    prov = {
        "schema": "csfbench-v1",
        "config_hash": config_hash(
            {"family": family, "generator": GENERATOR_VERSION},
            {
                "n_windows": config.n_windows,
                "seed": config.seed,
                "window": config.window,
                "mu": config.mu,
                "sigma": config.sigma,
                "start_price": config.start_price,
            },
            extra_prov,
        ),
        "seed": config.seed,
    }
    return Dataset(
        ids=ids,
        prices=prices,
        labels=labels.astype(np.int8),
        returns=returns,
        family=family,
        provenance=prov,
    )


def _generate_path(
    family: str,
    config: GenConfig,
    signal_fn,
    p_signal: float,
    base_rate: float,
    expected_signal_frac: float,
    rule_prov: dict,
) -> Dataset:
    """One sequential walk; each labeled step is drawn from the trailing window.

    The off-signal probability targets the base rate under the calibrated
    signal fraction; realized fractions drift slightly because biased label
    steps feed back into later windows (reported in provenance).
    """
    W, n = config.window, config.n_windows
    q_off = off_signal_probability(base_rate, p_signal, expected_signal_frac)
    rng = np.random.default_rng([config.seed, 0x10A6])
    n_steps = W + n - 1
    mags = rng.lognormal(config.mu, config.sigma, size=n_steps)
    unifs = rng.random(n_steps)
    signs = np.empty(n_steps, dtype=bool)
    signs[: W - 1] = unifs[: W - 1] < 0.5
    n_signal = 0
    for i in range(n):
        t = W - 1 + i
        sig = signal_fn(signs[i:t])
        n_signal += sig
        signs[t] = unifs[t] < (p_signal if sig else q_off)
    factors = np.exp(np.where(signs, mags, -mags))
    prices = np.empty(W + n)
    prices[0] = config.start_price
    prices[1:] = config.start_price * np.cumprod(factors)
    idx = np.arange(n)[:, None] + np.arange(W)[None, :]
    win_prices = prices[idx]
    returns = prices[W:] / prices[W - 1 : -1] - 1.0
    extra = dict(rule_prov, long_path=True, realized_signal_fraction=n_signal / n)
    return _assemble(family, config, win_prices, returns > 0, returns, extra)


def generate_csf(rule: CsfRule, config: GenConfig) -> Dataset:
    """CSF-mode windows: positive-return probability jumps when score > threshold."""
    if rule.threshold is None:
        raise InvalidConfigError("CsfRule is not calibrated; run calibrate_threshold first")
    if config.long_path:
        weights = rule.weights
        vocab = rule.vocab
        theta = rule.threshold

        def signal_fn(signs: np.ndarray) -> bool:
            return bool(count_signs(signs[None, :], vocab)[0] @ weights > theta)

        # threshold calibration targets this tail mass on fresh windows
        expected = 1.0 - rule.calibration_quantile
        return _generate_path(
            "csf", config, signal_fn, rule.p_signal, rule.base_rate, expected, rule.to_dict()
        )
    up, prices, label_u, label_mag = _draw_walks(config)
    scores = csf_scores(up, rule)
    signal = scores > rule.threshold
    q_off = off_signal_probability(rule.base_rate, rule.p_signal, float(signal.mean()))
    positive = label_u < np.where(signal, rule.p_signal, q_off)
    returns = _realized_returns(positive, label_mag)
    return _assemble("csf", config, prices, returns > 0, returns, rule.to_dict())


def generate_ncsf(rule: NcsfRule, config: GenConfig) -> Dataset:
    """Momentum-mode windows: signal when the up-step ratio reaches rule.ratio."""
    if config.window != rule.window:
        raise InvalidConfigError(
            f"config window {config.window} != rule window {rule.window}"
        )
    if config.long_path:
        steps = config.window - 1

        def signal_fn(signs: np.ndarray) -> bool:
            return bool(signs.sum() / steps >= rule.ratio)

        expected = _binomial_tail(steps, math.ceil(rule.ratio * steps))
        return _generate_path(
            "ncsf", config, signal_fn, rule.p_signal, rule.base_rate, expected, rule.to_dict()
        )
    up, prices, label_u, label_mag = _draw_walks(config)
    signal = ncsf_scores(up, rule) >= rule.ratio
    q_off = off_signal_probability(rule.base_rate, rule.p_signal, float(signal.mean()))
    positive = label_u < np.where(signal, rule.p_signal, q_off)
    returns = _realized_returns(positive, label_mag)
    return _assemble("ncsf", config, prices, returns > 0, returns, rule.to_dict())


def _binomial_tail(n: int, k: int) -> float:
    """P(Bin(n, 1/2) >= k)."""
    return sum(math.comb(n, j) for j in range(k, n + 1)) / 2 ** n


def generate_random(config: GenConfig, base_rate: float = DEFAULT_BASE_RATE) -> Dataset:
    """History-independent windows: the label is a plain Bernoulli(base_rate)."""
    if not 0.0 < base_rate < 1.0:
        raise InvalidConfigError(f"base_rate must lie in (0, 1), got {base_rate}")
    _, prices, label_u, label_mag = _draw_walks(config)
    positive = label_u < base_rate
    returns = _realized_returns(positive, label_mag)
    return _assemble("random", config, prices, returns > 0, returns, {"base_rate": base_rate})
