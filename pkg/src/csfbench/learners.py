"""Native baseline learners on window returns: Gaussian NB, linear SVM, MLP.

All three share the same contract: fit on a feature matrix of per-window
returns, emit a real selection score per window (posterior log-ratio, margin,
positive-class probability). Selection itself is the benchmark's job, so the
scores only need a consistent ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, TrainingError
from .generate import Dataset
from .series import simple_returns

VAR_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def window_returns(dataset: Dataset) -> np.ndarray:
    """(n, W-1) simple returns of every window."""
    p = dataset.prices
    return p[:, 1:] / p[:, :-1] - 1.0


@dataclass
class FeatureScaler:
    """Feature normalization fitted on training data and replayed on test data.

    standardize: per-feature (x - mean) / std with train statistics (default);
    zscore_window: per-window z-score, stateless; raw: identity.
    """

    mode: str = "standardize"
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def fit(self, X: np.ndarray) -> "FeatureScaler":
        if self.mode not in ("standardize", "zscore_window", "raw"):
            raise InvalidConfigError(f"unknown feature mode {self.mode!r}")
        if self.mode == "standardize":
            self.mean = X.mean(axis=0)
            std = X.std(axis=0)
            std[std == 0] = 1.0
            self.std = std
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.mode == "raw":
            return X
        if self.mode == "zscore_window":
            m = X.mean(axis=1, keepdims=True)
            s = X.std(axis=1, keepdims=True)
            s = np.where(s == 0, 1.0, s)
            return (X - m) / s
        if self.mean is None or self.std is None:
            raise TrainingError("scaler used before fit()")
        return (X - self.mean) / self.std


@dataclass(frozen=True)
class FeatureMatrix:
    """Scaled window-return features with labels, ready for any learner."""

    X: np.ndarray
    y: np.ndarray
    scaler: FeatureScaler

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.X)):
            raise InvalidConfigError("feature matrix contains non-finite entries")
        if self.X.shape[0] != self.y.shape[0]:
            raise InvalidConfigError("feature rows and labels disagree")


def build_features(dataset: Dataset, mode: str = "standardize") -> FeatureMatrix:
    X = window_returns(dataset)
    scaler = FeatureScaler(mode=mode).fit(X)
    return FeatureMatrix(X=scaler.transform(X), y=dataset.labels.astype(np.int64), scaler=scaler)


def _require_both_classes(y: np.ndarray) -> None:
    if np.unique(y).size < 2:
        raise TrainingError("training data contains a single class")


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------


@dataclass
class NaiveBayesModel:
    log_priors: np.ndarray  # (2,)
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Posterior log-ratio log P(pos|x) - log P(neg|x); selection score."""
        ll = []
        for c in (0, 1):
            z = (X - self.means[c]) ** 2 / self.variances[c]
            ll.append(self.log_priors[c] - 0.5 * (np.log(self.variances[c]).sum() + z.sum(axis=1)))
        return ll[1] - ll[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0).astype(np.int64)

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "nb-v1",
                "log_priors": self.log_priors.tolist(),
                "means": self.means.tolist(),
                "variances": self.variances.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NaiveBayesModel":
        d = json.loads(text)
        if d.get("schema") != "nb-v1":
            raise InvalidConfigError(f"not an nb-v1 model: {d.get('schema')!r}")
        return cls(
            log_priors=np.array(d["log_priors"]),
            means=np.array(d["means"]),
            variances=np.array(d["variances"]),
        )


def train_naive_bayes(X: np.ndarray, y: np.ndarray) -> NaiveBayesModel:
    _require_both_classes(y)
    means = np.empty((2, X.shape[1]))
    variances = np.empty((2, X.shape[1]))
    priors = np.empty(2)
    for c in (0, 1):
        rows = X[y == c]
        priors[c] = rows.shape[0] / X.shape[0]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), VAR_FLOOR)
    return NaiveBayesModel(log_priors=np.log(priors), means=means, variances=variances)


# ---------------------------------------------------------------------------
# Linear SVM (hinge-loss SGD)
# ---------------------------------------------------------------------------


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Signed margin; selection score."""
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0).astype(np.int64)

    def to_json(self) -> str:
        return json.dumps(
            {"schema": "svm-v1", "weights": self.weights.tolist(), "bias": self.bias},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearSvmModel":
        d = json.loads(text)
        if d.get("schema") != "svm-v1":
            raise InvalidConfigError(f"not an svm-v1 model: {d.get('schema')!r}")
        return cls(weights=np.array(d["weights"]), bias=float(d["bias"]))


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    epochs: int = 50,
    lr: float = 0.01,
    C: float = 1.0,
    seed: int = 0,
) -> LinearSvmModel:
    """SGD on J = ||w||^2 / 2 + C * sum_i hinge_i, one sample at a time.

    C = 0 degenerates to pure shrinkage (weights decay toward zero), which is
    the documented regularization limit.
    """
    _require_both_classes(y)
    if C < 0:
        raise InvalidConfigError("C must be >= 0")
    n, d = X.shape
    ysgn = np.where(y == 1, 1.0, -1.0)
    rng = np.random.default_rng([seed, 0x57A4])
    w = np.zeros(d)
    b = 0.0
    for _ in range(epochs):
        for i in rng.permutation(n):
            margin = ysgn[i] * (X[i] @ w + b)
            w -= lr * (w / n)
            if margin < 1.0:
                w += lr * C * ysgn[i] * X[i]
                b += lr * C * ysgn[i]
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise TrainingError("SVM training diverged (non-finite weights); lower lr")
    return LinearSvmModel(weights=w, bias=b)


# ---------------------------------------------------------------------------
# One-hidden-layer MLP with softmax output
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 64
    lr: float = 0.01
    epochs: int = 150
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hidden < 0:
            raise InvalidConfigError("hidden must be >= 0 (0 bypasses the hidden layer)")
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise InvalidConfigError("bad MLP hyperparameters")


@dataclass
class MlpModel:
    """ReLU hidden layer (optional) + softmax output over {negative, positive}."""

    config: MlpConfig
    w1: np.ndarray | None
    b1: np.ndarray | None
    w2: np.ndarray
    b2: np.ndarray

    def _forward(self, X: np.ndarray):
        if self.w1 is not None:
            hidden = np.maximum(0.0, X @ self.w1 + self.b1)
        else:
            hidden = X
        logits = hidden @ self.w2 + self.b2
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return hidden, e / e.sum(axis=1, keepdims=True)

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        return self._forward(X)[1]

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Positive-class probability; selection score."""
        return self.probabilities(X)[:, 1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(np.int64)

    def parameters(self) -> list[np.ndarray]:
        params = [] if self.w1 is None else [self.w1, self.b1]
        return params + [self.w2, self.b2]

    def loss_and_gradients(self, X: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and its gradients for every parameter array."""
        n = X.shape[0]
        hidden, probs = self._forward(X)
        eps = 1e-12
        loss = -np.log(probs[np.arange(n), y] + eps).mean()
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        g_w2 = hidden.T @ delta
        g_b2 = delta.sum(axis=0)
        if self.w1 is None:
            return loss, [g_w2, g_b2]
        d_hidden = delta @ self.w2.T
        d_hidden[hidden <= 0] = 0.0
        g_w1 = X.T @ d_hidden
        g_b1 = d_hidden.sum(axis=0)
        return loss, [g_w1, g_b1, g_w2, g_b2]

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "mlp-v1",
                "hidden": self.config.hidden,
                "w1": None if self.w1 is None else self.w1.tolist(),
                "b1": None if self.b1 is None else self.b1.tolist(),
                "w2": self.w2.tolist(),
                "b2": self.b2.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        d = json.loads(text)
        if d.get("schema") != "mlp-v1":
            raise InvalidConfigError(f"not an mlp-v1 model: {d.get('schema')!r}")
        return cls(
            config=MlpConfig(hidden=int(d["hidden"])),
            w1=None if d["w1"] is None else np.array(d["w1"]),
            b1=None if d["b1"] is None else np.array(d["b1"]),
            w2=np.array(d["w2"]),
            b2=np.array(d["b2"]),
        )


def init_mlp(n_features: int, config: MlpConfig = MlpConfig()) -> MlpModel:
    """He-initialized model; hidden = 0 gives a plain softmax regression."""
    rng = np.random.default_rng([config.seed, 0x3147])
    if config.hidden > 0:
        w1 = rng.normal(0.0, np.sqrt(2.0 / n_features), (n_features, config.hidden))
        b1 = np.zeros(config.hidden)
        w2 = rng.normal(0.0, np.sqrt(2.0 / config.hidden), (config.hidden, 2))
    else:
        w1 = b1 = None
        w2 = rng.normal(0.0, np.sqrt(2.0 / n_features), (n_features, 2))
    return MlpModel(config=config, w1=w1, b1=b1, w2=w2, b2=np.zeros(2))


def train_mlp(X: np.ndarray, y: np.ndarray, config: MlpConfig = MlpConfig()) -> MlpModel:
    _require_both_classes(y)
    model = init_mlp(X.shape[1], config)
    rng = np.random.default_rng([config.seed, 0x3148])
    n = X.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = model.loss_and_gradients(X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError("MLP training diverged (loss is not finite); lower lr")
            for param, grad in zip(model.parameters(), grads):
                param -= config.lr * grad
    return model


def gradient_check(model: MlpModel, X: np.ndarray, y: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central finite differences."""
    if not 1e-6 <= eps <= 1e-3:
        raise InvalidConfigError("eps must lie in [1e-6, 1e-3]")
    _, grads = model.loss_and_gradients(X, y)
    worst = 0.0
    for param, grad in zip(model.parameters(), grads):
        flat = param.ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up, _ = model.loss_and_gradients(X, y)
            flat[j] = orig - eps
            down, _ = model.loss_and_gradients(X, y)
            flat[j] = orig
            numeric = (up - down) / (2 * eps)
            analytic = grad.ravel()[j]
            scale = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst
