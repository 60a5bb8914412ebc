"""Ground-truth predictors that read the generating rule directly.

These bound what any trained model can achieve on the matching synthetic
family: the CSF oracle recomputes the weighted pattern-count score, the NCSF
oracle the up-step ratio, using the exact comparison the generator used
(strict > for CSF, >= for NCSF), so oracle selections coincide with the
generator's signal set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .generate import CsfRule, Dataset, NcsfRule, csf_scores, ncsf_scores
from .patterns import sign_matrix


@dataclass(frozen=True)
class OraclePrediction:
    window_id: str
    selected: bool
    score: float


def gt_csf_scores(dataset: Dataset, rule: CsfRule) -> tuple[np.ndarray, np.ndarray]:
    """(scores, selected) for every window; selected means score > threshold."""
    if rule.threshold is None:
        raise InvalidConfigError("CsfRule is not calibrated; no threshold to compare against")
    if dataset.window_size - 1 < rule.vocab.max_length:
        raise InvalidInputError(
            f"windows of {dataset.window_size} prices are too short for the rule vocabulary"
        )
    scores = csf_scores(sign_matrix(dataset.prices), rule)
    return scores, scores > rule.threshold


def gt_ncsf_scores(dataset: Dataset, rule: NcsfRule) -> tuple[np.ndarray, np.ndarray]:
    """(up-ratios, selected) for every window; selected means ratio >= rule.ratio."""
    if dataset.window_size != rule.window:
        raise InvalidInputError(
            f"window size {dataset.window_size} != rule window {rule.window}"
        )
    scores = ncsf_scores(sign_matrix(dataset.prices), rule)
    return scores, scores >= rule.ratio


def gt_csf_predict(window, rule: CsfRule, window_id: str = "") -> OraclePrediction:
    if rule.threshold is None:
        raise InvalidConfigError("CsfRule is not calibrated; no threshold to compare against")
    prices = np.asarray(window, dtype=np.float64)
    score = float(csf_scores(sign_matrix(prices[None, :]), rule)[0])
    return OraclePrediction(window_id=window_id, selected=score > rule.threshold, score=score)


def gt_ncsf_predict(window, rule: NcsfRule, window_id: str = "") -> OraclePrediction:
    prices = np.asarray(window, dtype=np.float64)
    if prices.size != rule.window:
        raise InvalidInputError(f"window has {prices.size} prices, rule expects {rule.window}")
    score = float(ncsf_scores(sign_matrix(prices[None, :]), rule)[0])
    return OraclePrediction(window_id=window_id, selected=score >= rule.ratio, score=score)
