import math
import os
import tempfile

import numpy as np
import pytest

from csfbench import generate
from csfbench.errors import InfeasibleCalibrationError, InvalidConfigError
from csfbench.generate import (
    CsfRule,
    GenConfig,
    NcsfRule,
    calibrate_threshold,
    csf_scores,
    generate_csf,
    generate_ncsf,
    generate_random,
    off_signal_probability,
    sample_csf_rule,
)
from csfbench.io import write_dataset
from csfbench.patterns import sign_matrix


def serialize(dataset) -> bytes:
    with tempfile.NamedTemporaryFile("r", suffix=".jsonl", delete=False) as fh:
        path = fh.name
    write_dataset(dataset, path)
    with open(path, "rb") as fh:
        blob = fh.read()
    os.unlink(path)
    return blob


class TestSampleRule:
    def test_k_out_of_range(self, vocab):
        with pytest.raises(InvalidConfigError):
            sample_csf_rule(vocab, k_effective=0, seed=1)
        with pytest.raises(InvalidConfigError):
            sample_csf_rule(vocab, k_effective=len(vocab) + 1, seed=1)

    def test_full_support(self, vocab):
        rule = sample_csf_rule(vocab, k_effective=len(vocab), seed=1)
        assert np.all(rule.weights != 0)

    def test_weight_range(self, vocab):
        rule = sample_csf_rule(vocab, k_effective=30, seed=9)
        mags = np.abs(rule.weights[rule.weights != 0])
        assert np.all((mags >= 0.2) & (mags <= 1.0))

    def test_deterministic(self, vocab):
        a = sample_csf_rule(vocab, k_effective=10, seed=42)
        b = sample_csf_rule(vocab, k_effective=10, seed=42)
        assert a.weights.tobytes() == b.weights.tobytes()


class TestCalibration:
    def test_quantile_must_be_interior(self, vocab):
        rule = sample_csf_rule(vocab, 5, seed=0)
        for q in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(InvalidConfigError):
                calibrate_threshold(rule, quantile=q)

    def test_calibration_n_floor(self, vocab):
        rule = sample_csf_rule(vocab, 5, seed=0)
        with pytest.raises(InvalidConfigError):
            calibrate_threshold(rule, calibration_n=99)

    def test_zero_weight_rule_gives_zero_threshold(self, vocab):
        rule = CsfRule(vocab=vocab, weights=np.zeros(len(vocab)))
        assert calibrate_threshold(rule, seed=3) == 0.0

    def test_signal_fraction_consistency(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=5)
        calibrate_threshold(rule, quantile=0.8, calibration_n=10_000, seed=5)
        rng = np.random.default_rng(777)
        fresh = rng.random((10_000, 19)) < 0.5
        frac = float((csf_scores(fresh, rule) > rule.threshold).mean())
        assert 0.17 <= frac <= 0.23


class TestMixture:
    def test_paper_constants(self):
        assert off_signal_probability(0.52, 0.75, 0.2) == pytest.approx(0.4625)

    def test_infeasible(self):
        with pytest.raises(InfeasibleCalibrationError):
            off_signal_probability(0.52, 0.75, 0.8)  # q_off < 0
        with pytest.raises(InfeasibleCalibrationError):
            off_signal_probability(0.52, 0.75, 1.0)


class TestGenerateCsf:
    def test_requires_calibration(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=0)
        with pytest.raises(InvalidConfigError):
            generate_csf(rule, GenConfig(n_windows=100, seed=0))

    def test_base_rate_concentration(self, csf_setup):
        _, dataset = csf_setup
        assert 0.50 <= dataset.base_rate <= 0.54

    def test_signal_precision_concentration(self, csf_setup):
        rule, dataset = csf_setup
        scores = csf_scores(sign_matrix(dataset.prices), rule)
        signal = scores > rule.threshold
        assert 0.73 <= dataset.labels[signal].mean() <= 0.77

    def test_label_consistency_and_positivity(self, csf_setup):
        _, dataset = csf_setup
        assert np.all((dataset.returns > 0) == (dataset.labels == 1))
        assert np.all(dataset.prices > 0)
        assert np.all(dataset.returns > -1.0)

    def test_infeasible_threshold(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=0)
        rule.threshold = -1e9  # every window is signal
        with pytest.raises(InfeasibleCalibrationError):
            generate_csf(rule, GenConfig(n_windows=500, seed=0))


class TestGenerateNcsf:
    def test_signal_is_binomial_tail(self):
        rule = NcsfRule()
        ds = generate_ncsf(rule, GenConfig(n_windows=50_000, seed=2))
        ups = sign_matrix(ds.prices).sum(axis=1)
        signal = generate.ncsf_scores(sign_matrix(ds.prices), rule) >= rule.ratio
        np.testing.assert_array_equal(signal, ups >= 14)
        # exact oracle: P(Bin(19, 1/2) >= 14)
        p_exact = sum(math.comb(19, k) for k in range(14, 20)) / 2 ** 19
        assert p_exact == pytest.approx(0.03178, abs=2e-5)
        assert 0.028 <= signal.mean() <= 0.036

    def test_window_mismatch(self):
        rule = NcsfRule(window=20)
        with pytest.raises(InvalidConfigError):
            generate_ncsf(rule, GenConfig(n_windows=100, seed=0, window=15))

    def test_rule_validation(self):
        with pytest.raises(InvalidConfigError):
            NcsfRule(ratio=0.5)
        with pytest.raises(InvalidConfigError):
            NcsfRule(ratio=1.1)
        with pytest.raises(InvalidConfigError):
            NcsfRule(window=1)


class TestGenerateRandom:
    def test_base_rate(self, random_dataset):
        assert 0.50 <= random_dataset.base_rate <= 0.54

    def test_deterministic_bytes(self):
        cfg = GenConfig(n_windows=500, seed=123)
        a = serialize(generate_random(cfg))
        b = serialize(generate_random(cfg))
        assert a == b

    def test_gt_csf_on_random_is_null(self, vocab, random_dataset):
        # the CSF oracle's signal is independent of random-family labels
        rule = sample_csf_rule(vocab, 10, seed=31)
        calibrate_threshold(rule, seed=31)
        scores = csf_scores(sign_matrix(random_dataset.prices), rule)
        selected = scores > rule.threshold
        n_sel = int(selected.sum())
        prec = float(random_dataset.labels[selected].mean())
        half = 1.96 * math.sqrt(prec * (1 - prec) / n_sel)
        assert abs(prec - random_dataset.base_rate) < half + 0.01

    def test_bad_base_rate(self):
        with pytest.raises(InvalidConfigError):
            generate_random(GenConfig(n_windows=10, seed=0), base_rate=1.5)


class TestLongPathMode:
    def test_csf_path_overlap_and_labels(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=6)
        calibrate_threshold(rule, seed=6)
        ds = generate_csf(rule, GenConfig(n_windows=5000, seed=6, long_path=True))
        # consecutive windows share W-1 prices (stride-1 slices of one path)
        np.testing.assert_allclose(ds.prices[1:, :-1], ds.prices[:-1, 1:])
        assert np.all((ds.returns > 0) == (ds.labels == 1))
        assert np.all(ds.prices > 0)
        assert ds.provenance.get("config_hash")

    def test_csf_path_oracle_precision(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=6)
        calibrate_threshold(rule, seed=6)
        ds = generate_csf(rule, GenConfig(n_windows=20_000, seed=6, long_path=True))
        scores = csf_scores(sign_matrix(ds.prices), rule)
        sel = scores > rule.threshold
        # label steps feed back into later windows, so looser bounds than iid mode
        assert 0.70 <= ds.labels[sel].mean() <= 0.80
        assert 0.45 <= ds.base_rate <= 0.60

    def test_ncsf_path_is_self_exciting(self):
        # momentum rule on a sequential path: biased labeled steps keep the
        # up-ratio high, so the signal fraction far exceeds the iid tail mass
        rule = NcsfRule()
        ds = generate_ncsf(rule, GenConfig(n_windows=20_000, seed=6, long_path=True))
        signal = generate.ncsf_scores(sign_matrix(ds.prices), rule) >= rule.ratio
        assert signal.mean() > 0.06
        assert 0.70 <= ds.labels[signal].mean() <= 0.80

    def test_path_mode_deterministic(self, vocab):
        rule = sample_csf_rule(vocab, 5, seed=9)
        calibrate_threshold(rule, seed=9)
        cfg = GenConfig(n_windows=1000, seed=9, long_path=True)
        assert serialize(generate_csf(rule, cfg)) == serialize(generate_csf(rule, cfg))


class TestCrossFamilyNull:
    def test_gt_csf_rule_on_ncsf_data(self, vocab):
        # a typical CSF rule's signal is uninformative about momentum labels
        rule = sample_csf_rule(vocab, 10, seed=51)
        calibrate_threshold(rule, seed=51)
        ds = generate_ncsf(NcsfRule(), GenConfig(n_windows=20_000, seed=51))
        scores = csf_scores(sign_matrix(ds.prices), rule)
        sel = scores > rule.threshold
        prec = float(ds.labels[sel].mean())
        half = 1.96 * math.sqrt(prec * (1 - prec) / int(sel.sum()))
        assert abs(prec - ds.base_rate) < half


class TestGenConfig:
    def test_validation(self):
        with pytest.raises(InvalidConfigError):
            GenConfig(n_windows=0, seed=0)
        with pytest.raises(InvalidConfigError):
            GenConfig(n_windows=10, seed=0, sigma=0.0)
        with pytest.raises(InvalidConfigError):
            GenConfig(n_windows=10, seed=-1)
        with pytest.raises(InvalidConfigError):
            GenConfig(n_windows=10, seed=0, window=1)


class TestRuleSerialization:
    def test_csf_rule_round_trip(self, vocab):
        rule = sample_csf_rule(vocab, 10, seed=8)
        calibrate_threshold(rule, seed=8)
        back = CsfRule.from_dict(rule.to_dict())
        assert back.threshold == rule.threshold
        np.testing.assert_array_equal(back.weights, rule.weights)

    def test_ncsf_rule_round_trip(self):
        rule = NcsfRule(window=20, ratio=0.7)
        assert NcsfRule.from_dict(rule.to_dict()) == rule
