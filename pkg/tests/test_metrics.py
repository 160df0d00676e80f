"""Metrics against brute-force oracles and hand-computed references."""

import json
import math

import numpy as np
import pytest

from pathmatch.metrics import (
    MetricError,
    auc,
    emit_report,
    logloss,
    make_report,
    rela_impr,
)


def pairwise_auc(preds, labels) -> float:
    """O(n^2) oracle: mean over (pos, neg) pairs of win + half-tie credit."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels)
    pos = preds[labels == 1]
    neg = preds[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (pos.size * neg.size))


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == pytest.approx(1.0)

    def test_reversed_ranking(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == pytest.approx(0.0)

    def test_all_ties_give_half(self):
        assert auc([0.3] * 6, [0, 1, 0, 1, 0, 1]) == pytest.approx(0.5)

    def test_matches_pairwise_oracle_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            # Coarse quantization forces frequent exact ties.
            preds = rng.integers(0, 6, size=n) / 5.0
            assert auc(preds, labels) == pairwise_auc(preds, labels)

    def test_complement_symmetry(self, rng):
        for _ in range(50):
            preds = rng.random(30)
            labels = rng.integers(0, 2, size=30)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            total = auc(preds, labels) + auc(1.0 - preds, labels)
            assert total == pytest.approx(1.0)

    def test_monotone_transform_invariance(self, rng):
        preds = rng.random(50)
        labels = rng.integers(0, 2, size=50)
        labels[0], labels[1] = 0, 1
        base = auc(preds, labels)
        assert auc(np.exp(3.0 * preds), labels) == pytest.approx(base)
        assert auc(preds**3, labels) == pytest.approx(base)

    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.9], [1, 1])
        with pytest.raises(MetricError):
            auc([0.1, 0.9], [0, 0])

    def test_nonbinary_labels_rejected(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.9], [0, 2])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.9, 0.5], [0, 1])


# Hand-computed ratio-mode improvement percentages for twelve AUC pairs at
# published two-decimal precision; tolerance 0.01 percentage points.
REFERENCE_IMPROVEMENTS = [
    (0.8125, 0.9359, -13.19),
    (0.8366, 0.9359, -10.61),
    (0.8689, 0.9359, -7.16),
    (0.9308, 0.9359, -0.54),
    (0.9324, 0.9359, -0.37),
    (0.9381, 0.9359, +0.24),
    (0.6673, 0.6778, -1.55),
    (0.6693, 0.6778, -1.25),
    (0.6705, 0.6778, -1.08),
    (0.6753, 0.6778, -0.37),
    (0.6761, 0.6778, -0.25),
    (0.6812, 0.6778, +0.50),
]


class TestRelaImpr:
    def test_reference_cells_ratio_mode(self):
        for model, base, expected in REFERENCE_IMPROVEMENTS:
            got = rela_impr(model, base, mode="ratio")
            assert got == pytest.approx(expected, abs=0.01), (model, base)

    def test_self_comparison_is_zero(self):
        assert rela_impr(0.7, 0.7, "ratio") == pytest.approx(0.0)
        assert rela_impr(0.7, 0.7, "centered") == pytest.approx(0.0)

    def test_centered_mode_formula(self):
        got = rela_impr(0.9381, 0.9359, mode="centered")
        assert got == pytest.approx(((0.9381 - 0.5) / (0.9359 - 0.5) - 1) * 100)
        assert got == pytest.approx(0.50, abs=0.01)

    def test_centered_rejects_random_baseline(self):
        with pytest.raises(MetricError):
            rela_impr(0.7, 0.5, mode="centered")

    def test_ratio_rejects_zero_baseline(self):
        with pytest.raises(MetricError):
            rela_impr(0.7, 0.0, mode="ratio")

    def test_unknown_mode_rejected(self):
        with pytest.raises(MetricError):
            rela_impr(0.7, 0.6, mode="relative")


class TestLogloss:
    def test_uninformative_prediction_is_ln2(self):
        assert logloss([0.5] * 8, [0, 1] * 4) == pytest.approx(math.log(2))

    def test_perfect_prediction_is_tiny(self):
        assert logloss([0.0, 1.0], [0, 1]) == pytest.approx(0.0, abs=1e-11)

    def test_formula_oracle(self, rng):
        preds = rng.uniform(0.01, 0.99, size=40)
        labels = rng.integers(0, 2, size=40)
        want = -np.mean(labels * np.log(preds) + (1 - labels) * np.log(1 - preds))
        assert logloss(preds, labels) == pytest.approx(want)


class TestReports:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        preds = rng.random(100)
        labels = rng.integers(0, 2, size=100)
        labels[:2] = [0, 1]
        report = make_report(
            preds, labels, config_hash="abc", seconds=1.5, baseline_auc=0.6,
            run_id="r1", variant="full", l=4, k1=2, k2=3, lam=0.1,
        )
        out = tmp_path / "report.json"
        csv_path = emit_report(report, str(out))
        loaded = json.loads(out.read_text())
        assert loaded["auc"] == pytest.approx(report.auc)
        assert loaded["n"] == 100
        assert loaded["relaimpr"]["baseline_auc"] == 0.6
        lines = open(csv_path).read().splitlines()
        assert lines[0] == "run_id,variant,l,k1,k2,lambda,auc,logloss"
        assert lines[1].startswith("r1,full,4,2,3,0.1,")

    def test_default_baseline_is_self(self):
        report = make_report([0.2, 0.8], [0, 1], config_hash="x", seconds=0.0)
        assert report.relaimpr_pct == pytest.approx(0.0)

    def test_csv_appends(self, tmp_path):
        report = make_report([0.2, 0.8], [0, 1], config_hash="x", seconds=0.0)
        emit_report(report, str(tmp_path / "a.json"))
        emit_report(report, str(tmp_path / "b.json"))
        lines = open(tmp_path / "summary.csv").read().splitlines()
        assert len(lines) == 3  # header + one row per emit
