"""Ranking and likelihood metrics, and machine-readable run reports."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class MetricError(ValueError):
    """Undefined metric for the given inputs."""


def auc(preds, labels) -> float:
    """Probability a random positive outranks a random negative, ties 0.5.

    Computed from average ranks in O(n log n); exactly equal to the
    pairwise-comparison statistic.
    """
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise MetricError("preds and labels must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.shape[0]:
        raise MetricError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative")
    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    ranks = np.empty(p.shape[0], dtype=np.float64)
    i = 0
    while i < p.shape[0]:
        j = i
        while j + 1 < p.shape[0] and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        # Tied block gets the average of ranks i+1 .. j+1.
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rela_impr(auc_model: float, auc_base: float, mode: str = "ratio") -> float:
    """Relative AUC improvement in percent.

    ratio mode divides raw AUCs; centered mode divides AUC-0.5 margins
    (undefined at a random baseline).
    """
    if mode == "ratio":
        if auc_base == 0:
            raise MetricError("ratio mode needs a nonzero baseline AUC")
        return (auc_model / auc_base - 1.0) * 100.0
    if mode == "centered":
        if auc_base == 0.5:
            raise MetricError("centered mode is undefined at baseline AUC 0.5")
        return ((auc_model - 0.5) / (auc_base - 0.5) - 1.0) * 100.0
    raise MetricError(f"unknown mode {mode!r}")


def logloss(preds, labels, eps: float = 1e-12) -> float:
    """Mean negative log-likelihood with probabilities clamped to an eps."""
    p = np.clip(np.asarray(preds, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise MetricError("preds and labels must align")
    return float(-(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean())


@dataclass
class EvalReport:
    """One evaluation summary; the CSV identity fields are not part of the
    JSON schema but feed the sweep summary row."""

    auc: float
    logloss: float
    n: int
    pos_rate: float
    relaimpr_mode: str
    baseline_auc: float
    relaimpr_pct: float
    config_hash: str
    seconds: float
    breakdown: dict = field(default_factory=dict)
    run_id: str = "run"
    variant: str = "full"
    l: int = 0
    k1: int = 0
    k2: int = 0
    lam: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "auc": self.auc,
            "logloss": self.logloss,
            "n": self.n,
            "pos_rate": self.pos_rate,
            "relaimpr": {
                "mode": self.relaimpr_mode,
                "baseline_auc": self.baseline_auc,
                "value_pct": self.relaimpr_pct,
            },
            "config_hash": self.config_hash,
            "seconds": self.seconds,
            "breakdown": self.breakdown,
        }


def make_report(
    preds,
    labels,
    config_hash: str,
    seconds: float,
    baseline_auc: Optional[float] = None,
    mode: str = "ratio",
    **identity,
) -> EvalReport:
    labels = np.asarray(labels)
    a = auc(preds, labels)
    base = a if baseline_auc is None else baseline_auc
    return EvalReport(
        auc=a,
        logloss=logloss(preds, labels),
        n=int(labels.shape[0]),
        pos_rate=float((labels == 1).mean()),
        relaimpr_mode=mode,
        baseline_auc=base,
        relaimpr_pct=rela_impr(a, base, mode),
        config_hash=config_hash,
        seconds=seconds,
        **identity,
    )


CSV_HEADER = "run_id,variant,l,k1,k2,lambda,auc,logloss"


def emit_report(report: EvalReport, path: str) -> str:
    """Write the JSON report and append one row to the sibling summary CSV."""
    out_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    csv_path = os.path.join(out_dir, "summary.csv")
    fresh = not os.path.exists(csv_path)
    with open(csv_path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(CSV_HEADER + "\n")
        fh.write(
            f"{report.run_id},{report.variant},{report.l},{report.k1},{report.k2},"
            f"{report.lam},{report.auc:.6f},{report.logloss:.6f}\n"
        )
    return csv_path
