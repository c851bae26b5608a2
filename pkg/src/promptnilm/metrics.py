"""Classification metrics for state detection, plus output-error rates.

Scores follow the standard confusion-count forms; the "overall" score pools
counts across appliances before scoring (micro-averaging). Degenerate 0/0
ratios score 0 and are flagged rather than hidden.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyRun, LengthMismatch
from .normalizer import NormalizationOutcome, OUTCOME_MALFORMED, OUTCOME_MISALIGNED
from .preprocess import StateSeries


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn,
            self.fp + other.fp, self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass(frozen=True)
class ErrorRates:
    misaligned_rate: float
    malformed_rate: float


@dataclass
class ScoreReport:
    per_appliance: dict[str, Scores]
    overall: Scores
    rates: ErrorRates


def _states(series) -> np.ndarray:
    arr = np.asarray(getattr(series, "states", series))
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("state values must be 0 or 1")
    return arr


def confusion(pred: StateSeries, truth: StateSeries) -> ConfusionCounts:
    """Slotwise confusion counts between a prediction and the ground truth."""
    p = _states(pred)
    t = _states(truth)
    if p.shape != t.shape:
        raise LengthMismatch(f"prediction has {p.size} slots, truth has {t.size}")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def scores(c: ConfusionCounts) -> Scores:
    """Precision, recall, and F1 from counts; 0/0 ratios score 0, flagged."""
    p_den = c.tp + c.fp
    r_den = c.tp + c.fn
    f_den = 2 * c.tp + c.fp + c.fn
    return Scores(
        precision=c.tp / p_den if p_den else 0.0,
        recall=c.tp / r_den if r_den else 0.0,
        f1=2 * c.tp / f_den if f_den else 0.0,
        degenerate=not (p_den and r_den and f_den),
    )


def overall(counts: dict[str, ConfusionCounts]) -> Scores:
    """Micro-averaged scores: pool counts across appliances, then score."""
    if not counts:
        raise ValueError("counts must be non-empty")
    pooled = ConfusionCounts()
    for c in counts.values():
        pooled = pooled + c
    return scores(pooled)


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0)."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def error_rates(outcomes: list[NormalizationOutcome]) -> ErrorRates:
    """Fractions of misaligned and malformed windows over a run."""
    if not outcomes:
        raise EmptyRun("no windows were processed")
    n = len(outcomes)
    return ErrorRates(
        misaligned_rate=sum(o.kind == OUTCOME_MISALIGNED for o in outcomes) / n,
        malformed_rate=sum(o.kind == OUTCOME_MALFORMED for o in outcomes) / n,
    )


def build_report(
    counts: dict[str, ConfusionCounts],
    outcomes: list[NormalizationOutcome],
) -> ScoreReport:
    return ScoreReport(
        per_appliance={name: scores(c) for name, c in counts.items()},
        overall=overall(counts),
        rates=error_rates(outcomes),
    )


def report_rows(report: ScoreReport) -> list[dict[str, str]]:
    """Flatten a report into CSV rows: one per appliance plus an overall row."""
    rows = []
    for name, s in report.per_appliance.items():
        rows.append({
            "appliance": name,
            "precision": f"{s.precision:.4f}",
            "recall": f"{s.recall:.4f}",
            "f1": f"{s.f1:.4f}",
            "degenerate": str(s.degenerate).lower(),
            "misaligned_rate": "",
            "malformed_rate": "",
        })
    o = report.overall
    rows.append({
        "appliance": "overall",
        "precision": f"{o.precision:.4f}",
        "recall": f"{o.recall:.4f}",
        "f1": f"{o.f1:.4f}",
        "degenerate": str(o.degenerate).lower(),
        "misaligned_rate": f"{report.rates.misaligned_rate:.4f}",
        "malformed_rate": f"{report.rates.malformed_rate:.4f}",
    })
    return rows


def write_report_csv(path: str | Path, report: ScoreReport) -> None:
    rows = report_rows(report)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "per_appliance": {
            name: {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "degenerate": s.degenerate,
            }
            for name, s in report.per_appliance.items()
        },
        "overall": {
            "precision": report.overall.precision,
            "recall": report.overall.recall,
            "f1": report.overall.f1,
            "degenerate": report.overall.degenerate,
        },
        "error_rates": {
            "misaligned_rate": report.rates.misaligned_rate,
            "malformed_rate": report.rates.malformed_rate,
        },
    }


def write_report_json(path: str | Path, report: ScoreReport) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
