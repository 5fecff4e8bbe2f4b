"""Confusion matrices, accuracy / macro precision / recall / F1, and
multi-run aggregation (mean, population std, min, max, in percent).

Macro averaging is used throughout: with class-balanced test sets it
coincides with the weighted average, which is why accuracy, precision and
recall track each other closely on balanced corpora.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pipeline import CLASS_CODES


def confusion(y_true, y_pred, n_classes: int = len(CLASS_CODES)) -> np.ndarray:
    """counts[i, j] = #{true class i predicted as j}. Empty inputs give zeros."""
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"label vectors differ in length: {y_true.shape} vs {y_pred.shape}")
    for name, v in (("true", y_true), ("predicted", y_pred)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"unknown {name} label outside 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def metrics_from_confusion(cm: np.ndarray) -> dict[str, float]:
    """Accuracy plus macro-averaged one-vs-rest precision, recall and F1, as
    fractions in [0, 1]. Classes with a zero denominator contribute 0."""
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix (no evaluated samples)")
    tp = np.diag(cm)
    col = cm.sum(axis=0)  # tp + fp
    row = cm.sum(axis=1)  # tp + fn
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)
    return {
        "accuracy": float(tp.sum() / total),
        "precision": float(precision.mean()),
        "recall": float(recall.mean()),
        "f1": float(f1.mean()),
    }


METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass
class MetricSummary:
    mean: float
    std: float
    min: float
    max: float


@dataclass
class MetricsReport:
    """Per-metric summary over runs, in percent."""

    accuracy: MetricSummary
    precision: MetricSummary
    recall: MetricSummary
    f1: MetricSummary

    def __getitem__(self, name: str) -> MetricSummary:
        return getattr(self, name)


def aggregate_runs(per_run: list[dict[str, float]]) -> MetricsReport:
    """Aggregates per-run metric dicts (percent values, as produced by the
    experiment runner). Std is the population standard deviation."""
    if not per_run:
        raise ValueError("aggregate_runs requires at least one run")
    summaries = {}
    for name in METRIC_NAMES:
        vals = np.array([run[name] for run in per_run], dtype=np.float64)
        summaries[name] = MetricSummary(
            mean=float(vals.mean()),
            std=float(vals.std(ddof=0)),
            min=float(vals.min()),
            max=float(vals.max()),
        )
    return MetricsReport(**summaries)


def format_mean_std(s: MetricSummary) -> str:
    return f"{s.mean:.2f} ± {s.std:.2f}"


def report_markdown(report: MetricsReport, title: str, n_runs: int) -> str:
    lines = [
        f"# {title}",
        "",
        f"Test metrics over {n_runs} run(s), percent (mean ± population std).",
        "",
        "| Metric | Mean ± Std | Min | Max |",
        "|---|---|---|---|",
    ]
    for name in METRIC_NAMES:
        s = report[name]
        lines.append(f"| {name} | {format_mean_std(s)} | {s.min:.2f} | {s.max:.2f} |")
    lines.append("")
    return "\n".join(lines)


def report_csv(report: MetricsReport) -> str:
    lines = ["metric,mean,std,min,max"]
    for name in METRIC_NAMES:
        s = report[name]
        lines.append(f"{name},{s.mean:.6f},{s.std:.6f},{s.min:.6f},{s.max:.6f}")
    return "\n".join(lines) + "\n"


def confusion_csv(cm: np.ndarray, codes=CLASS_CODES) -> str:
    """8x8 integer grid; header row/column carry the class codes."""
    cm = np.asarray(cm)
    lines = ["true\\pred," + ",".join(codes)]
    for i, code in enumerate(codes):
        lines.append(code + "," + ",".join(str(int(v)) for v in cm[i]))
    return "\n".join(lines) + "\n"


def parse_confusion_csv(text: str) -> np.ndarray:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    return np.array([[int(v) for v in row[1:]] for row in rows], dtype=np.int64)
