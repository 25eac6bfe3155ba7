"""Confusion matrices, per-class precision/recall/F1 and macro-F1.

Macro-F1 (the unweighted mean of per-class F1) is the task metric
throughout. Zero denominators score 0, and classes that occur in neither
the gold labels nor the predictions are left out of the macro average so
an unused class cannot deflate the score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Task


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed (gold, predicted) in schema label order."""

    task: Task
    counts: np.ndarray

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.task is not self.task:
            raise ValueError("cannot merge confusion matrices for different tasks")
        return ConfusionMatrix(self.task, self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int
    included: bool


@dataclass(frozen=True)
class MetricsReport:
    task: Task
    per_class: tuple[ClassMetrics, ...]
    macro_f1: float


def confusion(golds: list[str], preds: list[str], task: Task) -> ConfusionMatrix:
    """Tally a (gold, predicted) count matrix over the task's label set."""
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} gold labels vs {len(preds)} predictions")
    n = task.num_classes
    counts = np.zeros((n, n), dtype=np.int64)
    for gold, pred in zip(golds, preds):
        counts[task.label_index(gold), task.label_index(pred)] += 1
    return ConfusionMatrix(task=task, counts=counts)


def _per_class_metrics(matrix: ConfusionMatrix) -> list[ClassMetrics]:
    counts = matrix.counts
    out = []
    for i, label in enumerate(matrix.task.labels):
        tp = float(counts[i, i])
        gold_total = float(counts[i, :].sum())
        pred_total = float(counts[:, i].sum())
        precision = tp / pred_total if pred_total > 0 else 0.0
        recall = tp / gold_total if gold_total > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        out.append(
            ClassMetrics(
                label=label,
                precision=precision,
                recall=recall,
                f1=f1,
                support=int(gold_total),
                included=gold_total > 0 or pred_total > 0,
            )
        )
    return out


def macro_f1(matrix: ConfusionMatrix) -> float:
    """Unweighted mean F1 over classes seen in gold or predictions."""
    included = [m.f1 for m in _per_class_metrics(matrix) if m.included]
    if not included:
        raise ValueError("no class occurs in golds or predictions; nothing to score")
    return float(np.mean(included))


def report(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 rows plus the macro-F1 summary."""
    per_class = _per_class_metrics(matrix)
    return MetricsReport(
        task=matrix.task,
        per_class=tuple(per_class),
        macro_f1=macro_f1(matrix),
    )


def _fmt(x: float) -> str:
    # 4 decimals, round-half-even (Python's default float formatting).
    return f"{x:.4f}"


def format_report(rep: MetricsReport) -> str:
    """Fixed-width text rendering of one report."""
    rows = [["label", "precision", "recall", "f1", "support"]]
    for m in rep.per_class:
        rows.append([m.label, _fmt(m.precision), _fmt(m.recall), _fmt(m.f1), str(m.support)])
    rows.append(["macro-F1", "", "", _fmt(rep.macro_f1), ""])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows
    )


def compare_runs(reports: list[tuple[str, MetricsReport]], fmt: str = "text") -> str:
    """Render one row per named run plus an Average row; text or tsv."""
    if not reports:
        raise ValueError("compare_runs needs at least one report")
    if fmt not in ("text", "tsv"):
        raise ValueError(f"unknown format {fmt!r}")
    task = reports[0][1].task
    header = ["run", "macro_f1"] + [f"f1_{label}" for label in task.labels]
    rows = []
    for name, rep in reports:
        rows.append([name, rep.macro_f1] + [m.f1 for m in rep.per_class])
    averages = ["Average"] + [
        float(np.mean([row[i] for row in rows])) for i in range(1, len(header))
    ]
    rows.append(averages)

    cells = [header] + [[row[0]] + [_fmt(v) for v in row[1:]] for row in rows]
    if fmt == "tsv":
        return "\n".join("\t".join(row) for row in cells) + "\n"
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells
    )
