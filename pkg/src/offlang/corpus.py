"""Dataset ingestion for hierarchically annotated offensive-language corpora.

Handles two on-disk shapes: gold TSV files with hard labels for the three
sub-tasks (A: OFF/NOT, B: TIN/UNT, C: IND/GRP/OTH), and distant-supervision
TSV files carrying per-example confidence scores that get converted into
soft label distributions. Also provides multilingual concatenation,
stratified k-fold splitting, and per-language label statistics.

All readers expect UTF-8, tab-separated files with a single header row and
the literal string ``NULL`` (or an empty field) for absent labels.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from pathlib import Path

import numpy as np


class ParseError(Exception):
    """A data file could not be parsed; message carries the 1-based line."""


class ValidationError(Exception):
    """Parsed data violates the label schema."""


class Task(Enum):
    """The three classification sub-tasks with their fixed, ordered label sets."""

    A = "A"
    B = "B"
    C = "C"

    @property
    def labels(self) -> tuple[str, ...]:
        return _TASK_LABELS[self]

    @property
    def num_classes(self) -> int:
        return len(_TASK_LABELS[self])

    def label_index(self, label: str) -> int:
        try:
            return _TASK_LABELS[self].index(label)
        except ValueError:
            raise ValueError(f"unknown label {label!r} for task {self.value}") from None


_TASK_LABELS: dict[Task, tuple[str, ...]] = {
    Task.A: ("OFF", "NOT"),
    Task.B: ("TIN", "UNT"),
    Task.C: ("IND", "GRP", "OTH"),
}

_URL_RE = re.compile(r"https?://\S+|www\.\S+")
_MENTION_RE = re.compile(r"@\w+")


def normalize_text(text: str) -> str:
    """Replace URLs with ``URL`` and user mentions with ``@USER``; keep case."""
    text = _URL_RE.sub("URL", text)
    return _MENTION_RE.sub("@USER", text)


@dataclass(frozen=True)
class SoftDistribution:
    """A probability vector over one task's ordered label set."""

    task: Task
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != self.task.num_classes:
            raise ValueError(
                f"task {self.task.value} needs {self.task.num_classes} probabilities, "
                f"got {len(self.probs)}"
            )
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValueError(f"probabilities outside [0,1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(self.probs)!r}, not 1")

    def as_array(self, dtype=np.float64) -> np.ndarray:
        return np.asarray(self.probs, dtype=dtype)

    @property
    def argmax_label(self) -> str:
        return self.task.labels[int(np.argmax(self.probs))]


@dataclass
class LabeledExample:
    """One post with hard labels and/or soft distributions per sub-task."""

    id: str
    text: str
    language: str
    hard: dict[Task, str] = field(default_factory=dict)
    soft: dict[Task, SoftDistribution] = field(default_factory=dict)
    meta: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetSplit:
    """Assignment of example ids to folds 0..k-1."""

    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [ex_id for ex_id, f in self.assignments.items() if f == fold]


@dataclass
class CorpusStats:
    """Per-language, per-task label counts plus per-language totals."""

    counts: dict[str, dict[Task, dict[str, int]]]
    totals: dict[str, int]

    @property
    def grand_total(self) -> int:
        return sum(self.totals.values())

    def count(self, language: str, task: Task, label: str) -> int:
        return self.counts.get(language, {}).get(task, {}).get(label, 0)


def read_tsv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a TSV file; returns (header fields, data rows as string lists)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file, expected a header row")
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:]]
    return header, rows


def _label_or_none(field_value: str, task: Task, path: Path, lineno: int) -> str | None:
    if field_value in ("NULL", ""):
        return None
    if field_value not in task.labels:
        raise ParseError(
            f"{path}:{lineno}: unknown task-{task.value} label {field_value!r}"
        )
    return field_value


OLID_COLUMNS = ("id", "tweet", "subtask_a", "subtask_b", "subtask_c")


def parse_olid(tsv_path: str | Path, language: str) -> list[LabeledExample]:
    """Parse a gold-annotated TSV with columns id/tweet/subtask_a[/b/c].

    Label columns beyond ``subtask_a`` are optional. Raises ParseError with a
    1-based line number on malformed rows, and ValidationError if any example
    breaks the A>B>C label hierarchy.
    """
    path = Path(tsv_path)
    header, rows = read_tsv(path)
    if len(header) < 3 or tuple(header) != OLID_COLUMNS[: len(header)]:
        raise ParseError(
            f"{path}:1: expected header starting 'id\\ttweet\\tsubtask_a', got {header}"
        )
    n_cols = len(header)
    tasks_present = [Task.A, Task.B, Task.C][: n_cols - 2]

    examples = []
    for i, row in enumerate(rows):
        lineno = i + 2  # 1-based, after the header
        if len(row) != n_cols:
            raise ParseError(f"{path}:{lineno}: expected {n_cols} columns, got {len(row)}")
        hard: dict[Task, str] = {}
        for j, task in enumerate(tasks_present):
            label = _label_or_none(row[2 + j], task, path, lineno)
            if label is not None:
                hard[task] = label
        examples.append(
            LabeledExample(id=row[0], text=normalize_text(row[1]), language=language, hard=hard)
        )

    bad = [(ex.id, v) for ex in examples for v in validate_hierarchy(ex)]
    if bad:
        ids = sorted({ex_id for ex_id, _ in bad})
        raise ValidationError(
            f"{path}: hierarchy violations in ids {ids}: "
            + "; ".join(f"{ex_id}: {v}" for ex_id, v in bad)
        )
    return examples


SOLID_SCALAR_COLUMNS = ("id", "text", "average", "std")
SOLID_C_COLUMNS = ("id", "text", "ind", "grp", "oth")


def parse_solid_distant(
    tsv_path: str | Path, task: Task, language: str = "en"
) -> list[LabeledExample]:
    """Parse a distant-supervision TSV into soft-labeled examples.

    Tasks A and B use columns id/text/average/std where ``average`` is the
    confidence of the first schema label (OFF resp. TIN); the std column is
    kept as metadata only. Task C uses one confidence column per label.
    """
    path = Path(tsv_path)
    header, rows = read_tsv(path)
    expected = SOLID_C_COLUMNS if task is Task.C else SOLID_SCALAR_COLUMNS
    if tuple(header) != expected:
        raise ParseError(
            f"{path}:1: expected header {list(expected)} for task {task.value}, got {header}"
        )

    examples = []
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(expected):
            raise ParseError(
                f"{path}:{lineno}: expected {len(expected)} columns, got {len(row)}"
            )
        try:
            confs = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: non-numeric confidence: {exc}") from None
        meta: dict[str, str] = {}
        if task is Task.C:
            try:
                soft = confidence_to_soft(confs, task)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
        else:
            avg, std = confs
            if not 0.0 <= avg <= 1.0:
                raise ParseError(f"{path}:{lineno}: confidence {avg} outside [0,1]")
            soft = confidence_to_soft(avg, task)
            meta["std"] = row[3]
        examples.append(
            LabeledExample(
                id=row[0],
                text=normalize_text(row[1]),
                language=language,
                soft={task: soft},
                meta=meta,
            )
        )
    return examples


def confidence_to_soft(conf: float | list[float], task: Task) -> SoftDistribution:
    """Turn raw annotator-model confidences into a soft distribution.

    For the binary tasks the scalar is the probability of the first schema
    label and its complement fills the second. Task C takes one confidence
    per label, renormalized to sum 1.
    """
    if task is Task.C:
        if isinstance(conf, float):
            raise ValueError("task C takes one confidence per label, got a scalar")
        confs = [float(c) for c in conf]
        if len(confs) != task.num_classes:
            raise ValueError(f"task C needs {task.num_classes} confidences, got {len(confs)}")
        if any(c < 0.0 or c > 1.0 for c in confs):
            raise ValueError(f"confidences outside [0,1]: {confs}")
        total = sum(confs)
        if total == 0.0:
            raise ValueError("all-zero confidence vector has no defined distribution")
        return SoftDistribution(task, tuple(c / total for c in confs))
    if not isinstance(conf, (int, float)):
        raise ValueError(f"task {task.value} takes a scalar confidence")
    conf = float(conf)
    if not 0.0 <= conf <= 1.0:
        raise ValueError(f"confidence {conf} outside [0,1]")
    # Complement in decimal space so a literal like 0.8 pairs with the float
    # 0.2 rather than 1.0-0.8's 0.19999...; the pair still sums to exactly 1.
    complement = float(Decimal(1) - Decimal(repr(conf)))
    return SoftDistribution(task, (conf, complement))


def validate_hierarchy(example: LabeledExample) -> list[str]:
    """Return violations of the A>B>C hard-label hierarchy (empty if valid)."""
    violations = []
    a = example.hard.get(Task.A)
    b = example.hard.get(Task.B)
    c = example.hard.get(Task.C)
    if b is not None and a != "OFF":
        got = f"A={a}" if a is not None else "no A label"
        violations.append(f"B label {b} requires A=OFF, {got}")
    if c is not None and b != "TIN":
        got = f"B={b}" if b is not None else "no B label"
        violations.append(f"C label {c} requires B=TIN, {got}")
    return violations


def mix_multilingual(
    datasets: list[tuple[str, list[LabeledExample]]], strategy: str = "concat"
) -> list[LabeledExample]:
    """Concatenate per-language datasets, namespacing ids as ``language:id``.

    Order is deterministic: dataset order, then file order within each.
    """
    if strategy != "concat":
        raise ValueError(f"unknown mixing strategy {strategy!r}")
    mixed: list[LabeledExample] = []
    seen: set[str] = set()
    for language, examples in datasets:
        for ex in examples:
            new_id = f"{language}:{ex.id}"
            if new_id in seen:
                raise ValidationError(f"duplicate namespaced id {new_id!r}")
            seen.add(new_id)
            mixed.append(
                LabeledExample(
                    id=new_id,
                    text=ex.text,
                    language=language,
                    hard=dict(ex.hard),
                    soft=dict(ex.soft),
                    meta=dict(ex.meta),
                )
            )
    return mixed


def stratified_kfold(
    examples: list[LabeledExample], task: Task, k: int, seed: int
) -> DatasetSplit:
    """Split examples into k folds, stratified by (language, task label).

    Per-class counts across folds differ by at most one, and fold sizes stay
    balanced by carrying the round-robin offset across strata. Deterministic
    for a fixed seed.
    """
    n = len(examples)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available examples")
    missing = [ex.id for ex in examples if task not in ex.hard]
    if missing:
        raise ValidationError(
            f"examples missing a hard task-{task.value} label: {missing}"
        )

    strata: dict[tuple[str, int], list[str]] = defaultdict(list)
    for ex in examples:
        strata[(ex.language, task.label_index(ex.hard[task]))].append(ex.id)

    rng = np.random.default_rng(seed)
    assignments: dict[str, int] = {}
    offset = 0
    for key in sorted(strata):
        ids = strata[key]
        order = rng.permutation(len(ids))
        for pos, idx in enumerate(order):
            assignments[ids[idx]] = (offset + pos) % k
        offset = (offset + len(ids)) % k
    return DatasetSplit(k=k, assignments=assignments)


def stats(examples: list[LabeledExample]) -> CorpusStats:
    """Count hard labels per language and task; totals count examples."""
    counts: dict[str, dict[Task, dict[str, int]]] = {}
    totals: Counter[str] = Counter()
    for ex in examples:
        totals[ex.language] += 1
        per_lang = counts.setdefault(ex.language, {})
        for task, label in ex.hard.items():
            per_task = per_lang.setdefault(task, {})
            per_task[label] = per_task.get(label, 0) + 1
    return CorpusStats(counts=counts, totals=dict(totals))


def format_stats(corpus_stats: CorpusStats, task: Task = Task.A) -> str:
    """Render stats as a fixed-width table, one row per language."""
    labels = task.labels
    header = ["Language"] + list(labels) + ["TOTAL"]
    rows = [header]
    for language in sorted(corpus_stats.totals):
        row = [language]
        row += [str(corpus_stats.count(language, task, lab)) for lab in labels]
        row.append(str(corpus_stats.totals[language]))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows
    )
