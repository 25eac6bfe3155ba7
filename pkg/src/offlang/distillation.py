"""Teacher ensembles, weighted soft labels and student training.

A teacher is anything that can produce a probability distribution over a
task's labels for an example: a trained checkpoint, a stored prediction
file, or a plain callable. The ensemble attaches the weighted average

    Q(example) = sum_i w_i * P_i(example)

as the example's soft label, and the student is then fine-tuned on those
distributions with the soft cross-entropy loss. Teachers are summed in
sorted-name order so reordering the list cannot change Q even at the bit
level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .corpus import LabeledExample, SoftDistribution, Task, read_tsv
from .encoder import ModelParameters, classify, load_checkpoint
from .tokenizer import Vocabulary
from .training import EpochRecord, TrainConfig, encode_examples, finetune

logger = logging.getLogger(__name__)


class Teacher(Protocol):
    name: str

    def soft_labels(self, examples: list[LabeledExample], task: Task) -> list[SoftDistribution | None]:
        """One distribution per example, None where the teacher has no answer."""


@dataclass
class CallableTeacher:
    """Wraps a plain function example -> SoftDistribution | None (tests, oracles)."""

    name: str
    fn: Callable[[LabeledExample, Task], SoftDistribution | None]

    def soft_labels(self, examples, task):
        return [self.fn(ex, task) for ex in examples]


@dataclass
class ModelTeacher:
    """A trained checkpoint acting as a teacher; covers every example."""

    name: str
    params: ModelParameters
    vocab: Vocabulary

    @classmethod
    def from_checkpoint(cls, name: str, path: str | Path, vocab: Vocabulary) -> "ModelTeacher":
        return cls(name=name, params=load_checkpoint(path), vocab=vocab)

    def soft_labels(self, examples, task):
        batch = encode_examples(examples, self.vocab, self.params.config.max_len)
        probs = classify(self.params, batch, task)
        return [SoftDistribution(task, tuple(float(x) for x in row)) for row in probs]


@dataclass
class FileTeacher:
    """Predictions stored as a soft-label TSV, looked up by example id."""

    name: str
    by_id: dict[str, dict[Task, SoftDistribution]]

    @classmethod
    def from_file(cls, name: str, path: str | Path, task: Task) -> "FileTeacher":
        return cls(name=name, by_id=read_soft_labels(path, task))

    def soft_labels(self, examples, task):
        return [self.by_id.get(ex.id, {}).get(task) for ex in examples]


@dataclass
class TeacherEnsemble:
    """Teachers plus normalized non-negative weights, keyed by teacher name."""

    teachers: list[Teacher]
    weights: np.ndarray

    def __init__(self, teachers: list[Teacher], weights: list[float] | None = None):
        if not teachers:
            raise ValueError("an ensemble needs at least one teacher")
        names = [t.name for t in teachers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate teacher names: {names}")
        if weights is None:
            weights = [1.0] * len(teachers)
        if len(weights) != len(teachers):
            raise ValueError(f"{len(weights)} weights for {len(teachers)} teachers")
        if any(w < 0 for w in weights):
            raise ValueError("teacher weights must be non-negative")
        # Store in sorted-name order so the weighted sum has a fixed float
        # summation order regardless of how callers listed the teachers.
        order = sorted(range(len(teachers)), key=lambda i: teachers[i].name)
        self.teachers = [teachers[i] for i in order]
        raw = np.array([weights[i] for i in order], dtype=np.float64)
        total = raw.sum()
        if total == 0:
            raise ValueError("teacher weights sum to zero")
        if abs(total - 1.0) > 1e-9:
            logger.info("normalizing teacher weights %s by %s", raw.tolist(), total)
        self.weights = raw / total


def ensemble_soft_labels(
    ensemble: TeacherEnsemble, examples: list[LabeledExample], task: Task
) -> list[LabeledExample]:
    """Attach Q = weighted teacher average as each example's soft label.

    Every teacher must cover every example; a gap raises naming the teacher
    and the example id.
    """
    per_teacher = []
    for teacher in ensemble.teachers:
        dists = teacher.soft_labels(examples, task)
        for ex, dist in zip(examples, dists):
            if dist is None:
                raise ValueError(
                    f"teacher {teacher.name!r} has no prediction for example {ex.id!r}"
                )
            if dist.task is not task:
                raise ValueError(
                    f"teacher {teacher.name!r} predicted task {dist.task.value} "
                    f"for a task-{task.value} ensemble"
                )
        per_teacher.append(np.stack([d.as_array() for d in dists]))

    q = np.zeros((len(examples), task.num_classes), dtype=np.float64)
    for weight, probs in zip(ensemble.weights, per_teacher):
        q += weight * probs

    out = []
    for ex, row in zip(examples, q):
        soft = dict(ex.soft)
        soft[task] = SoftDistribution(task, tuple(float(x) for x in row))
        out.append(
            LabeledExample(
                id=ex.id, text=ex.text, language=ex.language,
                hard=dict(ex.hard), soft=soft, meta=dict(ex.meta),
            )
        )
    return out


def distill_student(
    student_init: ModelParameters,
    examples: list[LabeledExample],
    task: Task,
    vocab: Vocabulary,
    train_config: TrainConfig,
) -> tuple[ModelParameters, list[EpochRecord]]:
    """Train a student on attached soft labels; history tracks mean KL(Q||P).

    The per-epoch KL is measured on the full training set with the epoch's
    final parameters, so a shrinking sequence means the student is actually
    closing in on the teacher distribution.
    """
    missing = [ex.id for ex in examples if task not in ex.soft]
    if missing:
        raise ValueError(f"examples missing task-{task.value} soft labels: {missing}")
    q_matrix = np.stack([ex.soft[task].as_array() for ex in examples])
    batch = encode_examples(examples, vocab, student_init.config.max_len)

    def track_kl(params: ModelParameters, record: EpochRecord) -> None:
        p = classify(params, batch, task)
        record.extra["train_kl"] = mean_kl(q_matrix, p)

    return finetune(
        student_init, examples, task, vocab, train_config,
        loss_mode="soft", on_epoch_end=track_kl,
    )


def mean_kl(q: np.ndarray, p: np.ndarray) -> float:
    """Mean over rows of KL(Q || P) in nats; Q(c)=0 terms contribute 0."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    ratio = np.log(np.maximum(q, 1e-12)) - np.log(np.maximum(p, 1e-12))
    terms = np.where(q == 0.0, 0.0, q * ratio)
    return float(terms.sum(axis=-1).mean())


# ---------------------------------------------------------------------------
# Soft-label files: id column then one probability column per label.


def write_soft_labels(
    path: str | Path, examples: list[LabeledExample], task: Task
) -> None:
    lines = ["\t".join(["id"] + list(task.labels))]
    for ex in examples:
        if task not in ex.soft:
            raise ValueError(f"example {ex.id!r} has no task-{task.value} soft label")
        probs = ex.soft[task].probs
        lines.append("\t".join([ex.id] + [f"{p:.12g}" for p in probs]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_soft_labels(path: str | Path, task: Task) -> dict[str, dict[Task, SoftDistribution]]:
    header, rows = read_tsv(path)
    if tuple(header) != ("id",) + task.labels:
        raise ValueError(
            f"{path}: expected header ['id', {', '.join(task.labels)}], got {header}"
        )
    out: dict[str, dict[Task, SoftDistribution]] = {}
    for row in rows:
        if len(row) != 1 + task.num_classes:
            raise ValueError(f"{path}: bad row {row}")
        out[row[0]] = {task: SoftDistribution(task, tuple(float(x) for x in row[1:]))}
    return out
