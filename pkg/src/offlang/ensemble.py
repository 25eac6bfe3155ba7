"""k-fold cross-validation training and probability-averaging prediction.

Member i is fine-tuned on everything except fold i (seeded with
``base seed + i``) and validated on fold i. At prediction time member
probability vectors are averaged unweighted, summing in ascending fold
order so member list order can never change the result; the label is the
argmax with ties going to the lowest schema index.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import DatasetSplit, LabeledExample, SoftDistribution, Task, stratified_kfold
from .encoder import ModelParameters, classify
from .evaluation import MetricsReport, confusion, report
from .tokenizer import Vocabulary
from .training import TrainConfig, encode_examples, finetune


@dataclass
class CvMember:
    fold: int
    params: ModelParameters
    validation: MetricsReport


@dataclass
class CvEnsemble:
    members: list[CvMember]
    split: DatasetSplit

    def __post_init__(self) -> None:
        if len(self.members) != self.split.k:
            raise ValueError(
                f"{len(self.members)} members for a {self.split.k}-fold split"
            )


def train_cv_ensemble(
    examples: list[LabeledExample],
    task: Task,
    k: int,
    init: ModelParameters,
    vocab: Vocabulary,
    train_config: TrainConfig,
    loss_mode: str = "hard",
    jobs: int = 1,
) -> CvEnsemble:
    """Train k held-one-fold-out members; fold trainings are independent.

    With ``jobs > 1`` folds train concurrently; results are identical either
    way because each member depends only on its own fold and seed.
    """
    split = stratified_kfold(examples, task, k, train_config.seed)

    def train_fold(fold: int) -> CvMember:
        train_set = [ex for ex in examples if split.assignments[ex.id] != fold]
        val_set = [ex for ex in examples if split.assignments[ex.id] == fold]
        fold_config = replace(train_config, seed=train_config.seed + fold)
        params, _ = finetune(
            init, train_set, task, vocab, fold_config, loss_mode=loss_mode
        )
        val_batch = encode_examples(val_set, vocab, params.config.max_len)
        probs = classify(params, val_batch, task)
        preds = [task.labels[i] for i in probs.argmax(axis=1)]
        golds = [ex.hard[task] for ex in val_set]
        return CvMember(fold=fold, params=params, validation=report(confusion(golds, preds, task)))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(train_fold, range(k)))
    else:
        members = [train_fold(fold) for fold in range(k)]
    return CvEnsemble(members=members, split=split)


def predict_ensemble(
    ensemble: CvEnsemble | list[ModelParameters],
    examples: list[LabeledExample],
    task: Task,
    vocab: Vocabulary,
) -> list[tuple[SoftDistribution, str]]:
    """Average member probabilities per example; returns (distribution, label).

    Accepts either a trained CvEnsemble or a bare parameter list (e.g.
    checkpoints reloaded from disk). All members must share an architecture.
    """
    if isinstance(ensemble, CvEnsemble):
        ordered = sorted(ensemble.members, key=lambda m: m.fold)
        member_params = [m.params for m in ordered]
    else:
        member_params = list(ensemble)
    if not member_params:
        raise ValueError("cannot predict with an empty ensemble")
    arch = member_params[0].config
    for p in member_params[1:]:
        if p.config != arch:
            raise ValueError(
                f"ensemble members disagree on architecture: {p.config} vs {arch}"
            )

    batch = encode_examples(examples, vocab, arch.max_len)
    member_probs = [classify(params, batch, task).astype(np.float64) for params in member_params]
    return _average_distributions(member_probs, task)


def _average_distributions(
    member_probs: list[np.ndarray], task: Task
) -> list[tuple[SoftDistribution, str]]:
    total = np.zeros_like(member_probs[0], dtype=np.float64)
    for probs in member_probs:
        total += probs
    mean = total / len(member_probs)

    results = []
    for row in mean:
        # renormalize away float accumulation drift before the invariant check
        dist = SoftDistribution(task, tuple(float(x) for x in row / row.sum()))
        label = task.labels[int(np.argmax(row))]
        results.append((dist, label))
    return results


# ---------------------------------------------------------------------------
# Prediction files


def write_predictions(
    path: str | Path,
    ids: list[str],
    results: list[tuple[SoftDistribution, str]],
    fmt: str = "tsv",
) -> None:
    """``tsv``: id, label and probability columns; ``csv``: bare id,label rows."""
    if len(ids) != len(results):
        raise ValueError(f"{len(ids)} ids vs {len(results)} predictions")
    if fmt == "tsv":
        task = results[0][0].task if results else Task.A
        lines = ["\t".join(["id", "label"] + [f"p_{lab}" for lab in task.labels])]
        for ex_id, (dist, label) in zip(ids, results):
            lines.append(
                "\t".join([ex_id, label] + [f"{p:.12g}" for p in dist.probs])
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "csv":
        lines = [f"{ex_id},{label}" for ex_id, (_, label) in zip(ids, results)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown prediction format {fmt!r}")


def read_predictions(path: str | Path) -> dict[str, str]:
    """Read a TSV prediction file back into an id -> label map."""
    from .corpus import read_tsv

    header, rows = read_tsv(path)
    if header[:2] != ["id", "label"]:
        raise ValueError(f"{path}: expected 'id\\tlabel...' header, got {header}")
    return {row[0]: row[1] for row in rows}
