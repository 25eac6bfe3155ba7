"""Deterministic synthetic corpora for tests, fixtures and smoke runs.

Real OffensEval-style data cannot ship with the repository, so everything
here is generated: pseudo-languages draw filler words from disjoint
per-language inventories while offensive posts additionally contain marker
words from one lexicon shared across languages. That shared signal is what
lets a jointly trained model transfer to a low-resource language.

Everything is a pure function of its seed.
"""

from __future__ import annotations

import zlib

import numpy as np

from .corpus import LabeledExample, SoftDistribution, Task

# Shared across pseudo-languages; rare letters keep the byte patterns distinct.
OFFENSIVE_MARKERS = ("zork", "vexq", "grubz", "skarn", "blurgh", "qozz")

_CONSONANTS = "bcdfghklmnprstvw"
_VOWELS = "aeiou"


def _make_word(rng: np.random.Generator, syllables: int) -> str:
    parts = []
    for _ in range(syllables):
        parts.append(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS)))
    return "".join(parts)


def pseudo_language_lexicon(language: str, seed: int, size: int = 24) -> list[str]:
    """Filler-word inventory for one pseudo-language."""
    rng = np.random.default_rng(seed)
    words = []
    while len(words) < size:
        word = language[:2] + _make_word(rng, int(rng.integers(1, 3)))
        if word not in words:
            words.append(word)
    return words


def generate_binary_dataset(
    language: str,
    n: int,
    seed: int,
    offensive_rate: float = 0.4,
    flip_rate: float = 0.0,
    length: tuple[int, int] = (4, 9),
    id_prefix: str | None = None,
) -> list[LabeledExample]:
    """Task-A examples: offensive posts contain 1-2 shared marker words.

    ``flip_rate`` corrupts the stored hard label (not the text) to simulate
    annotation noise; the true class stays recoverable from the markers.
    """
    rng = np.random.default_rng(seed)
    lexicon = pseudo_language_lexicon(language, seed=zlib.crc32(language.encode()))
    examples = []
    prefix = id_prefix if id_prefix is not None else language
    for i in range(n):
        n_words = int(rng.integers(length[0], length[1]))
        words = [lexicon[int(rng.integers(0, len(lexicon)))] for _ in range(n_words)]
        offensive = bool(rng.random() < offensive_rate)
        if offensive:
            n_markers = int(rng.integers(1, 3))
            for _ in range(n_markers):
                marker = OFFENSIVE_MARKERS[int(rng.integers(0, len(OFFENSIVE_MARKERS)))]
                pos = int(rng.integers(0, len(words) + 1))
                words.insert(pos, marker)
        true_label = "OFF" if offensive else "NOT"
        label = true_label
        if flip_rate > 0.0 and rng.random() < flip_rate:
            label = "NOT" if label == "OFF" else "OFF"
        examples.append(
            LabeledExample(
                id=f"{prefix}{i:04d}",
                text=" ".join(words),
                language=language,
                hard={Task.A: label},
                meta={"true_label": true_label},
            )
        )
    return examples


def attach_calibrated_soft(
    examples: list[LabeledExample], task: Task, confidence: float
) -> list[LabeledExample]:
    """Soft labels putting ``confidence`` on the true class (noise-free signal).

    Uses the generator's ``true_label`` metadata, mimicking a well calibrated
    teacher that knows the label-noise level but not the flipped outcomes.
    """
    out = []
    for ex in examples:
        true = ex.meta.get("true_label", ex.hard.get(task))
        probs = [0.0] * task.num_classes
        true_idx = task.label_index(true)
        for c in range(task.num_classes):
            probs[c] = confidence if c == true_idx else (1.0 - confidence) / (task.num_classes - 1)
        out.append(
            LabeledExample(
                id=ex.id, text=ex.text, language=ex.language,
                hard=dict(ex.hard),
                soft={**ex.soft, task: SoftDistribution(task, tuple(probs))},
                meta=dict(ex.meta),
            )
        )
    return out


def corpus_texts(examples: list[LabeledExample]) -> list[str]:
    return [ex.text for ex in examples]


def write_olid_tsv(path, examples: list[LabeledExample], tasks=(Task.A,)) -> None:
    """Write examples in the gold TSV layout (for fixtures and CLI smoke runs)."""
    columns = ["id", "tweet"] + [f"subtask_{t.value.lower()}" for t in (Task.A, Task.B, Task.C)[: len(tasks)]]
    lines = ["\t".join(columns)]
    for ex in examples:
        row = [ex.id, ex.text]
        for t in (Task.A, Task.B, Task.C)[: len(tasks)]:
            row.append(ex.hard.get(t, "NULL"))
        lines.append("\t".join(row))
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_FIXED_SENTENCES = (
    "kora mesi tuva len",
    "bilo rana suk demo",
    "fento gul pira nos",
    "weld tahi brum seko",
)


def repetitive_mlm_corpus(seed: int, n: int = 60) -> list[str]:
    """Repetitions of a few fixed sentences of mutually distinct words.

    Each word occurs in exactly one sentence at one position, so any masked
    token is fully determined by any visible neighbor.
    """
    rng = np.random.default_rng(seed)
    return [
        _FIXED_SENTENCES[int(rng.integers(0, len(_FIXED_SENTENCES)))] for _ in range(n)
    ]
