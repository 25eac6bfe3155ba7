"""Byte-level BPE tokenizer shared across all languages.

Token ids 0-4 are the special tokens [PAD], [UNK], [CLS], [SEP], [MASK];
ids 5-260 are the 256 single bytes; everything above comes from learned
merges. Working directly on bytes means every script the corpora throw at
us encodes without an unknown-token path ([UNK] is reserved but unreachable).

The vocabulary file format is plain UTF-8 text: a header line
``bpe-v1 <size>`` followed by one merge per line, written as two
space-separated token strings under a printable byte<->character mapping.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

PAD, UNK, CLS, SEP, MASK = 0, 1, 2, 3, 4
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
NUM_SPECIALS = len(SPECIAL_TOKENS)
MIN_VOCAB_SIZE = 256 + NUM_SPECIALS

DEFAULT_VOCAB_SIZE = 2048
DEFAULT_MAX_LEN = 128


class VocabError(Exception):
    """Vocabulary construction or file loading failed."""


@lru_cache(maxsize=1)
def _byte_to_char() -> dict[int, str]:
    # Bijection from bytes onto printable characters so merges can be written
    # as text: printable latin ranges map to themselves, the rest shift above
    # U+0100. Same scheme GPT-2 style byte-level tokenizers use.
    keep = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(0xA1, 0xAC + 1))
        + list(range(0xAE, 0xFF + 1))
    )
    mapping = {}
    shift = 0
    for b in range(256):
        if b in keep:
            mapping[b] = chr(b)
        else:
            mapping[b] = chr(256 + shift)
            shift += 1
    return mapping


def _token_to_text(token: bytes) -> str:
    table = _byte_to_char()
    return "".join(table[b] for b in token)


def _text_to_token(text: str) -> bytes:
    table = {c: b for b, c in _byte_to_char().items()}
    try:
        return bytes(table[c] for c in text)
    except KeyError as exc:
        raise VocabError(f"unmappable character {exc} in vocabulary file") from None


@dataclass(frozen=True)
class Vocabulary:
    """Immutable merge list plus token->id table; safe to share across threads."""

    merges: tuple[tuple[bytes, bytes], ...]
    token_ids: dict[bytes, int]

    @property
    def size(self) -> int:
        return NUM_SPECIALS + len(self.token_ids)

    def id_to_token(self, token_id: int) -> bytes:
        if not NUM_SPECIALS <= token_id < self.size:
            raise ValueError(f"id {token_id} is not a byte/merge token")
        return self._id_table()[token_id]

    def _id_table(self) -> dict[int, bytes]:
        return {i: tok for tok, i in self.token_ids.items()}

    @classmethod
    def from_merges(cls, merges: list[tuple[bytes, bytes]]) -> "Vocabulary":
        token_ids = {bytes([b]): NUM_SPECIALS + b for b in range(256)}
        next_id = NUM_SPECIALS + 256
        for left, right in merges:
            if left not in token_ids or right not in token_ids:
                raise VocabError(f"merge ({left!r}, {right!r}) references unknown tokens")
            merged = left + right
            if merged in token_ids:
                raise VocabError(f"duplicate merge result {merged!r}")
            token_ids[merged] = next_id
            next_id += 1
        return cls(merges=tuple(merges), token_ids=token_ids)

    def save(self, path: str | Path) -> None:
        lines = [f"bpe-v1 {self.size}"]
        for left, right in self.merges:
            lines.append(f"{_token_to_text(left)} {_token_to_text(right)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("bpe-v1 "):
            raise VocabError(f"{path}: missing 'bpe-v1 <size>' header")
        try:
            declared = int(lines[0].split(" ", 1)[1])
        except ValueError:
            raise VocabError(f"{path}: malformed size in header {lines[0]!r}") from None
        merges = []
        for i, line in enumerate(lines[1:], start=2):
            parts = line.split(" ")
            if len(parts) != 2:
                raise VocabError(f"{path}:{i}: expected two space-separated tokens")
            merges.append((_text_to_token(parts[0]), _text_to_token(parts[1])))
        vocab = cls.from_merges(merges)
        if vocab.size != declared:
            raise VocabError(
                f"{path}: header declares {declared} tokens but merges yield {vocab.size}"
            )
        return vocab


@dataclass(frozen=True)
class TokenSequence:
    """Fixed-length encoded text: [CLS] ids... [SEP] [PAD]... plus its mask."""

    ids: np.ndarray
    attention_mask: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.shape[0])


def build_vocab(corpus: list[str], target_size: int = DEFAULT_VOCAB_SIZE) -> Vocabulary:
    """Learn a byte-level BPE vocabulary by greedy most-frequent-pair merging.

    Ties between equally frequent pairs go to the lexicographically smallest
    pair, which makes rebuilding from the same corpus byte-identical. Stops
    early if no adjacent pair repeats.
    """
    if not corpus:
        raise VocabError("cannot build a vocabulary from an empty corpus")
    if target_size < MIN_VOCAB_SIZE:
        raise VocabError(
            f"target_size must be at least {MIN_VOCAB_SIZE} "
            f"(256 bytes + {NUM_SPECIALS} specials), got {target_size}"
        )

    sequences = [[bytes([b]) for b in text.encode("utf-8")] for text in corpus]
    merges: list[tuple[bytes, bytes]] = []
    num_merges = target_size - MIN_VOCAB_SIZE
    for _ in range(num_merges):
        pair_counts: Counter[tuple[bytes, bytes]] = Counter()
        for seq in sequences:
            for j in range(len(seq) - 1):
                pair_counts[(seq[j], seq[j + 1])] += 1
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        sequences = [_apply_merge(seq, best) for seq in sequences]
    return Vocabulary.from_merges(merges)


def _apply_merge(seq: list[bytes], pair: tuple[bytes, bytes]) -> list[bytes]:
    left, right = pair
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == left and seq[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def encode(text: str, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN) -> TokenSequence:
    """Encode text as [CLS] + byte-BPE subwords + [SEP], padded to max_len.

    Truncation always keeps the trailing [SEP]; merges apply in creation
    order, so encoding is a pure function of (text, vocab, max_len).
    """
    if max_len < 2:
        raise ValueError(f"max_len must be at least 2 to fit [CLS] and [SEP], got {max_len}")
    seq = [bytes([b]) for b in text.encode("utf-8")]
    for pair in vocab.merges:
        if len(seq) < 2:
            break
        seq = _apply_merge(seq, pair)
    body = [vocab.token_ids[tok] for tok in seq][: max_len - 2]
    ids = np.full(max_len, PAD, dtype=np.int64)
    ids[0] = CLS
    ids[1 : 1 + len(body)] = body
    ids[1 + len(body)] = SEP
    mask = np.zeros(max_len, dtype=np.int64)
    mask[: 2 + len(body)] = 1
    return TokenSequence(ids=ids, attention_mask=mask)


def decode(ids: np.ndarray | list[int], vocab: Vocabulary) -> str:
    """Invert encode: drop specials, join byte tokens, decode as UTF-8.

    Invalid byte sequences decode with replacement characters rather than
    failing; ids outside the vocabulary raise.
    """
    table = vocab._id_table()
    chunks = []
    for token_id in np.asarray(ids, dtype=np.int64).tolist():
        if not 0 <= token_id < vocab.size:
            raise ValueError(f"id {token_id} out of range for vocabulary of {vocab.size}")
        if token_id < NUM_SPECIALS:
            continue
        chunks.append(table[token_id])
    return b"".join(chunks).decode("utf-8", errors="replace")
