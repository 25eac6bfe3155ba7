import numpy as np
import pytest

from offlang.encoder import EncoderConfig, TokenBatch, init_params
from offlang.synthetic import corpus_texts, generate_binary_dataset
from offlang.tokenizer import CLS, SEP, build_vocab


@pytest.fixture(scope="session")
def micro_config():
    return EncoderConfig(
        layers=2, hidden=16, heads=2, ff=32, vocab_size=300, max_len=16, dropout=0.0
    )


@pytest.fixture(scope="session")
def micro_params(micro_config):
    return init_params(micro_config, seed=42)


@pytest.fixture(scope="session")
def micro_batch():
    """Four sequences, two of them padded, ids within the micro vocab."""
    rng = np.random.default_rng(0)
    ids = rng.integers(5, 300, size=(4, 12))
    mask = np.ones((4, 12), dtype=np.int64)
    ids[:, 0] = CLS
    ids[0, 8] = SEP
    ids[0, 9:] = 0
    mask[0, 9:] = 0
    ids[1, 5] = SEP
    ids[1, 6:] = 0
    mask[1, 6:] = 0
    ids[2, -1] = SEP
    ids[3, -1] = SEP
    return TokenBatch(ids=ids, mask=mask)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_binary_dataset("en", 80, seed=7)


@pytest.fixture(scope="session")
def tiny_vocab(tiny_dataset):
    return build_vocab(corpus_texts(tiny_dataset), 320)


def make_olid_file(path, rows, header="id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c"):
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path
