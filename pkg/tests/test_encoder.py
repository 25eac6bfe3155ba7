import dataclasses

import numpy as np
import pytest

from offlang.corpus import Task
from offlang.encoder import (
    CheckpointMagicError,
    CheckpointManifestError,
    CheckpointVersionError,
    EncoderConfig,
    TokenBatch,
    classify,
    forward,
    init_params,
    load_checkpoint,
    mlm_logits,
    save_checkpoint,
    softmax,
)


class TestConfig:
    def test_indivisible_heads_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            EncoderConfig(hidden=16, heads=3)

    def test_dropout_range(self):
        with pytest.raises(ValueError):
            EncoderConfig(dropout=1.0)

    def test_zero_layer_rejected(self):
        with pytest.raises(ValueError):
            EncoderConfig(layers=0)


class TestInitParams:
    def test_deterministic_per_seed(self, micro_config):
        a = init_params(micro_config, 7)
        b = init_params(micro_config, 7)
        for name in a.tensors:
            np.testing.assert_array_equal(a.tensors[name], b.tensors[name])

    def test_different_seeds_differ(self, micro_config):
        a = init_params(micro_config, 1)
        b = init_params(micro_config, 2)
        assert not np.array_equal(a.tensors["tok_emb"], b.tensors["tok_emb"])

    def test_parameter_count_matches_closed_form(self):
        cfg = EncoderConfig(
            layers=2, hidden=16, heads=2, ff=32, vocab_size=300, max_len=32,
            tasks=("A",), tie_mlm=True,
        )
        d, f, v, m, L = 16, 32, 300, 32, 2
        per_layer = (
            4 * (d * d + d)      # attention projections + biases
            + (d * f + f)        # ffn in
            + (f * d + d)        # ffn out
            + 4 * d              # two layer norms, gain + bias each
        )
        expected = v * d + m * d + L * per_layer + v + (d * 2 + 2)
        assert init_params(cfg, 0).num_parameters() == expected

    def test_truncation_and_moments(self, micro_config):
        params = init_params(micro_config, 3)
        w = params.tensors["layers.0.wq"]
        assert np.abs(w).max() <= 2 * 0.02
        assert params.tensors["layers.0.ln1_g"].tolist() == [1.0] * 16
        assert params.tensors["layers.0.bq"].tolist() == [0.0] * 16


class TestForward:
    def test_shapes(self, micro_params, micro_batch):
        out = forward(micro_params, micro_batch)
        assert out.hidden.shape == (4, 12, 16)
        assert out.cls_embedding.shape == (4, 16)
        np.testing.assert_array_equal(out.cls_embedding, out.hidden[:, 0, :])

    def test_padding_id_invariance(self, micro_params, micro_batch):
        base = forward(micro_params, micro_batch).cls_embedding
        ids = micro_batch.ids.copy()
        ids[0, 9:] = 123  # garbage under the padding mask
        changed = forward(micro_params, TokenBatch(ids=ids, mask=micro_batch.mask))
        np.testing.assert_allclose(changed.cls_embedding, base, atol=1e-6, rtol=0)

    def test_eval_mode_bit_deterministic(self, micro_params, micro_batch):
        a = forward(micro_params, micro_batch).hidden
        b = forward(micro_params, micro_batch).hidden
        np.testing.assert_array_equal(a, b)

    def test_train_mode_dropout_seeded(self, micro_config, micro_batch):
        cfg = dataclasses.replace(micro_config, dropout=0.2)
        params = init_params(cfg, 0)
        a = forward(params, micro_batch, train_mode=True, seed=5).hidden
        b = forward(params, micro_batch, train_mode=True, seed=5).hidden
        c = forward(params, micro_batch, train_mode=True, seed=6).hidden
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_out_of_range_id_rejected(self, micro_params, micro_batch):
        ids = micro_batch.ids.copy()
        ids[0, 1] = 300
        with pytest.raises(ValueError, match="out of range"):
            forward(micro_params, TokenBatch(ids=ids, mask=micro_batch.mask))

    def test_batch_permutation_equivariance(self, micro_params, micro_batch):
        perm = np.array([2, 0, 3, 1])
        out = forward(micro_params, micro_batch).hidden
        out_perm = forward(micro_params, micro_batch.take(perm)).hidden
        np.testing.assert_array_equal(out[perm], out_perm)


class TestClassify:
    def test_zero_head_gives_uniform(self, micro_params, micro_batch):
        params = micro_params.copy()
        params.tensors["cls.C.w"][:] = 0.0
        params.tensors["cls.C.b"][:] = 0.0
        probs = classify(params, micro_batch, Task.C)
        np.testing.assert_allclose(probs, 1 / 3, atol=1e-7)

    def test_matches_softmax_oracle(self, micro_params, micro_batch):
        from offlang.encoder import classifier_logits

        out = forward(micro_params, micro_batch)
        logits = classifier_logits(micro_params, out.cls_embedding, Task.A)
        expected = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(classify(micro_params, micro_batch, Task.A), expected, atol=1e-6)

    def test_rows_sum_to_one(self, micro_params, micro_batch):
        probs = classify(micro_params, micro_batch, Task.B)
        assert ((probs > 0) & (probs < 1)).all()
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_missing_head_rejected(self, micro_batch):
        cfg = EncoderConfig(
            layers=1, hidden=16, heads=2, ff=32, vocab_size=300, max_len=16, tasks=("A",)
        )
        params = init_params(cfg, 0)
        with pytest.raises(ValueError, match="task B"):
            classify(params, micro_batch, Task.B)


class TestMlmLogits:
    def test_shape(self, micro_params, micro_batch):
        logits = mlm_logits(micro_params, micro_batch)
        assert logits.shape == (4, 12, 300)

    def test_weight_tying_is_bitwise(self, micro_params):
        proj = micro_params.mlm_projection()
        np.testing.assert_array_equal(proj, micro_params.tensors["tok_emb"].T)

    def test_untied_head_is_separate(self, micro_config):
        cfg = dataclasses.replace(micro_config, tie_mlm=False)
        params = init_params(cfg, 0)
        assert params.mlm_projection() is params.tensors["mlm_w"]

    def test_eval_deterministic(self, micro_params, micro_batch):
        a = mlm_logits(micro_params, micro_batch)
        b = mlm_logits(micro_params, micro_batch)
        np.testing.assert_array_equal(a, b)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, micro_params, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(micro_params, path)
        loaded = load_checkpoint(path)
        assert loaded.config == micro_params.config
        for name, tensor in micro_params.tensors.items():
            np.testing.assert_array_equal(loaded.tensors[name], tensor)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(CheckpointMagicError):
            load_checkpoint(path)

    def test_bad_version(self, micro_params, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(micro_params, path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_truncated_payload(self, micro_params, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(micro_params, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CheckpointManifestError, match="truncated"):
            load_checkpoint(path)

    def test_float64_round_trip(self, micro_params, tmp_path):
        params64 = micro_params.astype("float64")
        path = tmp_path / "model64.ckpt"
        save_checkpoint(params64, path)
        loaded = load_checkpoint(path)
        assert loaded.tensors["tok_emb"].dtype == np.float64
        np.testing.assert_array_equal(loaded.tensors["tok_emb"], params64.tensors["tok_emb"])

    def test_architecture_mismatch_caught_downstream(self, micro_params, tmp_path):
        # a d=16 checkpoint loaded where d=32 is expected: config travels with
        # the file, so the mismatch is visible before any matmul
        path = tmp_path / "model.ckpt"
        save_checkpoint(micro_params, path)
        loaded = load_checkpoint(path)
        assert loaded.config.hidden == 16
        other = EncoderConfig(layers=2, hidden=32, heads=2, ff=64, vocab_size=300, max_len=16)
        assert loaded.config != other
