"""Acceptance suite: one test per release criterion, pass/fail printed per line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Training-based criteria use fixed seeds and small models, so every
run is deterministic.
"""

import math
import time
from contextlib import contextmanager

import mpmath
import numpy as np
import pytest

from offlang.cli import main
from offlang.corpus import (
    LabeledExample,
    Task,
    confidence_to_soft,
    mix_multilingual,
    parse_olid,
    stats,
    validate_hierarchy,
)
from offlang.distillation import ModelTeacher, TeacherEnsemble, distill_student, ensemble_soft_labels
from offlang.encoder import EncoderConfig, TokenBatch, classify, init_params
from offlang.ensemble import CvEnsemble, predict_ensemble, train_cv_ensemble
from offlang.evaluation import ConfusionMatrix, confusion, macro_f1
from offlang.synthetic import (
    attach_calibrated_soft,
    corpus_texts,
    generate_binary_dataset,
    write_olid_tsv,
)
from offlang.tokenizer import CLS, PAD, SEP, build_vocab
from offlang.training import (
    LossSpec,
    MaskingPolicy,
    TrainConfig,
    encode_examples,
    finetune,
    grad_check,
    hard_cross_entropy,
    mask_tokens,
    soft_cross_entropy,
)


@contextmanager
def criterion(number: int, name: str):
    start = time.time()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL  {name}")
        raise
    print(f"ACCEPTANCE {number} PASS  {name}  ({time.time() - start:.1f}s)")


def _macro_f1_on(params, examples, vocab, task=Task.A):
    batch = encode_examples(examples, vocab, params.config.max_len)
    preds = [task.labels[i] for i in classify(params, batch, task).argmax(axis=1)]
    golds = [ex.hard[task] for ex in examples]
    return macro_f1(confusion(golds, preds, task))


def test_criterion_1_soft_cross_entropy_oracle():
    with criterion(1, "soft cross entropy matches high-precision oracle"):
        mpmath.mp.dps = 50
        rng = np.random.default_rng(101)
        for _ in range(1000):
            n = int(rng.integers(2, 4))
            q = rng.dirichlet(np.ones(n))
            p = rng.dirichlet(np.ones(n))
            expected = -mpmath.fsum(
                mpmath.mpf(float(qc)) * mpmath.log(mpmath.mpf(float(pc)))
                for qc, pc in zip(q, p)
                if qc != 0.0
            )
            got = soft_cross_entropy(q, p)
            assert abs(got - float(expected)) < 1e-9

        # one-hot identity, bitwise
        for _ in range(200):
            n = int(rng.integers(2, 4))
            p = rng.dirichlet(np.ones(n))
            y = int(rng.integers(0, n))
            one_hot = np.zeros(n)
            one_hot[y] = 1.0
            assert hard_cross_entropy(y, p) == soft_cross_entropy(one_hot, p)


def test_criterion_2_gradients_match_finite_differences():
    with criterion(2, "backward matches central finite differences < 1e-4"):
        cfg = EncoderConfig(
            layers=2, hidden=16, heads=2, ff=32, vocab_size=300, max_len=16,
            dropout=0.0, dtype="float64",
        )
        params = init_params(cfg, 7)
        rng = np.random.default_rng(70)
        ids = rng.integers(5, 300, size=(4, 12))
        ids[:, 0] = CLS
        ids[:, -1] = SEP
        ids[0, 8:] = PAD
        mask = np.ones_like(ids)
        mask[0, 8:] = 0
        batch = TokenBatch(ids=ids, mask=mask)

        q = rng.dirichlet(np.ones(2), size=4)
        err_soft = grad_check(params, batch, LossSpec.soft(Task.A, q), samples=220)
        labels = rng.integers(0, 3, size=4)
        err_hard = grad_check(params, batch, LossSpec.hard(Task.C, labels), samples=220)
        masked, targets = mask_tokens(ids, MaskingPolicy(mask_fraction=0.3), 5, 300)
        err_mlm = grad_check(
            params, TokenBatch(ids=masked, mask=mask), LossSpec.mlm(targets), samples=220
        )
        assert err_soft < 1e-4, f"soft-CE gradient error {err_soft}"
        assert err_hard < 1e-4, f"hard-CE gradient error {err_hard}"
        assert err_mlm < 1e-4, f"MLM gradient error {err_mlm}"


def test_criterion_3_distillation_transfers_teacher_behaviour():
    with criterion(3, "student matches teacher >= 90%, KL falls monotonically"):
        examples = generate_binary_dataset("en", 100, seed=9)
        vocab = build_vocab(corpus_texts(examples), 320)
        cfg = EncoderConfig(
            layers=1, hidden=32, heads=2, ff=64, vocab_size=vocab.size,
            max_len=24, dropout=0.0,
        )
        tc = TrainConfig(learning_rate=3e-3, epochs=20, batch_size=16, seed=0)
        teacher_params, _ = finetune(
            init_params(cfg, 0), examples, Task.A, vocab, tc, loss_mode="hard"
        )
        teacher = ModelTeacher("teacher", teacher_params, vocab)
        soft_data = ensemble_soft_labels(TeacherEnsemble([teacher]), examples, Task.A)
        student, history = distill_student(
            init_params(cfg, 0), soft_data, Task.A, vocab, tc
        )

        batch = encode_examples(examples, vocab, cfg.max_len)
        agreement = (
            classify(student, batch, Task.A).argmax(axis=1)
            == classify(teacher_params, batch, Task.A).argmax(axis=1)
        ).mean()
        assert agreement >= 0.9, f"argmax agreement {agreement}"

        kls = [h.extra["train_kl"] for h in history[:5]]
        assert all(kls[i + 1] < kls[i] for i in range(4)), f"KL not monotone: {kls}"


def test_criterion_4_soft_targets_beat_noisy_hard_targets():
    with criterion(4, "soft-target student beats hard-target under 20% label noise"):
        hard_scores, soft_scores = [], []
        for s in range(5):
            train = generate_binary_dataset("en", 120, seed=1000 + s, flip_rate=0.2)
            test = generate_binary_dataset("en", 80, seed=2000 + s)
            vocab = build_vocab(corpus_texts(train), 320)
            cfg = EncoderConfig(
                layers=1, hidden=32, heads=2, ff=64, vocab_size=vocab.size,
                max_len=24, dropout=0.0,
            )
            tc = TrainConfig(learning_rate=3e-3, epochs=12, batch_size=16, seed=s)
            soft_train = attach_calibrated_soft(train, Task.A, confidence=0.8)
            hard_params, _ = finetune(
                init_params(cfg, s), train, Task.A, vocab, tc, loss_mode="hard"
            )
            soft_params, _ = finetune(
                init_params(cfg, s), soft_train, Task.A, vocab, tc, loss_mode="soft"
            )
            hard_scores.append(_macro_f1_on(hard_params, test, vocab))
            soft_scores.append(_macro_f1_on(soft_params, test, vocab))
        improvement = float(np.mean(soft_scores) - np.mean(hard_scores))
        assert improvement > 0, (
            f"mean soft {np.mean(soft_scores):.4f} vs hard {np.mean(hard_scores):.4f}"
        )


def test_criterion_5_joint_multilingual_helps_low_resource():
    with criterion(5, "joint training >= monolingual on the low-resource language"):
        mono_scores, joint_scores = [], []
        for s in range(5):
            high = generate_binary_dataset("hi", 300, seed=3000 + s)
            low = generate_binary_dataset("lo", 30, seed=4000 + s)
            low_test = generate_binary_dataset("lo", 60, seed=5000 + s)
            joint_train = mix_multilingual([("hi", high), ("lo", low)])
            vocab = build_vocab(corpus_texts(joint_train), 400)
            cfg = EncoderConfig(
                layers=1, hidden=32, heads=2, ff=64, vocab_size=vocab.size,
                max_len=24, dropout=0.0,
            )
            tc = TrainConfig(learning_rate=3e-3, epochs=15, batch_size=16, seed=s)
            mono, _ = finetune(
                init_params(cfg, s), low, Task.A, vocab, tc, loss_mode="hard"
            )
            joint, _ = finetune(
                init_params(cfg, s), joint_train, Task.A, vocab, tc, loss_mode="hard"
            )
            mono_scores.append(_macro_f1_on(mono, low_test, vocab))
            joint_scores.append(_macro_f1_on(joint, low_test, vocab))
        assert float(np.mean(joint_scores)) >= float(np.mean(mono_scores)), (
            f"joint {joint_scores} vs mono {mono_scores}"
        )


def test_criterion_6_ten_fold_ensemble_invariants():
    with criterion(6, "10-fold ensemble: order invariance, 1-member identity, simplex"):
        examples = generate_binary_dataset("en", 60, seed=31)
        vocab = build_vocab(corpus_texts(examples), 300)
        cfg = EncoderConfig(
            layers=1, hidden=16, heads=2, ff=32, vocab_size=vocab.size,
            max_len=24, dropout=0.0,
        )
        init = init_params(cfg, 0)
        tc = TrainConfig(learning_rate=1e-3, epochs=2, batch_size=8, seed=3)
        ensemble = train_cv_ensemble(examples, Task.A, 10, init, vocab, tc)
        assert len(ensemble.members) == 10

        probe = examples[:12]
        base = predict_ensemble(ensemble, probe, Task.A, vocab)
        order = np.random.default_rng(1).permutation(10)
        shuffled = CvEnsemble(
            members=[ensemble.members[i] for i in order], split=ensemble.split
        )
        permuted = predict_ensemble(shuffled, probe, Task.A, vocab)
        for (d1, l1), (d2, l2) in zip(base, permuted):
            assert d1.probs == d2.probs and l1 == l2

        single = classify(init, encode_examples(probe, vocab, cfg.max_len), Task.A)
        one_member = predict_ensemble([init], probe, Task.A, vocab)
        np.testing.assert_allclose(
            np.array([r[0].probs for r in one_member]), single, atol=1e-6, rtol=0
        )

        for dist, _ in base:
            assert abs(sum(dist.probs) - 1.0) <= 1e-6
            assert all(0.0 <= p <= 1.0 for p in dist.probs)


def test_criterion_7_metric_golden_values():
    with criterion(7, "macro-F1 golden values"):
        m = ConfusionMatrix(Task.A, np.array([[2, 1], [1, 2]]))
        assert abs(macro_f1(m) - 0.6667) <= 5e-5

        perfect = confusion(["OFF", "NOT", "OFF"], ["OFF", "NOT", "OFF"], Task.A)
        assert macro_f1(perfect) == 1.0

        # every prediction OFF on balanced golds:
        # F1(OFF) = 2*(1/2*1)/(3/2) = 2/3, F1(NOT) = 0, macro = 1/3
        degenerate = confusion(["OFF", "OFF", "NOT", "NOT"], ["OFF"] * 4, Task.A)
        assert macro_f1(degenerate) == pytest.approx(1 / 3, abs=1e-12)


def test_criterion_8_data_pipeline(tmp_path):
    with criterion(8, "Danish counts, hierarchy violations, confidence conversion"):
        rows = []
        for i in range(384):
            rows.append(LabeledExample(f"off{i}", f"grov tekst {i}", "da", hard={Task.A: "OFF"}))
        for i in range(2577):
            rows.append(LabeledExample(f"not{i}", f"fin tekst {i}", "da", hard={Task.A: "NOT"}))
        fixture = tmp_path / "danish_train.tsv"
        write_olid_tsv(fixture, rows)
        parsed = parse_olid(fixture, "da")
        counts = stats(parsed)
        assert counts.count("da", Task.A, "OFF") == 384
        assert counts.count("da", Task.A, "NOT") == 2577
        assert counts.totals["da"] == 2961

        not_plus_b = LabeledExample("1", "t", "en", hard={Task.A: "NOT", Task.B: "TIN"})
        unt_plus_c = LabeledExample(
            "2", "t", "en", hard={Task.A: "OFF", Task.B: "UNT", Task.C: "IND"}
        )
        b_without_off = LabeledExample("3", "t", "en", hard={Task.B: "TIN"})
        assert len(validate_hierarchy(not_plus_b)) == 1
        assert len(validate_hierarchy(unt_plus_c)) == 1
        assert len(validate_hierarchy(b_without_off)) == 1

        assert confidence_to_soft(0.8, Task.A).probs == (0.8, 0.2)


def test_criterion_9_crossval_rerun_is_byte_identical(tmp_path):
    with criterion(9, "crossval rerun from manifest reproduces predictions byte-exactly"):
        train = generate_binary_dataset("en", 30, seed=77)
        write_olid_tsv(tmp_path / "train.tsv", train)
        assert main(
            ["build-vocab", "--corpus", f"en={tmp_path}/train.tsv",
             "--size", "280", "--out", f"{tmp_path}/vocab.txt"]
        ) == 0
        run = tmp_path / "cv"
        assert main(
            ["crossval", "--data", f"en={tmp_path}/train.tsv", "--task", "A",
             "--k", "3", "--vocab", f"{tmp_path}/vocab.txt", "--out", str(run),
             "--seed", "5", "--layers", "1", "--hidden", "16", "--heads", "2",
             "--ff", "32", "--max-len", "16", "--epochs", "2",
             "--batch-size", "8", "--lr", "1e-3"]
        ) == 0
        rerun = tmp_path / "cv_again"
        assert main(["rerun", str(run / "manifest.json"), "--out", str(rerun)]) == 0
        original = (run / "predictions.tsv").read_bytes()
        reproduced = (rerun / "predictions.tsv").read_bytes()
        assert original == reproduced
