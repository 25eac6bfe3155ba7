"""Losses, masking, reverse-mode gradients, Adam and the training loops.

The soft-target loss is the plain cross entropy between a target
distribution Q and the model's softmax output P,

    loss = -sum_c Q(c) * log P(c)

in nats, averaged over the batch. Training with hard gold labels is the
one-hot special case of the same formula, bit for bit, so the two modes
share one code path.

Backpropagation is written out by hand against the encoder's forward cache
and is validated by central finite differences (``grad_check``), which is
why the encoder offers a float64 mode. All randomness (masking, dropout,
batch shuffling) is driven by explicit seeds; a full run is a deterministic
function of (data, config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import LabeledExample, SoftDistribution, Task
from .encoder import (
    EncoderConfig,
    ForwardCache,
    ModelParameters,
    TokenBatch,
    classifier_logits,
    forward,
    gelu_grad,
    init_params,
    log_softmax,
    softmax,
)
from .evaluation import confusion, macro_f1
from .tokenizer import MASK, NUM_SPECIALS, Vocabulary, encode

LOG_CLAMP = 1e-12


class NonFiniteError(Exception):
    """A loss or gradient tensor went NaN/inf; message names the tensor."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 10
    warmup_steps: int | None = None  # None: 10% of total steps
    clip_norm: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must be in [0,1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: ModelParameters) -> "OptimizerState":
        zeros = lambda: {k: np.zeros_like(a) for k, a in params.tensors.items()}
        return cls(m=zeros(), v=zeros())


@dataclass(frozen=True)
class MaskingPolicy:
    mask_fraction: float = 0.15
    mask_prob: float = 0.8
    random_prob: float = 0.1
    keep_prob: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.mask_fraction <= 1.0:
            raise ValueError("mask_fraction must be in [0,1]")
        if abs(self.mask_prob + self.random_prob + self.keep_prob - 1.0) > 1e-9:
            raise ValueError("mask/random/keep probabilities must sum to 1")


# ---------------------------------------------------------------------------
# Losses on probability vectors


def soft_cross_entropy(q: SoftDistribution | np.ndarray, p: SoftDistribution | np.ndarray) -> float:
    """Cross entropy -sum Q log P in nats; batch input averages over rows.

    P is clamped below at 1e-12 before the log, and terms with Q(c)=0
    contribute exactly 0 no matter what P(c) is.
    """
    q_arr = q.as_array() if isinstance(q, SoftDistribution) else np.asarray(q, dtype=np.float64)
    p_arr = p.as_array() if isinstance(p, SoftDistribution) else np.asarray(p, dtype=np.float64)
    if q_arr.shape != p_arr.shape:
        raise ValueError(f"distribution shapes differ: {q_arr.shape} vs {p_arr.shape}")
    log_p = np.log(np.maximum(p_arr, LOG_CLAMP))
    terms = np.where(q_arr == 0.0, 0.0, q_arr * log_p)
    if q_arr.ndim == 1:
        return float(-terms.sum())
    return float(-terms.sum(axis=-1).mean())


def hard_cross_entropy(y: int, p: SoftDistribution | np.ndarray) -> float:
    """Cross entropy against a one-hot target; y indexes the label set."""
    p_arr = p.as_array() if isinstance(p, SoftDistribution) else np.asarray(p, dtype=np.float64)
    n = p_arr.shape[-1]
    if not 0 <= y < n:
        raise ValueError(f"label index {y} out of range for {n} classes")
    one_hot = np.zeros(n, dtype=np.float64)
    one_hot[y] = 1.0
    return soft_cross_entropy(one_hot, p_arr)


# ---------------------------------------------------------------------------
# MLM masking


def mask_tokens(
    ids: np.ndarray, policy: MaskingPolicy, seed: int, vocab_size: int
) -> tuple[np.ndarray, dict[tuple[int, ...], int]]:
    """Apply BERT-style masking to an id array (1-d sequence or 2-d batch).

    Only non-special, non-pad positions are eligible. Selected positions
    become [MASK] / a random non-special token / stay unchanged per the
    policy split. Returns the masked copy and a map position -> original id.
    """
    ids = np.asarray(ids)
    rng = np.random.default_rng(seed)
    masked = ids.copy()
    targets: dict[tuple[int, ...], int] = {}
    eligible = ids >= NUM_SPECIALS
    if policy.mask_fraction == 0.0 or not eligible.any():
        return masked, targets
    select = (rng.random(ids.shape) < policy.mask_fraction) & eligible
    actions = rng.random(ids.shape)
    randoms = rng.integers(NUM_SPECIALS, vocab_size, size=ids.shape)
    for pos in np.argwhere(select):
        key = tuple(int(x) for x in pos)
        targets[key] = int(ids[key])
        a = actions[key]
        if a < policy.mask_prob:
            masked[key] = MASK
        elif a < policy.mask_prob + policy.random_prob:
            masked[key] = randoms[key]
        # else: keep the original token
    return masked, targets


# ---------------------------------------------------------------------------
# Loss specs and backward


@dataclass(frozen=True)
class LossSpec:
    """What to differentiate: an MLM target map or a per-task Q matrix."""

    kind: str  # "mlm" | "classify"
    task: Task | None = None
    q: np.ndarray | None = None  # (B, C) soft targets, rows sum to 1
    mlm_targets: dict[tuple[int, int], int] | None = None

    @classmethod
    def soft(cls, task: Task, q: np.ndarray) -> "LossSpec":
        return cls(kind="classify", task=task, q=np.asarray(q))

    @classmethod
    def hard(cls, task: Task, labels: np.ndarray) -> "LossSpec":
        labels = np.asarray(labels)
        q = np.zeros((labels.shape[0], task.num_classes))
        q[np.arange(labels.shape[0]), labels] = 1.0
        return cls(kind="classify", task=task, q=q)

    @classmethod
    def mlm(cls, targets: dict[tuple[int, int], int]) -> "LossSpec":
        return cls(kind="mlm", mlm_targets=targets)


def _head_loss_and_grad(
    params: ModelParameters, cache: ForwardCache, spec: LossSpec
) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
    """Loss plus d(loss)/d(hidden) and the head-parameter gradients."""
    t = params.tensors
    dtype = params.config.np_dtype
    hidden = cache.hidden
    grads: dict[str, np.ndarray] = {}

    if spec.kind == "classify":
        q = spec.q.astype(dtype)
        cls_emb = hidden[:, 0, :]
        logits = classifier_logits(params, cls_emb, spec.task)
        if q.shape != logits.shape:
            raise ValueError(f"target shape {q.shape} does not match logits {logits.shape}")
        log_p = log_softmax(logits)
        batch = logits.shape[0]
        loss = float(-(q * log_p).sum() / batch)
        dlogits = (softmax(logits) - q) / dtype.type(batch)
        wk, bk = f"cls.{spec.task.value}.w", f"cls.{spec.task.value}.b"
        grads[wk] = cls_emb.T @ dlogits
        grads[bk] = dlogits.sum(axis=0)
        dhidden = np.zeros_like(hidden)
        dhidden[:, 0, :] = dlogits @ t[wk].T
        return loss, dhidden, grads

    if spec.kind == "mlm":
        targets = spec.mlm_targets
        if not targets:
            raise ValueError("MLM loss needs at least one masked position")
        rows = np.array([k[0] for k in targets], dtype=np.int64)
        cols = np.array([k[1] for k in targets], dtype=np.int64)
        gold = np.array(list(targets.values()), dtype=np.int64)
        proj = params.mlm_projection()
        h_sel = hidden[rows, cols]  # (M, d)
        logits = h_sel @ proj + t["mlm_b"]
        log_p = log_softmax(logits)
        m = len(targets)
        loss = float(-log_p[np.arange(m), gold].sum() / m)
        dlogits = softmax(logits)
        dlogits[np.arange(m), gold] -= 1.0
        dlogits /= dtype.type(m)
        dproj = h_sel.T @ dlogits
        grads["mlm_b"] = dlogits.sum(axis=0)
        if params.config.tie_mlm:
            grads["tok_emb"] = dproj.T
        else:
            grads["mlm_w"] = dproj
        dhidden = np.zeros_like(hidden)
        np.add.at(dhidden, (rows, cols), dlogits @ proj.T)
        return loss, dhidden, grads

    raise ValueError(f"unknown loss kind {spec.kind!r}")


def _layer_norm_backward(
    dy: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray, gain: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dgain = (dy * x_hat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    dx_hat = dy * gain
    mean_dx = dx_hat.mean(axis=-1, keepdims=True)
    mean_dx_xhat = (dx_hat * x_hat).mean(axis=-1, keepdims=True)
    dx = inv_std * (dx_hat - mean_dx - x_hat * mean_dx_xhat)
    return dx, dgain, dbias


def backward(
    params: ModelParameters,
    batch: TokenBatch,
    spec: LossSpec,
    train_mode: bool = False,
    seed: int = 0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and a gradient tensor for every parameter tensor.

    Deterministic for fixed (params, batch, spec, seed); raises
    NonFiniteError naming the first offending tensor if anything blows up.
    """
    cfg = params.config
    t = params.tensors
    _, cache = forward(params, batch, train_mode=train_mode, seed=seed, want_cache=True)
    loss, dhidden, grads = _head_loss_and_grad(params, cache, spec)
    if not math.isfinite(loss):
        for name, tensor in t.items():
            if not np.isfinite(tensor).all():
                raise NonFiniteError(f"loss is not finite; first non-finite tensor: {name!r}")
        raise NonFiniteError("loss is not finite (parameters are finite; check inputs)")

    for name in cfg.tensor_shapes():
        if name not in grads:
            grads[name] = np.zeros_like(t[name])
        elif grads[name].shape != t[name].shape:  # tied-embedding partial grads
            raise AssertionError(f"gradient shape mismatch for {name}")

    heads = cfg.heads
    scale = cfg.np_dtype.type(1.0 / np.sqrt(cfg.head_dim))
    dh = dhidden
    for i in reversed(range(cfg.layers)):
        p = f"layers.{i}."
        lc = cache.layers[i]

        # x + FFN -> LN2
        dr2, dg2, db2 = _layer_norm_backward(dh, lc.ln2[0], lc.ln2[1], t[p + "ln2_g"])
        grads[p + "ln2_g"] += dg2
        grads[p + "ln2_b"] += db2
        dh1 = dr2.copy()
        dffn = dr2 if lc.ffn_drop is None else dr2 * lc.ffn_drop
        d_in, d_ff, d_model = t[p + "w1"].shape[0], t[p + "w1"].shape[1], t[p + "w2"].shape[1]
        grads[p + "w2"] += lc.g.reshape(-1, d_ff).T @ dffn.reshape(-1, d_model)
        grads[p + "b2"] += dffn.sum(axis=(0, 1))
        dgelu = dffn @ t[p + "w2"].T
        du = dgelu * gelu_grad(lc.u)
        grads[p + "w1"] += lc.h1.reshape(-1, d_in).T @ du.reshape(-1, d_ff)
        grads[p + "b1"] += du.sum(axis=(0, 1))
        dh1 += du @ t[p + "w1"].T

        # x + attention -> LN1
        dr1, dg1, db1 = _layer_norm_backward(dh1, lc.ln1[0], lc.ln1[1], t[p + "ln1_g"])
        grads[p + "ln1_g"] += dg1
        grads[p + "ln1_b"] += db1
        dx = dr1.copy()
        dattn = dr1 if lc.attn_drop is None else dr1 * lc.attn_drop
        grads[p + "wo"] += lc.ctx_merged.reshape(-1, d_model).T @ dattn.reshape(-1, d_model)
        grads[p + "bo"] += dattn.sum(axis=(0, 1))
        dctx = dattn @ t[p + "wo"].T
        b, seq = dctx.shape[0], dctx.shape[1]
        dctx_h = dctx.reshape(b, seq, heads, -1).transpose(0, 2, 1, 3)
        dprobs = dctx_h @ lc.v.swapaxes(-1, -2)
        dv_h = lc.probs.swapaxes(-1, -2) @ dctx_h
        # softmax rows: masked keys have prob 0, so no gradient leaks there
        dscores = lc.probs * (dprobs - (dprobs * lc.probs).sum(axis=-1, keepdims=True))
        dq_h = dscores @ lc.k * scale
        dk_h = dscores.swapaxes(-1, -2) @ lc.q * scale
        for dproj_h, w_name, b_name in (
            (dq_h, "wq", "bq"),
            (dk_h, "wk", "bk"),
            (dv_h, "wv", "bv"),
        ):
            dproj = dproj_h.transpose(0, 2, 1, 3).reshape(b, seq, d_model)
            grads[p + w_name] += lc.x_in.reshape(-1, d_model).T @ dproj.reshape(-1, d_model)
            grads[p + b_name] += dproj.sum(axis=(0, 1))
            dx += dproj @ t[p + w_name].T
        dh = dx

    demb = dh if cache.emb_drop is None else dh * cache.emb_drop
    np.add.at(grads["tok_emb"], batch.ids, demb)
    grads["pos_emb"][: demb.shape[1]] += demb.sum(axis=0)

    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient in tensor {name!r}")
    return loss, grads


def loss_only(
    params: ModelParameters,
    batch: TokenBatch,
    spec: LossSpec,
    train_mode: bool = False,
    seed: int = 0,
) -> float:
    """The scalar loss along the exact code path backward differentiates."""
    _, cache = forward(params, batch, train_mode=train_mode, seed=seed, want_cache=True)
    loss, _, _ = _head_loss_and_grad(params, cache, spec)
    return loss


# ---------------------------------------------------------------------------
# Adam


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values())))


def adam_step(
    params: ModelParameters,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    config: TrainConfig,
) -> tuple[ModelParameters, OptimizerState]:
    """One bias-corrected Adam update with global-norm clipping and warmup.

    Mutates ``params``/``state`` in place and returns them; warmup scales
    the learning rate linearly until step ``warmup_steps``.
    """
    dtype = params.config.np_dtype
    state.t += 1
    lr = config.learning_rate
    warmup = config.warmup_steps or 0
    if warmup > 0 and state.t < warmup:
        lr = lr * state.t / warmup

    clip_scale = 1.0
    if config.clip_norm > 0:
        norm = global_norm(grads)
        if norm > config.clip_norm:
            clip_scale = config.clip_norm / norm

    b1, b2 = dtype.type(config.beta1), dtype.type(config.beta2)
    bc1 = dtype.type(1.0 - config.beta1 ** state.t)
    bc2 = dtype.type(1.0 - config.beta2 ** state.t)
    lr = dtype.type(lr)
    eps = dtype.type(config.eps)
    cs = dtype.type(clip_scale)
    for name, tensor in params.tensors.items():
        g = grads[name] * cs
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        tensor -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


# ---------------------------------------------------------------------------
# Gradient checking


def grad_check(
    params: ModelParameters,
    batch: TokenBatch,
    spec: LossSpec,
    eps: float = 1e-5,
    samples: int = 256,
    seed: int = 0,
) -> float:
    """Max relative error of backward vs central finite differences.

    Samples coordinates spanning every tensor (at least one each, ``samples``
    total or more) and perturbs them one at a time. Requires float64
    parameters; truncation error in float32 would drown the comparison.
    """
    if eps <= 0:
        raise ValueError("finite-difference eps must be positive")
    if params.config.dtype != "float64":
        raise ValueError("grad_check requires float64 parameters; use params.astype('float64')")
    _, grads = backward(params, batch, spec)
    rng = np.random.default_rng(seed)
    names = list(params.tensors)
    per_tensor = max(1, math.ceil(samples / len(names)))
    worst = 0.0
    for name in names:
        tensor = params.tensors[name]
        count = min(per_tensor, tensor.size)
        coords = rng.choice(tensor.size, size=count, replace=False)
        for flat_idx in coords:
            idx = np.unravel_index(flat_idx, tensor.shape)
            original = tensor[idx]
            tensor[idx] = original + eps
            loss_plus = loss_only(params, batch, spec)
            tensor[idx] = original - eps
            loss_minus = loss_only(params, batch, spec)
            tensor[idx] = original
            fd = (loss_plus - loss_minus) / (2.0 * eps)
            an = float(grads[name][idx])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-3)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Epoch loops


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_macro_f1: float | None = None
    extra: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        rec: dict = {"epoch": self.epoch, "train_loss": self.train_loss}
        if self.val_macro_f1 is not None:
            rec["val_macro_f1"] = self.val_macro_f1
        rec.update(self.extra)
        return rec


def encode_examples(
    examples: list[LabeledExample], vocab: Vocabulary, max_len: int
) -> TokenBatch:
    return TokenBatch.from_sequences([encode(ex.text, vocab, max_len) for ex in examples])


def _batch_indices(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def pretrain_mlm(
    corpus: list[str],
    vocab: Vocabulary,
    encoder_config: EncoderConfig,
    train_config: TrainConfig,
    policy: MaskingPolicy | None = None,
    checkpoint_dir=None,
) -> tuple[ModelParameters, list[EpochRecord]]:
    """Masked-LM pretraining over raw texts; records per-epoch mean loss.

    Writes ``epoch_NNN.ckpt`` into ``checkpoint_dir`` when one is given.
    Zero epochs returns the freshly initialized parameters untouched.
    """
    if not corpus:
        raise ValueError("pretraining corpus must be non-empty")
    if encoder_config.vocab_size != vocab.size:
        raise ValueError(
            f"encoder vocab_size={encoder_config.vocab_size} != vocabulary size {vocab.size}"
        )
    policy = policy or MaskingPolicy()
    params = init_params(encoder_config, train_config.seed)
    seqs = TokenBatch.from_sequences(
        [encode(text, vocab, encoder_config.max_len) for text in corpus]
    )
    n = len(seqs)
    steps_per_epoch = math.ceil(n / train_config.batch_size)
    config = _resolve_warmup(train_config, steps_per_epoch * train_config.epochs)
    state = OptimizerState.fresh(params)
    history: list[EpochRecord] = []
    for epoch in range(train_config.epochs):
        rng = np.random.default_rng(_mix_seed(train_config.seed, epoch))
        losses = []
        for step, idx in enumerate(_batch_indices(n, train_config.batch_size, rng)):
            batch = seqs.take(idx)
            masked, targets = mask_tokens(
                batch.ids, policy, _mix_seed(train_config.seed, epoch, step), vocab.size
            )
            if not targets:
                continue
            loss, grads = backward(
                params,
                TokenBatch(ids=masked, mask=batch.mask),
                LossSpec.mlm(targets),
                train_mode=True,
                seed=_mix_seed(train_config.seed, epoch, step, 1),
            )
            params, state = adam_step(params, grads, state, config)
            losses.append(loss)
        record = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)) if losses else 0.0)
        history.append(record)
        if checkpoint_dir is not None:
            from .encoder import save_checkpoint
            from pathlib import Path

            save_checkpoint(params, Path(checkpoint_dir) / f"epoch_{epoch:03d}.ckpt")
    return params, history


def _soft_targets(
    examples: list[LabeledExample], task: Task, mode: str
) -> np.ndarray:
    """Per-example Q matrix; hard labels become one-hot rows."""
    rows = []
    missing = []
    for ex in examples:
        if mode == "hard":
            if task in ex.hard:
                one_hot = np.zeros(task.num_classes)
                one_hot[task.label_index(ex.hard[task])] = 1.0
                rows.append(one_hot)
            else:
                missing.append(ex.id)
        else:
            if task in ex.soft:
                rows.append(ex.soft[task].as_array())
            elif task in ex.hard:
                one_hot = np.zeros(task.num_classes)
                one_hot[task.label_index(ex.hard[task])] = 1.0
                rows.append(one_hot)
            else:
                missing.append(ex.id)
    if missing:
        raise ValueError(
            f"examples missing a task-{task.value} {mode} label: {missing}"
        )
    return np.stack(rows)


def finetune(
    params: ModelParameters,
    examples: list[LabeledExample],
    task: Task,
    vocab: Vocabulary,
    train_config: TrainConfig,
    loss_mode: str = "hard",
    val_examples: list[LabeledExample] | None = None,
    on_epoch_end=None,
) -> tuple[ModelParameters, list[EpochRecord]]:
    """Fine-tune a classification head; hard or soft targets.

    Soft mode trains on stored soft distributions, falling back to one-hot
    for examples that only carry hard labels, so a fully hard-labeled
    dataset trains identically in both modes. Validation macro-F1 is
    recorded per epoch when a validation set is supplied.
    """
    if loss_mode not in ("hard", "soft"):
        raise ValueError(f"loss_mode must be 'hard' or 'soft', got {loss_mode!r}")
    if not examples:
        raise ValueError("training dataset is empty")
    params = params.copy()
    q_matrix = _soft_targets(examples, task, loss_mode)
    batch_all = encode_examples(examples, vocab, params.config.max_len)
    n = len(examples)
    steps_per_epoch = math.ceil(n / train_config.batch_size)
    config = _resolve_warmup(train_config, steps_per_epoch * train_config.epochs)
    state = OptimizerState.fresh(params)
    history: list[EpochRecord] = []
    val_batch = None
    val_golds = None
    if val_examples:
        val_batch = encode_examples(val_examples, vocab, params.config.max_len)
        missing = [ex.id for ex in val_examples if task not in ex.hard]
        if missing:
            raise ValueError(f"validation examples missing hard labels: {missing}")
        val_golds = [ex.hard[task] for ex in val_examples]
    for epoch in range(train_config.epochs):
        rng = np.random.default_rng(_mix_seed(train_config.seed, epoch))
        losses = []
        for step, idx in enumerate(_batch_indices(n, train_config.batch_size, rng)):
            spec = LossSpec.soft(task, q_matrix[idx])
            loss, grads = backward(
                params,
                batch_all.take(idx),
                spec,
                train_mode=True,
                seed=_mix_seed(train_config.seed, epoch, step, 1),
            )
            params, state = adam_step(params, grads, state, config)
            losses.append(loss)
        record = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)))
        if val_batch is not None:
            from .encoder import classify

            probs = classify(params, val_batch, task)
            preds = [task.labels[i] for i in probs.argmax(axis=1)]
            record.val_macro_f1 = macro_f1(confusion(val_golds, preds, task))
        if on_epoch_end is not None:
            on_epoch_end(params, record)
        history.append(record)
    return params, history


def _resolve_warmup(config: TrainConfig, total_steps: int) -> TrainConfig:
    if config.warmup_steps is not None:
        return config
    return replace(config, warmup_steps=max(1, total_steps // 10))


def _mix_seed(*parts: int) -> int:
    # Stable stream splitting for (seed, epoch, step, salt) tuples.
    mixed = 0
    for part in parts:
        mixed = (mixed * 1_000_003 + part + 1) % (2**63)
    return mixed
