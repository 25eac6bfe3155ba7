"""Micro transformer encoder in plain numpy.

Post-layer-norm blocks (attention -> add -> LN, feed-forward -> add -> LN)
with GELU, learned position embeddings, a masked-LM projection that can be
weight-tied to the token embedding, and one softmax classifier head per
sub-task reading the final-layer [CLS] vector. Attention logits at padded
key positions are forced to -inf so padding can never leak into real
positions.

Parameters live in a flat name->array dict so the optimizer, checkpointing
and gradient checking can treat every tensor uniformly. float32 by default;
float64 is available for finite-difference verification.

Checkpoints are a small self-describing binary format: magic ``GKDM``, a
little-endian u32 version and u64 header length, a JSON header with the
config and an ordered tensor manifest, then raw little-endian payloads in
manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np
from scipy.special import erf

from .corpus import Task
from .tokenizer import TokenSequence

CHECKPOINT_MAGIC = b"GKDM"
CHECKPOINT_VERSION = 1
LN_EPS = 1e-5

_DTYPES = {"float32": np.float32, "float64": np.float64}


class CheckpointError(Exception):
    """Base class for checkpoint file problems."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointManifestError(CheckpointError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    hidden: int = 32
    heads: int = 2
    ff: int = 64
    vocab_size: int = 2048
    max_len: int = 128
    tasks: tuple[str, ...] = ("A", "B", "C")
    dropout: float = 0.1
    tie_mlm: bool = True
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if min(self.layers, self.hidden, self.heads, self.ff, self.vocab_size, self.max_len) < 1:
            raise ValueError("all architecture sizes must be >= 1")
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden={self.hidden} not divisible by heads={self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0,1), got {self.dropout}")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        for t in self.tasks:
            Task(t)

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(_DTYPES[self.dtype])

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """Ordered manifest of every learnable tensor."""
        d, f, v = self.hidden, self.ff, self.vocab_size
        shapes: dict[str, tuple[int, ...]] = {
            "tok_emb": (v, d),
            "pos_emb": (self.max_len, d),
        }
        for i in range(self.layers):
            p = f"layers.{i}."
            for name in ("wq", "wk", "wv", "wo"):
                shapes[p + name] = (d, d)
                shapes[p + "b" + name[1]] = (d,)
            shapes[p + "w1"] = (d, f)
            shapes[p + "b1"] = (f,)
            shapes[p + "w2"] = (f, d)
            shapes[p + "b2"] = (d,)
            shapes[p + "ln1_g"] = (d,)
            shapes[p + "ln1_b"] = (d,)
            shapes[p + "ln2_g"] = (d,)
            shapes[p + "ln2_b"] = (d,)
        if not self.tie_mlm:
            shapes["mlm_w"] = (d, v)
        shapes["mlm_b"] = (v,)
        for t in self.tasks:
            shapes[f"cls.{t}.w"] = (d, Task(t).num_classes)
            shapes[f"cls.{t}.b"] = (Task(t).num_classes,)
        return shapes


@dataclass
class ModelParameters:
    """All learnable tensors plus the config that shaped them."""

    config: EncoderConfig
    tensors: dict[str, np.ndarray]

    def astype(self, dtype: str) -> "ModelParameters":
        cfg = replace(self.config, dtype=dtype)
        return ModelParameters(
            config=cfg,
            tensors={k: v.astype(cfg.np_dtype) for k, v in self.tensors.items()},
        )

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def num_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def mlm_projection(self) -> np.ndarray:
        """(hidden, vocab) output matrix; the embedding transpose when tied."""
        if self.config.tie_mlm:
            return self.tensors["tok_emb"].T
        return self.tensors["mlm_w"]


def _truncated_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    # Resample anything beyond +-2 std; loop terminates fast (P(reject) ~ 0.05).
    out = rng.normal(0.0, std, size=shape)
    bound = 2.0 * std
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out.astype(dtype)


def init_params(config: EncoderConfig, seed: int) -> ModelParameters:
    """Weights ~ N(0, 0.02^2) truncated at two sigma; biases 0; LN gains 1."""
    rng = np.random.default_rng(seed)
    dtype = config.np_dtype
    tensors: dict[str, np.ndarray] = {}
    for name, shape in config.tensor_shapes().items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("_g"):
            tensors[name] = np.ones(shape, dtype=dtype)
        elif leaf.startswith("b") or leaf.endswith("_b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            tensors[name] = _truncated_normal(rng, shape, 0.02, dtype)
    return ModelParameters(config=config, tensors=tensors)


@dataclass(frozen=True)
class TokenBatch:
    """Stacked fixed-length sequences: ids and mask, both (batch, seq)."""

    ids: np.ndarray
    mask: np.ndarray

    @classmethod
    def from_sequences(cls, seqs: list[TokenSequence]) -> "TokenBatch":
        if not seqs:
            raise ValueError("batch must be non-empty")
        return cls(
            ids=np.stack([s.ids for s in seqs]),
            mask=np.stack([s.attention_mask for s in seqs]),
        )

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def take(self, indices: np.ndarray) -> "TokenBatch":
        return TokenBatch(ids=self.ids[indices], mask=self.mask[indices])


@dataclass
class EncoderOutput:
    hidden: np.ndarray  # (batch, seq, hidden), final layer

    @property
    def cls_embedding(self) -> np.ndarray:
        return self.hidden[:, 0, :]


@dataclass
class LayerCache:
    x_in: np.ndarray
    q: np.ndarray  # (B,H,T,dh)
    k: np.ndarray
    v: np.ndarray
    probs: np.ndarray  # (B,H,T,T)
    ctx_merged: np.ndarray  # (B,T,d)
    attn_drop: np.ndarray | None
    r1: np.ndarray
    ln1: tuple[np.ndarray, np.ndarray]  # (x_hat, inv_std)
    h1: np.ndarray
    u: np.ndarray  # pre-GELU (B,T,f)
    g: np.ndarray  # post-GELU
    ffn_drop: np.ndarray | None
    r2: np.ndarray
    ln2: tuple[np.ndarray, np.ndarray]


@dataclass
class ForwardCache:
    batch: TokenBatch
    emb: np.ndarray
    emb_drop: np.ndarray | None
    layers: list[LayerCache]
    hidden: np.ndarray


def gelu(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    x_hat = (x - mean) * inv_std
    return x_hat * gain + bias, (x_hat, inv_std)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _dropout_mask(rng: np.random.Generator, shape, rate: float, dtype) -> np.ndarray:
    # Inverted dropout: mask already carries the 1/(1-rate) scale.
    keep = (rng.random(shape) >= rate).astype(dtype)
    return keep / dtype.type(1.0 - rate)


def forward(
    params: ModelParameters,
    batch: TokenBatch,
    train_mode: bool = False,
    seed: int = 0,
    want_cache: bool = False,
) -> EncoderOutput | tuple[EncoderOutput, ForwardCache]:
    """Run the encoder; dropout is active only in train mode, seeded.

    Eval mode is fully deterministic. With ``want_cache`` every intermediate
    needed by the backward pass is retained.
    """
    cfg = params.config
    t = params.tensors
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    if batch.ids.max() >= cfg.vocab_size or batch.ids.min() < 0:
        raise ValueError(
            f"token id {int(batch.ids.max())} out of range for vocab_size={cfg.vocab_size}"
        )
    seq_len = batch.ids.shape[1]
    if seq_len > cfg.max_len:
        raise ValueError(f"sequence length {seq_len} exceeds max_len={cfg.max_len}")

    dtype = cfg.np_dtype
    use_dropout = train_mode and cfg.dropout > 0.0
    rng = np.random.default_rng(seed) if use_dropout else None

    emb = t["tok_emb"][batch.ids] + t["pos_emb"][:seq_len]
    emb_drop = None
    h = emb
    if use_dropout:
        emb_drop = _dropout_mask(rng, emb.shape, cfg.dropout, dtype)
        h = h * emb_drop

    # -inf additive mask on padded keys; [CLS] is never padding, so every
    # softmax row keeps at least one finite logit.
    key_mask = np.where(batch.mask[:, None, None, :] > 0, dtype.type(0.0), dtype.type(-np.inf))

    scale = dtype.type(1.0 / np.sqrt(cfg.head_dim))
    layer_caches: list[LayerCache] = []
    for i in range(cfg.layers):
        p = f"layers.{i}."
        x_in = h
        q = _split_heads(x_in @ t[p + "wq"] + t[p + "bq"], cfg.heads)
        k = _split_heads(x_in @ t[p + "wk"] + t[p + "bk"], cfg.heads)
        v = _split_heads(x_in @ t[p + "wv"] + t[p + "bv"], cfg.heads)
        scores = q @ k.swapaxes(-1, -2) * scale + key_mask
        probs = softmax(scores)
        ctx = _merge_heads(probs @ v)
        attn_out = ctx @ t[p + "wo"] + t[p + "bo"]
        attn_drop = None
        if use_dropout:
            attn_drop = _dropout_mask(rng, attn_out.shape, cfg.dropout, dtype)
            attn_out = attn_out * attn_drop
        r1 = x_in + attn_out
        h1, ln1_cache = layer_norm(r1, t[p + "ln1_g"], t[p + "ln1_b"])

        u = h1 @ t[p + "w1"] + t[p + "b1"]
        g = gelu(u)
        ffn_out = g @ t[p + "w2"] + t[p + "b2"]
        ffn_drop = None
        if use_dropout:
            ffn_drop = _dropout_mask(rng, ffn_out.shape, cfg.dropout, dtype)
            ffn_out = ffn_out * ffn_drop
        r2 = h1 + ffn_out
        h, ln2_cache = layer_norm(r2, t[p + "ln2_g"], t[p + "ln2_b"])

        if want_cache:
            layer_caches.append(
                LayerCache(
                    x_in=x_in, q=q, k=k, v=v, probs=probs, ctx_merged=ctx,
                    attn_drop=attn_drop, r1=r1, ln1=ln1_cache, h1=h1,
                    u=u, g=g, ffn_drop=ffn_drop, r2=r2, ln2=ln2_cache,
                )
            )

    output = EncoderOutput(hidden=h)
    if want_cache:
        return output, ForwardCache(
            batch=batch, emb=emb, emb_drop=emb_drop, layers=layer_caches, hidden=h
        )
    return output


def classifier_logits(params: ModelParameters, cls_embedding: np.ndarray, task: Task) -> np.ndarray:
    key = f"cls.{task.value}.w"
    if key not in params.tensors:
        raise ValueError(f"model has no classification head for task {task.value}")
    return cls_embedding @ params.tensors[key] + params.tensors[f"cls.{task.value}.b"]


def classify(
    params: ModelParameters, batch: TokenBatch, task: Task, train_mode: bool = False, seed: int = 0
) -> np.ndarray:
    """Per-example softmax distribution over the task's labels, shape (B, C)."""
    out = forward(params, batch, train_mode=train_mode, seed=seed)
    logits = classifier_logits(params, out.cls_embedding, task)
    return softmax(logits)


def mlm_logits(
    params: ModelParameters, batch: TokenBatch, train_mode: bool = False, seed: int = 0
) -> np.ndarray:
    """Full-vocabulary logits at every position, shape (B, T, V)."""
    out = forward(params, batch, train_mode=train_mode, seed=seed)
    return out.hidden @ params.mlm_projection() + params.tensors["mlm_b"]


def save_checkpoint(params: ModelParameters, path: str | Path) -> None:
    """Write config plus all tensors; a load round-trips bit-exactly."""
    cfg = params.config
    manifest = []
    payloads = []
    for name in cfg.tensor_shapes():
        arr = params.tensors[name]
        manifest.append({"name": name, "dtype": cfg.dtype, "shape": list(arr.shape)})
        payloads.append(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
    header = json.dumps({"config": asdict(cfg), "tensors": manifest}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for payload in payloads:
            fh.write(payload)


def load_checkpoint(path: str | Path) -> ModelParameters:
    """Read a checkpoint; magic, version and manifest mismatches raise distinctly."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointMagicError(f"{path}: not a checkpoint (bad magic bytes)")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )
    (header_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + header_len:
        raise CheckpointManifestError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        raw_cfg = dict(header["config"])
        raw_cfg["tasks"] = tuple(raw_cfg["tasks"])
        cfg = EncoderConfig(**raw_cfg)
        manifest = header["tensors"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointManifestError(f"{path}: malformed header: {exc}") from None

    expected = cfg.tensor_shapes()
    if [m["name"] for m in manifest] != list(expected):
        raise CheckpointManifestError(f"{path}: tensor manifest does not match config")
    tensors: dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for entry in manifest:
        shape = tuple(entry["shape"])
        if shape != expected[entry["name"]]:
            raise CheckpointManifestError(
                f"{path}: tensor {entry['name']} has shape {shape}, config requires "
                f"{expected[entry['name']]}"
            )
        dtype = np.dtype(_DTYPES[entry["dtype"]]).newbyteorder("<")
        nbytes = int(np.prod(shape)) * dtype.itemsize
        if offset + nbytes > len(blob):
            raise CheckpointManifestError(
                f"{path}: payload truncated at tensor {entry['name']}"
            )
        arr = np.frombuffer(blob[offset : offset + nbytes], dtype=dtype).reshape(shape)
        tensors[entry["name"]] = arr.astype(cfg.np_dtype)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointManifestError(f"{path}: {len(blob) - offset} trailing bytes")
    return ModelParameters(config=cfg, tensors=tensors)
