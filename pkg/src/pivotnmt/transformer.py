"""Transformer encoder-decoder built on the tape engine.

Pre-LN residual blocks, learned positional embeddings, multi-head attention
with additive masks. The same parameter layout serves both the
autoregressive model (causal self-attention in the decoder) and the
conditional masked LM (bidirectional decoder plus a length head); the two
model classes below differ only in how they wire the blocks together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .rng import RngHandle
from .vocab import PAD_ID, BOS_ID

NEG_INF = -1e9


@dataclass
class ModelConfig:
    src_vocab: int
    trg_vocab: int
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ff_dim: int = 128
    max_len: int = 64
    dropout: float = 0.1
    label_smoothing: float = 0.0
    length_classes: int = 0  # > 0 switches on the CMLM length head

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        if min(self.src_vocab, self.trg_vocab, self.dim, self.layers,
               self.heads, self.ff_dim, self.max_len) < 1:
            raise ConfigError("model dimensions must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label smoothing must be in [0, 1), got {self.label_smoothing}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**{f: data[f] for f in cls.__dataclass_fields__})


def pad_batch(sequences: list[list[int]], pad_id: int = PAD_ID) -> np.ndarray:
    """Right-pad variable-length id lists into a [B, T] int array."""
    width = max(len(s) for s in sequences)
    out = np.full((len(sequences), width), pad_id, dtype=np.int64)
    for i, seq in enumerate(sequences):
        out[i, :len(seq)] = seq
    return out


def key_padding_mask(ids: np.ndarray, pad_id: int = PAD_ID) -> np.ndarray:
    """[B, T] ids -> [B, 1, 1, T] additive mask (NEG_INF on pad keys)."""
    return np.where(ids == pad_id, NEG_INF, 0.0)[:, None, None, :]


def causal_mask(length: int) -> np.ndarray:
    """[1, 1, T, T] additive mask hiding future positions."""
    mask = np.triu(np.full((length, length), NEG_INF), k=1)
    return mask[None, None, :, :]


# ---------------------------------------------------------------------------
# parameter initialisation

def _init_attn(params, rng, prefix: str, dim: int) -> None:
    for name in ("wq", "wk", "wv", "wo"):
        params[f"{prefix}.{name}"] = T.parameter(rng.normal(0.0, 0.02, size=(dim, dim)))
    for name in ("bq", "bk", "bv", "bo"):
        params[f"{prefix}.{name}"] = T.parameter(np.zeros(dim))


def _init_ln(params, prefix: str, dim: int) -> None:
    params[f"{prefix}.gain"] = T.parameter(np.ones(dim))
    params[f"{prefix}.bias"] = T.parameter(np.zeros(dim))


def init_transformer_params(config: ModelConfig, rng: RngHandle) -> dict[str, T.Tensor]:
    """Fresh parameter dictionary; iteration order is the creation order."""
    d, ff = config.dim, config.ff_dim
    params: dict[str, T.Tensor] = {}
    params["src_embed.table"] = T.parameter(rng.normal(0.0, 0.02, size=(config.src_vocab, d)))
    params["trg_embed.table"] = T.parameter(rng.normal(0.0, 0.02, size=(config.trg_vocab, d)))
    params["pos_embed.table"] = T.parameter(rng.normal(0.0, 0.02, size=(config.max_len, d)))
    for i in range(config.layers):
        _init_attn(params, rng, f"enc{i}.attn", d)
        _init_ln(params, f"enc{i}.ln1", d)
        params[f"enc{i}.ff.w1"] = T.parameter(rng.normal(0.0, 0.02, size=(d, ff)))
        params[f"enc{i}.ff.b1"] = T.parameter(np.zeros(ff))
        params[f"enc{i}.ff.w2"] = T.parameter(rng.normal(0.0, 0.02, size=(ff, d)))
        params[f"enc{i}.ff.b2"] = T.parameter(np.zeros(d))
        _init_ln(params, f"enc{i}.ln2", d)
    _init_ln(params, "enc.ln_final", d)
    for i in range(config.layers):
        _init_attn(params, rng, f"dec{i}.self_attn", d)
        _init_ln(params, f"dec{i}.ln1", d)
        _init_attn(params, rng, f"dec{i}.cross_attn", d)
        _init_ln(params, f"dec{i}.ln2", d)
        params[f"dec{i}.ff.w1"] = T.parameter(rng.normal(0.0, 0.02, size=(d, ff)))
        params[f"dec{i}.ff.b1"] = T.parameter(np.zeros(ff))
        params[f"dec{i}.ff.w2"] = T.parameter(rng.normal(0.0, 0.02, size=(ff, d)))
        params[f"dec{i}.ff.b2"] = T.parameter(np.zeros(d))
        _init_ln(params, f"dec{i}.ln3", d)
    _init_ln(params, "dec.ln_final", d)
    params["out.w"] = T.parameter(rng.normal(0.0, 0.02, size=(d, config.trg_vocab)))
    params["out.b"] = T.parameter(np.zeros(config.trg_vocab))
    if config.length_classes > 0:
        params["len_head.w"] = T.parameter(rng.normal(0.0, 0.02, size=(d, config.length_classes)))
        params["len_head.b"] = T.parameter(np.zeros(config.length_classes))
    return params


# ---------------------------------------------------------------------------
# blocks

def multi_head_attention(params, prefix: str, query, memory, mask: np.ndarray | None,
                         heads: int, dropout_rate: float, train: bool, rng) -> T.Tensor:
    """Scaled dot-product attention; ``mask`` is additive, broadcast to scores."""
    batch, q_len, dim = query.data.shape
    k_len = memory.data.shape[1]
    head_dim = dim // heads

    def split(x, length):
        return T.transpose(T.reshape(x, (batch, length, heads, head_dim)), (0, 2, 1, 3))

    q = split(T.linear(query, params[f"{prefix}.wq"], params[f"{prefix}.bq"]), q_len)
    k = split(T.linear(memory, params[f"{prefix}.wk"], params[f"{prefix}.bk"]), k_len)
    v = split(T.linear(memory, params[f"{prefix}.wv"], params[f"{prefix}.bv"]), k_len)

    scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_dim))
    if mask is not None:
        scores = T.add(scores, T.constant(mask))
    weights = T.dropout(T.softmax(scores), dropout_rate, rng, train)
    mixed = T.matmul(weights, v)
    merged = T.reshape(T.transpose(mixed, (0, 2, 1, 3)), (batch, q_len, dim))
    return T.linear(merged, params[f"{prefix}.wo"], params[f"{prefix}.bo"])


def feed_forward(params, prefix: str, x, dropout_rate: float, train: bool, rng) -> T.Tensor:
    hidden = T.relu(T.linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    hidden = T.dropout(hidden, dropout_rate, rng, train)
    return T.linear(hidden, params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def _embed(params, table_name: str, ids: np.ndarray, config: ModelConfig,
           train: bool, rng) -> T.Tensor:
    length = ids.shape[1]
    if length > config.max_len:
        raise ShapeError(f"sequence length {length} exceeds max_len {config.max_len}")
    tok = T.scale(T.embedding(params[table_name], ids), math.sqrt(config.dim))
    pos = T.embedding(params["pos_embed.table"], np.tile(np.arange(length), (ids.shape[0], 1)))
    return T.dropout(T.add(tok, pos), config.dropout, rng, train)


def encode(params, config: ModelConfig, src_ids: np.ndarray,
           train: bool = False, rng=None) -> tuple[T.Tensor, np.ndarray]:
    """Run the encoder stack; returns (memory [B,Ts,D], key padding mask)."""
    mask = key_padding_mask(src_ids)
    x = _embed(params, "src_embed.table", src_ids, config, train, rng)
    for i in range(config.layers):
        normed = T.layer_norm(x, params[f"enc{i}.ln1.gain"], params[f"enc{i}.ln1.bias"])
        attn = multi_head_attention(params, f"enc{i}.attn", normed, normed, mask,
                                    config.heads, config.dropout, train, rng)
        x = T.add(x, T.dropout(attn, config.dropout, rng, train))
        normed = T.layer_norm(x, params[f"enc{i}.ln2.gain"], params[f"enc{i}.ln2.bias"])
        ff = feed_forward(params, f"enc{i}.ff", normed, config.dropout, train, rng)
        x = T.add(x, T.dropout(ff, config.dropout, rng, train))
    memory = T.layer_norm(x, params["enc.ln_final.gain"], params["enc.ln_final.bias"])
    return memory, mask


def decode(params, config: ModelConfig, trg_ids: np.ndarray, memory, memory_mask: np.ndarray,
           causal: bool, train: bool = False, rng=None) -> T.Tensor:
    """Run the decoder stack over ``trg_ids``; returns hidden states [B,Tt,D]."""
    length = trg_ids.shape[1]
    self_mask = key_padding_mask(trg_ids)
    if causal:
        self_mask = self_mask + causal_mask(length)
    x = _embed(params, "trg_embed.table", trg_ids, config, train, rng)
    for i in range(config.layers):
        normed = T.layer_norm(x, params[f"dec{i}.ln1.gain"], params[f"dec{i}.ln1.bias"])
        attn = multi_head_attention(params, f"dec{i}.self_attn", normed, normed, self_mask,
                                    config.heads, config.dropout, train, rng)
        x = T.add(x, T.dropout(attn, config.dropout, rng, train))
        normed = T.layer_norm(x, params[f"dec{i}.ln2.gain"], params[f"dec{i}.ln2.bias"])
        attn = multi_head_attention(params, f"dec{i}.cross_attn", normed, memory, memory_mask,
                                    config.heads, config.dropout, train, rng)
        x = T.add(x, T.dropout(attn, config.dropout, rng, train))
        normed = T.layer_norm(x, params[f"dec{i}.ln3.gain"], params[f"dec{i}.ln3.bias"])
        ff = feed_forward(params, f"dec{i}.ff", normed, config.dropout, train, rng)
        x = T.add(x, T.dropout(ff, config.dropout, rng, train))
    return T.layer_norm(x, params["dec.ln_final.gain"], params["dec.ln_final.bias"])


def output_logits(params, hidden) -> T.Tensor:
    return T.linear(hidden, params["out.w"], params["out.b"])


# ---------------------------------------------------------------------------
# autoregressive model

def shift_right(trg_ids: np.ndarray, bos_id: int = BOS_ID, pad_id: int = PAD_ID) -> np.ndarray:
    """Teacher-forcing input: BOS followed by the target shifted one right."""
    out = np.full_like(trg_ids, pad_id)
    out[:, 0] = bos_id
    out[:, 1:] = trg_ids[:, :-1]
    return out


class ArModel:
    """Autoregressive encoder-decoder; emits left to right under a causal mask."""

    def __init__(self, config: ModelConfig, rng: RngHandle):
        if config.length_classes:
            raise ConfigError("the autoregressive model takes no length head")
        self.config = config
        self.params = init_transformer_params(config, rng)

    def encode_source(self, src_ids: np.ndarray, train: bool = False, rng=None):
        return encode(self.params, self.config, src_ids, train, rng)

    def logits_from_memory(self, trg_in_ids: np.ndarray, memory, memory_mask,
                           train: bool = False, rng=None) -> T.Tensor:
        hidden = decode(self.params, self.config, trg_in_ids, memory, memory_mask,
                        causal=True, train=train, rng=rng)
        return output_logits(self.params, hidden)

    def logits(self, src_ids: np.ndarray, trg_in_ids: np.ndarray,
               train: bool = False, rng=None) -> T.Tensor:
        memory, memory_mask = self.encode_source(src_ids, train, rng)
        return self.logits_from_memory(trg_in_ids, memory, memory_mask, train, rng)

    def mle_loss(self, src_ids: np.ndarray, trg_ids: np.ndarray,
                 train: bool = False, rng=None) -> tuple[T.Tensor, int]:
        """Token-mean teacher-forced cross-entropy; returns (loss, token count).

        With label smoothing eps the per-token target distribution becomes
        (1-eps)*one-hot + eps*uniform, i.e. the loss mixes the NLL with the
        mean negative log-probability over the vocabulary.
        """
        logits = self.logits(src_ids, shift_right(trg_ids), train, rng)
        n_tokens = int((trg_ids != PAD_ID).sum())
        nll = T.cross_entropy(logits, trg_ids, ignore_id=PAD_ID)
        eps = self.config.label_smoothing
        if eps > 0.0:
            vocab = logits.data.shape[-1]
            keep = (trg_ids != PAD_ID).astype(np.float64)[..., None] / vocab
            uniform = T.neg(T.sum_(T.mul(T.log_softmax(logits), T.constant(keep))))
            total = T.add(T.scale(nll, 1.0 - eps), T.scale(uniform, eps))
        else:
            total = nll
        loss = T.scale(total, 1.0 / n_tokens)
        return loss, n_tokens

    def train_step_mle(self, src_ids: np.ndarray, trg_ids: np.ndarray,
                       optimizer, rng: RngHandle) -> float:
        loss, _ = self.mle_loss(src_ids, trg_ids, train=True, rng=rng)
        optimizer.zero_grad()
        T.backward(loss)
        optimizer.step()
        return float(loss.data)
