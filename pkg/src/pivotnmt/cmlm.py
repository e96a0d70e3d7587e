"""Conditional masked language model: non-autoregressive decoder with a
length head, masked-token training, mask-predict decoding, and the one-pass
parallel sampler used by the RL loop.

Decoder slots carry the target tokens directly (no BOS shift) and attend
bidirectionally; masked slots hold the MASK embedding, so their original
identities can never leak into the forward pass. The length head classifies
payload lengths 1..k_max from mean-pooled encoder states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .decoding import Hypothesis
from .errors import ConfigError, InputError
from .rng import RngHandle
from .transformer import (ModelConfig, decode, encode, init_transformer_params,
                          output_logits, pad_batch)
from .vocab import MASK_ID, PAD_ID

LENGTH_LOSS_WEIGHT = 0.1


@dataclass(frozen=True)
class MaskingPlan:
    """Partition of target positions 0..K-1 into masked and observed sets."""
    length: int
    masked: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= len(self.masked) <= self.length:
            raise InputError(f"masked set size {len(self.masked)} invalid for length {self.length}")

    @property
    def observed(self) -> tuple[int, ...]:
        hidden = set(self.masked)
        return tuple(i for i in range(self.length) if i not in hidden)


def mask_targets(target_ids: list[int], rng: RngHandle,
                 mask_id: int = MASK_ID) -> tuple[MaskingPlan, list[int]]:
    """Mask m ~ U{1..K} positions (uniform, without replacement)."""
    k = len(target_ids)
    if k < 1:
        raise InputError("cannot mask an empty target")
    m = int(rng.integers(1, k + 1))
    positions = tuple(sorted(int(i) for i in rng.choice(k, size=m, replace=False)))
    masked_input = list(target_ids)
    for i in positions:
        masked_input[i] = mask_id
    return MaskingPlan(k, positions), masked_input


class CmlmModel:
    """Encoder-decoder that predicts masked target slots in parallel.

    ``mask_id`` is the reserved MASK token by default; micro-models whose
    vocabulary is too small for the reserved ids may designate any embeddable
    id, since fully-masked sampling never feeds drawn tokens back in.
    """

    def __init__(self, config: ModelConfig, rng: RngHandle, mask_id: int = MASK_ID):
        if config.length_classes < 1:
            raise ConfigError("CmlmModel needs length_classes >= 1 (the K_max bound)")
        if not 0 <= mask_id < config.trg_vocab:
            raise ConfigError(f"mask id {mask_id} outside target vocabulary of {config.trg_vocab}")
        self.config = config
        self.k_max = config.length_classes
        self.mask_id = mask_id
        self.params = init_transformer_params(config, rng)

    def encode_source(self, src_ids: np.ndarray, train: bool = False, rng=None):
        return encode(self.params, self.config, src_ids, train, rng)

    def slot_logits(self, slot_ids: np.ndarray, memory, memory_mask,
                    train: bool = False, rng=None) -> T.Tensor:
        hidden = decode(self.params, self.config, slot_ids, memory, memory_mask,
                        causal=False, train=train, rng=rng)
        return output_logits(self.params, hidden)

    def length_logits(self, memory, src_ids: np.ndarray) -> T.Tensor:
        """[B, k_max] logits from non-pad mean pooling of encoder states."""
        live = (src_ids != PAD_ID).astype(float)
        weights = live / live.sum(axis=1, keepdims=True)
        pooled = T.sum_(T.mul(memory, T.constant(weights[:, :, None])), axis=1)
        return T.linear(pooled, self.params["len_head.w"], self.params["len_head.b"])


def fully_masked_slots(lengths: list[int], k_max: int,
                       mask_id: int = MASK_ID) -> np.ndarray:
    """[B, max(K)] input of mask tokens, PAD beyond each row's length."""
    for k in lengths:
        if not 1 <= k <= k_max:
            raise InputError(f"target length {k} outside [1, {k_max}]")
    width = max(lengths)
    slots = np.full((len(lengths), width), PAD_ID, dtype=np.int64)
    for b, k in enumerate(lengths):
        slots[b, :k] = mask_id
    return slots


def predict_length(model: CmlmModel, src_ids: np.ndarray) -> np.ndarray:
    """Argmax of the length distribution; values in [1, k_max]."""
    with T.no_grad():
        memory, _ = model.encode_source(src_ids)
        logits = model.length_logits(memory, src_ids)
    return logits.data.argmax(axis=1) + 1


def cmlm_losses(model: CmlmModel, sources: list[list[int]],
                targets: list[list[int]], rng: RngHandle,
                train: bool = False) -> tuple[T.Tensor, T.Tensor]:
    """Masked-token and length-head mean losses for one batch.

    ``targets`` are payload token ids (no EOS); the length head is trained
    on the payload length. ``rng`` drives the masking draw (and dropout when
    ``train``), so a fixed seed makes the evaluation deterministic.
    """
    batch = len(sources)
    for i, trg in enumerate(targets):
        if len(trg) > model.k_max:
            raise InputError(f"sentence {i}: target length {len(trg)} exceeds K_max {model.k_max}")
    plans_inputs = [mask_targets(trg, rng, model.mask_id) for trg in targets]
    width = max(len(trg) for trg in targets)
    slot_ids = np.full((batch, width), PAD_ID, dtype=np.int64)
    token_targets = np.full((batch, width), -1, dtype=np.int64)
    for b, ((plan, masked_input), trg) in enumerate(zip(plans_inputs, targets)):
        slot_ids[b, :plan.length] = masked_input
        for i in plan.masked:
            token_targets[b, i] = trg[i]
    length_targets = np.array([len(trg) - 1 for trg in targets])
    n_masked = int((token_targets != -1).sum())

    src = pad_batch(sources)
    memory, memory_mask = model.encode_source(src, train=train, rng=rng)
    logits = model.slot_logits(slot_ids, memory, memory_mask, train=train, rng=rng)
    token_loss = T.scale(T.cross_entropy(logits, token_targets, ignore_id=-1), 1.0 / n_masked)
    length_loss = T.scale(T.cross_entropy(model.length_logits(memory, src), length_targets),
                          1.0 / batch)
    return token_loss, length_loss


def train_step_cmlm(model: CmlmModel, sources: list[list[int]],
                    targets: list[list[int]], optimizer, rng: RngHandle,
                    length_weight: float = LENGTH_LOSS_WEIGHT) -> tuple[float, float]:
    """One masked-token + length-head update; returns both mean losses."""
    token_loss, length_loss = cmlm_losses(model, sources, targets, rng, train=True)
    total = T.add(token_loss, T.scale(length_loss, length_weight))
    optimizer.zero_grad()
    T.backward(total)
    optimizer.step()
    return float(token_loss.data), float(length_loss.data)


def sample_parallel_batch(model: CmlmModel, sources: list[list[int]],
                          lengths: list[int], rng: RngHandle,
                          encoded=None) -> list[Hypothesis]:
    """One decoder pass on fully masked inputs; independent per-slot draws.

    Each hypothesis records its summed log-prob as the score and
    ``extra == {'passes': 1}`` — the pass count is what the sampler actually
    executed, not an estimate. ``encoded`` may carry a precomputed
    (memory, memory_mask) pair for the padded batch.
    """
    slots = fully_masked_slots(lengths, model.k_max, model.mask_id)
    with T.no_grad():
        if encoded is None:
            memory, memory_mask = model.encode_source(pad_batch(sources))
        else:
            memory, memory_mask = encoded
        log_probs = T.log_softmax(model.slot_logits(slots, memory, memory_mask)).data
    probs = np.exp(log_probs)
    probs /= probs.sum(axis=2, keepdims=True)
    draws = (probs.cumsum(axis=2) > rng.random((len(sources), slots.shape[1], 1))).argmax(axis=2)
    out = []
    for b, k in enumerate(lengths):
        ids = [int(t) for t in draws[b, :k]]
        score = float(sum(log_probs[b, i, ids[i]] for i in range(k)))
        out.append(Hypothesis(ids, score, {"passes": 1}))
    return out


def sample_parallel(model: CmlmModel, source_ids: list[int], k_hat: int,
                    rng: RngHandle) -> tuple[Hypothesis, float, int]:
    hyp = sample_parallel_batch(model, [list(source_ids)], [k_hat], rng)[0]
    return hyp, hyp.score, hyp.extra["passes"]


def sample_logprob_batch(model: CmlmModel, sources: list[list[int]],
                         pivots: list[list[int]]) -> T.Tensor:
    """Differentiable [B] tensor of Σ_k log p(z_k | fully-masked, f)."""
    lengths = [len(p) for p in pivots]
    slots = fully_masked_slots(lengths, model.k_max, model.mask_id)
    ids = np.full(slots.shape, -1, dtype=np.int64)
    for b, piv in enumerate(pivots):
        ids[b, :len(piv)] = piv
    memory, memory_mask = model.encode_source(pad_batch(sources))
    logits = model.slot_logits(slots, memory, memory_mask)
    return T.sequence_log_prob(logits, ids, ignore_id=-1)


def sample_logprob(model: CmlmModel, source_ids: list[int], pivot_ids: list[int]) -> T.Tensor:
    return T.sum_(sample_logprob_batch(model, [list(source_ids)], [list(pivot_ids)]))


def remask_counts(k_hat: int, iterations: int) -> list[int]:
    """Linear decay schedule: n_t = ceil(K * (T - t) / T) for t = 1..T-1."""
    return [math.ceil(k_hat * (iterations - t) / iterations) for t in range(1, iterations)]


def mask_predict_decode_batch(model: CmlmModel, sources: list[list[int]],
                              iterations: int) -> list[Hypothesis]:
    """Deterministic mask-predict: fill every masked slot with its argmax,
    then re-mask the lowest-probability positions on the linear schedule
    (ties broken toward the lowest index)."""
    if iterations < 1:
        raise ConfigError(f"mask-predict needs iterations >= 1, got {iterations}")
    src = pad_batch(sources)
    k_hats = predict_length(model, src)
    width = int(k_hats.max())
    batch = len(sources)
    slots = np.full((batch, width), PAD_ID, dtype=np.int64)
    live = np.zeros((batch, width), dtype=bool)
    for b, k in enumerate(k_hats):
        slots[b, :k] = model.mask_id
        live[b, :k] = True
    kept_logp = np.full((batch, width), -np.inf)
    with T.no_grad():
        memory, memory_mask = model.encode_source(src)
        for t in range(1, iterations + 1):
            log_probs = T.log_softmax(model.slot_logits(slots, memory, memory_mask)).data
            masked = (slots == model.mask_id) & live
            best = log_probs.argmax(axis=2)
            slots = np.where(masked, best, slots)
            chosen = np.take_along_axis(log_probs, slots[:, :, None], axis=2)[:, :, 0]
            kept_logp = np.where(masked, chosen, kept_logp)
            if t == iterations:
                break
            for b, k in enumerate(k_hats):
                n_t = math.ceil(int(k) * (iterations - t) / iterations)
                ranked = np.argsort(kept_logp[b, :k], kind="stable")
                slots[b, ranked[:n_t]] = model.mask_id
    out = []
    for b, k in enumerate(k_hats):
        ids = [int(x) for x in slots[b, :k]]
        score = float(kept_logp[b, :k].sum())
        out.append(Hypothesis(ids, score, {"k_hat": int(k), "passes": iterations}))
    return out


def mask_predict_decode(model: CmlmModel, source_ids: list[int], iterations: int) -> Hypothesis:
    return mask_predict_decode_batch(model, [list(source_ids)], iterations)[0]
