"""Search and sampling for the autoregressive model.

All decoders run the full decoder stack over the current prefix at every
step (no incremental state cache); at desk scale the quadratic cost is
irrelevant and the code stays close to the math. Hypothesis payloads
exclude EOS; scores sum the log-probabilities of every emitted decision,
including the terminating EOS when one was produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .transformer import ArModel, pad_batch
from .vocab import BOS_ID, EOS_ID, PAD_ID


@dataclass
class Hypothesis:
    """Token-id payload (no EOS) plus the model score that produced it."""
    ids: list[int]
    score: float
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)


def _log_probs_at_last(model: ArModel, trg_in: np.ndarray, memory, memory_mask) -> np.ndarray:
    logits = model.logits_from_memory(trg_in, memory, memory_mask)
    return T.log_softmax(logits).data[:, -1, :]


def greedy_decode_batch(model: ArModel, sources: list[list[int]], max_len: int) -> list[Hypothesis]:
    """Left-to-right argmax for a batch of sources; stops rows at EOS."""
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    with T.no_grad():
        src = pad_batch(sources)
        memory, memory_mask = model.encode_source(src)
        n = len(sources)
        trg_in = np.full((n, 1), BOS_ID, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        scores = np.zeros(n)
        payloads: list[list[int]] = [[] for _ in range(n)]
        for _ in range(max_len):
            log_probs = _log_probs_at_last(model, trg_in, memory, memory_mask)
            picks = log_probs.argmax(axis=1)
            picks[done] = PAD_ID
            for b in range(n):
                if done[b]:
                    continue
                scores[b] += log_probs[b, picks[b]]
                if picks[b] == EOS_ID:
                    done[b] = True
                else:
                    payloads[b].append(int(picks[b]))
            if done.all():
                break
            trg_in = np.concatenate([trg_in, picks[:, None]], axis=1)
    return [Hypothesis(payloads[b], float(scores[b])) for b in range(n)]


def greedy_decode(model: ArModel, source_ids: list[int], max_len: int) -> Hypothesis:
    return greedy_decode_batch(model, [list(source_ids)], max_len)[0]


def sample_autoregressive_batch(model: ArModel, sources: list[list[int]], max_len: int,
                                rng, encoded=None) -> list[Hypothesis]:
    """Multinomial ancestral sampling; ``extra['passes']`` counts each row's draws.

    ``encoded`` may carry a precomputed (memory, memory_mask) pair for the
    padded batch, so callers that time the decoder can pay the encoder cost
    elsewhere.
    """
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    with T.no_grad():
        if encoded is None:
            memory, memory_mask = model.encode_source(pad_batch(sources))
        else:
            memory, memory_mask = encoded
        n = len(sources)
        trg_in = np.full((n, 1), BOS_ID, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        scores = np.zeros(n)
        passes = np.zeros(n, dtype=np.int64)
        payloads: list[list[int]] = [[] for _ in range(n)]
        for _ in range(max_len):
            log_probs = _log_probs_at_last(model, trg_in, memory, memory_mask)
            probs = np.exp(log_probs)
            probs /= probs.sum(axis=1, keepdims=True)
            draws = (probs.cumsum(axis=1) > rng.random((n, 1))).argmax(axis=1)
            draws[done] = PAD_ID
            for b in range(n):
                if done[b]:
                    continue
                passes[b] += 1
                scores[b] += log_probs[b, draws[b]]
                if draws[b] == EOS_ID:
                    done[b] = True
                else:
                    payloads[b].append(int(draws[b]))
            if done.all():
                break
            trg_in = np.concatenate([trg_in, draws[:, None]], axis=1)
    return [Hypothesis(payloads[b], float(scores[b]), {"passes": int(passes[b])})
            for b in range(n)]


def sample_autoregressive(model: ArModel, source_ids: list[int], max_len: int,
                          rng) -> tuple[Hypothesis, int]:
    hyp = sample_autoregressive_batch(model, [list(source_ids)], max_len, rng)[0]
    return hyp, hyp.extra["passes"]


def _finish(ids: list[int], score: float, decisions: int) -> Hypothesis:
    norm = score / max(decisions, 1)
    return Hypothesis(ids, score, {"norm_score": norm})


def beam_decode(model: ArModel, source_ids: list[int], beam_size: int, max_len: int) -> list[Hypothesis]:
    """Beam search with a shrinking frontier: each step keeps the overall top
    (beam_size - finished) continuations, so EOS candidates permanently trade
    a live slot for a finished hypothesis. Beam 1 therefore reduces exactly
    to greedy decoding. Returns finished hypotheses sorted by
    length-normalized score (score / decision count, EOS included)."""
    if beam_size < 1:
        raise ConfigError(f"beam size must be >= 1, got {beam_size}")
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    with T.no_grad():
        src = pad_batch([list(source_ids)])
        memory, memory_mask = model.encode_source(src)
        mem_data = memory.data
        beams: list[tuple[list[int], float]] = [([], 0.0)]
        finished: list[Hypothesis] = []
        for _ in range(max_len):
            width = beam_size - len(finished)
            trg_in = pad_batch([[BOS_ID] + ids for ids, _ in beams])
            tiled = T.constant(np.repeat(mem_data, len(beams), axis=0))
            tiled_mask = np.repeat(memory_mask, len(beams), axis=0)
            log_probs = _log_probs_at_last(model, trg_in, tiled, tiled_mask)
            candidates: list[tuple[float, list[int], int]] = []
            for b, (ids, score) in enumerate(beams):
                for tok in np.argsort(log_probs[b])[::-1][:width]:
                    candidates.append((score + float(log_probs[b, tok]), ids, int(tok)))
            candidates.sort(key=lambda c: c[0], reverse=True)
            beams = []
            for score, ids, tok in candidates[:width]:
                if tok == EOS_ID:
                    finished.append(_finish(ids, score, len(ids) + 1))
                else:
                    beams.append((ids + [tok], score))
            if not beams:
                break
        for ids, score in beams:
            finished.append(_finish(ids, score, len(ids)))  # length budget ran out
    finished.sort(key=lambda h: h.extra["norm_score"], reverse=True)
    return finished[:beam_size]
