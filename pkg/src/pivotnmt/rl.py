"""Two-step cascade decoding, reward computation, and REINFORCE fine-tuning
of the non-autoregressive src->piv model against a frozen piv->trg model.

The training loop per batch: predict each pivot length (argmax of the
length head), draw one pivot per sentence with a single parallel decoder
pass, score it through the frozen target model, and ascend the surrogate
mean(reward * log p(pivot | source)) — the REINFORCE estimator of the
expected-reward gradient. Only the src->piv parameters move; the target
model is never touched, let alone updated.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import tensor as T
from .cmlm import (CmlmModel, mask_predict_decode_batch, predict_length,
                   sample_logprob_batch, sample_parallel_batch)
from .corpus import decode as decode_ids
from .decoding import Hypothesis, beam_decode, greedy_decode_batch
from .errors import ConfigError, InputError
from .metrics import corpus_bleu, sentence_bleu, sentence_chrf
from .optim import Adam, GradientDescent
from .rng import RngHandle, seed_rng
from .transformer import ArModel, pad_batch
from .vocab import EOS_ID, Vocabulary

log = logging.getLogger(__name__)

REWARD_KINDS = ("negce", "bleu", "chrf")


class RewardKind:
    NEGCE = "negce"
    SENT_BLEU = "bleu"
    SENT_CHRF = "chrf"


@dataclass
class RlConfig:
    reward: str = RewardKind.NEGCE
    lr: float = 5e-6                  # within the 1e-6..1e-5 band
    optimizer: str = "adam"           # "adam" | "ascent"
    batch_size: int = 16
    target_decode: str = "greedy"     # "greedy" | "beam"
    beam_size: int = 4
    negce_divisor: float = 10.0
    negce_sign: str = "likelihood"    # "inverted" flips it, for setups that descend
    decode_iterations: int = 5        # mask-predict T for dev decoding
    max_target_len: int = 64
    use_baseline: bool = False        # moving-average reward baseline
    baseline_momentum: float = 0.9
    sample_length: bool = False       # sample K from the length head instead of argmax
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.reward not in REWARD_KINDS:
            raise ConfigError(f"unknown reward kind {self.reward!r}; pick one of {REWARD_KINDS}")
        if self.lr <= 0 or self.negce_divisor <= 0:
            raise ConfigError("learning rate and NegCE divisor must be positive")
        if self.optimizer not in ("adam", "ascent"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.negce_sign not in ("likelihood", "inverted"):
            raise ConfigError(f"negce_sign must be 'likelihood' or 'inverted', got {self.negce_sign!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CascadeResult:
    pivot: Hypothesis
    target: Hypothesis
    pivot_score: float | None = None
    target_score: float | None = None


@dataclass
class DecodeConfig:
    """How the two cascade stages search: the first stage is mask-predict
    for a CMLM and beam/greedy for an AR model; the second stage is always
    autoregressive."""
    iterations: int = 5
    stage1_beam: int = 4
    stage2: str = "greedy"            # "greedy" | "beam"
    stage2_beam: int = 4
    max_pivot_len: int = 64
    max_target_len: int = 64


def make_optimizer(model: CmlmModel, config: RlConfig):
    params = list(model.params.values())
    if config.optimizer == "adam":
        return Adam(params, lr=config.lr)
    return GradientDescent(params, lr=config.lr)


def _check_joint_vocab(src2piv, piv2trg: ArModel) -> None:
    if src2piv.config.trg_vocab != piv2trg.config.src_vocab:
        raise ConfigError(
            f"cascade vocabulary mismatch: stage 1 emits {src2piv.config.trg_vocab} ids, "
            f"stage 2 reads {piv2trg.config.src_vocab}")


def _stage2_sources(pivots: list[Hypothesis]) -> list[list[int]]:
    # the pivot hypothesis is passed on verbatim, EOS-terminated like any source
    return [hyp.ids + [EOS_ID] for hyp in pivots]


def two_step_decode_batch(src2piv, piv2trg: ArModel, sources: list[list[int]],
                          config: DecodeConfig) -> list[CascadeResult]:
    """Decode pivots, then translate exactly those pivots; one per sentence."""
    _check_joint_vocab(src2piv, piv2trg)
    if isinstance(src2piv, CmlmModel):
        pivots = mask_predict_decode_batch(src2piv, sources, config.iterations)
    elif config.stage1_beam > 1:
        pivots = [beam_decode(src2piv, s, config.stage1_beam, config.max_pivot_len)[0]
                  for s in sources]
    else:
        pivots = greedy_decode_batch(src2piv, sources, config.max_pivot_len)
    stage2_src = _stage2_sources(pivots)
    if config.stage2 == "beam":
        targets = [beam_decode(piv2trg, s, config.stage2_beam, config.max_target_len)[0]
                   for s in stage2_src]
    else:
        targets = greedy_decode_batch(piv2trg, stage2_src, config.max_target_len)
    return [CascadeResult(pivot=p, target=t) for p, t in zip(pivots, targets)]


def two_step_decode(src2piv, piv2trg: ArModel, source_ids: list[int],
                    config: DecodeConfig) -> CascadeResult:
    return two_step_decode_batch(src2piv, piv2trg, [list(source_ids)], config)[0]


# ---------------------------------------------------------------------------
# rewards

def _reference_log_prob(piv2trg: ArModel, pivot_ids: list[int],
                        reference_ids: list[int]) -> float:
    """Σ_i log p_pt(e_i | e_1^{i-1}, z) over the reference payload tokens."""
    return _reference_log_probs_batch(piv2trg, [pivot_ids], [reference_ids])[0]


def _reference_log_probs_batch(piv2trg: ArModel, pivots: list[list[int]],
                               references: list[list[int]]) -> list[float]:
    from .transformer import shift_right
    with T.no_grad():
        src = pad_batch([p + [EOS_ID] for p in pivots])
        trg = pad_batch([r + [EOS_ID] for r in references])
        logits = piv2trg.logits(src, shift_right(trg))
        logp = T.log_softmax(logits).data
    out = []
    for b, ref in enumerate(references):
        out.append(float(sum(logp[b, i, ref[i]] for i in range(len(ref)))))
    return out


def compute_reward(kind: str, piv2trg: ArModel, pivot_ids: list[int],
                   reference_ids: list[int], config: RlConfig,
                   vocab: Vocabulary) -> float:
    """Scalar feedback for one pivot hypothesis.

    NegCE is the length-normalized reference log-likelihood divided by the
    configured divisor (the likelihood-increasing direction; the 'paper'
    sign flag flips it). BLEU and chrF score a decoded target hypothesis
    against the reference and pass through at native scale.
    """
    if not reference_ids:
        raise InputError("reward computation needs a non-empty reference")
    if kind == RewardKind.NEGCE:
        total = _reference_log_prob(piv2trg, pivot_ids, reference_ids)
        r = total / (config.negce_divisor * len(reference_ids))
        return -r if config.negce_sign == "inverted" else r
    hyp = _decode_targets(piv2trg, [pivot_ids], config)[0]
    hyp_text = decode_ids(hyp.ids, vocab)
    ref_text = decode_ids(reference_ids, vocab)
    if kind == RewardKind.SENT_BLEU:
        return sentence_bleu(hyp_text.split(), ref_text.split()).value
    if kind == RewardKind.SENT_CHRF:
        return sentence_chrf(hyp_text, ref_text).value
    raise ConfigError(f"unknown reward kind {kind!r}")


def _decode_targets(piv2trg: ArModel, pivots: list[list[int]],
                    config: RlConfig) -> list[Hypothesis]:
    sources = [p + [EOS_ID] for p in pivots]
    if config.target_decode == "beam":
        return [beam_decode(piv2trg, s, config.beam_size, config.max_target_len)[0]
                for s in sources]
    return greedy_decode_batch(piv2trg, sources, config.max_target_len)


def _batch_rewards(piv2trg: ArModel, pivots: list[list[int]],
                   references: list[list[int]], config: RlConfig,
                   vocab: Vocabulary) -> np.ndarray:
    for ref in references:
        if not ref:
            raise InputError("reward computation needs a non-empty reference")
    if config.reward == RewardKind.NEGCE:
        totals = _reference_log_probs_batch(piv2trg, pivots, references)
        rs = [t / (config.negce_divisor * len(ref)) for t, ref in zip(totals, references)]
        if config.negce_sign == "inverted":
            rs = [-r for r in rs]
        return np.array(rs)
    hyps = _decode_targets(piv2trg, pivots, config)
    out = []
    for hyp, ref in zip(hyps, references):
        hyp_text = decode_ids(hyp.ids, vocab)
        ref_text = decode_ids(ref, vocab)
        if config.reward == RewardKind.SENT_BLEU:
            out.append(sentence_bleu(hyp_text.split(), ref_text.split()).value)
        else:
            out.append(sentence_chrf(hyp_text, ref_text).value)
    return np.array(out)


# ---------------------------------------------------------------------------
# the REINFORCE loop

class RewardBaseline:
    """Optional moving-average control variate, off by default."""

    def __init__(self, momentum: float):
        self.momentum = momentum
        self.value: float | None = None

    def shift(self, rewards: np.ndarray) -> np.ndarray:
        if self.value is None:
            self.value = float(rewards.mean())
        shifted = rewards - self.value
        self.value = self.momentum * self.value + (1 - self.momentum) * float(rewards.mean())
        return shifted


def _predict_or_sample_lengths(cmlm: CmlmModel, src: np.ndarray, config: RlConfig,
                               rng: RngHandle) -> list[int]:
    if not config.sample_length:
        return [int(k) for k in predict_length(cmlm, src)]
    with T.no_grad():
        memory, _ = cmlm.encode_source(src)
        probs = T.softmax(cmlm.length_logits(memory, src)).data
    draws = (probs.cumsum(axis=1) > rng.random((len(probs), 1))).argmax(axis=1)
    return [int(k) + 1 for k in draws]


def reinforce_step(cmlm: CmlmModel, piv2trg: ArModel, batch: list[tuple[list[int], list[int]]],
                   config: RlConfig, optimizer, rng: RngHandle,
                   baseline: RewardBaseline | None = None,
                   vocab: Vocabulary | None = None) -> float:
    """One sampled-pivot policy-gradient update; returns the batch-mean reward.

    The frozen target model only ever runs under no_grad, so its parameters
    are bit-identical before and after — asserted by the test suite, relied
    on everywhere.
    """
    _check_joint_vocab(cmlm, piv2trg)
    if config.reward != RewardKind.NEGCE and vocab is None:
        raise ConfigError("BLEU/chrF rewards need the vocabulary to detokenize hypotheses")
    sources = [src for src, _ in batch]
    references = [ref for _, ref in batch]
    src = pad_batch(sources)
    k_hats = _predict_or_sample_lengths(cmlm, src, config, rng)
    sampled = sample_parallel_batch(cmlm, sources, k_hats, rng)
    pivots = [h.ids for h in sampled]
    rewards = _batch_rewards(piv2trg, pivots, references, config, vocab)
    mean_reward = float(rewards.mean())
    if not np.isfinite(rewards).all():
        log.warning("non-finite reward in batch; skipping update (divergence signal)")
        return mean_reward
    effective = baseline.shift(rewards) if baseline is not None else rewards
    log_probs = sample_logprob_batch(cmlm, sources, pivots)
    surrogate = T.mean_(T.mul(log_probs, T.constant(effective)))
    optimizer.zero_grad()
    T.backward(T.neg(surrogate))  # descent on -surrogate == ascent on E[r]
    optimizer.step()
    return mean_reward


def evaluate_cascade(src2piv, piv2trg: ArModel, sources: list[list[int]],
                     target_references: list[str], decode_config: DecodeConfig,
                     vocab: Vocabulary,
                     pivot_references: list[str] | None = None,
                     batch_size: int = 64) -> tuple[float, list[CascadeResult]]:
    """Corpus BLEU of cascade outputs vs references, plus per-sentence results
    (sentence BLEU of both stages when references are available)."""
    if len(sources) != len(target_references):
        raise InputError(f"line mismatch: {len(sources)} sources vs {len(target_references)} references")
    if pivot_references is not None and len(pivot_references) != len(sources):
        raise InputError("pivot reference line count does not match sources")
    results: list[CascadeResult] = []
    for start in range(0, len(sources), batch_size):
        results.extend(two_step_decode_batch(
            src2piv, piv2trg, sources[start:start + batch_size], decode_config))
    hyp_lines = [decode_ids(r.target.ids, vocab) for r in results]
    for i, result in enumerate(results):
        result.target_score = sentence_bleu(hyp_lines[i].split(),
                                            target_references[i].split()).value
        if pivot_references is not None:
            pivot_line = decode_ids(result.pivot.ids, vocab)
            result.pivot_score = sentence_bleu(pivot_line.split(),
                                               pivot_references[i].split()).value
    score = corpus_bleu(hyp_lines, list(target_references))
    return score.value, results


def rl_finetune(cmlm: CmlmModel, piv2trg: ArModel,
                train_pairs: list[tuple[list[int], list[int]]],
                dev_sources: list[list[int]], dev_references: list[str],
                config: RlConfig, vocab: Vocabulary) -> tuple[list[dict], dict[str, np.ndarray]]:
    """Epochs of shuffled REINFORCE batches with per-epoch dev cascade BLEU.

    Returns (report, best parameter snapshot); the report is one record per
    epoch {epoch, mean_reward, dev_bleu, wall_seconds}.
    """
    if not train_pairs:
        raise InputError("rl_finetune needs a non-empty training corpus")
    rng = seed_rng(config.seed)
    optimizer = make_optimizer(cmlm, config)
    baseline = RewardBaseline(config.baseline_momentum) if config.use_baseline else None
    decode_config = DecodeConfig(iterations=config.decode_iterations,
                                 max_target_len=config.max_target_len)
    report: list[dict] = []
    best_bleu = -1.0
    best_state = {n: p.data.copy() for n, p in cmlm.params.items()}
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_pairs))
        rewards = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_pairs[i] for i in order[start:start + config.batch_size]]
            rewards.append(reinforce_step(cmlm, piv2trg, batch, config, optimizer,
                                          rng, baseline, vocab))
        dev_bleu, _ = evaluate_cascade(cmlm, piv2trg, dev_sources, dev_references,
                                       decode_config, vocab)
        if dev_bleu > best_bleu:
            best_bleu = dev_bleu
            best_state = {n: p.data.copy() for n, p in cmlm.params.items()}
        report.append({
            "epoch": epoch,
            "mean_reward": float(np.mean(rewards)),
            "dev_bleu": dev_bleu,
            "wall_seconds": time.perf_counter() - started,
        })
        log.info("epoch %d: mean reward %.4f, dev BLEU %.2f", epoch,
                 report[-1]["mean_reward"], dev_bleu)
    return report, best_state


# ---------------------------------------------------------------------------
# sequence-level knowledge distillation

def distill_corpus(teacher: ArModel, sources: list[list[int]], beam_size: int,
                   max_len: int, batch_size: int = 64) -> list[list[int]]:
    """Teacher beam outputs for every source line, in order; deterministic."""
    if beam_size == 1:
        out = []
        for start in range(0, len(sources), batch_size):
            out.extend(h.ids for h in
                       greedy_decode_batch(teacher, sources[start:start + batch_size], max_len))
        return out
    return [beam_decode(teacher, s, beam_size, max_len)[0].ids for s in sources]
