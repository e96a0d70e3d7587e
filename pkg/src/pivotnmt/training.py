"""Epoch drivers for maximum-likelihood pre-training of both model kinds.

Each epoch reshuffles with the seeded stream, packs sentences greedily in
order under a padded-token budget, and anneals the learning rate on the
inverse-square-root schedule with linear warmup. Dev loss is evaluated after
every epoch; for the masked model, the dev masking is drawn from a fixed
seed so the numbers are comparable across epochs and across runs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from . import tensor as T
from .cmlm import LENGTH_LOSS_WEIGHT, CmlmModel, cmlm_losses, train_step_cmlm
from .corpus import batch_by_tokens
from .errors import ConfigError
from .optim import Adam, inverse_sqrt_lr
from .rng import RngHandle, seed_rng
from .transformer import ArModel, pad_batch

log = logging.getLogger(__name__)

DEV_MASK_SEED = 993


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float
    wall_seconds: float
    extra: dict | None = None

    def to_dict(self) -> dict:
        out = {"epoch": self.epoch, "train_loss": self.train_loss,
               "dev_loss": self.dev_loss, "lr": self.lr,
               "wall_seconds": self.wall_seconds}
        if self.extra:
            out.update(self.extra)
        return out


def _epoch_batches(pairs, rng: RngHandle, token_budget: int):
    order = rng.permutation(len(pairs))
    shuffled = [pairs[int(i)] for i in order]
    index_batches = batch_by_tokens(shuffled, token_budget)
    return [[shuffled[i] for i in batch] for batch in index_batches]


def dev_loss_ar(model: ArModel, dev_pairs: list[tuple[list[int], list[int]]],
                token_budget: int = 4096) -> float:
    """Token-weighted teacher-forced NLL over the dev set."""
    total_nll = 0.0
    total_tokens = 0
    with T.no_grad():
        for batch in [dev_pairs[i:i + 64] for i in range(0, len(dev_pairs), 64)]:
            src = pad_batch([s for s, _ in batch])
            trg = pad_batch([t for _, t in batch])
            loss, n_tokens = model.mle_loss(src, trg)
            total_nll += float(loss.data) * n_tokens
            total_tokens += n_tokens
    return total_nll / total_tokens


def dev_loss_cmlm(model: CmlmModel, dev_pairs: list[tuple[list[int], list[int]]],
                  mask_seed: int = DEV_MASK_SEED) -> tuple[float, float]:
    """(masked-token loss, length loss), batch-size-weighted means.

    The masking pattern comes from ``mask_seed`` alone, so two models
    evaluated on the same dev set see identical masked positions.
    """
    mask_rng = seed_rng(mask_seed)
    token_sum = length_sum = 0.0
    n = 0
    with T.no_grad():
        for batch in [dev_pairs[i:i + 64] for i in range(0, len(dev_pairs), 64)]:
            token_loss, length_loss = cmlm_losses(
                model, [s for s, _ in batch], [t for _, t in batch], mask_rng)
            token_sum += float(token_loss.data) * len(batch)
            length_sum += float(length_loss.data) * len(batch)
            n += len(batch)
    return token_sum / n, length_sum / n


def train_ar(model: ArModel, train_pairs, dev_pairs, epochs: int, rng: RngHandle,
             peak_lr: float = 1e-3, warmup_steps: int = 200,
             token_budget: int = 2048) -> list[EpochRecord]:
    """MLE epochs for the autoregressive model; pairs are EOS-terminated ids."""
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    optimizer = Adam(list(model.params.values()), lr=peak_lr)
    step = 0
    records = []
    for epoch in range(1, epochs + 1):
        tick = time.perf_counter()
        loss_sum = 0.0
        n_batches = 0
        for batch in _epoch_batches(train_pairs, rng, token_budget):
            step += 1
            optimizer.lr = inverse_sqrt_lr(step, peak_lr, warmup_steps)
            src = pad_batch([s for s, _ in batch])
            trg = pad_batch([t for _, t in batch])
            loss_sum += model.train_step_mle(src, trg, optimizer, rng)
            n_batches += 1
        record = EpochRecord(epoch, loss_sum / n_batches, dev_loss_ar(model, dev_pairs),
                             optimizer.lr, time.perf_counter() - tick,
                             extra={"global_step": step})
        records.append(record)
        log.info("ar epoch %d: train %.4f dev %.4f lr %.2e",
                 epoch, record.train_loss, record.dev_loss, record.lr)
    return records


def train_cmlm(model: CmlmModel, train_pairs, dev_pairs, epochs: int, rng: RngHandle,
               peak_lr: float = 1e-3, warmup_steps: int = 200,
               token_budget: int = 2048,
               length_weight: float = LENGTH_LOSS_WEIGHT) -> list[EpochRecord]:
    """Masked-token epochs; pairs are (EOS-terminated source, payload target)."""
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    optimizer = Adam(list(model.params.values()), lr=peak_lr)
    step = 0
    records = []
    for epoch in range(1, epochs + 1):
        tick = time.perf_counter()
        token_sum = length_sum = 0.0
        n_batches = 0
        for batch in _epoch_batches(train_pairs, rng, token_budget):
            step += 1
            optimizer.lr = inverse_sqrt_lr(step, peak_lr, warmup_steps)
            token_loss, length_loss = train_step_cmlm(
                model, [s for s, _ in batch], [t for _, t in batch],
                optimizer, rng, length_weight)
            token_sum += token_loss
            length_sum += length_loss
            n_batches += 1
        dev_token, dev_length = dev_loss_cmlm(model, dev_pairs)
        record = EpochRecord(epoch, token_sum / n_batches, dev_token,
                             optimizer.lr, time.perf_counter() - tick,
                             extra={"train_length_loss": length_sum / n_batches,
                                    "dev_length_loss": dev_length,
                                    "global_step": step})
        records.append(record)
        log.info("cmlm epoch %d: train %.4f dev %.4f (len %.4f) lr %.2e",
                 epoch, record.train_loss, record.dev_loss, dev_length, record.lr)
    return records
