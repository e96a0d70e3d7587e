"""Wall-clock comparison of one-pass parallel sampling vs ancestral sampling.

Only the decoder-plus-draw phase is timed: source encoding is a cost both
model kinds share, so it is measured once per repetition and reported
separately. Decoder-pass counts are counted inside the samplers, never
inferred from timing. Every repetition replays the same sampler seeds, so
the repeated measurements time identical work; the first (warm-up)
repetition is discarded.

Timing prefers a single-threaded process (the CLI's --threads flag caps
BLAS workers) so the reported stddev reflects the machine, not the pool.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

from .cmlm import CmlmModel, sample_parallel_batch
from .decoding import sample_autoregressive_batch
from .errors import ConfigError, InputError
from .rng import RngHandle, seed_rng
from .transformer import ArModel, pad_batch

log = logging.getLogger(__name__)

MIN_REPETITIONS = 3


@dataclass
class BenchRecord:
    """Measured result for one model kind over the whole corpus."""
    model_kind: str            # "cmlm" | "ar"
    batch_size: int
    length_bound: int          # K̂ ceiling (cmlm) or max emission length (ar)
    passes_per_sentence: list[int]
    wall_mean_seconds: float
    wall_std_seconds: float

    @property
    def decoder_passes_total(self) -> int:
        return sum(self.passes_per_sentence)

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "batch_size": self.batch_size,
            "length_bound": self.length_bound,
            "decoder_passes_total": self.decoder_passes_total,
            "passes_per_sentence": self.passes_per_sentence,
            "wall_mean_seconds": self.wall_mean_seconds,
            "wall_std_seconds": self.wall_std_seconds,
        }


@dataclass
class BenchReport:
    sentences: int
    repetitions: int
    records: list[BenchRecord]
    wall_encoder_seconds: float
    ci_overlap: bool
    warning: str = ""
    extra: dict = field(default_factory=dict)

    def record(self, model_kind: str) -> BenchRecord:
        for rec in self.records:
            if rec.model_kind == model_kind:
                return rec
        raise InputError(f"no benchmark record for model kind {model_kind!r}")

    def to_dict(self) -> dict:
        return {
            "sentences": self.sentences,
            "repetitions": self.repetitions,
            "records": [rec.to_dict() for rec in self.records],
            "wall_encoder_seconds": self.wall_encoder_seconds,
            "ci_overlap": self.ci_overlap,
            "warning": self.warning,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def stable_dict(self) -> dict:
        """The report minus every wall-clock-derived field.

        Two runs with the same seed and inputs must agree on this view
        exactly; only the timing numbers (and anything computed from them,
        like the overlap flag) may differ.
        """
        def strip(obj):
            if isinstance(obj, dict):
                return {k: strip(v) for k, v in obj.items()
                        if not k.startswith("wall_") and k not in ("ci_overlap", "warning")}
            if isinstance(obj, list):
                return [strip(v) for v in obj]
            return obj
        return strip(self.to_dict())


def _mean_std(samples: list[float]) -> tuple[float, float]:
    mean = sum(samples) / len(samples)
    if len(samples) < 2:
        return mean, 0.0
    var = sum((s - mean) ** 2 for s in samples) / (len(samples) - 1)
    return mean, math.sqrt(var)


def _intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    a_lo, a_hi = a[0] - a[1], a[0] + a[1]
    b_lo, b_hi = b[0] - b[1], b[0] + b[1]
    return a_lo <= b_hi and b_lo <= a_hi


def bench_sampling(ar_model: ArModel, cmlm_model: CmlmModel,
                   sources: list[list[int]], rng: RngHandle,
                   batch_size: int = 64, max_len: int = 32,
                   repetitions: int = MIN_REPETITIONS) -> BenchReport:
    """Time sample_parallel vs sample_autoregressive over an eval corpus.

    Returns a report with per-sentence decoder-pass counts (exact), decoder
    wall-clock mean ± stddev over ``repetitions`` timed runs, encoder time
    reported separately, and an overlap flag when the two mean ± stddev
    intervals are not disjoint.
    """
    if not sources:
        raise InputError("benchmark needs a non-empty eval corpus")
    if repetitions < MIN_REPETITIONS:
        raise ConfigError(f"repetitions must be >= {MIN_REPETITIONS}, got {repetitions}")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")

    batches = [sources[i:i + batch_size] for i in range(0, len(sources), batch_size)]
    # Fixed sampler seeds so every repetition draws the same tokens: the
    # repeated measurements then time identical work.
    na_seed, ar_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))

    na_times: list[float] = []
    ar_times: list[float] = []
    enc_times: list[float] = []
    na_passes: list[int] = []
    ar_passes: list[int] = []
    k_hats: list[int] = []

    for rep in range(repetitions + 1):  # rep 0 is the discarded warm-up
        # Shared encoder phase, timed separately. Length prediction pools
        # encoder states, so it belongs to this phase, not the decoder's.
        tick = time.perf_counter()
        encoded_na = []
        encoded_ar = []
        lengths: list[list[int]] = []
        for batch in batches:
            src = pad_batch(batch)
            memory, memory_mask = cmlm_model.encode_source(src)
            encoded_na.append((memory, memory_mask))
            length_logits = cmlm_model.length_logits(memory, src)
            k_hat = length_logits.data.argmax(axis=1) + 1
            lengths.append([min(int(k), max_len) for k in k_hat])
            encoded_ar.append(ar_model.encode_source(pad_batch(batch)))
        enc_elapsed = time.perf_counter() - tick

        na_rng = seed_rng(na_seed)
        tick = time.perf_counter()
        na_hyps = [sample_parallel_batch(cmlm_model, batch, lens, na_rng, encoded=enc)
                   for batch, lens, enc in zip(batches, lengths, encoded_na)]
        na_elapsed = time.perf_counter() - tick

        ar_rng = seed_rng(ar_seed)
        tick = time.perf_counter()
        ar_hyps = [sample_autoregressive_batch(ar_model, batch, max_len, ar_rng, encoded=enc)
                   for batch, enc in zip(batches, encoded_ar)]
        ar_elapsed = time.perf_counter() - tick

        if rep == 0:
            na_passes = [h.extra["passes"] for hb in na_hyps for h in hb]
            ar_passes = [h.extra["passes"] for hb in ar_hyps for h in hb]
            k_hats = [k for lens in lengths for k in lens]
        else:
            enc_times.append(enc_elapsed)
            na_times.append(na_elapsed)
            ar_times.append(ar_elapsed)

    na_mean, na_std = _mean_std(na_times)
    ar_mean, ar_std = _mean_std(ar_times)
    overlap = _intervals_overlap((na_mean, na_std), (ar_mean, ar_std))
    warning = ""
    if overlap:
        warning = ("mean±stddev intervals of the two samplers overlap; "
                   "the wall-clock comparison is not resolved at this corpus size")
        log.warning(warning)

    records = [
        BenchRecord("cmlm", batch_size, max(k_hats), na_passes, na_mean, na_std),
        BenchRecord("ar", batch_size, max_len, ar_passes, ar_mean, ar_std),
    ]
    extra = {
        "wall_speedup": ar_mean / na_mean if na_mean > 0 else float("inf"),
        "k_hat_per_sentence": k_hats,
    }
    return BenchReport(len(sources), repetitions, records,
                       sum(enc_times) / len(enc_times), overlap, warning, extra)
