"""Sentence- and corpus-level MT metrics (BLEU on 0-100, chrF on 0-1).

Sentence BLEU uses exponential smoothing for zero n-gram counts and an
effective order capped by the hypothesis length, matching the defaults of
the standard scorer. Corpus BLEU aggregates raw counts with no smoothing.
chrF is the character n-gram F-score with n = 1..6 and beta = 2, computed
on whitespace-stripped text.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InputError

BLEU_ORDER = 4
CHRF_ORDER = 6
CHRF_BETA = 2.0


@dataclass
class MetricScore:
    value: float
    kind: str
    stats: dict = field(default_factory=dict)


def _ngram_counts(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _match_totals(hyp: Sequence, ref: Sequence, max_order: int) -> tuple[list[int], list[int]]:
    correct, total = [], []
    for n in range(1, max_order + 1):
        hyp_counts = _ngram_counts(hyp, n)
        ref_counts = _ngram_counts(ref, n)
        correct.append(sum(min(c, ref_counts[g]) for g, c in hyp_counts.items()))
        total.append(max(len(hyp) - n + 1, 0))
    return correct, total


def sentence_bleu(hypothesis: Sequence[str], reference: Sequence[str]) -> MetricScore:
    """Smoothed 4-gram sentence BLEU with brevity penalty, on 0-100."""
    hypothesis, reference = list(hypothesis), list(reference)
    if not reference:
        raise InputError("sentence BLEU needs a non-empty reference")
    if not hypothesis:
        return MetricScore(0.0, "sentence_bleu", {"hyp_len": 0, "ref_len": len(reference)})
    correct, total = _match_totals(hypothesis, reference, BLEU_ORDER)
    effective = min(BLEU_ORDER, len(hypothesis))
    smooth = 1.0
    precisions: list[float] = []
    for n in range(effective):
        if correct[n] == 0:
            smooth *= 2.0
            precisions.append(1.0 / (smooth * total[n]))
        else:
            precisions.append(correct[n] / total[n])
    bp = 1.0 if len(hypothesis) >= len(reference) else math.exp(1.0 - len(reference) / len(hypothesis))
    # Geometric mean in the 0-1 domain so a perfect match is exactly 100.
    score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / effective)
    return MetricScore(score, "sentence_bleu", {
        "correct": correct, "total": total, "precisions": precisions,
        "hyp_len": len(hypothesis), "ref_len": len(reference), "brevity_penalty": bp,
    })


def corpus_bleu(hypothesis_lines: Sequence[str], reference_lines: Sequence[str]) -> MetricScore:
    """Unsmoothed corpus BLEU over whitespace-tokenized lines, on 0-100."""
    if len(hypothesis_lines) != len(reference_lines):
        raise InputError(f"corpus BLEU line mismatch: {len(hypothesis_lines)} vs {len(reference_lines)}")
    if not reference_lines:
        raise InputError("corpus BLEU needs at least one line")
    correct = [0] * BLEU_ORDER
    total = [0] * BLEU_ORDER
    hyp_len = ref_len = 0
    for hyp_line, ref_line in zip(hypothesis_lines, reference_lines):
        hyp, ref = hyp_line.split(), ref_line.split()
        hyp_len += len(hyp)
        ref_len += len(ref)
        c, t = _match_totals(hyp, ref, BLEU_ORDER)
        for n in range(BLEU_ORDER):
            correct[n] += c[n]
            total[n] += t[n]
    stats = {"correct": correct, "total": total, "hyp_len": hyp_len, "ref_len": ref_len}
    if hyp_len == 0 or any(c == 0 for c in correct) or any(t == 0 for t in total):
        return MetricScore(0.0, "corpus_bleu", stats)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    score = bp * math.exp(sum(math.log(c / t) for c, t in zip(correct, total)) / BLEU_ORDER)
    stats["brevity_penalty"] = bp
    return MetricScore(100.0 * score, "corpus_bleu", stats)


def sentence_chrf(hypothesis: str, reference: str) -> MetricScore:
    """Character n-gram F-score, n = 1..6 averaged, beta = 2, on 0-1."""
    ref_chars = "".join(reference.split())
    if not ref_chars:
        raise InputError("sentence chrF needs a non-empty reference")
    hyp_chars = "".join(hypothesis.split())
    prec_sum = rec_sum = 0.0
    orders = 0
    for n in range(1, CHRF_ORDER + 1):
        hyp_counts = _ngram_counts(hyp_chars, n)
        ref_counts = _ngram_counts(ref_chars, n)
        hyp_total = sum(hyp_counts.values())
        ref_total = sum(ref_counts.values())
        if hyp_total == 0 and ref_total == 0:
            continue
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        prec_sum += matches / hyp_total if hyp_total else 0.0
        rec_sum += matches / ref_total if ref_total else 0.0
        orders += 1
    if orders == 0:
        return MetricScore(0.0, "sentence_chrf", {"orders": 0})
    precision = prec_sum / orders
    recall = rec_sum / orders
    beta_sq = CHRF_BETA**2
    denom = beta_sq * precision + recall
    value = (1.0 + beta_sq) * precision * recall / denom if denom > 0 else 0.0
    return MetricScore(value, "sentence_chrf", {
        "precision": precision, "recall": recall, "orders": orders,
    })
