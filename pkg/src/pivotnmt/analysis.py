"""Pivot-vs-target sentence BLEU correlation and scatter emission.

Given cascade outputs on a three-way aligned test set, scores every pivot
hypothesis against its pivot reference and every target hypothesis against
its target reference, then summarizes the relationship with Pearson r and
Spearman ρ. Both statistics are reported, never asserted — whether the two
scores track each other is a property of the data. A constant column makes
the correlation undefined; that is reported with an explicit marker rather
than letting NaN propagate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError
from .metrics import sentence_bleu

UNDEFINED = "undefined"

SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_MARGIN_LEFT = 64
SVG_MARGIN_RIGHT = 24
SVG_MARGIN_TOP = 24
SVG_MARGIN_BOTTOM = 56
AXIS_MAX = 100.0


@dataclass(frozen=True)
class CorrelationRecord:
    pivot_bleu: float
    target_bleu: float


@dataclass
class CorrelationSummary:
    pearson: float | None
    spearman: float | None
    count: int

    def to_dict(self) -> dict:
        return {
            "pearson": UNDEFINED if self.pearson is None else self.pearson,
            "spearman": UNDEFINED if self.spearman is None else self.spearman,
            "count": self.count,
        }


def _pearson(xs: list[float], ys: list[float]) -> float | None:
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        return None
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return cov / math.sqrt(var_x * var_y)


def _ranks(values: list[float]) -> list[float]:
    """1-based ranks with ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _spearman(xs: list[float], ys: list[float]) -> float | None:
    return _pearson(_ranks(xs), _ranks(ys))


def summarize_records(records: list[CorrelationRecord]) -> CorrelationSummary:
    if not records:
        raise InputError("correlation needs at least one record")
    xs = [r.pivot_bleu for r in records]
    ys = [r.target_bleu for r in records]
    return CorrelationSummary(_pearson(xs, ys), _spearman(xs, ys), len(records))


def pivot_target_correlation(pivot_hypotheses: list[str], pivot_references: list[str],
                             target_hypotheses: list[str], target_references: list[str],
                             ) -> tuple[list[CorrelationRecord], CorrelationSummary]:
    """Sentence BLEU of each hypothesis against its own reference, paired."""
    n = len(pivot_hypotheses)
    if not n:
        raise InputError("correlation needs at least one sentence")
    if not (len(pivot_references) == len(target_hypotheses) == len(target_references) == n):
        raise InputError(
            "three-way test set misaligned: "
            f"{n} pivot hypotheses, {len(pivot_references)} pivot references, "
            f"{len(target_hypotheses)} target hypotheses, {len(target_references)} target references")
    records = []
    for piv_hyp, piv_ref, trg_hyp, trg_ref in zip(
            pivot_hypotheses, pivot_references, target_hypotheses, target_references):
        records.append(CorrelationRecord(
            sentence_bleu(piv_hyp.split(), piv_ref.split()).value,
            sentence_bleu(trg_hyp.split(), trg_ref.split()).value))
    return records, summarize_records(records)


def write_correlation_tsv(records: list[CorrelationRecord], path: Path) -> None:
    lines = ["pivot_bleu\ttarget_bleu"]
    lines += [f"{r.pivot_bleu:.4f}\t{r.target_bleu:.4f}" for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _x_pixel(value: float) -> float:
    span = SVG_WIDTH - SVG_MARGIN_LEFT - SVG_MARGIN_RIGHT
    return SVG_MARGIN_LEFT + span * value / AXIS_MAX


def _y_pixel(value: float) -> float:
    span = SVG_HEIGHT - SVG_MARGIN_TOP - SVG_MARGIN_BOTTOM
    return SVG_HEIGHT - SVG_MARGIN_BOTTOM - span * value / AXIS_MAX


def _svg_text(records: list[CorrelationRecord], summary: CorrelationSummary) -> str:
    x0, x1 = _x_pixel(0.0), _x_pixel(AXIS_MAX)
    y0, y1 = _y_pixel(0.0), _y_pixel(AXIS_MAX)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x1:.1f}" y2="{y0:.1f}" stroke="black"/>',
        f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0:.1f}" y2="{y1:.1f}" stroke="black"/>',
    ]
    for tick in range(0, 101, 20):
        tx = _x_pixel(tick)
        ty = _y_pixel(tick)
        parts.append(f'<line x1="{tx:.1f}" y1="{y0:.1f}" x2="{tx:.1f}" y2="{y0 + 5:.1f}" stroke="black"/>')
        parts.append(f'<text x="{tx:.1f}" y="{y0 + 18:.1f}" font-size="11" '
                     f'text-anchor="middle">{tick}</text>')
        parts.append(f'<line x1="{x0 - 5:.1f}" y1="{ty:.1f}" x2="{x0:.1f}" y2="{ty:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8:.1f}" y="{ty + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{tick}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{SVG_HEIGHT - 14}" font-size="13" '
                 f'text-anchor="middle">pivot sentence BLEU</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">target sentence BLEU</text>')
    caption = summary.to_dict()
    pearson = caption["pearson"] if isinstance(caption["pearson"], str) else f'{caption["pearson"]:.3f}'
    spearman = caption["spearman"] if isinstance(caption["spearman"], str) else f'{caption["spearman"]:.3f}'
    parts.append(f'<text x="{x1:.1f}" y="{y1 + 4:.1f}" font-size="11" text-anchor="end">'
                 f'n={summary.count}, Pearson r={pearson}, Spearman rho={spearman}</text>')
    for rec in records:
        parts.append(f'<circle cx="{_x_pixel(rec.pivot_bleu):.2f}" cy="{_y_pixel(rec.target_bleu):.2f}" '
                     f'r="2.5" fill="steelblue" fill-opacity="0.55"/>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def emit_scatter(records: list[CorrelationRecord], svg_path: Path) -> Path:
    """Write a standalone scatter SVG plus the TSV next to it; returns the TSV path."""
    if not records:
        raise InputError("scatter needs at least one record")
    svg_path = Path(svg_path)
    summary = summarize_records(records)
    svg_path.write_text(_svg_text(records, summary), encoding="utf-8")
    tsv_path = svg_path.with_suffix(".tsv")
    write_correlation_tsv(records, tsv_path)
    return tsv_path
