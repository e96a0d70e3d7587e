"""Corpus I/O, encoding to ids, and token-budget batching."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .bpe import BpeModel
from .errors import InputError
from .vocab import EOS_ID, NUM_RESERVED, Vocabulary


@dataclass
class SentenceTriple:
    """Aligned source / optional pivot / target id sequences (EOS-terminated)."""

    src: list[int]
    piv: list[int] | None
    trg: list[int]


def encode(sentence: str, bpe: BpeModel, vocab: Vocabulary) -> list[int]:
    """Whitespace-split, BPE-segment, map to ids, append EOS."""
    return [vocab.id_of(sym) for sym in bpe.segment(sentence)] + [EOS_ID]


def decode(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Strip reserved tokens and undo BPE segmentation."""
    symbols = []
    for i in ids:
        tok = vocab.token_of(int(i))
        if int(i) >= NUM_RESERVED:
            symbols.append(tok)
    words = "".join(symbols).split("</w>")
    return " ".join(w for w in words if w)


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def write_lines(path, lines: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def load_parallel(src_path, trg_path) -> list[tuple[str, str]]:
    src = read_lines(src_path)
    trg = read_lines(trg_path)
    if len(src) != len(trg):
        raise InputError(f"line count mismatch: {src_path} has {len(src)}, {trg_path} has {len(trg)}")
    return list(zip(src, trg))


def encode_pairs(pairs: Sequence[tuple[str, str]], bpe: BpeModel,
                 vocab: Vocabulary) -> list[tuple[list[int], list[int]]]:
    return [(encode(s, bpe, vocab), encode(t, bpe, vocab)) for s, t in pairs]


def _default_length(item) -> int:
    if isinstance(item, int):
        return item
    if isinstance(item, tuple):
        return max(len(part) for part in item if part is not None)
    return len(item)


def batch_by_tokens(items: Sequence, budget: int,
                    length_of: Callable | None = None) -> list[list[int]]:
    """Greedy in-order packing into batches of padded size <= budget.

    Padded size of a batch is ``len(batch) * max_length``. A single item
    longer than the budget gets a batch of its own. Returns index lists;
    every item appears exactly once.
    """
    if budget < 1:
        raise InputError(f"token budget must be >= 1, got {budget}")
    length_of = length_of or _default_length
    batches: list[list[int]] = []
    current: list[int] = []
    max_len = 0
    for idx, item in enumerate(items):
        n = length_of(item)
        if current and (len(current) + 1) * max(max_len, n) > budget:
            batches.append(current)
            current, max_len = [], 0
        current.append(idx)
        max_len = max(max_len, n)
    if current:
        batches.append(current)
    return batches
