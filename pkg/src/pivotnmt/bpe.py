"""Byte-pair encoding: word-internal merges with an end-of-word marker.

Training is joint over however many corpora are passed in; pre-tokenization
is whitespace only. The merge list is ordered, and applying it is
deterministic, so identical corpora always produce identical models.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError
from .vocab import RESERVED_TOKENS, Vocabulary

END_OF_WORD = "</w>"


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    marker: str = END_OF_WORD
    _cache: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False)

    def segment_word(self, word: str) -> tuple[str, ...]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = list(word[:-1]) + [word[-1] + self.marker] if word else []
        for left, right in self.merges:
            i = 0
            while i < len(symbols) - 1:
                if symbols[i] == left and symbols[i + 1] == right:
                    symbols[i:i + 2] = [left + right]
                else:
                    i += 1
        result = tuple(symbols)
        self._cache[word] = result
        return result

    def segment(self, sentence: str) -> list[str]:
        out: list[str] = []
        for word in sentence.split():
            out.extend(self.segment_word(word))
        return out

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for left, right in self.merges:
                fh.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path) -> "BpeModel":
        merges: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                left, sep, right = line.partition(" ")
                if not sep:
                    raise InputError(f"malformed merge line in {path}: {line!r}")
                merges.append((left, right))
        return cls(merges)


def _word_frequencies(corpora: Sequence[str]) -> Counter:
    freqs: Counter = Counter()
    for corpus in corpora:
        for line in corpus.splitlines():
            freqs.update(line.split())
    return freqs


def train_bpe(corpora: Sequence[str], merge_count: int) -> BpeModel:
    """Learn up to ``merge_count`` merges jointly over all corpora.

    Stops early once no symbol pair occurs at least twice. Ties between
    equally frequent pairs break lexicographically for determinism.
    """
    if merge_count < 0:
        raise InputError(f"merge count must be >= 0, got {merge_count}")
    freqs = _word_frequencies(corpora)
    if not freqs:
        raise InputError("cannot train BPE on an empty corpus")

    words: list[list[str]] = []
    counts: list[int] = []
    for word, n in sorted(freqs.items()):
        words.append(list(word[:-1]) + [word[-1] + END_OF_WORD])
        counts.append(n)

    merges: list[tuple[str, str]] = []
    for _ in range(merge_count):
        pair_counts: Counter = Counter()
        for symbols, n in zip(words, counts):
            for a, b in zip(symbols, symbols[1:]):
                pair_counts[(a, b)] += n
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if best[1] < 2:
            break
        left, right = best[0]
        merges.append((left, right))
        for symbols in words:
            i = 0
            while i < len(symbols) - 1:
                if symbols[i] == left and symbols[i + 1] == right:
                    symbols[i:i + 2] = [left + right]
                else:
                    i += 1
    return BpeModel(merges)


def build_vocabulary(bpe: BpeModel, corpora: Iterable[str]) -> Vocabulary:
    """Vocabulary over every symbol the BPE model emits on the given corpora."""
    symbols: set[str] = set()
    for corpus in corpora:
        for line in corpus.splitlines():
            for word in line.split():
                symbols.update(bpe.segment_word(word))
    symbols.difference_update(RESERVED_TOKENS)
    return Vocabulary(sorted(symbols))
