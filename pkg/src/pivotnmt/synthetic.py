"""Deterministic synthetic language triples.

Three toy languages are linked by per-word substitution tables plus a local
block-reversal reordering on the first hop: piv = F1(src) substitutes and
reverses each window, trg = F2(piv) substitutes again. A per-token noise
rate corrupts the training corpora (evaluation splits stay clean), which
injects the ambiguity that makes the quality of an intermediate hypothesis
matter downstream.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, asdict
from pathlib import Path

from .errors import InputError
from .rng import RngHandle, seed_rng

CORPUS_KEYS = ("src-piv", "piv-trg", "src-trg", "three-way-test")
OPTIONAL_KEYS = ("three-way-dev",)


@dataclass
class SyntheticTaskSpec:
    alphabet_size: int
    len_min: int
    len_max: int
    src_words: list[str]
    piv_words: list[str]
    trg_words: list[str]
    subst_src2piv: dict[str, str]
    subst_piv2trg: dict[str, str]
    reorder_window: int
    noise_rate: float
    seed: int

    @classmethod
    def build(cls, alphabet_size: int, len_min: int, len_max: int,
              reorder_window: int, noise_rate: float, seed: int) -> "SyntheticTaskSpec":
        """Draw word surfaces and substitution tables from the seed."""
        if alphabet_size < 2 or len_min < 1 or len_max < len_min:
            raise InputError("invalid synthetic task dimensions")
        rng = seed_rng(seed)
        surfaces: set[str] = set()
        banks: list[list[str]] = []
        for _ in range(3):
            bank: list[str] = []
            while len(bank) < alphabet_size:
                length = int(rng.integers(3, 7))
                word = "".join(string.ascii_lowercase[i] for i in rng.integers(0, 26, size=length))
                if word not in surfaces:
                    surfaces.add(word)
                    bank.append(word)
            banks.append(bank)
        src_words, piv_words, trg_words = banks
        perm1 = rng.permutation(alphabet_size)
        perm2 = rng.permutation(alphabet_size)
        return cls(
            alphabet_size=alphabet_size,
            len_min=len_min,
            len_max=len_max,
            src_words=src_words,
            piv_words=piv_words,
            trg_words=trg_words,
            subst_src2piv={src_words[i]: piv_words[perm1[i]] for i in range(alphabet_size)},
            subst_piv2trg={piv_words[i]: trg_words[perm2[i]] for i in range(alphabet_size)},
            reorder_window=reorder_window,
            noise_rate=noise_rate,
            seed=seed,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticTaskSpec":
        data = json.loads(text)
        missing = [f for f in cls.__dataclass_fields__ if f not in data]
        if missing:
            raise InputError(f"task spec is missing fields: {missing}")
        return cls(**{f: data[f] for f in cls.__dataclass_fields__})

    def f1(self, src_tokens: list[str]) -> list[str]:
        """src -> piv: substitute, then reverse each length-w block."""
        substituted = [self.subst_src2piv[w] for w in src_tokens]
        w = max(self.reorder_window, 1)
        out: list[str] = []
        for start in range(0, len(substituted), w):
            out.extend(reversed(substituted[start:start + w]))
        return out

    def f2(self, piv_tokens: list[str]) -> list[str]:
        """piv -> trg: plain substitution."""
        return [self.subst_piv2trg[w] for w in piv_tokens]

    def sample_source(self, rng: RngHandle) -> list[str]:
        length = int(rng.integers(self.len_min, self.len_max + 1))
        return [self.src_words[i] for i in rng.integers(0, self.alphabet_size, size=length)]

    def corrupt(self, tokens: list[str], bank: list[str], rng: RngHandle) -> list[str]:
        if self.noise_rate <= 0.0:
            return tokens
        flips = rng.random(len(tokens)) < self.noise_rate
        picks = rng.integers(0, len(bank), size=len(tokens))
        return [bank[picks[i]] if flips[i] else tok for i, tok in enumerate(tokens)]


def _make_triple(spec: SyntheticTaskSpec, rng: RngHandle, noisy: bool) -> tuple[str, str, str]:
    src = spec.sample_source(rng)
    piv = spec.f1(src)
    if noisy:
        piv = spec.corrupt(piv, spec.piv_words, rng)
    trg = spec.f2(piv)
    if noisy:
        trg = spec.corrupt(trg, spec.trg_words, rng)
    return " ".join(src), " ".join(piv), " ".join(trg)


def gen_synthetic_corpus(spec: SyntheticTaskSpec, sizes: dict[str, int], out_dir) -> list[Path]:
    """Write disjoint parallel corpora; identical spec+sizes -> identical bytes.

    Training splits (src-piv, piv-trg, src-trg) get the spec's noise rate;
    the three-way dev/test splits are emitted clean, mirroring curated
    evaluation references over noisy crawled training data.
    """
    for key in CORPUS_KEYS:
        if key not in sizes:
            raise InputError(f"sizes must include {key!r}")
        if sizes[key] < 1:
            raise InputError(f"corpus size for {key!r} must be positive")
    unknown = set(sizes) - set(CORPUS_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise InputError(f"unknown corpus size keys: {sorted(unknown)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan: list[tuple[str, bool, dict[str, Path]]] = [
        ("src-piv", True, {"src": out_dir / "srcpiv.src", "piv": out_dir / "srcpiv.piv"}),
        ("piv-trg", True, {"piv": out_dir / "pivtrg.piv", "trg": out_dir / "pivtrg.trg"}),
        ("src-trg", True, {"src": out_dir / "srctrg.src", "trg": out_dir / "srctrg.trg"}),
        ("three-way-dev", False, {"src": out_dir / "dev.src", "piv": out_dir / "dev.piv", "trg": out_dir / "dev.trg"}),
        ("three-way-test", False, {"src": out_dir / "test.src", "piv": out_dir / "test.piv", "trg": out_dir / "test.trg"}),
    ]
    all_paths = [p for _, _, files in plan for p in files.values()]
    if len(set(all_paths)) != len(all_paths):
        raise OSError("overlapping output paths in corpus plan")

    rng = seed_rng(spec.seed)
    seen_sources: set[str] = set()
    written: list[Path] = []
    for key, noisy, files in plan:
        count = sizes.get(key, 0)
        if count == 0:
            continue
        columns: dict[str, list[str]] = {name: [] for name in files}
        produced = 0
        while produced < count:
            src_line, piv_line, trg_line = _make_triple(spec, rng, noisy)
            if src_line in seen_sources:
                continue
            seen_sources.add(src_line)
            row = {"src": src_line, "piv": piv_line, "trg": trg_line}
            for name in files:
                columns[name].append(row[name])
            produced += 1
        for name, path in files.items():
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(columns[name]) + "\n")
            written.append(path)
    spec_path = out_dir / "task_spec.json"
    spec_path.write_text(spec.to_json() + "\n", encoding="utf-8")
    written.append(spec_path)
    return written
