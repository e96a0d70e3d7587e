"""Token/id vocabulary with reserved special tokens."""

from __future__ import annotations

from .errors import InputError

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
MASK_ID = 4
LENGTH_ID = 5

RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>", "<mask>", "<len>")
NUM_RESERVED = len(RESERVED_TOKENS)


class Vocabulary:
    """Bidirectional token<->id map; ids 0..5 are reserved specials."""

    def __init__(self, symbols: list[str]):
        self.id_to_token: list[str] = list(RESERVED_TOKENS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(RESERVED_TOKENS)}
        for sym in symbols:
            if sym in self.token_to_id:
                continue
            self.token_to_id[sym] = len(self.id_to_token)
            self.id_to_token.append(sym)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.id_to_token):
            raise IndexError(f"token id {token_id} out of range for vocabulary of {len(self)}")
        return self.id_to_token[token_id]

    def is_reserved(self, token_id: int) -> bool:
        return 0 <= token_id < NUM_RESERVED

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens: list[str] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, _, idx = line.rpartition("\t")
                tokens.append(tok)
                if int(idx) != len(tokens) - 1:
                    raise InputError(f"vocabulary file {path} has non-contiguous ids")
        if tokens[:NUM_RESERVED] != list(RESERVED_TOKENS):
            raise InputError(f"vocabulary file {path} does not start with the reserved rows")
        return cls(tokens[NUM_RESERVED:])
