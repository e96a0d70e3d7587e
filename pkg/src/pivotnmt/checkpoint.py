"""Binary checkpoint container.

Layout: 8 magic bytes, a little-endian u64 header length, a JSON header
(sorted keys), then the raw parameter arrays — float64, little-endian,
row-major — concatenated in ascending parameter-name order (the order is
also listed explicitly in the header). The header records the model config,
vocabulary hash, RNG algorithm, and training step count, so a checkpoint
pins down everything needed to reproduce or resume a run.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import tensor as T
from .errors import InputError
from .rng import RNG_ALGORITHM, seed_rng
from .transformer import ArModel, ModelConfig
from .cmlm import CmlmModel
from .vocab import Vocabulary

MAGIC = b"PNMTCKPT"
FORMAT_VERSION = 1


def vocab_fingerprint(vocab: Vocabulary) -> str:
    """SHA-256 over the vocabulary's canonical TSV rendering."""
    text = "".join(f"{tok}\t{i}\n" for i, tok in enumerate(vocab.id_to_token))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_checkpoint(path, params: dict[str, T.Tensor], meta: dict) -> None:
    names = sorted(params)
    header = dict(meta)
    header["format_version"] = FORMAT_VERSION
    header["dtype"] = "<f8"
    header["arrays"] = [{"name": n, "shape": list(params[n].data.shape)} for n in names]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n].data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise InputError(f"{path} is not a checkpoint (bad magic)")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise InputError(f"{path} truncated while reading {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return arrays, header


def save_model(path, model, vocab_hash: str, step: int) -> None:
    kind = "cmlm" if isinstance(model, CmlmModel) else "ar"
    meta = {
        "model_kind": kind,
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "rng_algorithm": RNG_ALGORITHM,
        "step": step,
    }
    if kind == "cmlm":
        meta["mask_id"] = model.mask_id
    save_checkpoint(path, model.params, meta)


def load_model(path):
    """Rebuild the saved model; returns (model, header)."""
    arrays, header = load_checkpoint(path)
    config = ModelConfig.from_dict(header["config"])
    if header["model_kind"] == "cmlm":
        model = CmlmModel(config, seed_rng(0), mask_id=header.get("mask_id", 4))
    else:
        model = ArModel(config, seed_rng(0))
    missing = set(model.params) ^ set(arrays)
    if missing:
        raise InputError(f"{path}: parameter names do not match the config: {sorted(missing)}")
    for name, arr in arrays.items():
        if model.params[name].data.shape != arr.shape:
            raise InputError(f"{path}: shape mismatch for {name}")
        model.params[name].data = arr
    return model, header
