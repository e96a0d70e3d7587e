"""Experiment configuration with file/flag layering and run-directory plumbing.

Precedence is CLI flag > config file > built-in default. Whatever wins is
written verbatim to ``config.resolved.json`` inside the run directory, and
every produced file is listed in a ``MANIFEST`` there, so a finished run
documents itself. Existing outputs are never clobbered unless the caller
passed ``--overwrite``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, IoError
from .rl import RlConfig

RESOLVED_NAME = "config.resolved.json"
MANIFEST_NAME = "MANIFEST"


@dataclass
class ExperimentConfig:
    # synthetic task
    alphabet: int = 40
    sent_min_len: int = 4
    sent_max_len: int = 16
    reorder_window: int = 3
    noise: float = 0.1
    n_srcpiv: int = 20000
    n_pivtrg: int = 20000
    n_srctrg: int = 2000
    n_dev: int = 500
    n_test: int = 1000
    # subword vocabulary
    bpe_merges: int = 200
    # model dims (shared by every trained model)
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ff_dim: int = 128
    max_len: int = 64
    dropout: float = 0.1
    k_max: int = 32
    # MLE training
    epochs: int = 10
    peak_lr: float = 1e-3
    warmup_steps: int = 200
    token_budget: int = 2048
    # decoding
    decode_iterations: int = 5
    beam_size: int = 4
    # distillation
    distill_beam: int = 1
    # RL fine-tuning (keys of RlConfig; unset ones take its defaults)
    rl: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        self.rl_config()  # validate the RL overrides eagerly

    def rl_config(self, **overrides) -> RlConfig:
        merged = {**self.rl, **overrides}
        bad = set(merged) - {f.name for f in dataclasses.fields(RlConfig)}
        if bad:
            raise ConfigError(f"unknown RL config keys: {sorted(bad)}")
        return RlConfig(**merged)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config_file(path) -> dict:
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise IoError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return values


def resolve_config(file_values: dict | None = None,
                   overrides: dict | None = None) -> ExperimentConfig:
    """Layer config sources; unknown keys are an error, not a silent typo."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    merged: dict = {}
    for layer in (file_values or {}, overrides or {}):
        bad = set(layer) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        merged.update({k: v for k, v in layer.items() if v is not None})
    return ExperimentConfig(**merged)


def ensure_fresh(paths: list[Path], overwrite: bool) -> None:
    """Refuse to clobber existing outputs unless --overwrite was given."""
    if overwrite:
        return
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing:
        raise IoError("refusing to overwrite existing outputs "
                      f"(pass --overwrite): {', '.join(existing)}")


def start_run(run_dir, config: ExperimentConfig, overwrite: bool) -> Path:
    """Create the run directory and persist the resolved config."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    ensure_fresh([run_dir / RESOLVED_NAME, run_dir / MANIFEST_NAME], overwrite)
    (run_dir / RESOLVED_NAME).write_text(config.to_json(), encoding="utf-8")
    return run_dir


def write_manifest(run_dir, produced: list[Path]) -> Path:
    """List every produced file (run-dir-relative when possible), sorted."""
    run_dir = Path(run_dir)
    names = []
    for p in [run_dir / RESOLVED_NAME] + list(produced):
        p = Path(p)
        try:
            names.append(p.relative_to(run_dir).as_posix())
        except ValueError:
            names.append(p.as_posix())
    path = run_dir / MANIFEST_NAME
    path.write_text("".join(n + "\n" for n in sorted(set(names))), encoding="utf-8")
    return path
