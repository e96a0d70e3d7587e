"""Shared helpers: finite-difference oracles and micro-model factories.

Finite-difference policy: primitives are checked coordinate-wise with
central differences at eps=1e-5 on O(1)-valued inputs. End-to-end model
losses are checked along random directions (all parameters perturbed at
once) — per-coordinate differences on gradients of magnitude ~1e-8 drown
in float64 cancellation, while the directional derivative keeps the signal
O(1) and still exercises every parameter. The directional eps is 1e-5: any
larger and the sweep starts flipping ReLU pre-activations across zero
(the loss is only piecewise smooth), any smaller buys nothing since
truncation (~1e-10) already sits far below the 1e-4 tolerance.
"""

from __future__ import annotations

import numpy as np
import pytest

from pivotnmt import tensor as T
from pivotnmt.cmlm import CmlmModel
from pivotnmt.rng import seed_rng
from pivotnmt.transformer import ArModel, ModelConfig

PRIMITIVE_EPS = 1e-5
DIRECTIONAL_EPS = 1e-5
FD_TOL = 1e-4


def fd_grad(f, x: np.ndarray, eps: float = PRIMITIVE_EPS) -> np.ndarray:
    """Central-difference gradient of scalar-valued f at x, coordinate-wise."""
    g = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f(x)
        flat[i] = keep - eps
        lo = f(x)
        flat[i] = keep
        out[i] = (hi - lo) / (2 * eps)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = max(1.0, float(np.abs(numeric).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / denom


def check_primitive_grad(build, params: list[np.ndarray], tol: float = FD_TOL) -> None:
    """``build(tensors) -> scalar Tensor``; checks every input's gradient."""
    tensors = [T.parameter(p.copy()) for p in params]
    loss = build(tensors)
    T.backward(loss)
    for i, p in enumerate(params):
        def value(x, i=i):
            probe = [T.constant(q) for q in params]
            probe[i] = T.constant(x)
            with T.no_grad():
                return float(build(probe).data)
        numeric = fd_grad(value, p.copy())
        err = max_rel_err(tensors[i].grad, numeric)
        assert err < tol, f"input {i}: relative error {err:.3e} >= {tol}"


def directional_derivative(loss_fn, params: list[T.Tensor], rng,
                           eps: float = DIRECTIONAL_EPS) -> tuple[float, float]:
    """(analytic g.d, central-difference slope) along one random direction."""
    direction = [rng.standard_normal(p.data.shape) for p in params]
    T.zero_grads(params)
    loss = loss_fn()
    T.backward(loss)
    analytic = sum(
        float((p.grad * d).sum()) for p, d in zip(params, direction)
        if p.grad is not None)
    originals = [p.data.copy() for p in params]

    def at(t: float) -> float:
        for p, o, d in zip(params, originals, direction):
            p.data[...] = o + t * d
        with T.no_grad():
            value = float(loss_fn().data)
        for p, o in zip(params, originals):
            p.data[...] = o
        return value

    numeric = (at(eps) - at(-eps)) / (2 * eps)
    return analytic, numeric


@pytest.fixture
def micro_ar():
    def build(src_vocab=8, trg_vocab=8, dim=8, layers=2, heads=2, ff_dim=12,
              max_len=12, dropout=0.0, seed=0) -> ArModel:
        cfg = ModelConfig(src_vocab, trg_vocab, dim, layers, heads, ff_dim,
                          max_len, dropout)
        return ArModel(cfg, seed_rng(seed))
    return build


@pytest.fixture
def micro_cmlm():
    def build(src_vocab=8, trg_vocab=8, dim=8, layers=1, heads=2, ff_dim=12,
              max_len=12, dropout=0.0, length_classes=6, mask_id=None,
              seed=0) -> CmlmModel:
        cfg = ModelConfig(src_vocab, trg_vocab, dim, layers, heads, ff_dim,
                          max_len, dropout, length_classes=length_classes)
        if mask_id is None:
            return CmlmModel(cfg, seed_rng(seed))
        return CmlmModel(cfg, seed_rng(seed), mask_id=mask_id)
    return build
