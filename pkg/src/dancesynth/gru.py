"""Recurrent encoder for per-piece audio features: causal (forward-only)
or bidirectional GRU layers over an affine lift."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, ParamStore, Tensor
from .ops import init_affine

__all__ = ["init_gru_encoder", "gru_bidirectional", "gru_causal",
           "gru_layer_single"]


def _init_gru_cell(store: ParamStore, name: str, d_in: int, d_h: int,
                   rng: np.random.Generator) -> None:
    for gate in ("z", "r", "n"):
        init_affine(store, f"{name}.w{gate}", d_in, d_h, rng)
        s = 1.0 / np.sqrt(d_h)
        store.add(f"{name}.u{gate}", rng.uniform(-s, s, size=(d_h, d_h)))


def init_gru_encoder(store: ParamStore, name: str, d_in: int, h: int,
                     rng: np.random.Generator, layers: int = 2,
                     causal: bool = False) -> None:
    """Affine lift d_in -> h, then `layers` recurrent layers.

    Causal: one forward cell of width h per layer (no future context).
    Bidirectional: h/2 hidden units per direction, concatenated to h.
    """
    init_affine(store, f"{name}.enc", d_in, h, rng)
    if causal:
        for l in range(layers):
            _init_gru_cell(store, f"{name}.l{l}.fw", h, h, rng)
        return
    if h % 2:
        raise ConfigurationError("encoder width h must be even (h/2 per direction)")
    for l in range(layers):
        for d in ("fw", "bw"):
            _init_gru_cell(store, f"{name}.l{l}.{d}", h, h // 2, rng)


def gru_layer_single(x: Tensor, store: ParamStore, name: str,
                     reverse: bool = False) -> Tensor:
    """One GRU direction over the second-to-last axis. x: (..., F, d_in)."""
    F = x.shape[-2]
    d_h = store[f"{name}.uz"].shape[0]
    wz, bz = store[f"{name}.wz.w"], store[f"{name}.wz.b"]
    wr, br = store[f"{name}.wr.w"], store[f"{name}.wr.b"]
    wn, bn = store[f"{name}.wn.w"], store[f"{name}.wn.b"]
    uz, ur, un = store[f"{name}.uz"], store[f"{name}.ur"], store[f"{name}.un"]
    h = T.zeros(x.shape[:-2] + (d_h,))
    steps = range(F - 1, -1, -1) if reverse else range(F)
    out: list[Tensor | None] = [None] * F
    tail = (slice(None),)
    for t in steps:
        xt = x[(Ellipsis, t) + tail]
        z = T.sigmoid(xt @ wz + h @ uz + bz)
        r = T.sigmoid(xt @ wr + h @ ur + br)
        n = T.tanh(xt @ wn + r * (h @ un) + bn)
        h = (1.0 - z) * n + z * h
        out[t] = h
    return T.stack(out, axis=-2)


def gru_bidirectional(features: Tensor, store: ParamStore, name: str,
                      layers: int = 2) -> Tensor:
    """Affine encoder followed by stacked bidirectional GRU layers.

    features: (..., F, d_in); output: (..., F, h) with the two directions
    concatenated per layer.
    """
    x = features @ store[f"{name}.enc.w"] + store[f"{name}.enc.b"]
    for l in range(layers):
        fw = gru_layer_single(x, store, f"{name}.l{l}.fw", reverse=False)
        bw = gru_layer_single(x, store, f"{name}.l{l}.bw", reverse=True)
        x = T.concat([fw, bw], axis=-1)
    return x


def gru_causal(features: Tensor, store: ParamStore, name: str,
               layers: int = 2) -> Tensor:
    """Affine encoder followed by stacked forward-only GRU layers: the
    output at frame t sees frames 0..t only.

    features: (..., F, d_in); output: (..., F, h).
    """
    x = features @ store[f"{name}.enc.w"] + store[f"{name}.enc.b"]
    for l in range(layers):
        x = gru_layer_single(x, store, f"{name}.l{l}.fw", reverse=False)
    return x
