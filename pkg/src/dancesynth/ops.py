"""Differentiable building blocks: layer norm, MLP chains, temporal and
spatial convolutions.  All operate on trailing axes so leading batch axes
broadcast for free."""

from __future__ import annotations

import numpy as np

from .tensor import (
    ConfigurationError,
    DimensionError,
    ParamStore,
    Tensor,
    _make,
    _wrap,
    silu,
    sigmoid,
)

__all__ = [
    "layer_norm",
    "affine",
    "mlp_forward",
    "init_affine",
    "init_mlp",
    "init_layer_norm",
    "conv1d_time",
    "conv2d",
    "upsample_nearest",
]


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine.

    Constant inputs map to zeros pre-affine (the eps term absorbs the
    zero variance instead of producing NaN).
    """
    if eps <= 0:
        raise ConfigurationError("layer_norm eps must be > 0")
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layer_norm affine shape {gamma.shape}/{beta.shape} vs feature dim {d}")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return centered * inv * gamma + beta


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return x @ w + b


def init_affine(store: ParamStore, name: str, d_in: int, d_out: int,
                rng: np.random.Generator) -> None:
    s = 1.0 / np.sqrt(d_in)
    store.add(f"{name}.w", rng.uniform(-s, s, size=(d_in, d_out)))
    store.add(f"{name}.b", rng.uniform(-s, s, size=(d_out,)))


def init_layer_norm(store: ParamStore, name: str, d: int) -> None:
    store.add(f"{name}.g", np.ones(d))
    store.add(f"{name}.b", np.zeros(d))


def init_mlp(store: ParamStore, name: str, spec: list[int],
             rng: np.random.Generator) -> None:
    if len(spec) < 2:
        raise ConfigurationError("mlp spec needs at least [d_in, d_out]")
    for i in range(len(spec) - 1):
        init_affine(store, f"{name}.{i}", spec[i], spec[i + 1], rng)


def mlp_forward(x: Tensor, store: ParamStore, spec: list[int], name: str,
                gate=silu) -> Tensor:
    """Affine chain with the gate nonlinearity between layers (none after
    the last)."""
    if x.shape[-1] != spec[0]:
        raise ConfigurationError(
            f"mlp input dim {x.shape[-1]} does not match spec head {spec[0]}")
    n_layers = len(spec) - 1
    for i in range(n_layers):
        key = f"{name}.{i}.w"
        if key not in store:
            raise ConfigurationError(f"missing mlp parameter {key}")
        x = affine(x, store[f"{name}.{i}.w"], store[f"{name}.{i}.b"])
        if i < n_layers - 1:
            x = gate(x)
    return x


def conv1d_time(x: Tensor, kernel: Tensor) -> Tensor:
    """Same-padded convolution along the second-to-last axis.

    x: (..., F, C_in), kernel: (K, C_in, C_out) with K odd; output (..., F, C_out).
    """
    x, kernel = _wrap(x), _wrap(kernel)
    K, c_in, c_out = kernel.shape
    if K % 2 == 0:
        raise ConfigurationError("temporal kernel size must be odd")
    if x.shape[-1] != c_in:
        raise DimensionError(f"conv1d_time channels {x.shape[-1]} vs kernel {c_in}")
    pad = K // 2
    widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (0, 0)]
    xp = np.pad(x.data, widths)
    F = x.shape[-2]
    # per-tap matmul accumulation in a fixed order: einsum's vectorized
    # reductions are sensitive to buffer alignment, which varies between
    # processes and would break bit-identical reruns
    taps = [np.ascontiguousarray(xp[..., k:k + F, :]) for k in range(K)]
    out = taps[0] @ kernel.data[0]
    for k in range(1, K):
        out += taps[k] @ kernel.data[k]

    def bw(g):
        gm = np.ascontiguousarray(g).reshape(-1, c_out)
        dk = np.stack([tap.reshape(-1, c_in).T @ gm for tap in taps])
        dxp = np.zeros_like(xp)
        for k in range(K):
            dxp[..., k:k + F, :] += g @ kernel.data[k].T
        dx = dxp[..., pad:pad + F, :] if pad else dxp
        return (dx, dk)

    return _make(out, (x, kernel), bw)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, pad: int | None = None) -> Tensor:
    """2-d convolution over (..., H, W, C_in) with kernel (kh, kw, C_in, C_out)."""
    x, kernel = _wrap(x), _wrap(kernel)
    kh, kw, c_in, c_out = kernel.shape
    if x.shape[-1] != c_in:
        raise DimensionError(f"conv2d channels {x.shape[-1]} vs kernel {c_in}")
    if pad is None:
        pad = kh // 2
    widths = [(0, 0)] * (x.ndim - 3) + [(pad, pad), (pad, pad), (0, 0)]
    xp = np.pad(x.data, widths)
    H, W = x.shape[-3], x.shape[-2]
    Ho = (xp.shape[-3] - kh) // stride + 1
    Wo = (xp.shape[-2] - kw) // stride + 1
    # per-tap matmul accumulation in a fixed order (see conv1d_time)
    taps = [[np.ascontiguousarray(
        xp[..., i:i + stride * Ho:stride, j:j + stride * Wo:stride, :])
        for j in range(kw)] for i in range(kh)]
    out = None
    for i in range(kh):
        for j in range(kw):
            term = taps[i][j] @ kernel.data[i, j]
            out = term if out is None else out + term

    def bw(g):
        gm = np.ascontiguousarray(g).reshape(-1, c_out)
        dk = np.stack([np.stack([taps[i][j].reshape(-1, c_in).T @ gm
                                 for j in range(kw)]) for i in range(kh)])
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                dxp[..., i:i + stride * Ho:stride, j:j + stride * Wo:stride, :] += \
                    g @ kernel.data[i, j].T
        if pad:
            dx = dxp[..., pad:-pad, pad:-pad, :]
        else:
            dx = dxp
        return (dx, dk)

    return _make(out, (x, kernel), bw)


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling of (..., H, W, C) by an integer factor."""
    x = _wrap(x)
    out = np.repeat(np.repeat(x.data, factor, axis=-3), factor, axis=-2)
    H, W = x.shape[-3], x.shape[-2]

    def bw(g):
        lead = g.shape[:-3]
        g = g.reshape(lead + (H, factor, W, factor, g.shape[-1]))
        return (g.sum(axis=(-4, -2)),)

    return _make(out, (x,), bw)
