"""Selective state-space recurrence and its scan implementations.

The recurrence per channel c with diagonal state of size N:

    delta_t = softplus(Wd x_t + bd)          (per channel)
    B_t     = Wb x_t + bb,  C_t = Wc x_t + bc
    Abar_t  = exp(delta_t * A),  Bbar_t = delta_t * B_t
    s_t     = Abar_t (*) s_{t-1} + Bbar_t * x_t[c],   s_{-1} = 0
    y_t[c]  = <C_t, s_t[c]> + D[c] x_t[c]

Both the step-by-step form and a chunked prefix-scan form are provided;
they must agree to 1e-10 relative and share gradients via the same
primitive ops.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, ParamStore, Tensor
from .ops import affine

__all__ = [
    "SelectiveSsmParams",
    "ScanSequence",
    "init_ssm_params",
    "discretize",
    "selective_scan_sequential",
    "selective_scan_parallel",
    "reverse_ordering",
    "identity_ordering",
    "bench_scan",
    "fit_exponent",
    "DEFAULT_CHUNK",
]

DEFAULT_CHUNK = 64


@dataclass
class SelectiveSsmParams:
    """Handles into a ParamStore for one scan layer.

    The state matrix is stored as a_log with A = -exp(a_log), which keeps
    every entry strictly negative under unconstrained updates.
    """

    a_log: Tensor
    wd: Tensor
    bd: Tensor
    wb: Tensor
    bb: Tensor
    wc: Tensor
    bc: Tensor
    d: Tensor | None = None

    @property
    def h(self) -> int:
        return self.a_log.shape[0]

    @property
    def n(self) -> int:
        return self.a_log.shape[1]

    def A(self) -> Tensor:
        return -T.exp(self.a_log)


@dataclass
class ScanSequence:
    """A length-L sequence of h-dim steps plus the visit order."""

    steps: Tensor
    ordering: np.ndarray | None = None

    def __post_init__(self):
        if self.ordering is not None:
            o = np.asarray(self.ordering, dtype=np.intp)
            L = self.steps.shape[-2]
            if sorted(o.tolist()) != list(range(L)):
                raise ConfigurationError("ordering must be a permutation of 0..L-1")
            self.ordering = o


def init_ssm_params(store: ParamStore, name: str, h: int, n: int,
                    rng: np.random.Generator, skip: bool = True) -> SelectiveSsmParams:
    # negative ramp -(1..N) per channel at init: a_log = log(1..N)
    a_log = store.add(f"{name}.a_log", np.tile(np.log(np.arange(1, n + 1.0)), (h, 1)))
    s = 1.0 / np.sqrt(h)
    wd = store.add(f"{name}.wd", rng.uniform(-s, s, size=(h, h)))
    bd = store.add(f"{name}.bd", np.zeros(h))
    wb = store.add(f"{name}.wb", rng.uniform(-s, s, size=(h, n)))
    bb = store.add(f"{name}.bb", np.zeros(n))
    wc = store.add(f"{name}.wc", rng.uniform(-s, s, size=(h, n)))
    bc = store.add(f"{name}.bc", np.zeros(n))
    d = store.add(f"{name}.d", np.ones(h)) if skip else None
    return SelectiveSsmParams(a_log, wd, bd, wb, bb, wc, bc, d)


def identity_ordering(L: int) -> np.ndarray:
    return np.arange(L, dtype=np.intp)


def reverse_ordering(L: int) -> np.ndarray:
    if L < 1:
        raise ConfigurationError("scan length must be >= 1")
    return np.arange(L - 1, -1, -1, dtype=np.intp)


def discretize(a_row, delta_t, b_t):
    """Zero-order-hold step: Abar = exp(delta*A), Bbar = delta*B."""
    a_row, delta_t, b_t = T._wrap(a_row), T._wrap(delta_t), T._wrap(b_t)
    return T.exp(delta_t * a_row), delta_t * b_t


def _projections(x: Tensor, p: SelectiveSsmParams):
    """Per-step data-dependent (Abar, Bbar*x, C) from ordered input x."""
    delta = T.softplus(affine(x, p.wd, p.bd))          # (...,L,h)
    B = affine(x, p.wb, p.bb)                          # (...,L,N)
    C = affine(x, p.wc, p.bc)                          # (...,L,N)
    n = p.n
    delta4 = delta.reshape(delta.shape + (1,))
    A = p.A()                                          # (h,N)
    abar = T.exp(delta4 * A)                           # (...,L,h,N)
    u = delta * x                                      # (...,L,h)
    bx = u.reshape(u.shape + (1,)) * B.reshape(B.shape[:-1] + (1, n))
    return abar, bx, C


def _tail_idx(t: int, tail: int):
    return (Ellipsis, t) + (slice(None),) * tail


def _apply_ordering(x: Tensor, ordering: np.ndarray | None, axis: int) -> Tensor:
    if ordering is None or np.array_equal(ordering, np.arange(len(ordering))):
        return x
    return T.permute_axis(x, ordering, axis)


def _readout(states: Tensor, C: Tensor, x: Tensor, p: SelectiveSsmParams) -> Tensor:
    n = p.n
    y = (C.reshape(C.shape[:-1] + (1, n)) * states).sum(axis=-1)
    if p.d is not None:
        y = y + p.d * x
    return y


def _scan_states_sequential(abar: Tensor, bx: Tensor) -> Tensor:
    """Step-by-step state recurrence as one fused primitive: the forward
    loop fills s_t = abar_t * s_{t-1} + bx_t and the backward pass runs
    the hand-derived adjoint recurrence gs_t = g_t + abar_{t+1} gs_{t+1}."""
    a, b = abar.data, bx.data
    L = a.shape[-3]
    states = np.empty_like(b)
    prev = np.zeros(b.shape[:-3] + b.shape[-2:])
    for t in range(L):
        prev = a[..., t, :, :] * prev + b[..., t, :, :]
        states[..., t, :, :] = prev

    def bw(g):
        da = np.empty_like(a)
        db = np.empty_like(b)
        gs = np.zeros(prev.shape)
        for t in range(L - 1, -1, -1):
            if t == L - 1:
                gs = np.array(g[..., t, :, :], copy=True)
            else:
                gs = g[..., t, :, :] + a[..., t + 1, :, :] * gs
            db[..., t, :, :] = gs
            if t > 0:
                da[..., t, :, :] = gs * states[..., t - 1, :, :]
            else:
                da[..., t, :, :] = 0.0
        return (da, db)

    return T._make(states, (abar, bx), bw)


def _scan_states_chunked(abar: Tensor, bx: Tensor, chunk: int) -> Tensor:
    """Two-level prefix scan: per-chunk sequential combine vectorized over
    chunks, then a scan over chunk aggregates, then a broadcast fix-up.
    The combine tree is fixed by the chunk size, so results do not depend
    on any execution parallelism."""
    L = abar.shape[-3]
    h, n = abar.shape[-2], abar.shape[-1]
    lead = abar.shape[:-3]
    nb = -(-L // chunk)
    pad = nb * chunk - L
    if pad:
        ones = Tensor(np.ones(lead + (pad, h, n)))
        zeros_t = Tensor(np.zeros(lead + (pad, h, n)))
        abar = T.concat([abar, ones], axis=-3)
        bx = T.concat([bx, zeros_t], axis=-3)
    a = abar.reshape(lead + (nb, chunk, h, n))
    b = bx.reshape(lead + (nb, chunk, h, n))
    aP = [None] * chunk
    bP = [None] * chunk
    for i in range(chunk):
        ai = a[(Ellipsis, slice(None), i) + (slice(None),) * 2]
        bi = b[(Ellipsis, slice(None), i) + (slice(None),) * 2]
        if i == 0:
            aP[0], bP[0] = ai, bi
        else:
            aP[i] = ai * aP[i - 1]
            bP[i] = ai * bP[i - 1] + bi
    # exclusive scan over chunk aggregates (aP[-1], bP[-1]) along the chunk axis
    agg_a, agg_b = aP[-1], bP[-1]                       # (...,nb,h,n)
    bE = [Tensor(np.zeros(lead + (h, n)))]
    aE_prev = Tensor(np.ones(lead + (h, n)))
    for k in range(1, nb):
        ak = agg_a[_tail_idx(k - 1, 2)]
        bk = agg_b[_tail_idx(k - 1, 2)]
        bE.append(ak * bE[-1] + bk)
        aE_prev = ak * aE_prev  # kept for clarity; not needed downstream
    bE_s = T.stack(bE, axis=-3)                         # (...,nb,h,n)
    bE_b = bE_s.reshape(lead + (nb, 1, h, n))
    inblock_a = T.stack(aP, axis=-3)                    # (...,nb,chunk,h,n)
    inblock_b = T.stack(bP, axis=-3)
    states = inblock_a * bE_b + inblock_b
    states = states.reshape(lead + (nb * chunk, h, n))
    if pad:
        states = states[(Ellipsis, slice(0, L)) + (slice(None),) * 2]
    return states


def _scan(x: Tensor, p: SelectiveSsmParams, ordering: np.ndarray | None,
          parallel: bool, chunk: int = DEFAULT_CHUNK) -> Tensor:
    """Shared entry: order, project, scan, read out, restore order."""
    L = x.shape[-2]
    xo = _apply_ordering(x, ordering, axis=-2)
    abar, bx, C = _projections(xo, p)
    if parallel and L > 1:
        states = _scan_states_chunked(abar, bx, chunk)
    else:
        states = _scan_states_sequential(abar, bx)
    yo = _readout(states, C, xo, p)
    if ordering is None or np.array_equal(ordering, np.arange(L)):
        return yo
    inv = np.empty_like(ordering)
    inv[ordering] = np.arange(L)
    return T.permute_axis(yo, inv, axis=-2)


def selective_scan_sequential(seq: ScanSequence, params: SelectiveSsmParams) -> Tensor:
    return _scan(seq.steps, params, seq.ordering, parallel=False)


def selective_scan_parallel(seq: ScanSequence, params: SelectiveSsmParams,
                            chunk: int = DEFAULT_CHUNK) -> Tensor:
    return _scan(seq.steps, params, seq.ordering, parallel=True, chunk=chunk)


# -- benchmarking -------------------------------------------------------------


def _attention_baseline(x: np.ndarray, wq, wk, wv) -> np.ndarray:
    q, k, v = x @ wq, x @ wk, x @ wv
    logits = q @ k.T / np.sqrt(q.shape[-1])
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    return w @ v


def bench_scan(L_values, h: int = 8, n: int = 8, repeats: int = 5,
               seed: int = 0, include_attention: bool = True) -> list[dict]:
    """Wall-time table for the scan implementations and an O(L^2) attention
    baseline.  Rows: {L, impl, mean_ns, stddev_ns}."""
    L_values = list(L_values)
    if any(b < a for a, b in zip(L_values, L_values[1:])):
        raise ConfigurationError("L values must be ascending")
    rng = np.random.default_rng(seed)
    rows = []
    store = ParamStore()
    p = init_ssm_params(store, "bench", h, n, rng)
    wq, wk, wv = (rng.standard_normal((h, h)) for _ in range(3))
    for L in L_values:
        x = Tensor(rng.standard_normal((L, h)))
        seq = ScanSequence(x)
        impls = {
            "sequential": lambda: selective_scan_sequential(seq, p),
            "parallel": lambda: selective_scan_parallel(seq, p),
        }
        if include_attention:
            impls["attention"] = lambda: _attention_baseline(x.data, wq, wk, wv)
        for impl, fn in impls.items():
            times = []
            with T.no_grad():
                fn()  # warm-up
                for _ in range(repeats):
                    t0 = time.perf_counter_ns()
                    fn()
                    times.append(time.perf_counter_ns() - t0)
            rows.append({
                "L": L,
                "impl": impl,
                "mean_ns": float(np.mean(times)),
                "stddev_ns": float(np.std(times)),
            })
    return rows


def fit_exponent(rows: list[dict], impl: str) -> float:
    """Least-squares slope of log(time) vs log(L) for one implementation."""
    pts = [(r["L"], r["mean_ns"]) for r in rows if r["impl"] == impl]
    if len(pts) < 2:
        raise ConfigurationError(f"need >= 2 sizes to fit an exponent for {impl}")
    ls = np.log([p[0] for p in pts])
    ts = np.log([p[1] for p in pts])
    return float(np.polyfit(ls, ts, 1)[0])


def bench_rows_to_csv(rows: list[dict]) -> str:
    lines = ["L,impl,mean_ns,stddev_ns"]
    for r in rows:
        lines.append(f"{r['L']},{r['impl']},{r['mean_ns']:.1f},{r['stddev_ns']:.1f}")
    return "\n".join(lines) + "\n"
