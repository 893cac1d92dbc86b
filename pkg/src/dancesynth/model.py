"""Music-to-skeleton generator: GRU frontend, stacked spatial-temporal
graph blocks with three gated scan branches, and a coordinate head.

Per block, with Z the (..., F, V, h) latent and s the gate nonlinearity:

    Zc   = GraphConv1d(MLP(LN(Z)))
    G    = s(MLP(LN(Z)))
    S_b  = LN_b(scan_b(s(Zc)))      for each enabled branch b
    Zout = MLP(LN(sum_b S_b * G)) [+ Z]

Branches: a spatial scan over joints within each frame (depth-first body
order), and forward/backward temporal scans over frames per joint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, ParamStore, Tensor
from .ops import (affine, init_affine, init_layer_norm, init_mlp, layer_norm,
                  mlp_forward, conv1d_time)
from .graph import GraphSpec, default_skeleton, graph_conv1d, init_graph_conv, spatial_scan_order
from .gru import gru_bidirectional, gru_causal, init_gru_encoder
from .scan import SelectiveSsmParams, init_ssm_params, reverse_ordering, _scan

__all__ = ["ModelConfig", "SkeletonGenerator", "BRANCH_NAMES"]

BRANCH_NAMES = ("spatial", "temporal_fw", "temporal_bw")


@dataclass
class ModelConfig:
    V: int = 15
    h: int = 64
    n_state: int = 8
    n_blocks: int = 4
    h_z: int = 16
    d_in: int = 19
    gru_layers: int = 2
    # causal frontend: the recurrent encoder sees only past frames, so all
    # future (next-beat) context must flow through the backward temporal
    # scan branch -- which is what the identity ablation removes
    frontend_causal: bool = True
    gate: str = "silu"            # or "sigmoid"
    residual: bool = True
    branch_spatial: bool = True
    branch_temporal_fw: bool = True
    branch_temporal_bw: bool = True
    identity_ssm: bool = False    # branches pass features through unchanged
    literal_asym_ln: bool = False # skip LN on the spatial branch output
    ssm_skip: bool = True

    def __post_init__(self):
        for name in ("V", "h", "n_state", "n_blocks", "h_z", "d_in", "gru_layers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"config {name} must be >= 1")
        if self.gate not in ("silu", "sigmoid"):
            raise ConfigurationError(f"unknown gate nonlinearity: {self.gate}")
        if not (self.branch_spatial or self.branch_temporal_fw or self.branch_temporal_bw):
            raise ConfigurationError("at least one scan branch must be enabled")

    def enabled_branches(self) -> list[str]:
        return [n for n, on in zip(BRANCH_NAMES, (
            self.branch_spatial, self.branch_temporal_fw, self.branch_temporal_bw)) if on]


def _gate_fn(cfg: ModelConfig):
    return T.silu if cfg.gate == "silu" else T.sigmoid


class SkeletonGenerator:
    """Owns a ParamStore and the forward pass from audio features to joint
    coordinates.  Pure given a parameter snapshot; a seeded run is
    bit-reproducible."""

    def __init__(self, cfg: ModelConfig, graph: GraphSpec | None = None,
                 seed: int = 0, store: ParamStore | None = None):
        self.cfg = cfg
        self.graph = graph if graph is not None else default_skeleton()
        if self.graph.V != cfg.V:
            raise ConfigurationError(f"graph V={self.graph.V} vs config V={cfg.V}")
        self.spatial_order = spatial_scan_order(self.graph)
        if store is None:
            self.store = ParamStore()
            self._init_params(np.random.default_rng(seed))
        else:
            self.store = store
        self._ssm_cache: dict[str, SelectiveSsmParams] = {}

    # -- parameters -----------------------------------------------------------

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.cfg
        store = self.store
        init_gru_encoder(store, "frontend", cfg.d_in, cfg.h, rng,
                         layers=cfg.gru_layers, causal=cfg.frontend_causal)
        init_affine(store, "lift", cfg.h + cfg.h_z, cfg.h, rng)
        s = 1.0 / np.sqrt(cfg.h)
        store.add("emb", rng.uniform(-s, s, size=(cfg.V, cfg.h)))
        for b in range(cfg.n_blocks):
            p = f"block{b}"
            init_layer_norm(store, f"{p}.ln_in", cfg.h)
            init_mlp(store, f"{p}.mlp_in", [cfg.h, cfg.h], rng)
            init_graph_conv(store, f"{p}.gconv", cfg.h, rng)
            init_layer_norm(store, f"{p}.ln_gate", cfg.h)
            init_mlp(store, f"{p}.mlp_gate", [cfg.h, cfg.h], rng)
            for br in cfg.enabled_branches():
                if not cfg.identity_ssm:
                    init_ssm_params(store, f"{p}.{br}.ssm", cfg.h, cfg.n_state,
                                    rng, skip=cfg.ssm_skip)
                if not (cfg.literal_asym_ln and br == "spatial"):
                    init_layer_norm(store, f"{p}.{br}.ln", cfg.h)
            init_layer_norm(store, f"{p}.ln_out", cfg.h)
            init_mlp(store, f"{p}.mlp_out", [cfg.h, cfg.h], rng)
        init_mlp(store, "head.out", [cfg.h, 2 * cfg.V], rng)
        sk = 1.0 / np.sqrt(3 * cfg.V * cfg.h)
        store.add("head.tk", rng.uniform(-sk, sk, size=(3, cfg.V * cfg.h, cfg.h)))
        store.add("head.tb", np.zeros(cfg.h))

    def _ssm(self, name: str) -> SelectiveSsmParams:
        p = self._ssm_cache.get(name)
        if p is None:
            st = self.store
            p = SelectiveSsmParams(
                st[f"{name}.a_log"], st[f"{name}.wd"], st[f"{name}.bd"],
                st[f"{name}.wb"], st[f"{name}.bb"], st[f"{name}.wc"], st[f"{name}.bc"],
                st[f"{name}.d"] if f"{name}.d" in st else None)
            self._ssm_cache[name] = p
        return p

    # -- forward pieces ---------------------------------------------------------

    def lift_to_graph(self, H0: Tensor, z: Tensor) -> Tensor:
        """(..., F, h) tokens + (..., h_z) noise -> (..., F, V, h) latents:
        shared per-frame projection plus a learned per-joint embedding."""
        cfg = self.cfg
        F = H0.shape[-2]
        if z.shape[-1] != cfg.h_z:
            raise T.DimensionError(f"noise width {z.shape[-1]} != h_z {cfg.h_z}")
        zf = z.reshape(z.shape[:-1] + (1, cfg.h_z)) * Tensor(np.ones((F, 1)))
        x = affine(T.concat([H0, zf], axis=-1), self.store["lift.w"], self.store["lift.b"])
        x = x.reshape(x.shape[:-1] + (1, cfg.h))
        return x + self.store["emb"]

    def _ln(self, x: Tensor, name: str) -> Tensor:
        return layer_norm(x, self.store[f"{name}.g"], self.store[f"{name}.b"])

    def _branch(self, name: str, branch: str, a: Tensor) -> Tensor:
        cfg = self.cfg
        if cfg.identity_ssm:
            out = a
        elif branch == "spatial":
            out = _scan(a, self._ssm(f"{name}.ssm"), self.spatial_order, parallel=False)
        elif branch == "temporal_fw":
            out = _scan(a.swapaxes(-3, -2), self._ssm(f"{name}.ssm"), None,
                        parallel=False).swapaxes(-3, -2)
        else:
            F = a.shape[-3]
            out = _scan(a.swapaxes(-3, -2), self._ssm(f"{name}.ssm"),
                        reverse_ordering(F), parallel=False).swapaxes(-3, -2)
        if cfg.literal_asym_ln and branch == "spatial":
            return out
        return self._ln(out, f"{name}.ln")

    def block_forward(self, Z: Tensor, index: int) -> Tensor:
        cfg = self.cfg
        p = f"block{index}"
        gate_fn = _gate_fn(cfg)
        pre = mlp_forward(self._ln(Z, f"{p}.ln_in"), self.store, [cfg.h, cfg.h],
                          f"{p}.mlp_in")
        Zc = graph_conv1d(pre, self.graph, self.store, f"{p}.gconv")
        gate = gate_fn(mlp_forward(self._ln(Z, f"{p}.ln_gate"), self.store,
                                   [cfg.h, cfg.h], f"{p}.mlp_gate"))
        a = gate_fn(Zc)
        total = None
        for br in cfg.enabled_branches():
            s_b = self._branch(f"{p}.{br}", br, a)
            total = s_b if total is None else total + s_b
        out = mlp_forward(self._ln(total * gate, f"{p}.ln_out"), self.store,
                          [cfg.h, cfg.h], f"{p}.mlp_out")
        if cfg.residual:
            out = out + Z
        return out

    def generation_head(self, Z: Tensor) -> Tensor:
        """(..., F, V, h) -> (..., F, V, 2) coordinates via per-frame joint
        concatenation, a K=3 temporal convolution, and a linear readout."""
        cfg = self.cfg
        flat = Z.reshape(Z.shape[:-2] + (cfg.V * cfg.h,))
        mixed = conv1d_time(flat, self.store["head.tk"]) + self.store["head.tb"]
        coords = mlp_forward(mixed, self.store, [cfg.h, 2 * cfg.V], "head.out")
        return coords.reshape(coords.shape[:-1] + (cfg.V, 2))

    def forward(self, features: Tensor, z: Tensor) -> Tensor:
        """features: (..., F, d_in) audio features; z: (..., h_z) noise."""
        frontend = gru_causal if self.cfg.frontend_causal else gru_bidirectional
        H0 = frontend(features, self.store, "frontend",
                      layers=self.cfg.gru_layers)
        Z = self.lift_to_graph(H0, z)
        for b in range(self.cfg.n_blocks):
            Z = self.block_forward(Z, b)
        return self.generation_head(Z)

    def generate(self, features: np.ndarray, z: np.ndarray) -> np.ndarray:
        with T.no_grad():
            return self.forward(Tensor(features), Tensor(z)).data
