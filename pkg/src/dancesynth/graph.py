"""Human-skeleton graph: normalized adjacency, graph convolution, and the
deterministic joint serialization used by the spatial scan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ConfigurationError, DimensionError, ParamStore, Tensor
from .ops import affine, conv1d_time, init_affine

__all__ = [
    "GraphSpec",
    "build_graph",
    "graph_conv1d",
    "init_graph_conv",
    "spatial_scan_order",
    "default_skeleton",
    "parse_topology",
    "format_topology",
    "DEFAULT_JOINTS",
    "DEFAULT_EDGES",
]

# 15-joint body: pelvis root, neck, head, then left/right arm and leg chains.
DEFAULT_JOINTS = [
    "pelvis", "neck", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
]
DEFAULT_EDGES = [
    (0, 1), (1, 2),
    (1, 3), (3, 4), (4, 5),
    (1, 6), (6, 7), (7, 8),
    (0, 9), (9, 10), (10, 11),
    (0, 12), (12, 13), (13, 14),
]


@dataclass(frozen=True)
class GraphSpec:
    """Immutable skeleton topology with precomputed normalized adjacency."""

    V: int
    edges: tuple
    root: int
    norm_adj: np.ndarray
    joint_names: tuple | None = None

    def __post_init__(self):
        self.norm_adj.setflags(write=False)


def _check_connected(V: int, edges) -> bool:
    nbrs = {i: [] for i in range(V)}
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == V


def build_graph(V: int, edges, root: int = 0, joint_names=None) -> GraphSpec:
    """Normalized adjacency D^{-1/2} (A + I) D^{-1/2} over an undirected,
    connected joint graph."""
    edges = [(int(i), int(j)) for i, j in edges]
    for i, j in edges:
        if not (0 <= i < V and 0 <= j < V):
            raise DimensionError(f"edge ({i},{j}) references a joint outside 0..{V - 1}")
    if not (0 <= root < V):
        raise DimensionError(f"root {root} outside 0..{V - 1}")
    if not _check_connected(V, edges):
        raise ConfigurationError("skeleton graph must be connected")
    A = np.zeros((V, V))
    for i, j in edges:
        A[i, j] = 1.0
        A[j, i] = 1.0
    A += np.eye(V)
    dinv = 1.0 / np.sqrt(A.sum(axis=1))
    norm_adj = dinv[:, None] * A * dinv[None, :]
    return GraphSpec(V=V, edges=tuple(edges), root=root, norm_adj=norm_adj,
                     joint_names=tuple(joint_names) if joint_names else None)


def default_skeleton() -> GraphSpec:
    return build_graph(15, DEFAULT_EDGES, root=0, joint_names=DEFAULT_JOINTS)


def spatial_scan_order(g: GraphSpec) -> np.ndarray:
    """Depth-first order from the root, children by ascending joint index."""
    nbrs = {i: [] for i in range(g.V)}
    for i, j in g.edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    order = []
    seen = set()
    stack = [g.root]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        order.append(u)
        for w in sorted(nbrs[u], reverse=True):
            if w not in seen:
                stack.append(w)
    return np.array(order, dtype=np.intp)


def init_graph_conv(store: ParamStore, name: str, h_in: int,
                    rng: np.random.Generator, k: int = 3,
                    h_out: int | None = None) -> None:
    h_out = h_in if h_out is None else h_out
    init_affine(store, f"{name}.mix", h_in, h_out, rng)
    s = 1.0 / np.sqrt(k * h_out)
    store.add(f"{name}.tk", rng.uniform(-s, s, size=(k, h_out, h_out)))


def graph_conv1d(Z: Tensor, g: GraphSpec, store: ParamStore, name: str) -> Tensor:
    """Spatial aggregation by normalized adjacency, learned channel mix,
    then a same-padded temporal convolution per joint.

    Z: (..., F, V, h) frame-major latents.
    """
    if Z.shape[-2] != g.V:
        raise DimensionError(f"latent joint axis {Z.shape[-2]} != graph V {g.V}")
    agg = Tensor(g.norm_adj) @ Z                       # (...,F,V,h)
    mixed = affine(agg, store[f"{name}.mix.w"], store[f"{name}.mix.b"])
    per_joint = mixed.swapaxes(-3, -2)                 # (...,V,F,h)
    out = conv1d_time(per_joint, store[f"{name}.tk"])
    return out.swapaxes(-3, -2)


# -- topology file format ------------------------------------------------------


def format_topology(g: GraphSpec, name: str = "custom") -> str:
    lines = ["# skeleton topology v1", f"name {name}", f"V {g.V}", f"root {g.root}"]
    names = g.joint_names or tuple(f"joint{i}" for i in range(g.V))
    for i, jn in enumerate(names):
        lines.append(f"joint {i} {jn}")
    for i, j in g.edges:
        lines.append(f"edge {i} {j}")
    return "\n".join(lines) + "\n"


def parse_topology(text: str) -> GraphSpec:
    V = None
    root = 0
    names: dict[int, str] = {}
    edges = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key = parts[0]
        if key == "V":
            V = int(parts[1])
        elif key == "root":
            root = int(parts[1])
        elif key == "joint":
            names[int(parts[1])] = parts[2]
        elif key == "edge":
            edges.append((int(parts[1]), int(parts[2])))
        elif key == "name":
            pass
        else:
            raise ConfigurationError(f"unknown topology directive: {key}")
    if V is None:
        raise ConfigurationError("topology file missing V")
    joint_names = [names.get(i, f"joint{i}") for i in range(V)] if names else None
    return build_graph(V, edges, root=root, joint_names=joint_names)
