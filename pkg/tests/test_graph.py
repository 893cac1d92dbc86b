"""Skeleton graph: adjacency normalization, scan ordering, convolution,
and the topology file format."""

import numpy as np
import pytest

from dancesynth.graph import (DEFAULT_EDGES, DEFAULT_JOINTS, build_graph,
                              default_skeleton, format_topology, graph_conv1d,
                              init_graph_conv, parse_topology,
                              spatial_scan_order)
from dancesynth.tensor import (ConfigurationError, DimensionError, ParamStore,
                               Tensor, grad_check)


def test_default_skeleton_shape():
    g = default_skeleton()
    assert g.V == 15
    assert len(g.edges) == 14
    assert len(DEFAULT_JOINTS) == 15
    assert g.joint_names[g.root] == "pelvis"


def test_normalized_adjacency_symmetric_and_bounded():
    g = default_skeleton()
    A = g.norm_adj
    assert np.allclose(A, A.T)
    vals = np.linalg.eigvalsh(A)
    assert vals.max() <= 1.0 + 1e-12   # spectral radius of D^-1/2 (A+I) D^-1/2
    assert np.all(A >= 0.0)


def test_norm_adj_matches_manual_construction():
    edges = [(0, 1), (1, 2)]
    g = build_graph(3, edges)
    A = np.eye(3)
    for i, j in edges:
        A[i, j] = A[j, i] = 1.0
    d = A.sum(axis=1)
    expected = A / np.sqrt(np.outer(d, d))
    assert np.allclose(g.norm_adj, expected, atol=1e-15)


def test_build_graph_validation():
    with pytest.raises(ConfigurationError):
        build_graph(4, [(0, 1), (2, 3)])        # disconnected
    with pytest.raises(DimensionError):
        build_graph(3, [(0, 5)])                # edge out of range
    with pytest.raises(DimensionError):
        build_graph(3, [(0, 1), (1, 2)], root=7)


def test_norm_adj_is_read_only():
    g = default_skeleton()
    with pytest.raises(ValueError):
        g.norm_adj[0, 0] = 5.0


def test_spatial_scan_order_is_dfs_from_root():
    g = default_skeleton()
    order = spatial_scan_order(g)
    assert order[0] == g.root
    assert sorted(order.tolist()) == list(range(g.V))
    # deterministic
    assert np.array_equal(order, spatial_scan_order(g))
    # chain graph: straight walk
    chain = build_graph(4, [(0, 1), (1, 2), (2, 3)])
    assert spatial_scan_order(chain).tolist() == [0, 1, 2, 3]


def test_graph_conv_shapes_and_gradients():
    g = build_graph(4, [(0, 1), (1, 2), (2, 3)])
    store = ParamStore()
    rng = np.random.default_rng(0)
    init_graph_conv(store, "gc", 3, rng)
    Z = Tensor(rng.standard_normal((2, 5, 4, 3)), requires_grad=True)
    out = graph_conv1d(Z, g, store, "gc")
    assert out.shape == (2, 5, 4, 3)
    assert grad_check(lambda: graph_conv1d(Z, g, store, "gc").sum(),
                      store.tensors() + [Z]) < 1e-5


def test_graph_conv_rejects_wrong_joint_count():
    g = default_skeleton()
    store = ParamStore()
    init_graph_conv(store, "gc", 3, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        graph_conv1d(Tensor(np.zeros((5, 4, 3))), g, store, "gc")


def test_topology_roundtrip():
    g = default_skeleton()
    text = format_topology(g, name="default15")
    back = parse_topology(text)
    assert back.V == g.V
    assert back.edges == g.edges
    assert back.root == g.root
    assert back.joint_names == g.joint_names
    assert np.allclose(back.norm_adj, g.norm_adj)


def test_topology_rejects_unknown_directive():
    with pytest.raises(ConfigurationError):
        parse_topology("V 2\nedge 0 1\nbogus 3\n")
    with pytest.raises(ConfigurationError):
        parse_topology("edge 0 1\n")   # missing V
