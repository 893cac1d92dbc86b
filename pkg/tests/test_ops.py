"""Differentiable building blocks: normalization, MLPs, convolutions."""

import numpy as np
import pytest

from dancesynth import tensor as T
from dancesynth.ops import (affine, conv1d_time, conv2d, init_mlp, layer_norm,
                            mlp_forward, upsample_nearest)
from dancesynth.tensor import (ConfigurationError, DimensionError, ParamStore,
                               Tensor, grad_check)


def _t(shape, seed=0):
    return Tensor(np.random.default_rng(seed).standard_normal(shape),
                  requires_grad=True)


def test_layer_norm_normalizes_last_axis():
    x = _t((4, 6), seed=1)
    g, b = Tensor(np.ones(6)), Tensor(np.zeros(6))
    out = layer_norm(x, g, b).data
    assert np.allclose(out.mean(axis=-1), 0.0, atol=1e-10)
    assert np.allclose(out.var(axis=-1), 1.0, atol=1e-3)


def test_layer_norm_constant_input_is_finite():
    x = Tensor(np.full((2, 5), 3.0))
    out = layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5)))
    assert np.allclose(out.data, 0.0)


def test_layer_norm_gradients():
    x = _t((3, 5), seed=2)
    g = Tensor(np.random.default_rng(3).uniform(0.5, 1.5, 5), requires_grad=True)
    b = _t((5,), seed=4)
    assert grad_check(lambda: layer_norm(x, g, b).sum(), [x, g, b]) < 1e-5


def test_layer_norm_shape_and_eps_validation():
    x = _t((3, 5))
    with pytest.raises(DimensionError):
        layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(5)))
    with pytest.raises(ConfigurationError):
        layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5)), eps=0.0)


def test_mlp_forward_shapes_and_gradients():
    store = ParamStore()
    rng = np.random.default_rng(5)
    init_mlp(store, "m", [4, 8, 3], rng)
    x = _t((2, 6, 4), seed=6)
    out = mlp_forward(x, store, [4, 8, 3], "m")
    assert out.shape == (2, 6, 3)
    params = store.tensors() + [x]
    assert grad_check(
        lambda: mlp_forward(x, store, [4, 8, 3], "m").sum(), params) < 1e-5


def test_mlp_rejects_bad_spec():
    store = ParamStore()
    init_mlp(store, "m", [4, 3], np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        mlp_forward(_t((2, 5)), store, [4, 3], "m")     # input dim mismatch
    with pytest.raises(ConfigurationError):
        mlp_forward(_t((2, 4)), store, [4, 8, 3], "m")  # missing layer params


def test_conv1d_time_same_padding_and_identity_kernel():
    x = _t((2, 7, 3), seed=7)
    k = np.zeros((3, 3, 3))
    k[1] = np.eye(3)     # center tap = identity
    out = conv1d_time(x, Tensor(k))
    assert np.allclose(out.data, x.data)


def test_conv1d_time_gradients_and_validation():
    x = _t((2, 5, 3), seed=8)
    k = _t((3, 3, 4), seed=9)
    assert grad_check(lambda: conv1d_time(x, k).sum(), [x, k]) < 1e-5
    with pytest.raises(ConfigurationError):
        conv1d_time(x, Tensor(np.zeros((2, 3, 4))))   # even kernel
    with pytest.raises(DimensionError):
        conv1d_time(x, Tensor(np.zeros((3, 5, 4))))   # channel mismatch


@pytest.mark.parametrize("stride,H", [(1, 6), (2, 6), (2, 4)])
def test_conv2d_gradients(stride, H):
    x = _t((2, H, H, 3), seed=10)
    k = _t((3, 3, 3, 4), seed=11)
    assert grad_check(
        lambda: conv2d(x, k, stride=stride, pad=1).sum(), [x, k]) < 1e-5


def test_conv2d_output_shape_with_stride():
    x = _t((6, 6, 3), seed=12)
    k = _t((3, 3, 3, 5), seed=13)
    assert conv2d(x, k, stride=2, pad=1).shape == (3, 3, 5)
    assert conv2d(x, k).shape == (6, 6, 5)


def test_upsample_nearest_values_and_gradients():
    x = _t((2, 2, 3), seed=14)
    out = upsample_nearest(x)
    assert out.shape == (4, 4, 3)
    assert np.array_equal(out.data[0, 0], x.data[0, 0])
    assert np.array_equal(out.data[3, 3], x.data[1, 1])
    assert grad_check(lambda: (upsample_nearest(x) ** 2.0).sum(), [x]) < 1e-5


def test_affine_matches_manual():
    x = _t((4, 3), seed=15)
    w, b = _t((3, 2), seed=16), _t((2,), seed=17)
    assert np.allclose(affine(x, w, b).data, x.data @ w.data + b.data)
