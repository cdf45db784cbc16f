import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from mstcn.core.tensor import DimensionError, NumericalError
from mstcn.modules import (Concat, Conv1D, ConvSpec, Dense, DepthwiseConv1D,
                           DepthwiseSeparableConv1D, Dropout, Flatten,
                           GlobalAvgPool, GlobalMaxPool, PointwiseConv1D,
                           ReLU, Sigmoid, conv1d_forward, conv_layer,
                           depthwise_conv1d_forward, layer_backward,
                           pointwise_conv1d_forward)
from mstcn.utils.random import check_state


def _naive_conv(x, w, b, stride, padding):
    k, m, f = w.shape
    length = x.shape[0]
    if padding == 'same':
        n_out = -(-length // stride)
        total = max((n_out - 1) * stride + k - length, 0)
        x = np.pad(x, ((total // 2, total - total // 2), (0, 0)))
    else:
        n_out = (length - k) // stride + 1
    out = np.zeros((n_out, f))
    for i in range(n_out):
        for j in range(k):
            out[i] += x[i * stride + j] @ w[j]
    return out + b


@pytest.mark.parametrize('stride,padding', [(1, 'same'), (2, 'same'),
                                            (4, 'same'), (3, 'valid')])
def test_conv_matches_naive(stride, padding):
    rs = check_state(0)
    x = rs.standard_normal((17, 3))
    w = rs.standard_normal((5, 3, 4))
    b = rs.standard_normal(4)
    assert_allclose(conv1d_forward(x, w, b, stride, padding),
                    _naive_conv(x, w, b, stride, padding), rtol=1e-10,
                    atol=1e-12)


@pytest.mark.parametrize('length,stride', [(800, 4), (200, 2), (100, 1),
                                           (7, 3), (1, 2)])
def test_same_padding_length(length, stride):
    spec = ConvSpec(64, 3, 8, stride, kind='depthwise_separable')
    assert spec.output_length(length) == -(-length // stride)
    layer = conv_layer(spec, check_state(0))
    out = layer.forward(np.zeros((2, length, 3), np.float32))
    assert out.shape == (2, -(-length // stride), 8)


def test_valid_padding_too_short():
    with pytest.raises(DimensionError):
        ConvSpec(5, 2, 3, padding='valid').output_length(4)


def test_parameter_economy():
    dps = ConvSpec(64, 3, 32, kind='depthwise_separable')
    std = ConvSpec(64, 3, 32)
    assert dps.n_param == 320
    assert std.n_param == 6176
    assert ConvSpec(64, 3, kind='depthwise').n_param == 192
    rs = check_state(0)
    assert conv_layer(dps, rs).n_param == 320
    assert conv_layer(std, rs).n_param == 6176


def test_depthwise_separable_is_composition():
    rs = check_state(1)
    for _ in range(1000):
        m, f = rs.integers(1, 5), rs.integers(1, 6)
        k, stride = rs.integers(1, 9), rs.integers(1, 4)
        length = rs.integers(1, 30)
        layer = DepthwiseSeparableConv1D(
            ConvSpec(k, m, f, stride, kind='depthwise_separable'), rs)
        x = rs.standard_normal((2, length, m)).astype(np.float32)
        p = layer.params
        expected = pointwise_conv1d_forward(
            depthwise_conv1d_forward(x, p['depthwise'], stride),
            p['pointwise'], p['bias'])
        assert_array_equal(layer.forward(x), expected)


def test_depthwise_channel_independence():
    rs = check_state(2)
    layer = DepthwiseConv1D(ConvSpec(5, 4, kind='depthwise'), rs,
                            np.float64)
    x = rs.standard_normal((3, 20, 4))
    y = layer.forward(x)
    x2 = x.copy()
    x2[..., 1] = rs.standard_normal((3, 20))
    y2 = layer.forward(x2)
    changed = np.any(y != y2, axis=(0, 1))
    assert_array_equal(changed, [False, True, False, False])


def test_pointwise_is_matmul():
    rs = check_state(3)
    layer = PointwiseConv1D(ConvSpec(1, 4, 6, kind='pointwise'), rs,
                            np.float64)
    layer.params['bias'][...] = rs.standard_normal(6)
    x = rs.standard_normal((2, 9, 4))
    y = layer.forward(x)
    for i in range(9):
        assert_allclose(y[:, i], x[:, i] @ layer.params['pointwise'] +
                        layer.params['bias'], rtol=1e-12)
    with pytest.raises(ValueError):
        ConvSpec(3, 4, 6, kind='pointwise')


def test_unbatched_conv():
    rs = check_state(4)
    layer = Conv1D(ConvSpec(3, 2, 5), rs, np.float64)
    x = rs.standard_normal((10, 2))
    assert_allclose(layer.forward(x), layer.forward(x[np.newaxis])[0])


def test_dense():
    rs = check_state(5)
    layer = Dense(4, 4, rs, np.float64)
    layer.params['weight'][...] = np.eye(4)
    x = rs.standard_normal((3, 4))
    assert_array_equal(layer.forward(x), x)
    g = rs.standard_normal((3, 4))
    assert_allclose(layer.backward(g), g)
    assert_allclose(layer.grads['weight'], x.T @ g)
    assert_allclose(layer.grads['bias'], g.sum(0))
    assert layer.penalties['weight'] == 'l1'
    assert layer.penalties['bias'] is None
    with pytest.raises(DimensionError):
        layer.forward(x[:, :3])


def test_backward_contract():
    layer = Dense(3, 2, check_state(0))
    with pytest.raises(RuntimeError):
        layer.backward(np.ones((1, 2)))
    layer.forward(np.ones((1, 3), np.float32))
    with pytest.raises(DimensionError):
        layer.backward(np.ones((2, 2)))
    gx = layer_backward(layer, np.ones((1, 2), np.float32))
    assert gx.shape == (1, 3)
    with pytest.raises(ValueError):
        layer_backward(object(), gx)
    # the cache is consumed by one backward pass
    with pytest.raises(RuntimeError):
        layer.backward(np.ones((1, 2), np.float32))


def test_non_finite_output():
    layer = ReLU()
    with pytest.raises(NumericalError):
        layer.forward(np.array([1., np.inf]))


def test_relu_and_sigmoid():
    x = np.array([[-2., -0.5, 0., 0.5, 2.]])
    relu = ReLU()
    assert_array_equal(relu.forward(x), [[0., 0., 0., 0.5, 2.]])
    assert_array_equal(relu.backward(np.ones_like(x)), [[0., 0., 0., 1., 1.]])
    sig = Sigmoid()
    for dtype in (np.float32, np.float64):
        y = sig.forward(np.array([-1000., 0., 40., 1000.], dtype))
        assert y.dtype == dtype
        assert np.all(y > 0) and np.all(y < 1)
        assert y[1] == 0.5 and y[0] == np.finfo(dtype).tiny
        assert y[2] == y[3] == 1 - np.finfo(dtype).epsneg


def test_dropout():
    rs = check_state(6)
    layer = Dropout(0.5)
    x = np.ones((200, 50))
    assert_array_equal(layer.forward(x, 'infer'), x)
    y = layer.forward(x, 'train', check_state(1))
    assert set(np.unique(y)) <= {0., 2.}
    assert abs(np.mean(y == 0.) - 0.5) < 0.02
    assert_array_equal(y, Dropout(0.5).forward(x, 'train', check_state(1)))
    assert_array_equal(layer.backward(np.ones_like(x)), y)
    with pytest.raises(ValueError):
        layer.forward(x, 'train')
    mask = rs.random((200, 50)) > 0.5
    layer.freeze(mask)
    assert_array_equal(layer.forward(x, 'train'), 2. * mask)
    with pytest.raises(ValueError):
        Dropout(1.)


def test_pooling():
    x = np.array([[[1., 5.], [3., 5.], [2., 0.]]])
    gmp = GlobalMaxPool()
    assert_array_equal(gmp.forward(x), [[3., 5.]])
    # ties go to the first maximum
    assert_array_equal(gmp.backward(np.ones((1, 2))),
                       [[[0., 1.], [1., 0.], [0., 0.]]])
    gap = GlobalAvgPool()
    assert_allclose(gap.forward(x), [[2., 10. / 3]])
    assert_allclose(gap.backward(np.full((1, 2), 3.)), np.ones((1, 3, 2)))


def test_concat_and_flatten():
    rs = check_state(7)
    parts = [rs.standard_normal((2, 3)), rs.standard_normal((2, 5))]
    layer = Concat()
    y = layer.forward(parts)
    assert y.shape == (2, 8)
    g = layer.backward(np.arange(16.).reshape(2, 8))
    assert_array_equal(g[1], np.arange(16.).reshape(2, 8)[:, 3:])
    with pytest.raises(DimensionError):
        Concat().forward([np.ones((2, 3)), np.ones((3, 3))])
    flat = Flatten()
    x = rs.standard_normal((2, 4, 3))
    assert_array_equal(flat.forward(x), x.reshape(2, 12))
    assert_array_equal(flat.backward(x.reshape(2, 12)), x)
