import math

import numpy as np
import pytest

from models.network import ConvLayer, BatchNormLayer
from services import layers
from utils.errors import ShapeMismatch


def _naive_conv(x, kernel, bias, stride, dilation):
    n, h, w, _ = x.shape
    kh, kw, cin, cout = kernel.shape
    eh, ew = (kh - 1) * dilation[0] + 1, (kw - 1) * dilation[1] + 1
    ho, top, _ = layers.same_padding(h, eh, stride[0])
    wo, left, _ = layers.same_padding(w, ew, stride[1])
    out = np.zeros((n, ho, wo, cout))
    for b in range(n):
        for y in range(ho):
            for x_ in range(wo):
                for o in range(cout):
                    acc = bias[o]
                    for i in range(kh):
                        for j in range(kw):
                            yy = y * stride[0] + i * dilation[0] - top
                            xx = x_ * stride[1] + j * dilation[1] - left
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += x[b, yy, xx, :] @ kernel[i, j, :, o]
                    out[b, y, x_, o] = acc
    return out


# ---------------------------------------------------------------- padding

@pytest.mark.parametrize('size, extent, stride, expected', [
    (280, 13, 1, (280, 6, 6)),
    (280, 5, 2, (140, 1, 2)),
    (140, 5, 3, (47, 1, 2)),
    (9, 1, 1, (9, 0, 0)),
])
def test_same_padding(size, extent, stride, expected):
    assert layers.same_padding(size, extent, stride) == expected


# ---------------------------------------------------------------- convolution

def test_conv_identity_1x1(rng):
    x = rng.normal(size=(2, 5, 6, 3))
    layer = ConvLayer(np.eye(3).reshape(1, 1, 3, 3), np.zeros(3))
    assert np.allclose(layers.conv2d_forward(x, layer), x)


def test_conv_zero_kernel_gives_bias(rng):
    x = rng.normal(size=(1, 4, 4, 2))
    layer = ConvLayer(np.zeros((3, 3, 2, 4)), np.array([1.0, -2.0, 0.5, 0.0]))
    out = layers.conv2d_forward(x, layer)
    assert out.shape == (1, 4, 4, 4)
    assert np.allclose(out, [1.0, -2.0, 0.5, 0.0])


def test_conv_ones_kernel_sums_neighbourhood(rng):
    x = rng.normal(size=(1, 6, 7, 1))
    out = layers.conv2d_forward(x, ConvLayer(np.ones((3, 3, 1, 1)), np.zeros(1)))
    padded = np.pad(x[0, :, :, 0], 1)
    expected = np.array([[padded[y:y + 3, c:c + 3].sum() for c in range(7)] for y in range(6)])
    assert np.allclose(out[0, :, :, 0], expected)


@pytest.mark.parametrize('stride, dilation', [((1, 1), (3, 3)), ((3, 3), (2, 2)), ((2, 1), (1, 2))])
def test_conv_matches_naive_loop(rng, stride, dilation):
    x = rng.normal(size=(2, 11, 10, 3))
    kernel = rng.normal(size=(3, 3, 3, 4))
    bias = rng.normal(size=4)
    out = layers.conv2d_forward(x, ConvLayer(kernel, bias, stride=stride, dilation=dilation))
    assert np.allclose(out, _naive_conv(x, kernel, bias, stride, dilation))


def test_conv_channel_mismatch(rng):
    layer = ConvLayer(np.zeros((3, 3, 2, 4)), np.zeros(4))
    with pytest.raises(ShapeMismatch):
        layers.conv2d_forward(rng.normal(size=(1, 5, 5, 3)), layer)


def test_conv_rejects_nan():
    x = np.zeros((1, 3, 3, 1))
    x[0, 1, 1, 0] = np.nan
    with pytest.raises(ValueError):
        layers.conv2d_forward(x, ConvLayer(np.ones((1, 1, 1, 1)), np.zeros(1)))


# ---------------------------------------------------------------- batch norm

def test_batchnorm_train_normalizes(rng):
    x = rng.normal(3.0, 4.0, size=(4, 5, 5, 3))
    out = layers.batchnorm_forward(x, BatchNormLayer.identity(3), 'train')
    assert np.allclose(out.mean(axis=(0, 1, 2)), 0.0, atol=1e-9)
    assert np.allclose(out.var(axis=(0, 1, 2)), 1.0, atol=1e-3)


def test_batchnorm_affine(rng):
    x = rng.normal(size=(4, 5, 5, 2))
    layer = BatchNormLayer.identity(2)
    layer.gamma = np.full(2, 2.0)
    layer.beta = np.full(2, 3.0)
    out = layers.batchnorm_forward(x, layer, 'train')
    assert np.allclose(out.mean(axis=(0, 1, 2)), 3.0, atol=1e-9)
    assert np.allclose(out.std(axis=(0, 1, 2)), 2.0, atol=1e-3)


def test_batchnorm_infer_matches_train_on_batch_statistics(rng):
    x = rng.normal(1.0, 2.0, size=(3, 4, 4, 2))
    layer = BatchNormLayer.identity(2)
    trained = layers.batchnorm_forward(x, layer, 'train')
    layer.running_mean = x.mean(axis=(0, 1, 2))
    layer.running_var = x.var(axis=(0, 1, 2))
    assert np.allclose(layers.batchnorm_forward(x, layer, 'infer'), trained)


def test_batchnorm_updates_running_statistics(rng):
    x = rng.normal(5.0, 1.0, size=(2, 3, 3, 1))
    layer = BatchNormLayer.identity(1)
    layers.batchnorm_forward(x, layer, 'train')
    assert layer.running_mean[0] == pytest.approx(0.1 * x.mean())
    assert layer.running_var[0] == pytest.approx(0.9 + 0.1 * x.var())


def test_batchnorm_bad_mode(rng):
    with pytest.raises(ValueError):
        layers.batchnorm_forward(rng.normal(size=(1, 2, 2, 1)), BatchNormLayer.identity(1), 'eval')


# ---------------------------------------------------------------- activation and pooling

def test_clipped_relu():
    out = layers.clipped_relu(np.array([-1.0, 0.0, 0.5, 10.0, 12.0]), 10.0)
    assert np.array_equal(out, [0.0, 0.0, 0.5, 10.0, 10.0])
    with pytest.raises(ValueError):
        layers.clipped_relu(np.zeros(2), 0.0)


def test_maxpool_matches_brute_force(rng):
    x = rng.normal(size=(2, 9, 9, 3))
    out = layers.maxpool(x, (5, 5), (2, 2))
    assert out.shape == (2, 5, 5, 3)
    for oy in range(5):
        for ox in range(5):
            y0, x0 = max(oy * 2 - 2, 0), max(ox * 2 - 2, 0)
            window = x[:, y0:oy * 2 + 3, x0:ox * 2 + 3, :]
            assert np.allclose(out[:, oy, ox, :], window.max(axis=(1, 2)))


def test_maxpool_padding_never_wins():
    x = np.full((1, 4, 4, 1), -7.0)
    assert np.all(layers.maxpool(x, (5, 5), (2, 2)) == -7.0)


# ---------------------------------------------------------------- classifier head

def test_softmax_example():
    probs = layers.softmax(np.array([[0.0, math.log(3.0)]]))
    assert np.allclose(probs, [[0.25, 0.75]])


def test_softmax_large_logits_stable():
    probs = layers.softmax(np.array([[1000.0, 1000.0]]))
    assert np.allclose(probs, 0.5)


def test_cross_entropy_examples():
    assert layers.cross_entropy_loss(np.array([0.25, 0.75]), 1) == pytest.approx(-math.log(0.75))
    assert layers.cross_entropy_loss(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))
    assert layers.cross_entropy_loss(np.array([1.0, 0.0]), 0) == pytest.approx(0.0)


def test_fc_shape_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        layers.fc_forward(rng.normal(size=(2, 3, 3, 1)), np.zeros((8, 2)), np.zeros(2))
