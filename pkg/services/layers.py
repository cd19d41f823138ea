"""
Forward and backward passes of the layer types the classifier network uses.

Each *_cached forward returns (out, cache); the matching *_backward takes the
upstream gradient and that cache. All tensors are (batch, height, width, channels).
"""
import math

import numpy as np

from models.network import check_tensor4
from utils.errors import ShapeMismatch

PROB_FLOOR = 1e-12


def same_padding(size, extent, stride):
    """Output size ceil(size / stride) and the (before, after) zero padding it needs."""
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + extent - size, 0)
    before = total // 2
    return out, before, total - before


def _window(offset, step, count):
    return slice(offset, offset + (count - 1) * step + 1, step)


# ------------------------------------------------------------------
# Convolution
# ------------------------------------------------------------------

def conv2d_forward_cached(x, layer):
    x = check_tensor4(x, 'conv input')
    n, h, w, c = x.shape
    if c != layer.in_channels:
        raise ShapeMismatch(f"conv expects {layer.in_channels} input channels, got {c}")

    kh, kw = layer.kernel.shape[:2]
    (sh, sw), (dh, dw) = layer.stride, layer.dilation
    eh, ew = layer.extent
    ho, top, bottom = same_padding(h, eh, sh)
    wo, left, right = same_padding(w, ew, sw)
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))

    out = np.empty((n, ho, wo, layer.out_channels))
    out[...] = layer.bias
    for i in range(kh):
        rows = _window(i * dh, sh, ho)
        for j in range(kw):
            out += xp[:, rows, _window(j * dw, sw, wo), :] @ layer.kernel[i, j]

    return out, (xp, layer, (h, w), (top, left))


def conv2d_forward(x, layer):
    """Dilated cross-correlation with 'same' padding; output size ceil(input / stride)."""
    return conv2d_forward_cached(x, layer)[0]


def conv2d_backward(dout, cache):
    """Returns (dx, dkernel, dbias)."""
    xp, layer, (h, w), (top, left) = cache
    n, ho, wo, cout = dout.shape
    kh, kw, cin, _ = layer.kernel.shape
    (sh, sw), (dh, dw) = layer.stride, layer.dilation

    dxp = np.zeros_like(xp)
    dkernel = np.zeros_like(layer.kernel)
    dflat = dout.reshape(-1, cout)
    for i in range(kh):
        rows = _window(i * dh, sh, ho)
        for j in range(kw):
            cols = _window(j * dw, sw, wo)
            dkernel[i, j] = xp[:, rows, cols, :].reshape(-1, cin).T @ dflat
            dxp[:, rows, cols, :] += dout @ layer.kernel[i, j].T

    dbias = dflat.sum(axis=0)
    return dxp[:, top:top + h, left:left + w, :], dkernel, dbias


# ------------------------------------------------------------------
# Batch normalization
# ------------------------------------------------------------------

_BN_AXES = (0, 1, 2)


def batchnorm_forward_cached(x, layer, mode='train'):
    x = check_tensor4(x, 'batchnorm input')
    if x.shape[3] != layer.channels:
        raise ShapeMismatch(f"batchnorm has {layer.channels} channels, input has {x.shape[3]}")

    if mode == 'train':
        mean = x.mean(axis=_BN_AXES)
        var = x.var(axis=_BN_AXES)
        m = layer.momentum_stat
        layer.running_mean = (1 - m) * layer.running_mean + m * mean
        layer.running_var = (1 - m) * layer.running_var + m * var
    elif mode == 'infer':
        mean, var = layer.running_mean, layer.running_var
    else:
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")

    inv_std = 1.0 / np.sqrt(var + layer.epsilon)
    xhat = (x - mean) * inv_std
    out = layer.gamma * xhat + layer.beta
    return out, (xhat, inv_std, layer.gamma)


def batchnorm_forward(x, layer, mode='train'):
    """Normalize per channel (batch statistics in train mode, running statistics in infer mode)."""
    return batchnorm_forward_cached(x, layer, mode)[0]


def batchnorm_backward(dout, cache):
    """Train-mode backward pass. Returns (dx, dgamma, dbeta)."""
    xhat, inv_std, gamma = cache
    count = dout.shape[0] * dout.shape[1] * dout.shape[2]
    dbeta = dout.sum(axis=_BN_AXES)
    dgamma = (dout * xhat).sum(axis=_BN_AXES)
    dxhat = dout * gamma
    dx = (inv_std / count) * (
        count * dxhat - dxhat.sum(axis=_BN_AXES) - xhat * (dxhat * xhat).sum(axis=_BN_AXES)
    )
    return dx, dgamma, dbeta


# ------------------------------------------------------------------
# Activation and pooling
# ------------------------------------------------------------------

def clipped_relu(x, ceiling):
    """min(max(x, 0), ceiling) elementwise."""
    if ceiling <= 0:
        raise ValueError(f"ceiling must be > 0, got {ceiling}")
    return np.clip(x, 0.0, ceiling)


def clipped_relu_backward(dout, x, ceiling):
    return dout * ((x > 0) & (x < ceiling))


def maxpool_cached(x, window=(5, 5), stride=(2, 2)):
    x = check_tensor4(x, 'pool input')
    n, h, w, c = x.shape
    (ph, pw), (sh, sw) = window, stride
    ho, top, bottom = same_padding(h, ph, sh)
    wo, left, right = same_padding(w, pw, sw)
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)), constant_values=-np.inf)

    best = np.full((n, ho, wo, c), -np.inf)
    argmax = np.zeros((n, ho, wo, c), dtype=np.int64)
    for i in range(ph):
        rows = _window(i, sh, ho)
        for j in range(pw):
            patch = xp[:, rows, _window(j, sw, wo), :]
            better = patch > best
            best = np.where(better, patch, best)
            argmax[better] = i * pw + j

    return best, (xp.shape, argmax, window, stride, (h, w), (top, left))


def maxpool(x, pool=(5, 5), stride=(2, 2)):
    """Windowed maximum with 'same' padding; padded cells never win."""
    return maxpool_cached(x, pool, stride)[0]


def maxpool_backward(dout, cache):
    padded_shape, argmax, (ph, pw), (sh, sw), (h, w), (top, left) = cache
    _, ho, wo, _ = dout.shape
    dxp = np.zeros(padded_shape)
    for i in range(ph):
        rows = _window(i, sh, ho)
        for j in range(pw):
            dxp[:, rows, _window(j, sw, wo), :] += dout * (argmax == i * pw + j)
    return dxp[:, top:top + h, left:left + w, :]


# ------------------------------------------------------------------
# Classifier head
# ------------------------------------------------------------------

def fc_forward(x, weights, bias):
    flat = x.reshape(x.shape[0], -1)
    if flat.shape[1] != weights.shape[0]:
        raise ShapeMismatch(f"fully connected layer expects {weights.shape[0]} inputs, got {flat.shape[1]}")
    return flat @ weights + bias


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def fc_softmax_forward(x, weights, bias):
    """Class probabilities, one row per sample."""
    return softmax(fc_forward(x, weights, bias))


def fc_backward(dlogits, x, weights):
    """Returns (dx, dweights, dbias)."""
    flat = x.reshape(x.shape[0], -1)
    dweights = flat.T @ dlogits
    dbias = dlogits.sum(axis=0)
    dx = (dlogits @ weights.T).reshape(x.shape)
    return dx, dweights, dbias


def cross_entropy_loss(probs, label):
    """-log p[label], with the probability floored at 1e-12."""
    return float(-np.log(max(float(probs[label]), PROB_FLOOR)))


def mean_cross_entropy(probs, labels):
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


def softmax_cross_entropy_backward(probs, labels):
    """Gradient of the batch-mean cross-entropy with respect to the logits."""
    dlogits = probs.copy()
    dlogits[np.arange(len(labels)), labels] -= 1.0
    return dlogits / len(labels)
