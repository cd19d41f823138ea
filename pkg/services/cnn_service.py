"""
Small convolutional classifier for typical vs. atypical pigment networks.

Builds the fixed two-convolution stack, computes exact gradients by
backpropagation, and trains it with SGD + momentum on shuffled mini-batches.
All randomness (initialization, shuffling) comes from one seeded generator.
"""
import logging

import numpy as np

from models.network import (
    ConvLayer, BatchNormLayer, PoolLayer, DenseLayer, CnnModel, TrainOptions,
    TrainLogEntry, check_tensor4,
)
from services import layers
from services.image_service import resize_image
from utils.errors import EmptyDataset, EmptyClass, UntrainedModel, ShapeMismatch, ConfigError
from config.settings import CLASS_NAMES

logger = logging.getLogger(__name__)

N_CLASSES = len(CLASS_NAMES)


# ------------------------------------------------------------------
# Construction
# ------------------------------------------------------------------

def _he_normal(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def feature_shape(input_shape, conv1, pool, conv2):
    """(height, width, channels) reaching the fully connected layer, walked through the stack."""
    h, w, c = input_shape
    if c != conv1.in_channels or conv1.out_channels != conv2.in_channels:
        raise ShapeMismatch("convolution channel counts do not chain")
    for extent, stride in ((conv1.extent, conv1.stride), (pool.window, pool.stride), (conv2.extent, conv2.stride)):
        h, _, _ = layers.same_padding(h, extent[0], stride[0])
        w, _, _ = layers.same_padding(w, extent[1], stride[1])
    return h, w, conv2.out_channels


def init_model(options=None, input_channels=3):
    """Fresh He-initialized network for options.input_size square inputs."""
    options = options or TrainOptions()
    rng = np.random.default_rng(options.seed)
    return _init_model(rng, options, input_channels)


def _init_model(rng, options, input_channels=3):
    input_shape = (options.input_size, options.input_size, input_channels)

    k1 = (5, 5, input_channels, 8)
    conv1 = ConvLayer(_he_normal(rng, k1, 5 * 5 * input_channels), np.zeros(8),
                      stride=(1, 1), dilation=(3, 3))
    k2 = (3, 3, 8, 16)
    conv2 = ConvLayer(_he_normal(rng, k2, 3 * 3 * 8), np.zeros(16),
                      stride=(3, 3), dilation=(2, 2))

    pool = PoolLayer(window=(options.pool_size, options.pool_size), stride=(2, 2))

    fh, fw, fc_ch = feature_shape(input_shape, conv1, pool, conv2)
    fan_in = fh * fw * fc_ch
    fc = DenseLayer(_he_normal(rng, (fan_in, N_CLASSES), fan_in), np.zeros(N_CLASSES))

    logger.debug("Network for %s input: FC over %dx%dx%d = %d features", input_shape, fh, fw, fc_ch, fan_in)
    return CnnModel(
        conv1=conv1,
        bn1=BatchNormLayer.identity(8),
        pool=pool,
        conv2=conv2,
        bn2=BatchNormLayer.identity(16),
        fc=fc,
        relu_ceiling=options.relu_ceiling,
        input_shape=input_shape,
        input_mean=np.zeros(input_channels),
        seed=options.seed,
        options=options,
    )


# ------------------------------------------------------------------
# Forward / backward
# ------------------------------------------------------------------

def _forward(model, x, mode):
    x = check_tensor4(x, 'network input')
    if tuple(x.shape[1:]) != tuple(model.input_shape):
        raise ShapeMismatch(f"network expects {model.input_shape} inputs, got {x.shape[1:]}")

    c = model.relu_ceiling
    a0 = x - model.input_mean
    z1, conv1_cache = layers.conv2d_forward_cached(a0, model.conv1)
    n1, bn1_cache = layers.batchnorm_forward_cached(z1, model.bn1, mode)
    a1 = layers.clipped_relu(n1, c)
    p1, pool_cache = layers.maxpool_cached(a1, model.pool.window, model.pool.stride)
    z2, conv2_cache = layers.conv2d_forward_cached(p1, model.conv2)
    n2, bn2_cache = layers.batchnorm_forward_cached(z2, model.bn2, mode)
    a2 = layers.clipped_relu(n2, c)
    probs = layers.fc_softmax_forward(a2, model.fc.weights, model.fc.bias)

    caches = {
        'conv1': conv1_cache, 'bn1': bn1_cache, 'n1': n1, 'pool': pool_cache,
        'conv2': conv2_cache, 'bn2': bn2_cache, 'n2': n2, 'a2': a2,
    }
    return probs, caches


def forward(model, x, mode='infer'):
    """Class probabilities for a batch."""
    return _forward(model, x, mode)[0]


def backward(model, batch, labels):
    """
    Mean cross-entropy over the batch and its exact gradient for every parameter.

    Runs a train-mode forward pass (batch statistics; running statistics are updated).

    Returns:
        (loss, dict parameter name -> gradient array)
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) != len(batch):
        raise ShapeMismatch(f"{len(batch)} samples but {len(labels)} labels")

    probs, cache = _forward(model, batch, 'train')
    loss = layers.mean_cross_entropy(probs, labels)
    c = model.relu_ceiling

    dlogits = layers.softmax_cross_entropy_backward(probs, labels)
    da2, dfc_w, dfc_b = layers.fc_backward(dlogits, cache['a2'], model.fc.weights)
    dn2 = layers.clipped_relu_backward(da2, cache['n2'], c)
    dz2, dbn2_g, dbn2_b = layers.batchnorm_backward(dn2, cache['bn2'])
    dp1, dconv2_k, dconv2_b = layers.conv2d_backward(dz2, cache['conv2'])
    da1 = layers.maxpool_backward(dp1, cache['pool'])
    dn1 = layers.clipped_relu_backward(da1, cache['n1'], c)
    dz1, dbn1_g, dbn1_b = layers.batchnorm_backward(dn1, cache['bn1'])
    _, dconv1_k, dconv1_b = layers.conv2d_backward(dz1, cache['conv1'])

    grads = {
        'conv1.kernel': dconv1_k, 'conv1.bias': dconv1_b,
        'bn1.gamma': dbn1_g, 'bn1.beta': dbn1_b,
        'conv2.kernel': dconv2_k, 'conv2.bias': dconv2_b,
        'bn2.gamma': dbn2_g, 'bn2.beta': dbn2_b,
        'fc.weights': dfc_w, 'fc.bias': dfc_b,
    }
    return loss, grads


def sgdm_step(params, grads, velocity, lr, momentum):
    """
    v <- momentum * v - lr * g;  p <- p + v

    Returns:
        (new params, new velocity); inputs are left untouched
    """
    new_params, new_velocity = {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        v = momentum * velocity.get(name, np.zeros_like(p)) - lr * g
        new_velocity[name] = v
        new_params[name] = p + v
    return new_params, new_velocity


# ------------------------------------------------------------------
# Training and inference
# ------------------------------------------------------------------

def images_to_batch(images, size):
    """Resize RGB images to size x size and stack them as a [0, 1] float batch."""
    return np.stack([
        resize_image(img, (size, size)).data.astype(np.float64) / 255.0 for img in images
    ])


def accuracy(model, x, y):
    if len(x) == 0:
        return None
    probs = forward(model, x, 'infer')
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(y)))


def train_cnn(train_x, train_y, val_x, val_y, options=None):
    """
    Train the network with SGD + momentum.

    Args:
        train_x, val_x: (N, size, size, 3) batches in [0, 1]
        train_y, val_y: class indices (0 typical, 1 atypical)
        options: TrainOptions

    Returns:
        (CnnModel, list[TrainLogEntry]); one log entry every
        validation_frequency iterations and one after the last iteration
    """
    options = options or TrainOptions()
    try:
        options.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e

    train_x = check_tensor4(train_x, 'training batch')
    train_y = np.asarray(train_y, dtype=np.int64)
    val_x = np.asarray(val_x, dtype=np.float64)
    if val_x.size == 0:
        val_x = train_x[:0]
    val_y = np.asarray(val_y, dtype=np.int64)

    if len(train_x) == 0:
        raise EmptyDataset("no training images")
    if len(train_x) != len(train_y):
        raise ShapeMismatch(f"{len(train_x)} training images but {len(train_y)} labels")
    for k, name in enumerate(CLASS_NAMES):
        if not np.any(train_y == k):
            raise EmptyClass(f"no training samples labelled {name}")

    rng = np.random.default_rng(options.seed)
    model = _init_model(rng, options, train_x.shape[3])
    if tuple(train_x.shape[1:]) != tuple(model.input_shape):
        raise ShapeMismatch(f"training images must be {model.input_shape}, got {train_x.shape[1:]}")
    model.input_mean = train_x.mean(axis=(0, 1, 2))

    n = len(train_x)
    batch_size = min(options.batch_size, n)
    iterations_per_epoch = n // batch_size
    total_iterations = iterations_per_epoch * options.max_epochs
    logger.info(
        "Training CNN: %d train / %d val, batch %d, %d epochs, lr %.4g, momentum %.2f, seed %d",
        n, len(val_x), batch_size, options.max_epochs, options.learning_rate, options.momentum, options.seed,
    )

    velocity = {}
    log = []
    iteration = 0
    val_acc = None
    for epoch in range(1, options.max_epochs + 1):
        order = rng.permutation(n) if options.shuffle_each_epoch else np.arange(n)
        for b in range(iterations_per_epoch):
            idx = order[b * batch_size:(b + 1) * batch_size]
            loss, grads = backward(model, train_x[idx], train_y[idx])
            params, velocity = sgdm_step(model.parameters(), grads, velocity,
                                         options.learning_rate, options.momentum)
            model.set_parameters(params)
            iteration += 1

            if iteration % options.validation_frequency == 0 or iteration == total_iterations:
                val_acc = accuracy(model, val_x, val_y)
                log.append(TrainLogEntry(iteration, epoch, loss,
                                         float('nan') if val_acc is None else val_acc))
                logger.info("Epoch %d iteration %d: loss %.4f, val accuracy %s",
                            epoch, iteration, loss, 'n/a' if val_acc is None else f"{val_acc:.3f}")

    model.epochs_run = options.max_epochs
    model.final_val_accuracy = val_acc
    model.trained = True
    return model, log


def predict_batch(model, x):
    """Probabilities for an already-resized batch."""
    if not model.trained:
        raise UntrainedModel("model has not been trained")
    return forward(model, x, 'infer')


def predict(model, img):
    """
    Classify one RGB image.

    Returns:
        (label index, probability array); ties go to class 0
    """
    if not model.trained:
        raise UntrainedModel("model has not been trained")
    x = images_to_batch([img], model.input_shape[0])
    probs = forward(model, x, 'infer')[0]
    return int(np.argmax(probs)), probs
