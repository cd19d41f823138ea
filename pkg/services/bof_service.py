"""
Bag-of-visual-features classifier.

Upright SURF-style keypoints and 64-dimensional descriptors computed from an
integral image, a K-means visual vocabulary, L1-normalized word histograms and
a linear hinge-loss classifier on top.
"""
import logging

import numpy as np
from scipy import ndimage
from skimage.transform import integral_image
from sklearn.cluster import kmeans_plusplus
from sklearn.linear_model import SGDClassifier
from sklearn.preprocessing import StandardScaler

from models.bof import DescriptorSet, Vocabulary, BofModel, BofOptions, DESCRIPTOR_LENGTH
from services.worker_pool import map_ordered
from utils.errors import TooSmallImage, InsufficientDescriptors, EmptyClass, UntrainedModel, ConfigError
from config.settings import SURF_OCTAVES, SURF_THRESHOLD, KMEANS_MAX_ITER, KMEANS_TOL, CLASS_NAMES

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 32
LAYERS_PER_OCTAVE = 4
ASSIGN_CHUNK = 512


# ------------------------------------------------------------------
# Detector
# ------------------------------------------------------------------

def _padded_integral(data):
    return np.pad(integral_image(data), ((1, 0), (1, 0)))


def _box(ii, row, col, rows, cols):
    """Sum over [row, row + rows) x [col, col + cols), clipped to the image; vectorized."""
    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    r0 = np.clip(row, 0, h)
    r1 = np.clip(row + rows, 0, h)
    c0 = np.clip(col, 0, w)
    c1 = np.clip(col + cols, 0, w)
    return ii[r1, c1] - ii[r0, c1] - ii[r1, c0] + ii[r0, c0]


def _filter_sizes(octave):
    return [3 * (2 ** (octave + 1) * (i + 1) + 1) for i in range(LAYERS_PER_OCTAVE)]


def _hessian_response(ii, rows, cols, size):
    """Determinant of the box-filter Hessian approximation; -inf where the filter leaves the image."""
    lobe = size // 3
    border = (size - 1) // 2
    inv_area = 1.0 / (size * size)
    r, c = rows, cols

    dxx = (_box(ii, r - lobe + 1, c - border, 2 * lobe - 1, size)
           - 3 * _box(ii, r - lobe + 1, c - lobe // 2, 2 * lobe - 1, lobe))
    dyy = (_box(ii, r - border, c - lobe + 1, size, 2 * lobe - 1)
           - 3 * _box(ii, r - lobe // 2, c - lobe + 1, lobe, 2 * lobe - 1))
    dxy = (_box(ii, r - lobe, c + 1, lobe, lobe) + _box(ii, r + 1, c - lobe, lobe, lobe)
           - _box(ii, r - lobe, c - lobe, lobe, lobe) - _box(ii, r + 1, c + 1, lobe, lobe))

    dxx, dyy, dxy = dxx * inv_area, dyy * inv_area, dxy * inv_area
    response = dxx * dyy - 0.81 * dxy * dxy

    h, w = ii.shape[0] - 1, ii.shape[1] - 1
    inside = (r >= border) & (r <= h - 1 - border) & (c >= border) & (c <= w - 1 - border)
    return np.where(inside, response, -np.inf)


def _detect(ii, shape, octaves, threshold):
    height, width = shape
    found = []
    for octave in range(octaves):
        step = 2 ** octave
        rows, cols = np.meshgrid(np.arange(0, height, step), np.arange(0, width, step), indexing='ij')
        sizes = _filter_sizes(octave)
        stack = np.stack([_hessian_response(ii, rows, cols, s) for s in sizes])

        peaks = ndimage.maximum_filter(stack, size=(3, 3, 3), mode='constant', cval=-np.inf)
        for layer in range(1, LAYERS_PER_OCTAVE - 1):
            resp = stack[layer]
            hit = np.isfinite(resp) & (resp > threshold) & (resp == peaks[layer])
            for gy, gx in zip(*np.nonzero(hit)):
                found.append((float(cols[gy, gx]), float(rows[gy, gx]), 1.2 * sizes[layer] / 9.0))
    return found


# ------------------------------------------------------------------
# Descriptor
# ------------------------------------------------------------------

_SAMPLE_OFFSETS = np.arange(20) - 9.5


def _describe(ii, keypoints):
    """Upright 64-vector per keypoint: (sum dx, sum |dx|, sum dy, sum |dy|) over a 4x4 grid."""
    xs = keypoints[:, 0][:, None, None]
    ys = keypoints[:, 1][:, None, None]
    scales = keypoints[:, 2][:, None, None]

    oy, ox = np.meshgrid(_SAMPLE_OFFSETS, _SAMPLE_OFFSETS, indexing='ij')
    rows = np.rint(ys + oy[None] * scales).astype(np.int64)
    cols = np.rint(xs + ox[None] * scales).astype(np.int64)

    size = np.maximum(np.rint(2.0 * scales).astype(np.int64), 2)
    half = size // 2
    dx = _box(ii, rows - half, cols, size, half) - _box(ii, rows - half, cols - half, size, half)
    dy = _box(ii, rows, cols - half, half, size) - _box(ii, rows - half, cols - half, half, size)

    sigma = 3.3 * scales
    weight = np.exp(-(oy[None] ** 2 + ox[None] ** 2) * scales ** 2 / (2.0 * sigma ** 2))
    dx, dy = dx * weight, dy * weight

    n = len(keypoints)
    blocks = lambda a: a.reshape(n, 4, 5, 4, 5)
    features = np.stack([
        blocks(dx).sum(axis=(2, 4)),
        np.abs(blocks(dx)).sum(axis=(2, 4)),
        blocks(dy).sum(axis=(2, 4)),
        np.abs(blocks(dy)).sum(axis=(2, 4)),
    ], axis=-1).reshape(n, DESCRIPTOR_LENGTH)

    norms = np.linalg.norm(features, axis=1)
    keep = norms > 1e-12
    return features[keep] / norms[keep, None], keep


def detect_describe(img, octaves=SURF_OCTAVES, threshold=SURF_THRESHOLD):
    """Keypoints and unit-norm descriptors of a gray image (at least 32x32)."""
    height, width = img.data.shape
    if height < MIN_IMAGE_SIZE or width < MIN_IMAGE_SIZE:
        raise TooSmallImage(f"descriptor extraction needs >= {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}, got {width}x{height}")

    ii = _padded_integral(img.data)
    found = _detect(ii, (height, width), octaves, threshold)
    if not found:
        return DescriptorSet.empty()

    keypoints = np.asarray(found, dtype=np.float64)
    descriptors, keep = _describe(ii, keypoints)
    return DescriptorSet(
        descriptors=descriptors,
        keypoints=keypoints[keep, :2],
        scales=keypoints[keep, 2],
    )


# ------------------------------------------------------------------
# Vocabulary and encoding
# ------------------------------------------------------------------

def nearest_centroid(x, centroids):
    """Index of and squared distance to the closest centroid; ties go to the lower index."""
    assign = np.empty(len(x), dtype=np.int64)
    dist = np.empty(len(x))
    for start in range(0, len(x), ASSIGN_CHUNK):
        chunk = x[start:start + ASSIGN_CHUNK]
        d2 = ((chunk[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1)
        assign[start:start + len(chunk)] = idx
        dist[start:start + len(chunk)] = d2[np.arange(len(chunk)), idx]
    return assign, dist


def _stack_descriptors(descriptors):
    if isinstance(descriptors, np.ndarray):
        return np.asarray(descriptors, dtype=np.float64).reshape(-1, DESCRIPTOR_LENGTH)
    parts = [d.descriptors for d in descriptors if len(d)]
    if not parts:
        return np.zeros((0, DESCRIPTOR_LENGTH))
    return np.concatenate(parts)


def build_vocabulary(descriptors, k, seed=0, max_iter=KMEANS_MAX_ITER, tol=KMEANS_TOL):
    """
    K-means (k-means++ seeding, Lloyd iterations) over all descriptors.

    Stops when no centroid moves by tol or more, or after max_iter iterations.
    Empty clusters are re-seeded from the points farthest from their centroid.
    """
    x = _stack_descriptors(descriptors)
    if k < 2:
        raise ConfigError(f"vocabulary size must be >= 2, got {k}")
    if len(x) < k:
        raise InsufficientDescriptors(f"{len(x)} descriptors cannot form {k} visual words")

    centroids, _ = kmeans_plusplus(x, n_clusters=k, random_state=seed)
    history = []
    for iteration in range(max_iter):
        assign, dist = nearest_centroid(x, centroids)
        history.append(float(dist.sum()))

        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, x)
        updated = centroids.copy()
        filled = counts > 0
        updated[filled] = sums[filled] / counts[filled, None]

        empty = np.flatnonzero(~filled)
        if empty.size:
            farthest = np.argsort(-dist, kind='stable')[:empty.size]
            updated[empty] = x[farthest]
            logger.debug("K-means iteration %d: re-seeded %d empty clusters", iteration, empty.size)

        shift = np.linalg.norm(updated - centroids, axis=1).max()
        centroids = updated
        if shift < tol:
            break

    _, dist = nearest_centroid(x, centroids)
    history.append(float(dist.sum()))
    logger.info("Vocabulary: %d words from %d descriptors, SSE %.4f after %d iterations",
                k, len(x), history[-1], len(history) - 1)
    return Vocabulary(centroids=centroids, inertia_history=history)


def encode(desc, vocab):
    """L1-normalized visual-word histogram (all zeros for an empty set)."""
    hist = np.zeros(vocab.size)
    if len(desc) == 0:
        return hist
    assign, _ = nearest_centroid(desc.descriptors, vocab.centroids)
    hist += np.bincount(assign, minlength=vocab.size)
    return hist / hist.sum()


# ------------------------------------------------------------------
# Classifier
# ------------------------------------------------------------------

def _fit_linear(features, labels, options):
    """Hinge-loss SGD on standardized features, folded back to raw-histogram weights."""
    scaler = StandardScaler().fit(features)
    scaled = scaler.transform(features)

    clf = SGDClassifier(loss='hinge', penalty='l2', alpha=options.regularization,
                        learning_rate='constant', eta0=options.learning_rate,
                        shuffle=True, random_state=options.seed)
    classes = np.arange(len(CLASS_NAMES))
    for epoch in range(1, options.epochs + 1):
        clf.set_params(eta0=options.learning_rate / epoch, random_state=options.seed + epoch)
        clf.partial_fit(scaled, labels, classes=classes)

    coef = clf.coef_[0] / scaler.scale_
    intercept = clf.intercept_[0] - float(np.dot(coef, scaler.mean_))
    return np.append(coef, intercept)


def train_bof(images, labels, options=None, jobs=1):
    """
    Fit vocabulary and classifier on training images only.

    Args:
        images: list of GrayImage
        labels: class indices (0 typical, 1 atypical)
        options: BofOptions
        jobs: worker threads for descriptor extraction

    Returns:
        BofModel
    """
    options = options or BofOptions()
    try:
        options.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e

    labels = np.asarray(labels, dtype=np.int64)
    for k, name in enumerate(CLASS_NAMES):
        if np.sum(labels == k) < 2:
            raise EmptyClass(f"class {name} needs at least 2 training images, has {int(np.sum(labels == k))}")

    descriptor_sets = map_ordered(
        lambda img: detect_describe(img, options.octaves, options.response_threshold), images, jobs,
    )
    vocab = build_vocabulary(descriptor_sets, options.vocab_size, options.seed,
                             options.kmeans_max_iter, options.kmeans_tol)
    features = np.stack([encode(d, vocab) for d in descriptor_sets])
    weights = _fit_linear(features, labels, options)

    model = BofModel(vocabulary=vocab, weights=weights, options=options)
    train_acc = np.mean([(score_histogram(model, h) > 0) == bool(y) for h, y in zip(features, labels)])
    logger.info("BoF trained on %d images, training accuracy %.3f", len(images), train_acc)
    return model


def score_histogram(model, hist):
    return float(np.dot(model.weights[:-1], hist) + model.weights[-1])


def predict_bof(model, img):
    """
    Returns:
        (label index, decision score); positive scores are atypical
    """
    if model is None or model.vocabulary is None:
        raise UntrainedModel("no trained bag-of-features model")
    desc = detect_describe(img, model.options.octaves, model.options.response_threshold)
    score = score_histogram(model, encode(desc, model.vocabulary))
    return (1 if score > 0 else 0), score
