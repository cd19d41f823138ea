"""
Directional imaging pipeline that isolates the pigment network of a lesion image.

resize -> color space -> channel weights -> PCA grayscale -> contrast enhancement
-> smoothing -> subtraction -> intermeans threshold -> binarize -> component
denoising -> complement -> colorize.

Every step is a pure function on the raster types in models.images.
"""
import functools
import logging
import math

import numpy as np
from scipy import ndimage

from models.images import RgbImage, GrayImage, BinaryImage
from models.pipeline import PcaResult, PipelineConfig, PnResult
from services.image_service import resize_image, rgb_to_lab, rgb_to_hsv, apply_channel_weights
from utils.errors import DimMismatch, TileTooSmall, EmptyHistogram, InvalidLevel, ConfigError
from config.settings import (
    CLAHE_TILES, CLAHE_BINS, CLAHE_CLIP, THRESHOLD_BINS, MIN_COMPONENT_PX,
    CONNECTIVITY, BACKGROUND_RGB, INTERMEANS_MAX_ITER,
)

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------
# PCA grayscale
# ------------------------------------------------------------------

def pca_grayscale(img):
    """
    Project per-pixel channel vectors onto their first principal component.

    Returns:
        (GrayImage, PcaResult). The gray image is the min-max normalized
        first-component score; for a constant image it is all zeros and
        PcaResult.degenerate is set.
    """
    channels, height, width = img.data.shape
    if height * width < 2:
        raise ValueError("PCA needs at least two pixels")

    x = img.data.reshape(channels, -1).T
    centred = x - x.mean(axis=0)
    cov = np.atleast_2d(np.cov(centred, rowvar=False))

    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    coefficients = eigenvectors[:, order]

    # sign convention: largest-magnitude entry of each component is positive
    pivots = np.argmax(np.abs(coefficients), axis=0)
    signs = np.sign(coefficients[pivots, np.arange(channels)])
    signs[signs == 0] = 1.0
    coefficients = coefficients * signs

    scores = centred @ coefficients
    first = scores[:, 0]
    lo, hi = first.min(), first.max()
    degenerate = not hi > lo
    if degenerate:
        logger.debug("PCA input is constant; returning an all-zero grayscale")
        gray = np.zeros((height, width))
    else:
        gray = ((first - lo) / (hi - lo)).reshape(height, width)

    result = PcaResult(
        coefficients=coefficients,
        scores=scores,
        eigenvalues=eigenvalues,
        degenerate=degenerate,
    )
    return GrayImage(np.clip(gray, 0.0, 1.0)), result


# ------------------------------------------------------------------
# Contrast enhancement
# ------------------------------------------------------------------

def _bin_index(values, bins):
    return np.minimum((values * bins).astype(np.int64), bins - 1)


def _clip_histogram(hist, clip):
    """Clip at clip x (pixel count), never below the uniform level, and redistribute."""
    if clip >= 1.0:
        return hist
    total = hist.sum()
    limit = max(clip * total, total / hist.size)
    excess = np.maximum(hist - limit, 0.0).sum()
    return np.minimum(hist, limit) + excess / hist.size


def _equalization_map(hist):
    cdf = np.cumsum(hist)
    return cdf / cdf[-1]


def _interpolation_axis(n, edges):
    # neighbouring tile centres and the weight of the second one, per pixel
    centres = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(n, dtype=np.float64)
    upper = np.searchsorted(centres, pos, side='right')
    i0 = np.clip(upper - 1, 0, centres.size - 1)
    i1 = np.clip(upper, 0, centres.size - 1)
    span = centres[i1] - centres[i0]
    weight = np.divide(pos - centres[i0], span, out=np.zeros_like(pos), where=span > 0)
    return i0, i1, np.clip(weight, 0.0, 1.0)


def clahe(img, tiles=CLAHE_TILES, bins=CLAHE_BINS, clip=CLAHE_CLIP):
    """
    Contrast-limited adaptive histogram equalization.

    tiles is (tile rows, tile columns); clip is a fraction of each tile's pixel
    count (>= 1 disables clipping). Tile mappings are blended bilinearly between
    tile centres.
    """
    height, width = img.data.shape
    ty, tx = int(tiles[0]), int(tiles[1])
    if ty < 1 or tx < 1 or height < ty or width < tx:
        raise TileTooSmall(f"{width}x{height} image cannot hold a {tx}x{ty} tile grid")

    binned = _bin_index(img.data, bins)
    row_edges = (np.arange(ty + 1) * height) // ty
    col_edges = (np.arange(tx + 1) * width) // tx

    maps = np.empty((ty, tx, bins))
    for i in range(ty):
        for j in range(tx):
            tile = binned[row_edges[i]:row_edges[i + 1], col_edges[j]:col_edges[j + 1]]
            hist = np.bincount(tile.ravel(), minlength=bins).astype(np.float64)
            maps[i, j] = _equalization_map(_clip_histogram(hist, clip))

    r0, r1, wy = _interpolation_axis(height, row_edges)
    c0, c1, wx = _interpolation_axis(width, col_edges)
    r0, r1, wy = r0[:, None], r1[:, None], wy[:, None]
    c0, c1, wx = c0[None, :], c1[None, :], wx[None, :]

    top = (1 - wx) * maps[r0, c0, binned] + wx * maps[r0, c1, binned]
    bottom = (1 - wx) * maps[r1, c0, binned] + wx * maps[r1, c1, binned]
    out = (1 - wy) * top + wy * bottom
    return GrayImage(np.clip(out, 0.0, 1.0))


def hist_eq(img, bins=CLAHE_BINS):
    """Global histogram equalization through the normalized CDF."""
    binned = _bin_index(img.data, bins)
    hist = np.bincount(binned.ravel(), minlength=bins).astype(np.float64)
    mapping = _equalization_map(hist)
    return GrayImage(mapping[binned])


# ------------------------------------------------------------------
# Smoothing and subtraction
# ------------------------------------------------------------------

def box_filter_10(img):
    """10x10 mean filter with replicated borders."""
    out = ndimage.uniform_filter(img.data, size=10, mode='nearest')
    return GrayImage(np.clip(out, img.data.min(), img.data.max()))


def gaussian_kernel(sigma):
    radius = max(1, math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_filter(img, sigma):
    """Separable Gaussian blur, radius ceil(3 sigma), replicated borders."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    kernel = gaussian_kernel(sigma)
    out = ndimage.correlate1d(img.data, kernel, axis=0, mode='nearest')
    out = ndimage.correlate1d(out, kernel, axis=1, mode='nearest')
    return GrayImage(np.clip(out, img.data.min(), img.data.max()))


def subtract_enhanced(smoothed, enhanced):
    """max(0, smoothed - enhanced) per pixel."""
    if smoothed.data.shape != enhanced.data.shape:
        raise DimMismatch(f"cannot subtract {enhanced.data.shape} from {smoothed.data.shape}")
    return GrayImage(np.maximum(smoothed.data - enhanced.data, 0.0))


# ------------------------------------------------------------------
# Threshold and binarization
# ------------------------------------------------------------------

def _intermeans_update(t, counts, weighted):
    """Average of the class means below (<= t) and above (> t)."""
    k = int(min(max(math.floor(t), 0), counts.size - 1))
    total, total_weighted = counts[-1], weighted[-1]
    n_below, s_below = counts[k], weighted[k]
    n_above, s_above = total - n_below, total_weighted - s_below

    mean_below = s_below / n_below if n_below > 0 else None
    mean_above = s_above / n_above if n_above > 0 else None
    if mean_below is None:
        mean_below = mean_above
    if mean_above is None:
        mean_above = mean_below
    return (mean_below + mean_above) / 2.0


def intermeans_threshold(img, bins=THRESHOLD_BINS):
    """
    Iterative intermeans threshold level in [0, 1].

    The image is quantized to `bins` levels; the first estimate is the
    histogram mean, and T moves to the average of the two class means until
    it changes by at most one bin.
    """
    if img.data.size == 0:
        raise EmptyHistogram("cannot threshold an image with no pixels")

    levels = np.rint(img.data * (bins - 1)).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=bins).astype(np.float64)
    counts = np.cumsum(hist)
    weighted = np.cumsum(np.arange(bins) * hist)

    t = weighted[-1] / counts[-1]
    for _ in range(INTERMEANS_MAX_ITER):
        t_next = _intermeans_update(t, counts, weighted)
        if abs(t_next - t) <= 1.0:
            break
        t = t_next
    else:
        logger.warning("Intermeans threshold did not settle after %d iterations", INTERMEANS_MAX_ITER)

    return float(t / (bins - 1))


def binarize(img, level, offset):
    """Pixels strictly above (level - offset) become 1."""
    if not 0.0 <= level <= 1.0:
        raise InvalidLevel(f"threshold level must be in [0, 1], got {level}")
    cut = level - offset
    if cut < 0:
        raise InvalidLevel(f"offset {offset} exceeds threshold level {level}")
    return BinaryImage(img.data > cut)


# ------------------------------------------------------------------
# Denoising and presentation
# ------------------------------------------------------------------

def remove_small_components(img, min_px=MIN_COMPONENT_PX, connectivity=CONNECTIVITY):
    """Drop connected components with fewer than min_px pixels."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, count = ndimage.label(img.data, structure=structure)
    if count == 0:
        return BinaryImage(img.data.copy())

    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_px
    keep[0] = False
    logger.debug("Components: %d found, %d kept (min %d px)", count, int(keep.sum()), min_px)
    return BinaryImage(keep[labels])


@functools.singledispatch
def complement(img):
    """Invert an image: 0<->1 for masks, 1.0 - m for gray, 255 - m for 8-bit."""
    raise TypeError(f"cannot complement {type(img).__name__}")


@complement.register
def _(img: BinaryImage):
    return BinaryImage(~img.data)


@complement.register
def _(img: GrayImage):
    return GrayImage(1.0 - img.data)


@complement.register
def _(img: RgbImage):
    return RgbImage(255 - img.data)


def colorize(mask, source, background=BACKGROUND_RGB):
    """Source colors where the mask is set, background elsewhere."""
    if mask.data.shape != source.data.shape[:2]:
        raise DimMismatch(f"mask {mask.data.shape} does not match source {source.data.shape[:2]}")
    fill = np.asarray(background, dtype=np.uint8).reshape(1, 1, 3)
    return RgbImage(np.where(mask.data[..., None], source.data, fill))


# ------------------------------------------------------------------
# Orchestration
# ------------------------------------------------------------------

def extract_pigment_network(img, cfg=None):
    """Run the full pipeline on one RGB image and keep every intermediate stage."""
    cfg = cfg or PipelineConfig()
    try:
        cfg.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e

    resized = resize_image(img, cfg.resize)
    planar = rgb_to_lab(resized) if cfg.color_space == 'lab' else rgb_to_hsv(resized)
    weighted = apply_channel_weights(planar, cfg.channel_weights)
    gray, pca = pca_grayscale(weighted)

    if cfg.enhancer == 'clahe':
        enhanced = clahe(gray, cfg.clahe_tiles, cfg.clahe_bins, cfg.clahe_clip)
    else:
        enhanced = hist_eq(gray, cfg.clahe_bins)

    if cfg.smoother == 'box10':
        smoothed = box_filter_10(enhanced)
    else:
        smoothed = gaussian_filter(enhanced, cfg.gaussian_sigma)

    if cfg.subtract_order == 'smoothed_minus_enhanced':
        subtracted = subtract_enhanced(smoothed, enhanced)
    else:
        subtracted = subtract_enhanced(enhanced, smoothed)

    level = intermeans_threshold(subtracted)
    # a level below the offset means there is no structure to lift; cut at 0
    offset = min(cfg.threshold_offset, level)
    binary_raw = binarize(subtracted, level, offset)
    if pca.degenerate:
        binary_raw = BinaryImage(np.zeros_like(binary_raw.data))

    binary_clean = remove_small_components(binary_raw, cfg.min_component_px, cfg.connectivity)
    complemented = complement(binary_clean)
    colorized = colorize(binary_clean, resized, cfg.background)
    detected = binary_clean.count() > 0

    logger.debug(
        "Pipeline: level=%.4f offset=%.4f raw=%d clean=%d detected=%s",
        level, offset, binary_raw.count(), binary_clean.count(), detected,
    )

    stages = {
        'resized': resized,
        'pca_gray': gray,
        'enhanced': enhanced,
        'smoothed': smoothed,
        'subtracted': subtracted,
        'binary_raw': binary_raw,
        'binary_clean': binary_clean,
        'complemented': complemented,
        'colorized': colorized,
    }
    return PnResult(
        mask=binary_clean,
        colorized=colorized,
        stages=stages,
        threshold_level=level,
        offset_used=offset,
        detected=detected,
    )
