"""
Raster I/O, resizing, color-space conversion and channel arithmetic.

All functions are pure: they never modify their inputs and are safe to call
from several worker threads at once.
"""
import logging
import os

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage
from skimage import color

from models.images import RgbImage, PlanarImage, GrayImage, BinaryImage, ChannelWeights
from utils.errors import UnreadableFile, UnsupportedFormat
from config.settings import RESIZE_DIMS

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = {'PNG', 'JPEG', 'BMP'}


# ------------------------------------------------------------------
# I/O
# ------------------------------------------------------------------

def load_image(path):
    """Decode a PNG/JPEG/BMP file into an 8-bit RGB raster (alpha dropped)."""
    if not os.path.isfile(path):
        raise UnreadableFile(f"no such file: {path}")

    try:
        with Image.open(path) as img:
            fmt = img.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedFormat(f"{path}: unsupported format {fmt}")
            img.load()
            rgb = img.convert('RGB')
            data = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as e:
        raise UnsupportedFormat(f"{path}: not a recognised image") from e
    except (OSError, SyntaxError, ValueError) as e:
        raise UnreadableFile(f"{path}: {e}") from e

    logger.debug("Loaded %s (%dx%d, %s)", path, data.shape[1], data.shape[0], fmt)
    return RgbImage(data)


def to_uint8(img):
    """8-bit array view of any raster type, for PNG output."""
    if isinstance(img, RgbImage):
        return img.data
    if isinstance(img, BinaryImage):
        return img.data.astype(np.uint8) * 255
    if isinstance(img, GrayImage):
        return np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    raise TypeError(f"cannot convert {type(img).__name__} to 8-bit")


def save_png(img, path):
    """Write a raster as an 8-bit PNG."""
    data = to_uint8(img)
    mode = 'RGB' if data.ndim == 3 else 'L'
    Image.fromarray(data, mode=mode).save(path, format='PNG')


# ------------------------------------------------------------------
# Geometry
# ------------------------------------------------------------------

def _source_coords(n_out, n_in):
    # half-pixel centres, clamped to the source edge
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(coords, 0.0, n_in - 1)


def resize_image(img, target=RESIZE_DIMS):
    """Bilinear resize to target = (width, height)."""
    width, height = int(target[0]), int(target[1])
    if width < 1 or height < 1:
        raise ValueError(f"target dimensions must be >= 1, got {target}")

    if (img.width, img.height) == (width, height):
        return RgbImage(img.data.copy())

    rows = _source_coords(height, img.height)
    cols = _source_coords(width, img.width)
    grid = np.meshgrid(rows, cols, indexing='ij')

    src = img.data.astype(np.float64)
    out = np.empty((height, width, 3), dtype=np.float64)
    for c in range(3):
        out[..., c] = ndimage.map_coordinates(src[..., c], grid, order=1, mode='nearest')

    return RgbImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# ------------------------------------------------------------------
# Color
# ------------------------------------------------------------------

def rgb_to_lab(img):
    """CIE 1976 L*a*b* (sRGB companding, D65 white), channel-planar."""
    lab = color.rgb2lab(img.data, illuminant='D65')
    lab[..., 0] = np.clip(lab[..., 0], 0.0, 100.0)
    return PlanarImage(np.moveaxis(lab, -1, 0))


def rgb_to_hsv(img):
    """Hexcone HSV with H, S, V all in [0, 1], channel-planar."""
    hsv = color.rgb2hsv(img.data)
    return PlanarImage(np.moveaxis(hsv, -1, 0))


def rgb_to_gray(img):
    """Luminance in [0, 1] (Rec. 709 weights)."""
    return GrayImage(np.clip(color.rgb2gray(img.data), 0.0, 1.0))


def apply_channel_weights(img, weights=ChannelWeights()):
    """Multiply channel c by weights.w[c]; dimensions are unchanged."""
    if img.channels != 3:
        raise ValueError(f"channel weighting needs a 3-channel image, got {img.channels}")
    w = np.asarray(weights.w, dtype=np.float64)
    return PlanarImage(img.data * w[:, None, None])
