"""
Raster types used throughout the pipeline.

Arrays are stored row-major with numpy: RGB and gray images as (height, width[, 3]),
planar images channel-first as (channels, height, width).
"""
from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class RgbImage:
    """8-bit RGB raster, shape (height, width, 3)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"RGB image must be (height, width, 3), got {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("RGB image must be at least 1x1")
        self.data = np.ascontiguousarray(data, dtype=np.uint8)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(eq=False)
class PlanarImage:
    """Double-precision image stored channel-planar, shape (channels, height, width)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] not in (1, 3):
            raise ValueError(f"planar image must be (1|3, height, width), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("planar image contains NaN or Inf")
        self.data = data

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def height(self):
        return self.data.shape[1]


@dataclass(eq=False)
class GrayImage:
    """Double-precision intensity image with values in [0, 1], shape (height, width)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"gray image must be 2-D, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("gray image contains NaN or Inf")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("gray image values must lie in [0, 1]")
        self.data = data

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(eq=False)
class BinaryImage:
    """Boolean mask, shape (height, width)."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"binary image must be 2-D, got {data.shape}")
        if data.dtype != np.bool_:
            if not np.all((data == 0) | (data == 1)):
                raise ValueError("binary image values must be 0 or 1")
            data = data.astype(bool)
        self.data = data

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    def count(self):
        return int(self.data.sum())


@dataclass(frozen=True)
class ChannelWeights:
    """Per-channel multiplicative weights applied to a 3-channel planar image."""
    w: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.w) != 3:
            raise ValueError("channel weights need exactly three components")
        if not any(float(c) != 0.0 for c in self.w):
            raise ValueError("at least one channel weight must be non-zero")
        object.__setattr__(self, 'w', tuple(float(c) for c in self.w))

    @classmethod
    def parse(cls, text):
        """Parse 'r,g,b' as given on the command line."""
        parts = [p.strip() for p in str(text).split(',')]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(tuple(float(p) for p in parts))
