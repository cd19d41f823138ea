"""
Pigment network extraction: configuration and results.
"""
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from models.images import ChannelWeights
from config.settings import (
    RESIZE_DIMS, CHANNEL_WEIGHTS, CLAHE_TILES, CLAHE_BINS, CLAHE_CLIP,
    GAUSSIAN_SIGMA, THRESHOLD_OFFSET, THRESHOLD_OFFSET_RANGE,
    MIN_COMPONENT_PX, CONNECTIVITY, BACKGROUND_RGB,
)

# Stage keys in pipeline order, with the file stem each one is written under.
STAGE_FILES = (
    ('resized', '01_resized'),
    ('pca_gray', '02_pca_gray'),
    ('enhanced', '03_enhanced'),
    ('smoothed', '04_smoothed'),
    ('subtracted', '05_subtracted'),
    ('binary_raw', '06_binary_raw'),
    ('binary_clean', '07_binary_clean'),
    ('complemented', '08_complemented'),
    ('colorized', '09_colorized'),
)

SMOOTHERS = ('box10', 'gaussian')
ENHANCERS = ('clahe', 'histeq')
COLOR_SPACES = ('lab', 'hsv')
SUBTRACT_ORDERS = ('smoothed_minus_enhanced', 'enhanced_minus_smoothed')


@dataclass(eq=False)
class PcaResult:
    """Principal components of the per-pixel channel vectors."""
    coefficients: np.ndarray    # 3x3, columns ordered by descending eigenvalue
    scores: np.ndarray          # (pixels, 3) projections of the centred data
    eigenvalues: np.ndarray     # 3, descending, clamped at 0
    degenerate: bool = False    # first-component scores were constant

    @property
    def explained(self):
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total


@dataclass(frozen=True)
class PipelineConfig:
    """Parameters of the directional imaging pipeline."""
    resize: tuple = RESIZE_DIMS
    channel_weights: ChannelWeights = field(default_factory=lambda: ChannelWeights(CHANNEL_WEIGHTS))
    color_space: str = 'lab'
    enhancer: str = 'clahe'
    clahe_tiles: tuple = CLAHE_TILES
    clahe_bins: int = CLAHE_BINS
    clahe_clip: float = CLAHE_CLIP
    smoother: str = 'box10'
    gaussian_sigma: float = GAUSSIAN_SIGMA
    subtract_order: str = 'smoothed_minus_enhanced'
    threshold_offset: float = THRESHOLD_OFFSET
    min_component_px: int = MIN_COMPONENT_PX
    connectivity: int = CONNECTIVITY
    background: tuple = BACKGROUND_RGB

    def validate(self):
        """Raise ValueError on the first invariant violation."""
        lo, hi = THRESHOLD_OFFSET_RANGE
        if not lo <= self.threshold_offset <= hi:
            raise ValueError(f"threshold_offset must be in [{lo}, {hi}], got {self.threshold_offset}")
        if self.min_component_px < 1:
            raise ValueError("min_component_px must be >= 1")
        if any(int(d) < 1 for d in tuple(self.resize) + tuple(self.clahe_tiles)):
            raise ValueError("resize and clahe_tiles dimensions must be >= 1")
        if self.clahe_bins < 2:
            raise ValueError("clahe_bins must be >= 2")
        if self.clahe_clip <= 0:
            raise ValueError("clahe_clip must be > 0")
        if self.gaussian_sigma <= 0:
            raise ValueError("gaussian_sigma must be > 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.smoother not in SMOOTHERS:
            raise ValueError(f"smoother must be one of {SMOOTHERS}")
        if self.enhancer not in ENHANCERS:
            raise ValueError(f"enhancer must be one of {ENHANCERS}")
        if self.color_space not in COLOR_SPACES:
            raise ValueError(f"color_space must be one of {COLOR_SPACES}")
        if self.subtract_order not in SUBTRACT_ORDERS:
            raise ValueError(f"subtract_order must be one of {SUBTRACT_ORDERS}")
        if len(self.background) != 3 or any(not 0 <= int(c) <= 255 for c in self.background):
            raise ValueError("background must be an 8-bit RGB triple")
        return self

    def with_offset(self, offset):
        return replace(self, threshold_offset=float(offset))

    def to_dict(self):
        d = asdict(self)
        d['channel_weights'] = list(self.channel_weights.w)
        return d


@dataclass(eq=False)
class PnResult:
    """Output of one pipeline run."""
    mask: object                # BinaryImage, PN = 1
    colorized: object           # RgbImage
    stages: dict                # stage key -> raster, see STAGE_FILES
    threshold_level: float
    offset_used: float
    detected: bool
