"""
Dataset records: labeled images, per-image threshold overrides, synthetic
generator parameters and the derived-dataset manifest.
"""
from dataclasses import dataclass, field, asdict

from config.settings import CLASS_NAMES, OVERRIDE_OFFSET_RANGE


@dataclass(frozen=True)
class LabeledImage:
    id: str
    path: str
    label: str

    @property
    def label_index(self):
        return CLASS_NAMES.index(self.label)


@dataclass
class OverrideTable:
    """Per-image threshold offsets, image id -> offset."""
    offsets: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = OVERRIDE_OFFSET_RANGE
        for image_id, offset in self.offsets.items():
            if not lo <= offset <= hi:
                raise ValueError(f"override for {image_id} must be in [{lo}, {hi}], got {offset}")

    def get(self, image_id, default):
        return self.offsets.get(image_id, default)

    def __len__(self):
        return len(self.offsets)


@dataclass(frozen=True)
class SynthParams:
    """Synthetic pigment-network image: a jittered dark grid on light skin."""
    spacing: int = 16
    line_width: int = 3
    darkness: float = 0.6
    background: tuple = (205, 160, 120)
    irregularity: float = 0.2
    size: tuple = (512, 512)   # width, height
    seed: int = 0

    def __post_init__(self):
        if not self.spacing > self.line_width >= 1:
            raise ValueError("need spacing > line_width >= 1")
        if not 0.0 <= self.darkness <= 1.0:
            raise ValueError("darkness must be in [0, 1]")
        if not 0.0 <= self.irregularity <= 1.0:
            raise ValueError("irregularity must be in [0, 1]")


MANIFEST_COLUMNS = ['image_id', 'label', 'detected', 'threshold_level', 'offset_used']


@dataclass
class ManifestRow:
    image_id: str
    label: str
    detected: bool
    threshold_level: float = None
    offset_used: float = None
    error: str = None

    def to_dict(self):
        return asdict(self)


@dataclass
class Manifest:
    rows: list = field(default_factory=list)

    @property
    def failures(self):
        return [r for r in self.rows if r.error]

    def detected_count(self):
        return sum(1 for r in self.rows if r.detected)
