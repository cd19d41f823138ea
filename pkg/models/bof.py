"""
Bag-of-visual-features types.
"""
from dataclasses import dataclass, field, asdict

import numpy as np

from config.settings import (
    VOCAB_SIZE, SURF_OCTAVES, SURF_THRESHOLD, KMEANS_MAX_ITER, KMEANS_TOL,
    BOF_EPOCHS, BOF_LEARNING_RATE, BOF_REGULARIZATION, CLASS_NAMES, DEFAULT_SEED,
)

DESCRIPTOR_LENGTH = 64


@dataclass(eq=False)
class DescriptorSet:
    """Local descriptors of one image."""
    descriptors: np.ndarray     # (n, 64), unit L2 norm
    keypoints: np.ndarray       # (n, 2) as (x, y) pixel coordinates
    scales: np.ndarray          # (n,)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, DESCRIPTOR_LENGTH)), np.zeros((0, 2)), np.zeros(0))

    def __len__(self):
        return len(self.descriptors)


@dataclass(eq=False)
class Vocabulary:
    centroids: np.ndarray                        # (K, 64)
    inertia_history: list = field(default_factory=list)

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or len(self.centroids) < 2:
            raise ValueError("a vocabulary needs at least two centroids")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")

    @property
    def size(self):
        return len(self.centroids)


@dataclass(frozen=True)
class BofOptions:
    vocab_size: int = VOCAB_SIZE
    octaves: int = SURF_OCTAVES
    response_threshold: float = SURF_THRESHOLD
    kmeans_max_iter: int = KMEANS_MAX_ITER
    kmeans_tol: float = KMEANS_TOL
    epochs: int = BOF_EPOCHS
    learning_rate: float = BOF_LEARNING_RATE
    regularization: float = BOF_REGULARIZATION
    seed: int = DEFAULT_SEED

    def validate(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if not 1 <= self.octaves <= 4:
            raise ValueError("octaves must be in [1, 4]")
        if self.response_threshold < 0:
            raise ValueError("response_threshold must be >= 0")
        if self.epochs < 1 or self.learning_rate <= 0 or self.regularization < 0:
            raise ValueError("epochs, learning_rate and regularization must be positive")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class BofModel:
    """Vocabulary plus a linear classifier: score = weights[:K] . h + weights[K]."""
    vocabulary: Vocabulary
    weights: np.ndarray                          # (K + 1,), bias last
    class_names: tuple = CLASS_NAMES
    options: BofOptions = field(default_factory=BofOptions)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.vocabulary.size + 1,):
            raise ValueError(f"expected {self.vocabulary.size + 1} weights, got {self.weights.shape}")

    @property
    def bias(self):
        return float(self.weights[-1])
