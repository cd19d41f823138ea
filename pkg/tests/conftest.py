"""
Shared fixtures: seeded generators and small synthetic image corpora on disk.
"""
import csv
import os

import numpy as np
import pytest
from PIL import Image

from models.dataset import SynthParams
from services.synth_service import synth_network_image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_png(path, pixels):
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode='RGB').save(path, format='PNG')
    return path


def write_labels(path, rows, label_column='pn_label'):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['image_id', label_column])
        writer.writerows(rows)
    return path


def network_pixels(seed, size=(128, 128), **kwargs):
    img, _ = synth_network_image(SynthParams(size=size, seed=seed, **kwargs))
    return img.data


def blob_pixels(seed, size=(128, 128)):
    """Light skin with a handful of dark round blots."""
    width, height = size
    r = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    dark = np.zeros((height, width), dtype=bool)
    for _ in range(6):
        cy, cx = r.integers(10, height - 10), r.integers(10, width - 10)
        radius = r.integers(5, 9)
        dark |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    tint = np.array([205, 160, 120], dtype=np.float64)
    return np.rint(tint * (1.0 - 0.6 * dark[..., None])).astype(np.uint8)


@pytest.fixture
def corpus(tmp_path):
    """
    Factory for a labeled corpus: `corpus(n_per_class)` writes fine-grid
    (typical) and blot (atypical) PNGs plus labels.csv; returns (root, labels).
    """
    def make(n_per_class=4, size=(128, 128), name='images'):
        root = tmp_path / name
        root.mkdir()
        rows = []
        for k in range(n_per_class):
            tid, aid = f"T{k:03d}", f"A{k:03d}"
            write_png(root / f"{tid}.png", network_pixels(k, size, spacing=8, line_width=2))
            write_png(root / f"{aid}.png", blob_pixels(100 + k, size))
            rows += [(tid, 'typical'), (aid, 'atypical')]
        labels = write_labels(root / 'labels.csv', rows)
        return str(root), str(labels)
    return make


def file_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


def tree_bytes(root):
    """relative path -> bytes for every file under root."""
    out = {}
    for dirpath, _, names in os.walk(root):
        for name in names:
            full = os.path.join(dirpath, name)
            out[os.path.relpath(full, root)] = file_bytes(full)
    return out
