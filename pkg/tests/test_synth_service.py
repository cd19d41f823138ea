import numpy as np
import pytest

from models.dataset import SynthParams
from services.synth_service import synth_network_image, constant_image


def test_regular_grid_rows_are_spaced():
    img, mask = synth_network_image(SynthParams(spacing=16, line_width=1, irregularity=0.0, size=(64, 64)))
    full_rows = np.flatnonzero(mask.data.all(axis=1))
    full_cols = np.flatnonzero(mask.data.all(axis=0))
    assert list(full_rows) == [8, 24, 40, 56]
    assert list(full_cols) == [8, 24, 40, 56]
    assert img.data.shape == (64, 64, 3)


def test_line_pixels_are_darker():
    p = SynthParams(size=(96, 64), seed=5)
    img, mask = synth_network_image(p)
    assert img.data.shape == (64, 96, 3)
    assert np.all(img.data[~mask.data] == p.background)
    assert np.all(img.data[mask.data] < img.data[~mask.data].min(axis=0))


def test_zero_darkness_is_plain_background():
    img, mask = synth_network_image(SynthParams(darkness=0.0, size=(48, 48)))
    assert mask.count() > 0
    assert np.all(img.data == (205, 160, 120))


def test_same_seed_same_image():
    a, _ = synth_network_image(SynthParams(seed=9, size=(80, 80)))
    b, _ = synth_network_image(SynthParams(seed=9, size=(80, 80)))
    c, _ = synth_network_image(SynthParams(seed=10, size=(80, 80)))
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_params_validated():
    with pytest.raises(ValueError):
        SynthParams(spacing=3, line_width=3)
    with pytest.raises(ValueError):
        SynthParams(darkness=1.5)


def test_constant_image():
    img = constant_image((10, 20, 30), size=(7, 5))
    assert img.data.shape == (5, 7, 3)
    assert np.all(img.data == (10, 20, 30))
