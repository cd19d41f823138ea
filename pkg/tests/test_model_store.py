import numpy as np
import pytest

from models.bof import Vocabulary, BofModel, BofOptions, DESCRIPTOR_LENGTH
from models.network import TrainOptions, CnnModel, PARAMETER_NAMES
from services.cnn_service import train_cnn, forward
from services.model_store import (
    cnn_to_bytes, bof_to_bytes, model_from_bytes, save_cnn, save_bof, load_model, CNN_MAGIC, BOF_MAGIC,
)
from utils.errors import ModelFormatError, UnreadableFile


@pytest.fixture
def cnn(rng):
    x = np.concatenate([rng.uniform(0.6, 1.0, size=(4, 12, 12, 3)), rng.uniform(0.0, 0.4, size=(4, 12, 12, 3))])
    y = [0] * 4 + [1] * 4
    model, _ = train_cnn(x, y, x[:2], y[:2], TrainOptions(input_size=12, max_epochs=2, batch_size=4, seed=5))
    return model


@pytest.fixture
def bof(rng):
    vocab = Vocabulary(rng.normal(size=(4, DESCRIPTOR_LENGTH)), [12.5, 3.25, 3.0])
    return BofModel(vocabulary=vocab, weights=rng.normal(size=5), options=BofOptions(vocab_size=4, seed=8))


def test_cnn_round_trip(cnn, rng):
    data = cnn_to_bytes(cnn)
    assert data.startswith(CNN_MAGIC)
    loaded = model_from_bytes(data)

    assert isinstance(loaded, CnnModel)
    assert loaded.trained and loaded.epochs_run == 2
    assert loaded.options == cnn.options
    for name in PARAMETER_NAMES:
        assert np.array_equal(loaded.parameters()[name], cnn.parameters()[name])
    x = rng.uniform(size=(3, 12, 12, 3))
    assert np.array_equal(forward(loaded, x), forward(cnn, x))
    assert cnn_to_bytes(loaded) == data


def test_bof_round_trip(bof):
    data = bof_to_bytes(bof)
    assert data.startswith(BOF_MAGIC)
    loaded = model_from_bytes(data)
    assert np.array_equal(loaded.vocabulary.centroids, bof.vocabulary.centroids)
    assert np.array_equal(loaded.weights, bof.weights)
    assert loaded.vocabulary.inertia_history == [12.5, 3.25, 3.0]
    assert loaded.options == bof.options
    assert bof_to_bytes(loaded) == data


def test_save_and_load_files(tmp_path, cnn, bof):
    save_cnn(cnn, str(tmp_path / 'cnn.model'))
    save_bof(bof, str(tmp_path / 'bof.model'))
    assert isinstance(load_model(str(tmp_path / 'cnn.model')), CnnModel)
    assert isinstance(load_model(str(tmp_path / 'bof.model')), BofModel)
    with pytest.raises(UnreadableFile):
        load_model(str(tmp_path / 'missing.model'))


def test_damaged_containers_are_rejected(bof):
    data = bof_to_bytes(bof)
    for damaged in (b'NOTAMODEL' + data[9:], data[:-8], data + b'\x00', data[:6], data[:13] + b'\xff' + data[14:]):
        with pytest.raises(ModelFormatError):
            model_from_bytes(damaged)
