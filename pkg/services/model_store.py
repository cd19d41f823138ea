"""
Model containers.

Layout (little-endian):
    magic           9 bytes, b'PNKITCNN1' or b'PNKITBOF1'
    header length   uint32
    header          UTF-8 JSON, sorted keys: layer specs, options, seed and
                    the name and shape of every array that follows
    arrays          float64 ('<f8'), C order, in header order

Identical models serialize to identical bytes.
"""
import json
import logging
import struct

import numpy as np

from models.network import (
    ConvLayer, BatchNormLayer, PoolLayer, DenseLayer, CnnModel, TrainOptions, PARAMETER_NAMES,
)
from models.bof import Vocabulary, BofModel, BofOptions
from utils.errors import ModelFormatError, UnreadableFile

logger = logging.getLogger(__name__)

CNN_MAGIC = b'PNKITCNN1'
BOF_MAGIC = b'PNKITBOF1'
MAGIC_LENGTH = 9
_LENGTH = struct.Struct('<I')
_DTYPE = np.dtype('<f8')


def _pack(magic, header, arrays):
    header = dict(header)
    header['arrays'] = [{'name': name, 'shape': list(np.shape(a))} for name, a in arrays]
    blob = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    parts = [magic, _LENGTH.pack(len(blob)), blob]
    parts += [np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for _, a in arrays]
    return b''.join(parts)


def _unpack(data, path):
    if len(data) < MAGIC_LENGTH + _LENGTH.size:
        raise ModelFormatError(f"{path}: truncated model file")
    magic = data[:MAGIC_LENGTH]
    (length,) = _LENGTH.unpack_from(data, MAGIC_LENGTH)
    start = MAGIC_LENGTH + _LENGTH.size
    try:
        header = json.loads(data[start:start + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{path}: corrupt header ({e})") from e

    arrays = {}
    offset = start + length
    for spec in header.get('arrays', []):
        shape = tuple(spec['shape'])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * _DTYPE.itemsize
        if end > len(data):
            raise ModelFormatError(f"{path}: truncated array {spec['name']}")
        arrays[spec['name']] = np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(data):
        raise ModelFormatError(f"{path}: {len(data) - offset} trailing bytes")
    return magic, header, arrays


def _write(path, payload):
    with open(path, 'wb') as f:
        f.write(payload)
    logger.info("Saved model %s (%d bytes)", path, len(payload))


# ------------------------------------------------------------------
# CNN
# ------------------------------------------------------------------

def cnn_to_bytes(model):
    header = {
        'kind': 'cnn',
        'seed': model.seed,
        'options': model.options.to_dict(),
        'input_shape': list(model.input_shape),
        'relu_ceiling': model.relu_ceiling,
        'conv1': {'stride': list(model.conv1.stride), 'dilation': list(model.conv1.dilation)},
        'conv2': {'stride': list(model.conv2.stride), 'dilation': list(model.conv2.dilation)},
        'pool': {'window': list(model.pool.window), 'stride': list(model.pool.stride)},
        'bn': {'epsilon': model.bn1.epsilon, 'momentum_stat': model.bn1.momentum_stat},
        'epochs_run': model.epochs_run,
        'final_val_accuracy': model.final_val_accuracy,
        'trained': model.trained,
    }
    params = model.parameters()
    buffers = model.buffers()
    arrays = [(name, params[name]) for name in PARAMETER_NAMES]
    arrays += sorted(buffers.items())
    return _pack(CNN_MAGIC, header, arrays)


def _cnn_from_parts(header, arrays, path):
    try:
        bn = header['bn']
        model = CnnModel(
            conv1=ConvLayer(arrays['conv1.kernel'], arrays['conv1.bias'],
                            tuple(header['conv1']['stride']), tuple(header['conv1']['dilation'])),
            bn1=BatchNormLayer(arrays['bn1.gamma'], arrays['bn1.beta'],
                               arrays['bn1.running_mean'], arrays['bn1.running_var'],
                               bn['epsilon'], bn['momentum_stat']),
            pool=PoolLayer(tuple(header['pool']['window']), tuple(header['pool']['stride'])),
            conv2=ConvLayer(arrays['conv2.kernel'], arrays['conv2.bias'],
                            tuple(header['conv2']['stride']), tuple(header['conv2']['dilation'])),
            bn2=BatchNormLayer(arrays['bn2.gamma'], arrays['bn2.beta'],
                               arrays['bn2.running_mean'], arrays['bn2.running_var'],
                               bn['epsilon'], bn['momentum_stat']),
            fc=DenseLayer(arrays['fc.weights'], arrays['fc.bias']),
            relu_ceiling=header['relu_ceiling'],
            input_shape=tuple(header['input_shape']),
            input_mean=arrays['input_mean'],
            seed=header['seed'],
            options=TrainOptions(**header['options']),
            epochs_run=header['epochs_run'],
            final_val_accuracy=header['final_val_accuracy'],
            trained=header['trained'],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: incomplete CNN container ({e})") from e
    return model


def save_cnn(model, path):
    _write(path, cnn_to_bytes(model))


# ------------------------------------------------------------------
# Bag of features
# ------------------------------------------------------------------

def bof_to_bytes(model):
    header = {
        'kind': 'bof',
        'seed': model.options.seed,
        'options': model.options.to_dict(),
        'class_names': list(model.class_names),
    }
    arrays = [
        ('centroids', model.vocabulary.centroids),
        ('weights', model.weights),
        ('inertia_history', np.asarray(model.vocabulary.inertia_history, dtype=np.float64)),
    ]
    return _pack(BOF_MAGIC, header, arrays)


def _bof_from_parts(header, arrays, path):
    try:
        vocab = Vocabulary(arrays['centroids'], list(arrays['inertia_history']))
        model = BofModel(
            vocabulary=vocab,
            weights=arrays['weights'],
            class_names=tuple(header['class_names']),
            options=BofOptions(**header['options']),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: incomplete BoF container ({e})") from e
    return model


def save_bof(model, path):
    _write(path, bof_to_bytes(model))


# ------------------------------------------------------------------
# Loading
# ------------------------------------------------------------------

def model_from_bytes(data, path='<bytes>'):
    """CnnModel or BofModel, chosen by the magic."""
    magic, header, arrays = _unpack(data, path)
    if magic == CNN_MAGIC:
        return _cnn_from_parts(header, arrays, path)
    if magic == BOF_MAGIC:
        return _bof_from_parts(header, arrays, path)
    raise ModelFormatError(f"{path}: unknown model magic {magic!r}")


def load_model(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise UnreadableFile(f"cannot read model {path}: {e}") from e
    model = model_from_bytes(data, path)
    logger.info("Loaded %s model from %s", 'CNN' if isinstance(model, CnnModel) else 'BoF', path)
    return model
