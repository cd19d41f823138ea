"""
Glue between labeled image lists and the two classifiers: loading, training
on a split and scoring a set of images for evaluation.
"""
import logging

import numpy as np

from models.network import CnnModel
from models.bof import BofModel
from services.image_service import load_image, rgb_to_gray
from services.cnn_service import images_to_batch, train_cnn, predict_batch
from services.bof_service import train_bof, predict_bof
from services.evaluation_service import build_report
from services.worker_pool import map_ordered
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

SCORE_CHUNK = 32


def load_cnn_batch(items, size, jobs=1):
    images = map_ordered(lambda item: images_to_batch([load_image(item.path)], size)[0], items, jobs)
    if not images:
        return np.zeros((0, size, size, 3))
    return np.stack(images)


def train_cnn_on_items(train_items, val_items, options, jobs=1):
    size = options.input_size
    train_x = load_cnn_batch(train_items, size, jobs)
    val_x = load_cnn_batch(val_items, size, jobs)
    train_y = [item.label_index for item in train_items]
    val_y = [item.label_index for item in val_items]
    return train_cnn(train_x, train_y, val_x, val_y, options)


def train_bof_on_items(train_items, options, jobs=1):
    images = map_ordered(lambda item: rgb_to_gray(load_image(item.path)), train_items, jobs)
    return train_bof(images, [item.label_index for item in train_items], options, jobs)


def score_items(model, items, jobs=1):
    """
    Returns:
        (truths, preds, scores); scores grow with confidence in 'atypical'
    """
    truths = np.array([item.label_index for item in items], dtype=np.int64)

    if isinstance(model, CnnModel):
        preds, scores = [], []
        size = model.input_shape[0]
        for start in range(0, len(items), SCORE_CHUNK):
            batch = load_cnn_batch(items[start:start + SCORE_CHUNK], size, jobs)
            probs = predict_batch(model, batch)
            preds.extend(int(p) for p in np.argmax(probs, axis=1))
            scores.extend(float(p) for p in probs[:, 1])
    elif isinstance(model, BofModel):
        results = map_ordered(lambda item: predict_bof(model, rgb_to_gray(load_image(item.path))), items, jobs)
        preds = [label for label, _ in results]
        scores = [score for _, score in results]
    else:
        raise ConfigError(f"cannot evaluate a {type(model).__name__}")

    logger.debug("Scored %d images", len(items))
    return truths, np.asarray(preds, dtype=np.int64), np.asarray(scores, dtype=np.float64)


def evaluate_items(model, items, jobs=1, detection=None):
    truths, preds, scores = score_items(model, items, jobs)
    return build_report(truths, preds, scores, detection)
