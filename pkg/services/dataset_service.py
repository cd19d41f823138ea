"""
Dataset ingestion, stratified splitting and derived pigment-network datasets.

Ingestion contract: a labels CSV with header `image_id,pn_label` and an image
root holding, for each id, one of
- <root>/<id>.{png,jpg,jpeg,bmp}
- <root>/<id>_pn.png (a derived dataset written by build_pn_dataset)
- <root>/<id>/<id>_Dermoscopic_Image/<id>.bmp (PH2 folder layout)
A derived dataset's own manifest.csv (column `label`) is accepted as labels too.
"""
import csv
import logging
import os
from collections import Counter

import numpy as np

from models.dataset import LabeledImage, OverrideTable, ManifestRow, Manifest, MANIFEST_COLUMNS
from models.pipeline import PipelineConfig
from services.image_service import load_image, save_png
from services.extraction_service import extract_pigment_network
from services.export_service import safe_output_path, write_manifest
from services.worker_pool import map_ordered
from utils.errors import (
    EmptyDataset, MissingImage, BadLabel, DuplicateId, ClassTooSmall, ConfigError, PnKitError,
)
from config.settings import CLASS_NAMES, IMAGE_EXTENSIONS, TRAIN_FRACTION

logger = logging.getLogger(__name__)


def _resolve_image(root, image_id):
    candidates = [os.path.join(root, image_id + ext) for ext in IMAGE_EXTENSIONS]
    candidates += [os.path.join(root, image_id + ext.upper()) for ext in IMAGE_EXTENSIONS]
    candidates.append(os.path.join(root, f"{image_id}_pn.png"))
    candidates.append(os.path.join(root, image_id, f"{image_id}_Dermoscopic_Image", f"{image_id}.bmp"))
    for path in candidates:
        if os.path.isfile(path):
            return path
    return None


def _failed_ids(labels):
    """Ids in the failures.csv written next to a derived manifest."""
    path = os.path.join(os.path.dirname(os.path.abspath(labels)), 'failures.csv')
    if not os.path.isfile(path):
        return set()
    with open(path, newline='', encoding='utf-8') as f:
        return {row['image_id'].strip() for row in csv.DictReader(f) if row.get('image_id')}


def load_labeled_dataset(root, labels):
    """
    Read the labels CSV and resolve every image under root.

    For a derived manifest, rows listed in the adjacent failures.csv have no
    `<id>_pn.png` and are skipped.

    Returns:
        list[LabeledImage] in file order
    """
    if not os.path.isfile(labels):
        raise MissingImage(f"labels file not found: {labels}")

    with open(labels, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        fields = reader.fieldnames or []
        label_col = 'pn_label' if 'pn_label' in fields else 'label' if 'label' in fields else None
        if 'image_id' not in fields or label_col is None:
            if not fields:
                raise EmptyDataset(f"{labels} is empty")
            raise BadLabel(f"{labels}: expected header image_id,pn_label, got {fields}")
        rows = list(reader)

    if not rows:
        raise EmptyDataset(f"{labels} has no rows")

    failed = _failed_ids(labels) if label_col == 'label' else set()
    if failed:
        logger.warning("Skipping %d image(s) listed in failures.csv: %s", len(failed), ', '.join(sorted(failed)))

    items = []
    seen = set()
    for row in rows:
        image_id = (row.get('image_id') or '').strip()
        label = (row.get(label_col) or '').strip().lower()
        if not image_id:
            raise BadLabel(f"{labels}: row without image_id")
        if image_id in failed:
            continue
        if label not in CLASS_NAMES:
            raise BadLabel(f"{image_id}: label {label!r} is not one of {CLASS_NAMES}")
        if image_id in seen:
            raise DuplicateId(f"duplicate image id {image_id}")
        seen.add(image_id)

        path = _resolve_image(root, image_id)
        if path is None:
            raise MissingImage(f"{image_id}: no image found under {root}")
        items.append(LabeledImage(id=image_id, path=path, label=label))

    if not items:
        raise EmptyDataset(f"{labels}: every image is listed in failures.csv")

    counts = Counter(item.label for item in items)
    logger.info(
        "Loaded %d images from %s (%s)", len(items), root,
        ', '.join(f"{name}={counts.get(name, 0)}" for name in CLASS_NAMES),
    )
    return items


def load_overrides(path):
    """Read an `image_id,offset` CSV into an OverrideTable."""
    if not path:
        return OverrideTable()
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {'image_id', 'offset'} <= set(reader.fieldnames):
            raise BadLabel(f"{path}: expected header image_id,offset")
        offsets = {}
        for row in reader:
            image_id = row['image_id'].strip()
            if image_id in offsets:
                raise DuplicateId(f"duplicate override for {image_id}")
            try:
                offsets[image_id] = float(row['offset'])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{path}: bad offset for {image_id}: {row['offset']!r}") from e
    try:
        return OverrideTable(offsets)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _optional_float(text):
    return float(text) if text not in (None, '') else None


def load_manifest(path):
    """Rows of a manifest.csv written by build_pn_dataset."""
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not set(MANIFEST_COLUMNS) <= set(reader.fieldnames):
            raise BadLabel(f"{path}: expected header {','.join(MANIFEST_COLUMNS)}")
        return [
            ManifestRow(
                image_id=row['image_id'],
                label=row['label'],
                detected=row['detected'].strip().lower() == 'true',
                threshold_level=_optional_float(row['threshold_level']),
                offset_used=_optional_float(row['offset_used']),
            )
            for row in reader
        ]


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def stratified_split(items, train_fraction=TRAIN_FRACTION, seed=0):
    """
    Per-class shuffled split; each class contributes round(fraction x size) to training.

    Returns:
        (train, val) lists, both ordered by class then shuffled position
    """
    rng = np.random.default_rng(seed)
    train, val = [], []
    for name in CLASS_NAMES:
        group = sorted((item for item in items if item.label == name), key=lambda item: item.id)
        if not group:
            continue
        if len(group) < 2:
            raise ClassTooSmall(f"class {name} has {len(group)} item(s); need at least 2")
        order = rng.permutation(len(group))
        n_train = _round_half_up(train_fraction * len(group))
        if n_train < 1 or n_train >= len(group):
            side = 'training' if n_train < 1 else 'validation'
            raise ClassTooSmall(f"class {name}: fraction {train_fraction} leaves the {side} split empty")
        train.extend(group[k] for k in order[:n_train])
        val.extend(group[k] for k in order[n_train:])

    logger.info("Split %d items into %d train / %d val (seed=%d)", len(items), len(train), len(val), seed)
    return train, val


def build_pn_dataset(items, cfg=None, overrides=None, out='.', jobs=1):
    """
    Run the extraction pipeline over items and write the derived dataset.

    Writes <out>/<id>_pn.png for every image that was processed and
    <out>/manifest.csv with one row per input item. Per-image failures are
    logged and recorded, never fatal.

    Returns:
        Manifest
    """
    cfg = cfg or PipelineConfig()
    overrides = overrides or OverrideTable()
    os.makedirs(out, exist_ok=True)

    def process(item):
        offset = overrides.get(item.id, cfg.threshold_offset)
        try:
            target = safe_output_path(out, f"{item.id}_pn.png")
            result = extract_pigment_network(load_image(item.path), cfg.with_offset(offset))
            save_png(result.colorized, target)
        except (PnKitError, OSError, ValueError) as e:
            logger.error("Extraction failed for %s: %s", item.id, e)
            return ManifestRow(item.id, item.label, False, None, offset, error=str(e) or repr(e))
        return ManifestRow(item.id, item.label, result.detected, result.threshold_level, result.offset_used)

    rows = map_ordered(process, items, jobs)
    manifest = Manifest(sorted(rows, key=lambda r: r.image_id))
    write_manifest(manifest, out)

    logger.info(
        "Derived dataset: %d/%d detected, %d failed, %d overrides applied",
        manifest.detected_count(), len(rows), len(manifest.failures),
        sum(1 for item in items if item.id in overrides.offsets),
    )
    return manifest
