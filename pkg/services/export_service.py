"""
Writers for everything the toolkit puts on disk besides model containers.

- <out>/<id>_pn.png and <out>/manifest.csv for a derived dataset
- <out>/<id>/NN_<stage>.png stage images
- training_log.csv (CNN loss or K-means SSE), train_labels.csv / val_labels.csv
- report.json, roc.csv, detection.json, comparison.json

All CSV files are UTF-8, comma-separated, LF line endings.
"""
import csv
import json
import logging
import os

from models.pipeline import STAGE_FILES
from models.dataset import MANIFEST_COLUMNS
from services.image_service import save_png

logger = logging.getLogger(__name__)

TRAINING_LOG_COLUMNS = ['iteration', 'epoch', 'train_loss', 'val_accuracy']
VOCABULARY_LOG_COLUMNS = ['iteration', 'sse']
LABEL_COLUMNS = ['image_id', 'pn_label']
ROC_COLUMNS = ['fpr', 'tpr']
REPORT_KEYS = ['tp', 'fn', 'fp', 'tn', 'se', 'sp', 'pr', 'ac', 'auc']


def safe_output_path(out_dir, filename):
    """Join filename onto out_dir, refusing anything that would escape it."""
    name = os.path.basename(filename)
    if not name or name in ('.', '..') or name != filename:
        raise ValueError(f"refusing to write outside {out_dir}: {filename!r}")
    return os.path.join(out_dir, name)


def _write_csv(filepath, columns, rows):
    with open(filepath, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)
    logger.info("Saved %s (%d rows)", filepath, len(rows))


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(float(value))
    return value


def write_manifest(manifest, out_dir):
    """manifest.csv sorted by image id, plus failures.csv when any image failed."""
    rows = sorted(manifest.rows, key=lambda r: r.image_id)
    path = os.path.join(out_dir, 'manifest.csv')
    _write_csv(path, MANIFEST_COLUMNS, [
        [_fmt(getattr(r, col)) for col in MANIFEST_COLUMNS] for r in rows
    ])

    failures = [r for r in rows if r.error]
    if failures:
        _write_csv(os.path.join(out_dir, 'failures.csv'), ['image_id', 'error'],
                   [[r.image_id, r.error] for r in failures])
    return path


def write_stage_images(result, out_dir):
    """Write all nine stage PNGs of one pipeline run into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for key, stem in STAGE_FILES:
        path = os.path.join(out_dir, f"{stem}.png")
        save_png(result.stages[key], path)
        paths.append(path)
    return paths


def write_training_log(entries, filepath):
    _write_csv(filepath, TRAINING_LOG_COLUMNS, [
        [e.iteration, e.epoch, repr(float(e.train_loss)), repr(float(e.val_accuracy))]
        for e in entries
    ])


def write_vocabulary_log(inertia_history, filepath):
    """K-means sum of squared distances after each assignment step."""
    _write_csv(filepath, VOCABULARY_LOG_COLUMNS, [
        [i, repr(float(sse))] for i, sse in enumerate(inertia_history)
    ])


def write_labels(items, filepath):
    """Labels CSV (image_id,pn_label) for a split, so eval can be pointed at it."""
    _write_csv(filepath, LABEL_COLUMNS, [[item.id, item.label] for item in items])


def write_json(payload, filepath):
    with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.info("Saved %s", filepath)


def write_report(report, out_dir, prefix=''):
    """<prefix>report.json with the fixed metric keys and <prefix>roc.csv."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{prefix}report.json")
    write_json(report.to_dict(), json_path)

    roc_path = os.path.join(out_dir, f"{prefix}roc.csv")
    _write_csv(roc_path, ROC_COLUMNS, [[repr(float(x)), repr(float(y))] for x, y in report.roc])
    return json_path, roc_path
