"""
Classifier evaluation: confusion matrix, SE/SP/PR/AC, ROC/AUC and
pigment-network detection rates. Pure functions, safe from any thread.
"""
import logging

import numpy as np
from sklearn.metrics import confusion_matrix, roc_curve, auc

from models.report import ConfusionMatrix, Metrics, DetectionRates, EvalReport
from utils.errors import LengthMismatch, EmptyDataset, SingleClass
from config.settings import CLASS_NAMES

logger = logging.getLogger(__name__)

POSITIVE = 1


def _as_labels(values, name):
    arr = np.asarray(values, dtype=np.int64).ravel()
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        raise ValueError(f"{name} must contain only 0 (typical) and 1 (atypical)")
    return arr


def confusion(preds, truths):
    """Confusion counts of predicted vs. true class indices (atypical positive)."""
    preds = _as_labels(preds, 'preds')
    truths = _as_labels(truths, 'truths')
    if len(preds) != len(truths):
        raise LengthMismatch(f"{len(preds)} predictions for {len(truths)} labels")
    if len(preds) == 0:
        raise EmptyDataset("nothing to evaluate")

    (tn, fp), (fn, tp) = confusion_matrix(truths, preds, labels=[0, POSITIVE])
    return ConfusionMatrix(tp=int(tp), fn=int(fn), fp=int(fp), tn=int(tn))


def _ratio(num, den, name):
    if den == 0:
        logger.warning("%s is undefined (zero denominator); reported as null", name)
        return None
    return num / den


def metrics(cm):
    """SE = TP/(TP+FN), SP = TN/(FP+TN), PR = TP/(TP+FP), AC = (TP+TN)/all."""
    return Metrics(
        se=_ratio(cm.tp, cm.tp + cm.fn, 'sensitivity'),
        sp=_ratio(cm.tn, cm.fp + cm.tn, 'specificity'),
        pr=_ratio(cm.tp, cm.tp + cm.fp, 'precision'),
        ac=_ratio(cm.tp + cm.tn, cm.total, 'accuracy'),
    )


def roc_auc(scores, truths):
    """
    ROC over every distinct score (equal scores step together) and its trapezoidal area.

    Returns:
        (list of (fpr, tpr) from (0, 0) to (1, 1), auc)
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truths = _as_labels(truths, 'truths')
    if len(scores) != len(truths):
        raise LengthMismatch(f"{len(scores)} scores for {len(truths)} labels")
    if len(np.unique(truths)) < 2:
        raise SingleClass("ROC needs both classes among the truths")

    fpr, tpr, _ = roc_curve(truths, scores, pos_label=POSITIVE, drop_intermediate=False)
    area = float(auc(fpr, tpr))
    return [(float(x), float(y)) for x, y in zip(fpr, tpr)], area


def detection_rates(rows):
    """
    Fraction of images with a detected pigment network, per class and overall.

    Args:
        rows: objects with `label` (class name) and `detected` (bool),
            e.g. manifest rows
    """
    rows = list(rows)
    if not rows:
        raise EmptyDataset("no detection results")
    per_class = {}
    for name in CLASS_NAMES:
        group = [r for r in rows if r.label == name]
        per_class[name] = (sum(1 for r in group if r.detected), len(group))
    return DetectionRates(per_class)


def build_report(truths, preds, scores=None, detection=None):
    """Everything eval writes: counts, metrics and, when both classes are present, ROC/AUC."""
    cm = confusion(preds, truths)
    report = EvalReport(confusion=cm, metrics=metrics(cm), detection=detection)
    if scores is not None:
        try:
            report.roc, report.auc = roc_auc(scores, truths)
        except SingleClass as e:
            logger.warning("AUC not computed: %s", e)
    return report


def compare_reports(first, second):
    """Side-by-side summary; *_higher is None when either value is undefined."""
    def higher(a, b):
        return None if a is None or b is None else a > b

    return {
        'first': first.to_dict(),
        'second': second.to_dict(),
        'auc_higher': higher(first.auc, second.auc),
        'accuracy_higher': higher(first.metrics.ac, second.metrics.ac),
    }
