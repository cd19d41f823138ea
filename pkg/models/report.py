"""
Evaluation results: confusion matrix, derived metrics, ROC and detection rates.
"""
from dataclasses import dataclass, field, asdict


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with 'atypical' as the positive class."""
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Metrics:
    """Sensitivity, specificity, precision, accuracy; None where undefined."""
    se: float = None
    sp: float = None
    pr: float = None
    ac: float = None

    def to_dict(self):
        return asdict(self)


@dataclass
class DetectionRates:
    """Per-class detected counts; class name -> (detected, total)."""
    per_class: dict = field(default_factory=dict)

    def rate(self, name):
        detected, total = self.per_class[name]
        return detected / total if total else None

    @property
    def overall(self):
        detected = sum(d for d, _ in self.per_class.values())
        total = sum(t for _, t in self.per_class.values())
        return detected / total if total else None

    def to_dict(self):
        out = {
            name: {'detected': d, 'total': t, 'rate': self.rate(name)}
            for name, (d, t) in self.per_class.items()
        }
        out['overall'] = self.overall
        return out


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    metrics: Metrics
    roc: list = field(default_factory=list)     # (fpr, tpr) points
    auc: float = None
    detection: DetectionRates = None

    def to_dict(self):
        """Flat JSON payload: tp, fn, fp, tn, se, sp, pr, ac, auc (+ detection when known)."""
        out = self.confusion.to_dict()
        out.update(self.metrics.to_dict())
        out['auc'] = self.auc
        if self.detection is not None:
            out['detection'] = self.detection.to_dict()
        return out
