"""
Checks against the real PH2 images. Point PNKIT_PH2_ROOT at the unpacked PH2
folder and PNKIT_PH2_LABELS at an image_id,pn_label CSV.

The classifier checks train five seeded runs per classifier and dataset and
compare medians; expect well over an hour of CPU time.
"""
import os

import numpy as np
import pytest

from models.bof import BofOptions
from models.network import TrainOptions
from services.classifier_service import train_cnn_on_items, train_bof_on_items, evaluate_items
from services.dataset_service import load_labeled_dataset, build_pn_dataset, stratified_split
from services.evaluation_service import detection_rates, compare_reports

PH2_ROOT = os.getenv('PNKIT_PH2_ROOT')
PH2_LABELS = os.getenv('PNKIT_PH2_LABELS')
JOBS = os.cpu_count() or 1
SEEDS = range(5)

pytestmark = [
    pytest.mark.dataset,
    pytest.mark.slow,
    pytest.mark.skipif(not (PH2_ROOT and PH2_LABELS), reason='PNKIT_PH2_ROOT / PNKIT_PH2_LABELS not set'),
]


@pytest.fixture(scope='module')
def ph2_manifest(tmp_path_factory):
    items = load_labeled_dataset(PH2_ROOT, PH2_LABELS)
    out = tmp_path_factory.mktemp('ph2_pn')
    return items, build_pn_dataset(items, out=str(out), jobs=JOBS), out


@pytest.fixture(scope='module')
def datasets(ph2_manifest):
    raw, _, out = ph2_manifest
    derived = load_labeled_dataset(str(out), str(out / 'manifest.csv'))
    return {'derived': derived, 'raw': raw}


def _cnn_run(items, seed):
    train, val = stratified_split(items, seed=seed)
    model, _ = train_cnn_on_items(train, val, TrainOptions(seed=seed), JOBS)
    return evaluate_items(model, val, JOBS)


def _bof_run(items, seed):
    train, val = stratified_split(items, seed=seed)
    model = train_bof_on_items(train, BofOptions(seed=seed), JOBS)
    return evaluate_items(model, val, JOBS)


@pytest.fixture(scope='module')
def reports(datasets):
    """{(classifier, dataset): [EvalReport per seed]}"""
    runs = {'cnn': _cnn_run, 'bof': _bof_run}
    return {
        (name, key): [run(items, seed) for seed in SEEDS]
        for name, run in runs.items()
        for key, items in datasets.items()
    }


def _median(reports, field):
    if field == 'auc':
        return float(np.median([r.auc for r in reports]))
    return float(np.median([getattr(r.metrics, field) for r in reports]))


# ---------------------------------------------------------------- detection

def test_ph2_class_balance(ph2_manifest):
    items, _, _ = ph2_manifest
    assert len(items) == 200
    assert sum(1 for i in items if i.label == 'typical') == 83


def test_ph2_detection_rate(ph2_manifest):
    _, manifest, _ = ph2_manifest
    assert not manifest.failures
    assert manifest.detected_count() >= 190


def test_ph2_per_class_detection(ph2_manifest):
    _, manifest, _ = ph2_manifest
    rates = detection_rates(manifest.rows)
    assert rates.rate('typical') == pytest.approx(79 / 83, abs=0.03)
    assert rates.rate('atypical') == pytest.approx(113 / 117, abs=0.03)


# ---------------------------------------------------------------- classifiers

def test_cnn_on_derived_dataset(reports):
    runs = reports['cnn', 'derived']
    assert _median(runs, 'ac') == pytest.approx(0.90, abs=0.07)
    assert _median(runs, 'se') == pytest.approx(0.90, abs=0.07)
    assert _median(runs, 'sp') == pytest.approx(0.89, abs=0.07)


def test_cnn_derived_beats_raw(reports):
    assert _median(reports['cnn', 'raw'], 'ac') == pytest.approx(0.80, abs=0.07)
    for seed, derived, raw in zip(SEEDS, reports['cnn', 'derived'], reports['cnn', 'raw']):
        assert compare_reports(derived, raw)['accuracy_higher'], seed


def test_bof_on_derived_dataset(reports):
    assert _median(reports['bof', 'derived'], 'ac') == pytest.approx(0.85, abs=0.08)


def test_cnn_at_least_matches_bof(reports):
    for seed, cnn, bof in zip(SEEDS, reports['cnn', 'derived'], reports['bof', 'derived']):
        assert cnn.metrics.ac >= bof.metrics.ac, seed


def test_auc_values_and_ordering(reports):
    assert _median(reports['cnn', 'derived'], 'auc') == pytest.approx(0.84, abs=0.08)
    assert _median(reports['bof', 'derived'], 'auc') == pytest.approx(0.80, abs=0.08)
    for name in ('cnn', 'bof'):
        assert _median(reports[name, 'derived'], 'auc') > _median(reports[name, 'raw'], 'auc'), name
