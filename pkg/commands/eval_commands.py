"""
`pnkit eval --model M --data D`: confusion matrix, SE/SP/PR/AC and ROC/AUC of
a saved model on a labeled image set, optionally against a second model/data pair.
"""
import logging
import os

from services.dataset_service import load_labeled_dataset, load_manifest
from services.classifier_service import evaluate_items
from services.evaluation_service import detection_rates, compare_reports
from services.model_store import load_model
from services.export_service import write_report, write_json
from commands.common import add_common_options, load_config, print_header, ensure_dir, guarded, EXIT_OK
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def register(subparsers):
    p = subparsers.add_parser('eval', help='evaluate a trained model')
    p.add_argument('--model', required=True, help='cnn.model or bof.model container')
    p.add_argument('--data', required=True, help='image directory')
    p.add_argument('--labels', help='labels CSV (default: <data>/manifest.csv)')
    p.add_argument('--out', required=True, help='directory for report.json and roc.csv')
    p.add_argument('--compare-model', help='second model to evaluate side by side')
    p.add_argument('--compare-data', help='image directory for the second model')
    p.add_argument('--compare-labels', help='labels CSV for the second model (default: <compare-data>/manifest.csv)')
    add_common_options(p)
    p.set_defaults(handler=cmd_eval)


def _fmt(value):
    return 'n/a' if value is None else f"{value:.3f}"


def _evaluate(model_path, data, labels, jobs):
    model = load_model(model_path)
    labels = labels or os.path.join(data, 'manifest.csv')
    items = load_labeled_dataset(data, labels)
    logger.info("Evaluating %s on %d images from %s", os.path.basename(model_path), len(items), data)

    detection = None
    manifest_path = os.path.join(data, 'manifest.csv')
    if os.path.isfile(manifest_path):
        wanted = {item.id for item in items}
        rows = [r for r in load_manifest(manifest_path) if r.image_id in wanted]
        if rows:
            detection = detection_rates(rows)

    return evaluate_items(model, items, jobs, detection)


def _print_report(title, report):
    cm, m = report.confusion, report.metrics
    print(f"{title}: tp={cm.tp} fn={cm.fn} fp={cm.fp} tn={cm.tn} "
          f"se={_fmt(m.se)} sp={_fmt(m.sp)} pr={_fmt(m.pr)} ac={_fmt(m.ac)} auc={_fmt(report.auc)}")


@guarded
def cmd_eval(args):
    if bool(args.compare_model) != bool(args.compare_data):
        raise ConfigError("--compare-model and --compare-data go together")
    config = load_config(args)
    out = ensure_dir(args.out)
    print_header('eval', config, model=os.path.basename(args.model))

    report = _evaluate(args.model, args.data, args.labels, config.jobs)
    write_report(report, out)
    _print_report('model', report)

    if args.compare_model:
        other = _evaluate(args.compare_model, args.compare_data, args.compare_labels, config.jobs)
        write_report(other, out, prefix='compare_')
        _print_report('compare', other)

        comparison = compare_reports(report, other)
        write_json(comparison, os.path.join(out, 'comparison.json'))
        print(f"first AUC higher: {comparison['auc_higher']}, "
              f"first accuracy higher: {comparison['accuracy_higher']}")
    return EXIT_OK
