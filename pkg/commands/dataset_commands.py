"""
`pnkit dataset build`: derive a pigment-network dataset from labeled lesions.
"""
import logging
import os

from services.dataset_service import load_labeled_dataset, load_overrides, build_pn_dataset
from services.evaluation_service import detection_rates
from services.export_service import write_json
from commands.common import (
    add_common_options, add_pipeline_options, pipeline_overrides, load_config,
    print_header, ensure_dir, guarded, EXIT_OK,
)
from config.settings import CLASS_NAMES

logger = logging.getLogger(__name__)


def register(subparsers):
    p = subparsers.add_parser('dataset', help='dataset operations')
    actions = p.add_subparsers(dest='action', required=True)

    build = actions.add_parser('build', help='write <id>_pn.png for every labeled image plus manifest.csv')
    build.add_argument('--root', required=True, help='image root (flat files or PH2 folder layout)')
    build.add_argument('--labels', required=True, help='CSV with header image_id,pn_label')
    build.add_argument('--out', required=True, help='directory for the derived dataset')
    build.add_argument('--overrides', help='CSV with header image_id,offset (per-image threshold offsets)')
    add_pipeline_options(build)
    add_common_options(build)
    build.set_defaults(handler=cmd_dataset_build)


@guarded
def cmd_dataset_build(args):
    config = load_config(args, pipeline_overrides(args))
    items = load_labeled_dataset(args.root, args.labels)
    overrides = load_overrides(args.overrides)
    out = ensure_dir(args.out)
    print_header('dataset build', config, images=len(items), overrides=len(overrides))

    manifest = build_pn_dataset(items, config.pipeline, overrides, out, config.jobs)
    for row in manifest.rows:
        level = '-' if row.threshold_level is None else f"{row.threshold_level:.6f}"
        print(f"{row.image_id} {'error' if row.error else str(row.detected).lower()} {level}")

    if manifest.rows:
        rates = detection_rates(manifest.rows)
        write_json(rates.to_dict(), os.path.join(out, 'detection.json'))
        for name in CLASS_NAMES:
            detected, total = rates.per_class[name]
            if total:
                print(f"{name}: {detected}/{total} detected ({100.0 * detected / total:.2f}%)")
        print(f"overall: {manifest.detected_count()}/{len(manifest.rows)} detected")

    if manifest.failures:
        logger.warning("%d of %d images failed: %s", len(manifest.failures), len(manifest.rows),
                       ", ".join(r.image_id for r in manifest.failures))
        print(f"{len(manifest.failures)} image(s) failed, see failures.csv")
    return EXIT_OK
