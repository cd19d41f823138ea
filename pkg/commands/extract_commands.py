"""
`pnkit extract INPUT --out DIR`: run the pigment-network pipeline on one image
or on every image in a directory.
"""
import logging
import os

from services.image_service import load_image, save_png
from services.extraction_service import extract_pigment_network
from services.export_service import write_stage_images
from services.worker_pool import map_ordered
from commands.common import (
    add_common_options, add_pipeline_options, pipeline_overrides, load_config,
    print_header, ensure_dir, guarded, EXIT_OK, EXIT_IO,
)
from utils.errors import PnKitError, UnreadableFile, EmptyDataset
from config.settings import IMAGE_EXTENSIONS, OUTPUT_DIR

logger = logging.getLogger(__name__)


def register(subparsers):
    p = subparsers.add_parser('extract', help='isolate the pigment network of one image or a directory')
    p.add_argument('input', help='image file or directory of PNG/JPEG/BMP images')
    p.add_argument('--out', default=OUTPUT_DIR, help='output directory (one sub-directory per image)')
    add_pipeline_options(p)
    add_common_options(p)
    p.set_defaults(handler=cmd_extract)


def list_images(path):
    """(id, path) pairs for a file or every supported image in a directory, sorted by name."""
    if os.path.isfile(path):
        return [(os.path.splitext(os.path.basename(path))[0], path)]
    if not os.path.isdir(path):
        raise UnreadableFile(f"no such file or directory: {path}")

    found = []
    for name in sorted(os.listdir(path)):
        stem, ext = os.path.splitext(name)
        full = os.path.join(path, name)
        if ext.lower() in IMAGE_EXTENSIONS and os.path.isfile(full):
            found.append((stem, full))
    if not found:
        raise EmptyDataset(f"no PNG/JPEG/BMP images in {path}")
    return found


@guarded
def cmd_extract(args):
    config = load_config(args, pipeline_overrides(args))
    images = list_images(args.input)
    out_root = ensure_dir(args.out)
    print_header('extract', config, images=len(images))

    def process(entry):
        image_id, path = entry
        try:
            result = extract_pigment_network(load_image(path), config.pipeline)
            target = ensure_dir(os.path.join(out_root, image_id))
            if args.emit_stages:
                write_stage_images(result, target)
            else:
                save_png(result.colorized, os.path.join(target, '09_colorized.png'))
        except (PnKitError, OSError) as e:
            logger.error("%s: %s", image_id, e)
            return image_id, None
        return image_id, result

    failed = 0
    for image_id, result in map_ordered(process, images, config.jobs):
        if result is None:
            failed += 1
            print(f"{image_id} error -")
            continue
        print(f"{image_id} {'true' if result.detected else 'false'} {result.threshold_level:.6f}")

    if failed:
        logger.error("%d of %d images failed", failed, len(images))
        return EXIT_IO
    return EXIT_OK
