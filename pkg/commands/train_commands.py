"""
`pnkit train cnn` / `pnkit train bof`: stratified 80/20 split, fit, save.

Each run writes into --out:
    cnn.model | bof.model       model container
    training_log.csv            CNN: loss and validation accuracy; BoF: K-means SSE
    train_report.json           metrics of the model on its own training split
    train_labels.csv, val_labels.csv
"""
import logging
import os

from services.dataset_service import load_labeled_dataset, stratified_split
from services.classifier_service import train_cnn_on_items, train_bof_on_items, evaluate_items
from services.model_store import save_cnn, save_bof
from services.export_service import write_training_log, write_vocabulary_log, write_labels, write_json
from commands.common import add_common_options, load_config, print_header, print_split, ensure_dir, guarded, EXIT_OK
from config.settings import TRAIN_FRACTION

logger = logging.getLogger(__name__)


def register(subparsers):
    p = subparsers.add_parser('train', help='train a classifier')
    kinds = p.add_subparsers(dest='kind', required=True)

    cnn = kinds.add_parser('cnn', help='train the convolutional network')
    _add_data_options(cnn)
    cnn.add_argument('--epochs', type=int, help='training epochs (default 250)')
    cnn.add_argument('--lr', type=float, help='learning rate (default 0.01)')
    add_common_options(cnn)
    cnn.set_defaults(handler=cmd_train_cnn)

    bof = kinds.add_parser('bof', help='train the bag-of-features classifier')
    _add_data_options(bof)
    bof.add_argument('--vocab-size', type=int, help='number of visual words K (default 500)')
    bof.add_argument('--epochs', type=int, help='classifier epochs (default 200)')
    bof.add_argument('--lr', type=float, help='initial classifier learning rate (default 0.1)')
    add_common_options(bof)
    bof.set_defaults(handler=cmd_train_bof)


def _add_data_options(parser):
    parser.add_argument('--data', required=True, help='image directory (e.g. a derived PN dataset)')
    parser.add_argument('--labels', help='labels CSV (default: <data>/manifest.csv)')
    parser.add_argument('--out', required=True, help='output directory for the model and logs')
    parser.add_argument('--train-fraction', type=float, default=TRAIN_FRACTION,
                        help='per-class training share (default 0.8)')


def _prepare(args, config, command):
    labels = args.labels or os.path.join(args.data, 'manifest.csv')
    items = load_labeled_dataset(args.data, labels)
    train, val = stratified_split(items, args.train_fraction, config.seed)
    out = ensure_dir(args.out)
    logger.info("Writing %s outputs to %s", command, out)
    write_labels(train, os.path.join(out, 'train_labels.csv'))
    write_labels(val, os.path.join(out, 'val_labels.csv'))
    print_header(command, config, images=len(items))
    print_split(train, val)
    return train, val, out


def _sanity_check(model, train, out, jobs):
    report = evaluate_items(model, train, jobs)
    write_json(report.to_dict(), os.path.join(out, 'train_report.json'))
    cm = report.confusion
    print(f"training set: tp={cm.tp} fn={cm.fn} fp={cm.fp} tn={cm.tn} ac={report.metrics.ac:.3f}")


@guarded
def cmd_train_cnn(args):
    config = load_config(args, {'max_epochs': args.epochs, 'learning_rate': args.lr})
    train, val, out = _prepare(args, config, 'train cnn')

    model, log = train_cnn_on_items(train, val, config.train, config.jobs)
    save_cnn(model, os.path.join(out, 'cnn.model'))
    write_training_log(log, os.path.join(out, 'training_log.csv'))

    acc = model.final_val_accuracy
    print(f"validation accuracy: {'n/a' if acc is None else f'{acc:.3f}'}")
    _sanity_check(model, train, out, config.jobs)
    return EXIT_OK


@guarded
def cmd_train_bof(args):
    config = load_config(args, {
        'bof_vocab_size': args.vocab_size, 'bof_epochs': args.epochs, 'bof_learning_rate': args.lr,
    })
    train, val, out = _prepare(args, config, 'train bof')

    model = train_bof_on_items(train, config.bof, config.jobs)
    save_bof(model, os.path.join(out, 'bof.model'))
    write_vocabulary_log(model.vocabulary.inertia_history, os.path.join(out, 'training_log.csv'))

    val_report = evaluate_items(model, val, config.jobs)
    print(f"validation accuracy: {val_report.metrics.ac:.3f}")
    _sanity_check(model, train, out, config.jobs)
    return EXIT_OK
