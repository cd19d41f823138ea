import json
import os

import pytest

from app import main
from conftest import write_png, network_pixels, file_bytes, tree_bytes

TINY_CNN = 'input_size=16\nmax_epochs=2\nbatch_size=4\n'
TINY_BOF = 'bof_vocab_size=8\nbof_epochs=5\n'


def _cfg(tmp_path, text, name='pnkit.cfg'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _results(out):
    """Output lines minus the '# pnkit ...' header."""
    return [line for line in out.splitlines() if not line.startswith('#')]


# ---------------------------------------------------------------- extract

def test_extract_single_image(tmp_path, capsys):
    image = write_png(tmp_path / 'N0.png', network_pixels(0, (512, 512)))
    out = tmp_path / 'out'
    assert main(['extract', str(image), '--out', str(out)]) == 0

    assert (out / 'N0' / '09_colorized.png').is_file()
    assert len(os.listdir(out / 'N0')) == 1
    (line,) = _results(capsys.readouterr().out)
    image_id, detected, level = line.split()
    assert (image_id, detected) == ('N0', 'true')
    assert 0.0 <= float(level) <= 1.0


def test_extract_emits_all_stages(tmp_path):
    image = write_png(tmp_path / 'N1.png', network_pixels(1, (256, 256)))
    out = tmp_path / 'out'
    assert main(['extract', str(image), '--out', str(out), '--emit-stages']) == 0
    assert sorted(os.listdir(out / 'N1')) == [
        '01_resized.png', '02_pca_gray.png', '03_enhanced.png', '04_smoothed.png', '05_subtracted.png',
        '06_binary_raw.png', '07_binary_clean.png', '08_complemented.png', '09_colorized.png',
    ]


@pytest.mark.parametrize('offset', ['0.07', '-0.001'])
def test_extract_rejects_offset_out_of_range(tmp_path, offset):
    image = write_png(tmp_path / 'N0.png', network_pixels(0, (64, 64)))
    out = tmp_path / 'out'
    assert main(['extract', str(image), '--out', str(out), f'--threshold-offset={offset}']) == 2
    assert not out.exists()


def test_extract_directory_is_independent_of_jobs(tmp_path, capsys):
    src = tmp_path / 'src'
    src.mkdir()
    for k in range(3):
        write_png(src / f"N{k}.png", network_pixels(k, (256, 256)))
    (src / 'notes.txt').write_text('not an image')

    assert main(['extract', str(src), '--out', str(tmp_path / 'a'), '--jobs', '1']) == 0
    first = _results(capsys.readouterr().out)
    assert main(['extract', str(src), '--out', str(tmp_path / 'b'), '--jobs', '3']) == 0
    second = _results(capsys.readouterr().out)

    assert [line.split()[0] for line in first] == ['N0', 'N1', 'N2']
    assert first == second
    assert tree_bytes(tmp_path / 'a') == tree_bytes(tmp_path / 'b')


def test_extract_missing_input(tmp_path):
    assert main(['extract', str(tmp_path / 'nope.png'), '--out', str(tmp_path / 'out')]) == 1


def test_extract_corrupt_image_reports_error(tmp_path, capsys):
    src = tmp_path / 'src'
    src.mkdir()
    write_png(src / 'good.png', network_pixels(0, (128, 128)))
    (src / 'bad.png').write_bytes(b'garbage')
    assert main(['extract', str(src), '--out', str(tmp_path / 'out')]) == 1
    lines = _results(capsys.readouterr().out)
    assert 'bad error -' in lines
    assert (tmp_path / 'out' / 'good' / '09_colorized.png').is_file()


@pytest.mark.parametrize('argv', [
    ['--help'],
    ['extract', '--help'],
    ['dataset', '--help'],
    ['dataset', 'build', '--help'],
    ['train', '--help'],
    ['train', 'cnn', '--help'],
    ['train', 'bof', '--help'],
    ['eval', '--help'],
])
def test_help_exits_cleanly(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0
    assert 'usage' in capsys.readouterr().out


def test_unknown_config_key(tmp_path):
    image = write_png(tmp_path / 'N0.png', network_pixels(0, (64, 64)))
    cfg = _cfg(tmp_path, 'no_such_setting=1\n')
    assert main(['extract', str(image), '--out', str(tmp_path / 'out'), '--config', cfg]) == 2


# ---------------------------------------------------------------- dataset

def test_dataset_build(tmp_path, corpus, capsys):
    root, labels = corpus(3)
    out = tmp_path / 'pn'
    cfg = _cfg(tmp_path, 'resize=128,128\n')
    assert main(['dataset', 'build', '--root', root, '--labels', labels, '--out', str(out), '--config', cfg]) == 0

    assert (out / 'manifest.csv').is_file()
    assert sorted(p for p in os.listdir(out) if p.endswith('_pn.png')) == \
        sorted(f"{i}_pn.png" for i in ('T000', 'T001', 'T002', 'A000', 'A001', 'A002'))
    detection = json.loads((out / 'detection.json').read_text())
    assert detection['typical']['total'] == 3 and detection['atypical']['total'] == 3
    printed = capsys.readouterr().out
    assert 'overall:' in printed


def test_dataset_build_missing_labels(tmp_path):
    assert main(['dataset', 'build', '--root', str(tmp_path), '--labels', str(tmp_path / 'x.csv'),
                 '--out', str(tmp_path / 'pn')]) == 3


# ---------------------------------------------------------------- train and eval

def _train_cnn(tmp_path, root, labels, name, seed='7'):
    out = tmp_path / name
    cfg = _cfg(tmp_path, TINY_CNN, 'cnn.cfg')
    code = main(['train', 'cnn', '--data', root, '--labels', labels, '--out', str(out),
                 '--config', cfg, '--seed', seed])
    assert code == 0
    return out


def test_train_cnn_is_reproducible(tmp_path, corpus):
    root, labels = corpus(4)
    a = _train_cnn(tmp_path, root, labels, 'a')
    b = _train_cnn(tmp_path, root, labels, 'b')

    for name in ('cnn.model', 'training_log.csv', 'train_labels.csv', 'val_labels.csv', 'train_report.json'):
        assert (a / name).is_file(), name
    assert file_bytes(a / 'cnn.model') == file_bytes(b / 'cnn.model')
    assert file_bytes(a / 'val_labels.csv') == file_bytes(b / 'val_labels.csv')
    assert (a / 'training_log.csv').read_text().splitlines()[0] == 'iteration,epoch,train_loss,val_accuracy'


def test_train_bof_then_eval(tmp_path, corpus, capsys):
    root, labels = corpus(5)
    model_dir = tmp_path / 'bof'
    cfg = _cfg(tmp_path, TINY_BOF)
    assert main(['train', 'bof', '--data', root, '--labels', labels, '--out', str(model_dir), '--config', cfg]) == 0
    assert (model_dir / 'bof.model').is_file()
    assert (model_dir / 'training_log.csv').read_text().startswith('iteration,sse\n')
    assert 'validation accuracy' in capsys.readouterr().out

    report_dir = tmp_path / 'report'
    assert main(['eval', '--model', str(model_dir / 'bof.model'), '--data', root,
                 '--labels', str(model_dir / 'val_labels.csv'), '--out', str(report_dir)]) == 0
    report = json.loads((report_dir / 'report.json').read_text())
    assert set(report) == {'tp', 'fn', 'fp', 'tn', 'se', 'sp', 'pr', 'ac', 'auc'}
    assert report['tp'] + report['fn'] + report['fp'] + report['tn'] == 2
    assert (report_dir / 'roc.csv').read_text().startswith('fpr,tpr\n')


def test_eval_compares_two_models(tmp_path, corpus):
    root, labels = corpus(4)
    cnn_dir = _train_cnn(tmp_path, root, labels, 'cnn')
    bof_dir = tmp_path / 'bof'
    cfg = _cfg(tmp_path, TINY_BOF, 'bof.cfg')
    assert main(['train', 'bof', '--data', root, '--labels', labels, '--out', str(bof_dir), '--config', cfg]) == 0

    out = tmp_path / 'cmp'
    assert main(['eval', '--model', str(cnn_dir / 'cnn.model'), '--data', root, '--labels', labels,
                 '--compare-model', str(bof_dir / 'bof.model'), '--compare-data', root,
                 '--compare-labels', labels, '--out', str(out)]) == 0
    for name in ('report.json', 'roc.csv', 'compare_report.json', 'compare_roc.csv', 'comparison.json'):
        assert (out / name).is_file(), name
    comparison = json.loads((out / 'comparison.json').read_text())
    assert set(comparison) == {'first', 'second', 'auc_higher', 'accuracy_higher'}


def test_eval_argument_errors(tmp_path, corpus):
    root, labels = corpus(2)
    assert main(['eval', '--model', str(tmp_path / 'missing.model'), '--data', root, '--labels', labels,
                 '--out', str(tmp_path / 'r')]) == 1
    assert main(['eval', '--model', str(tmp_path / 'missing.model'), '--data', root, '--labels', labels,
                 '--compare-model', 'x.model', '--out', str(tmp_path / 'r')]) == 2
