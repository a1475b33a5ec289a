import json
import os
from pathlib import Path

import pytest

from affectlab.cli import main
from affectlab.transfer import load_checkpoint

FIXTURES = Path(__file__).parent / "fixtures"
TINY_MODEL = ["--hidden-dim", "5", "--attention-dim", "4", "--encoder-layers", "1"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("cli")
    assert main(["synth-corpus", "--out", str(ws / "a"), "--per-class", "3", "--seed", "1",
                 "--duration", "0.15"]) == 0
    assert main(["synth-corpus", "--out", str(ws / "b"), "--per-class", "3", "--seed", "2",
                 "--domain", "B", "--duration", "0.15"]) == 0
    for name in ("a", "b"):
        assert main(["scan", "--corpus", "synthetic", "--root", str(ws / name), "--allow-partial",
                     "--label-mode", "four_class", "--out", str(ws / f"{name}.tsv")]) == 0
    return ws


def test_scan_fixture_counts(tmp_path, capsys):
    assert main(["scan", "--corpus", "emovo", "--root", str(FIXTURES / "corpora" / "emovo"),
                 "--out", str(tmp_path / "m.tsv")]) == 0
    assert len((tmp_path / "m.tsv").read_text().splitlines()) == 588
    assert "588 entries" in capsys.readouterr().out


def test_scan_count_mismatch_is_data_error(workspace, tmp_path):
    assert main(["scan", "--corpus", "urdu", "--root", str(workspace / "a"),
                 "--out", str(tmp_path / "m.tsv")]) == 3


def test_scan_missing_root(tmp_path):
    assert main(["scan", "--corpus", "savee", "--root", str(tmp_path / "none"),
                 "--out", str(tmp_path / "m.tsv")]) == 3


def test_extract(workspace, tmp_path):
    assert main(["extract", "--manifest", str(workspace / "a.tsv"), "--out",
                 str(tmp_path / "f")]) == 0
    assert len(list((tmp_path / "f").glob("*.afq"))) == 12


def test_train_transfer_finetune_evaluate(workspace, tmp_path, capsys):
    src = tmp_path / "src.afck"
    assert main(["train", "--manifest", str(workspace / "a.tsv"), "--out", str(src),
                 "--epochs", "2", "--log", str(tmp_path / "train.tsv")] + TINY_MODEL) == 0
    assert (tmp_path / "train.tsv").read_text().startswith("epoch\t")
    start = tmp_path / "start.afck"
    assert main(["transfer", "--source", str(src), "--out", str(start), "--seed", "4"]) == 0
    tuned = tmp_path / "tuned.afck"
    assert main(["finetune", "--start", str(start), "--manifest", str(workspace / "b.tsv"),
                 "--out", str(tuned), "--epochs", "2", "--freeze-groups", "encoder"]) == 0
    a, b = load_checkpoint(start), load_checkpoint(tuned)
    assert all(a.tensors[n].tobytes() == b.tensors[n].tobytes()
               for n in a.tensors if n.startswith("encoder."))
    capsys.readouterr()
    assert main(["evaluate", "--checkpoint", str(tuned), "--manifest", str(workspace / "b.tsv"),
                 "--out", str(tmp_path / "rep")]) == 0
    assert "uar:" in capsys.readouterr().out
    assert json.loads((tmp_path / "rep.json").read_text())["n"] == 12


def test_transfer_decoder_class_mismatch(workspace, tmp_path):
    src = tmp_path / "src.afck"
    main(["train", "--manifest", str(workspace / "a.tsv"), "--out", str(src), "--epochs", "0"]
         + TINY_MODEL)
    assert main(["transfer", "--source", str(src), "--out", str(tmp_path / "t.afck"),
                 "--copy-groups", "encoder,decoder", "--num-classes", "2"]) == 2


def test_corrupt_checkpoint_is_data_error(workspace, tmp_path):
    bad = tmp_path / "bad.afck"
    bad.write_bytes(b"AFCK" + b"\0" * 40)
    assert main(["evaluate", "--checkpoint", str(bad), "--manifest",
                 str(workspace / "b.tsv")]) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_diverging_training_is_numeric_failure(workspace, tmp_path):
    assert main(["train", "--manifest", str(workspace / "a.tsv"), "--out",
                 str(tmp_path / "x.afck"), "--epochs", "5", "--lr", "1e30"] + TINY_MODEL) == 4


def test_experiment_flags(workspace, tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nregime = baseline_same_corpus\ncorpus = a\nseed = 9\n"
                   "[corpus.a]\nid = synthetic\nroot = a\ncheck_count = false\n"
                   "[model]\nhidden_dim = 4\nattention_dim = 3\nencoder_layers = 1\n"
                   "[train]\nepochs = 1\n")
    out = tmp_path / "out"
    assert main(["experiment", str(cfg), "--seed", "2", "--data-root", str(workspace),
                 "--out", str(out)]) == 0
    assert "baseline_a_s2_f0" in capsys.readouterr().out
    resolved = (out / "config.resolved.ini").read_text()
    assert "seed = 2" in resolved and str(workspace) in resolved


def test_experiment_bad_config(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nregime = cross_corpus\ntrain = a\ntest = a\n"
                   "[corpus.a]\nid = synthetic\nroot = a\n")
    assert main(["experiment", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["experiment", str(tmp_path / "absent.ini")]) == 2
