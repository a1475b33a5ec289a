import json
import os

import numpy as np
import pytest

from affectlab.corpus import CLASSES, CorpusEntry, CorpusManifest
from affectlab.errors import ClassSetMismatch, ConfigInvalid, DataError, EmptyDataset
from affectlab.features import FeatureExtractor
from affectlab.harness import (ExperimentConfig, OutputLocked, evaluate, run_experiment,
                               stratified_subsample)
from affectlab.model import Hyperparams, zero_params
from affectlab.synthetic import generate_corpus
from affectlab.transfer import Checkpoint

SMALL = """
[experiment]
regime = {regime}
{roles}
seed = 3
data_root = {root}

[corpus.a]
id = synthetic
root = a
check_count = false

[corpus.b]
id = synthetic
root = b
check_count = false

[model]
hidden_dim = 6
attention_dim = 5
encoder_layers = 1

[train]
epochs = 3
batch_size = 4

[transfer]
target_train_count = 8
"""

ROLES = {"baseline_same_corpus": "corpus = a",
         "cross_corpus": "train = a\ntest = b",
         "transfer": "source = a\ntarget = b"}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    generate_corpus(str(root / "a"), 5, seed=1, domain="A", duration_s=0.15)
    generate_corpus(str(root / "b"), 5, seed=2, domain="B", duration_s=0.15)
    return root


def config(regime, root, roles=None, **extra):
    text = SMALL.format(regime=regime, roles=roles or ROLES[regime], root=root)
    return ExperimentConfig.from_text(text, overrides=extra)


class TestConfig:
    def test_defaults_filled(self, data):
        cfg = config("baseline_same_corpus", data)
        assert cfg.split == "ratio_80_20" and cfg.normalize == "per_corpus_z"
        assert cfg.policy_groups[0] == {"encoder", "attention"}
        assert "hidden_dim = 6" in cfg.resolved_text()

    def test_cross_corpus_same_train_and_test(self, data):
        with pytest.raises(ConfigInvalid, match="experiment.test"):
            config("cross_corpus", data, roles="train = a\ntest = a, b")

    @pytest.mark.parametrize("override,field", [
        ({"experiment.regime": "meta"}, "experiment.regime"),
        ({"train.epochs": "-1"}, "train.epochs"),
        ({"train.lr": "fast"}, "train.lr"),
        ({"features.window": "kaiser"}, "features"),
        ({"transfer.copy_groups": "encoder, embedding"}, "transfer.copy_groups"),
        ({"experiment.split": "ratio_50_50"}, "experiment.split"),
        ({"experiment.corpus": "missing"}, "experiment.corpus"),
    ])
    def test_invalid_fields(self, data, override, field):
        with pytest.raises(ConfigInvalid) as info:
            config("baseline_same_corpus", data, **override)
        assert info.value.field == field and info.value.exit_code == 2

    def test_missing_section(self):
        with pytest.raises(ConfigInvalid):
            ExperimentConfig.from_text("[train]\nepochs = 1\n")

    def test_hash_tracks_content(self, data):
        a = config("baseline_same_corpus", data)
        assert a.hash() == config("baseline_same_corpus", data).hash()
        assert a.hash() != config("baseline_same_corpus", data, **{"train.epochs": "4"}).hash()


class TestRegimes:
    def test_baseline(self, data, tmp_path):
        out = run_experiment(config("baseline_same_corpus", data), str(tmp_path / "o"))
        rep = json.loads((tmp_path / "o" / "reports" / "baseline_a_s3_f0.json").read_text())
        assert 0 <= rep["accuracy"] <= 1 and 0 <= rep["uar"] <= 1 and rep["n"] == 4
        for name in ("config.resolved.ini", "results.txt", "summary.json",
                     "checkpoints/baseline_a_s3_f0.afck", "logs/baseline_a_s3_f0.tsv"):
            assert os.path.exists(os.path.join(out, name)), name
        assert not os.path.exists(os.path.join(out, ".lock"))

    def test_kfold_baseline(self, data, tmp_path):
        run_experiment(config("baseline_same_corpus", data, **{"experiment.split": "kfold_3"}),
                       str(tmp_path / "o"))
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["runs"] == 3

    def test_cross_corpus(self, data, tmp_path):
        run_experiment(config("cross_corpus", data), str(tmp_path / "o"))
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert set(summary["tests"]) == {"b"}

    def test_transfer(self, data, tmp_path):
        run_experiment(config("transfer", data), str(tmp_path / "o"))
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert {"mean_transfer_uar", "mean_scratch_uar", "uar_gain"} <= set(summary)
        rep = json.loads((tmp_path / "o" / "reports" / "transfer_a_to_b_s3_f0.json").read_text())
        assert rep["extras"]["train_size"] == 8
        assert "source_corpus" in rep["checkpoint_provenance"]

    def test_deterministic_reports(self, data, tmp_path):
        cfg = config("transfer", data, **{"experiment.seeds": "3, 4"})
        for name in ("x", "y"):
            run_experiment(cfg, str(tmp_path / name))
        for sub in ("reports", "checkpoints"):
            files = sorted(os.listdir(tmp_path / "x" / sub))
            for f in files:
                assert (tmp_path / "x" / sub / f).read_bytes() == \
                    (tmp_path / "y" / sub / f).read_bytes(), f
        assert (tmp_path / "x" / "results.txt").read_text() == \
            (tmp_path / "y" / "results.txt").read_text()

    def test_locked_output(self, data, tmp_path):
        os.makedirs(tmp_path / "o")
        (tmp_path / "o" / ".lock").write_text("")
        with pytest.raises(OutputLocked):
            run_experiment(config("baseline_same_corpus", data), str(tmp_path / "o"))

    def test_missing_corpus_has_stage(self, data, tmp_path):
        cfg = config("baseline_same_corpus", data, **{"corpus.a.root": "nowhere"})
        with pytest.raises(DataError, match=r"\[scan a\]"):
            run_experiment(cfg, str(tmp_path / "o"))


class TestEvaluate:
    @pytest.fixture
    def manifest(self, tmp_path):
        return generate_corpus(str(tmp_path / "c"), 3, seed=5, duration_s=0.15)

    def uniform_checkpoint(self, classes):
        hp = Hyperparams(input_dim=80, num_classes=len(classes), hidden_dim=4,
                         encoder_layers=1, attention_dim=3)
        return Checkpoint.from_params(zero_params(hp, np.float32),
                                      metadata={"classes": list(classes)})

    def test_uniform_model_chance(self, manifest):
        rep = evaluate(self.uniform_checkpoint(CLASSES["four_class"]), manifest,
                       FeatureExtractor())
        # every tie resolves to the first class
        assert rep.accuracy == pytest.approx(1 / 4)
        assert rep.confusion.counts[:, 0].sum() == len(manifest)

    def test_empty_manifest(self):
        empty = CorpusManifest.__new__(CorpusManifest)
        empty.corpus_id, empty.entries = "synthetic", []
        with pytest.raises(EmptyDataset):
            evaluate(self.uniform_checkpoint(("a", "b")), empty)

    def test_class_mismatch(self, manifest):
        with pytest.raises(ClassSetMismatch):
            evaluate(self.uniform_checkpoint(("negative", "positive")), manifest)


def test_stratified_subsample():
    entries = [CorpusEntry(f"/{c}/{i}.wav", c, c, "s") for c in "abc" for i in range(10)]
    m = CorpusManifest("synthetic", entries)
    sub = stratified_subsample(m, 8, seed=0)
    assert len(sub) == 8 and sorted(sub.label_counts().values()) == [2, 3, 3]
    assert stratified_subsample(m, 8, 0).entries == sub.entries
    assert len(stratified_subsample(m, 0, 0)) == 30
