"""Experiment runner for the same-corpus, cross-corpus and transfer regimes.

An experiment is described by one INI file.  Recognized keys (defaults in
brackets)::

    [experiment]
    regime        baseline_same_corpus | cross_corpus | transfer
    seed          [0]
    seeds         comma list; runs are repeated per seed and averaged [seed]
    label_mode    four_class | binary_valence [four_class]
    split         ratio_80_20 | kfold_3 | session_holdout [ratio_80_20]
    source_split  split used to pretrain the transfer source, or ``all`` to
                  pretrain on the whole source corpus [ratio_80_20]
    speaker_aware [false]
    data_root     base directory for relative corpus roots [$AFFECTLAB_DATA or config dir]
    corpus        baseline: the corpus
    train, test   cross_corpus: training corpus, comma list of test corpora
    source, target, also_test   transfer: source, target, extra evaluation corpora

    [corpus.<name>]   id, root, check_count [true]
    [features]        frame_length [400], hop [160], window [hann], fft_size [512],
                      with_deltas [true], normalize [per_corpus_z], sample_rate [16000],
                      cache [true]
    [model]           hidden_dim [128], encoder_layers [2], attention_dim [128]
    [train]           epochs [100], batch_size [16], lr [0.001], optimizer [adam],
                      precision [f32], clip_norm [5.0]
    [transfer]        copy_groups [encoder, attention], freeze_groups [],
                      pretrain_epochs [train.epochs], finetune_epochs [train.epochs],
                      target_train_count [0 = whole training partition],
                      compare_scratch [true]

Output directory::

    config.resolved.ini   every key after defaults and overrides
    checkpoints/          one AFCK file (+ provenance sidecar) per trained model
    logs/                 per-run training logs (tab separated)
    reports/              <run>.json and <run>.txt per evaluation
    summary.json, results.txt
"""

import configparser
import contextlib
import hashlib
import io
import json
import logging
import os

import numpy as np

from . import corpus as corpus_mod
from .corpus import CLASSES, LabelMap, make_splits, map_labels, scan_corpus
from .errors import AffectLabError, ClassSetMismatch, ConfigInvalid, DataError, EmptyDataset
from .features import FeatureExtractor, FeatureStats, FrameSpec
from .metrics import ConfusionMatrix, EvalReport
from .model import Hyperparams, TrainConfig, init_params, predict, train
from .rng import Xoshiro256
from .transfer import (Checkpoint, TransferPolicy, finetune, format_provenance,
                       save_checkpoint, transfer_parameters)

log = logging.getLogger(__name__)

REGIMES = ("baseline_same_corpus", "cross_corpus", "transfer")

DEFAULTS = {
    "experiment": {"seed": "0", "label_mode": "four_class", "split": "ratio_80_20",
                   "source_split": "ratio_80_20", "speaker_aware": "false"},
    "features": {"frame_length": "400", "hop": "160", "window": "hann", "fft_size": "512",
                 "with_deltas": "true", "normalize": "per_corpus_z", "sample_rate": "16000",
                 "cache": "true"},
    "model": {"hidden_dim": "128", "encoder_layers": "2", "attention_dim": "128"},
    "train": {"epochs": "100", "batch_size": "16", "lr": "0.001", "optimizer": "adam",
              "precision": "f32", "clip_norm": "5.0"},
    "transfer": {"copy_groups": "encoder, attention", "freeze_groups": "",
                 "target_train_count": "0", "compare_scratch": "true"},
}


class OutputLocked(AffectLabError):
    exit_code = 2


def _split_list(value):
    return [v.strip() for v in (value or "").split(",") if v.strip()]


def _bool(section, key, value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"{section}.{key}", f"expected a boolean, got {value!r}")


def _int(section, key, value, minimum=None):
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{section}.{key}", f"expected an integer, got {value!r}") from None
    if minimum is not None and n < minimum:
        raise ConfigInvalid(f"{section}.{key}", f"must be >= {minimum}")
    return n


def _float(section, key, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{section}.{key}", f"expected a number, got {value!r}") from None


# -- configuration -------------------------------------------------------------------

class ExperimentConfig:
    """Parsed and validated experiment configuration."""

    def __init__(self, parser, base_dir="."):
        self.parser = parser
        self.base_dir = base_dir
        for section, values in DEFAULTS.items():
            if not parser.has_section(section):
                parser.add_section(section)
            for k, v in values.items():
                if not parser.has_option(section, k):
                    parser.set(section, k, v)
        self._validate()

    @classmethod
    def from_text(cls, text, base_dir=".", overrides=None):
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigInvalid("<file>", str(exc).splitlines()[0]) from None
        if not parser.has_section("experiment"):
            raise ConfigInvalid("experiment", "missing [experiment] section")
        for key, value in (overrides or {}).items():
            section, opt = key.rsplit(".", 1)
            if value is not None:
                if not parser.has_section(section):
                    parser.add_section(section)
                parser.set(section, opt, str(value))
        return cls(parser, base_dir)

    @classmethod
    def from_file(cls, path, overrides=None):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid("<file>", f"cannot read {path}: {exc.strerror}") from None
        return cls.from_text(text, os.path.dirname(os.path.abspath(path)), overrides)

    def get(self, section, key, fallback=None):
        return self.parser.get(section, key, fallback=fallback)

    def _validate(self):
        ex = "experiment"
        self.regime = self.get(ex, "regime")
        if self.regime not in REGIMES:
            raise ConfigInvalid("experiment.regime", f"must be one of {', '.join(REGIMES)}")
        self.seed = _int(ex, "seed", self.get(ex, "seed"))
        seeds = _split_list(self.get(ex, "seeds", ""))
        self.seeds = [_int(ex, "seeds", s) for s in seeds] or [self.seed]
        self.label_mode = self.get(ex, "label_mode")
        if self.label_mode not in corpus_mod.LABEL_MODES:
            raise ConfigInvalid("experiment.label_mode", f"unknown mode {self.label_mode!r}")
        for key, extra in (("split", ()), ("source_split", ("all",))):
            if self.get(ex, key) not in corpus_mod.SPLIT_SCHEMES + extra:
                raise ConfigInvalid(f"experiment.{key}", f"unknown scheme {self.get(ex, key)!r}")
        self.split = self.get(ex, "split")
        self.source_split = self.get(ex, "source_split")
        self.speaker_aware = _bool(ex, "speaker_aware", self.get(ex, "speaker_aware"))

        self.corpora = {}
        for section in self.parser.sections():
            if section.startswith("corpus."):
                name = section.split(".", 1)[1]
                cid = self.get(section, "id")
                if cid not in corpus_mod.CORPUS_IDS:
                    raise ConfigInvalid(f"{section}.id", f"unknown corpus id {cid!r}")
                if not self.get(section, "root"):
                    raise ConfigInvalid(f"{section}.root", "missing")
                self.corpora[name] = section

        def corpus_ref(key, required=True):
            value = self.get(ex, key)
            if not value:
                if required:
                    raise ConfigInvalid(f"experiment.{key}", f"required for regime {self.regime}")
                return None
            if value not in self.corpora:
                raise ConfigInvalid(f"experiment.{key}", f"no [corpus.{value}] section")
            return value

        def corpus_list(key, required=True):
            names = _split_list(self.get(ex, key, ""))
            if required and not names:
                raise ConfigInvalid(f"experiment.{key}", f"required for regime {self.regime}")
            for n in names:
                if n not in self.corpora:
                    raise ConfigInvalid(f"experiment.{key}", f"no [corpus.{n}] section")
            return names

        if self.regime == "baseline_same_corpus":
            self.roles = {"corpus": corpus_ref("corpus")}
        elif self.regime == "cross_corpus":
            self.roles = {"train": corpus_ref("train"), "test": corpus_list("test")}
            if self.roles["train"] in self.roles["test"]:
                raise ConfigInvalid("experiment.test",
                                    "cross_corpus evaluation must not test on the training corpus")
        else:
            self.roles = {"source": corpus_ref("source"), "target": corpus_ref("target"),
                          "also_test": corpus_list("also_test", required=False)}
            if self.roles["source"] == self.roles["target"]:
                raise ConfigInvalid("experiment.target", "target must differ from source")

        fs = "features"
        try:
            self.frame_spec = FrameSpec(_int(fs, "frame_length", self.get(fs, "frame_length"), 1),
                                        _int(fs, "hop", self.get(fs, "hop"), 1),
                                        self.get(fs, "window"),
                                        _int(fs, "fft_size", self.get(fs, "fft_size"), 1))
        except ValueError as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid("features", str(exc)) from None
        self.with_deltas = _bool(fs, "with_deltas", self.get(fs, "with_deltas"))
        self.normalize = self.get(fs, "normalize")
        if self.normalize not in ("none", "per_corpus_z"):
            raise ConfigInvalid("features.normalize", "must be none or per_corpus_z")
        self.sample_rate = _int(fs, "sample_rate", self.get(fs, "sample_rate"), 1)
        self.use_cache = _bool(fs, "cache", self.get(fs, "cache"))

        md = "model"
        self.model_dims = {k: _int(md, k, self.get(md, k), 1)
                           for k in ("hidden_dim", "encoder_layers", "attention_dim")}

        tr = "train"
        self.train_epochs = _int(tr, "epochs", self.get(tr, "epochs"), 0)
        try:
            self.train_config_base = dict(
                batch_size=_int(tr, "batch_size", self.get(tr, "batch_size"), 1),
                lr=_float(tr, "lr", self.get(tr, "lr")),
                optimizer=self.get(tr, "optimizer"),
                precision=self.get(tr, "precision"),
                clip_norm=_float(tr, "clip_norm", self.get(tr, "clip_norm")))
            self.make_train_config(self.train_epochs, 0)
        except ValueError as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid("train", str(exc)) from None

        tf = "transfer"
        try:
            self.policy_groups = (frozenset(_split_list(self.get(tf, "copy_groups"))),
                                  frozenset(_split_list(self.get(tf, "freeze_groups"))))
            TransferPolicy(*self.policy_groups)
        except ValueError as exc:
            raise ConfigInvalid("transfer.copy_groups", str(exc)) from None
        self.pretrain_epochs = _int(tf, "pretrain_epochs",
                                    self.get(tf, "pretrain_epochs", str(self.train_epochs)), 0)
        self.finetune_epochs = _int(tf, "finetune_epochs",
                                    self.get(tf, "finetune_epochs", str(self.train_epochs)), 0)
        self.target_train_count = _int(tf, "target_train_count",
                                       self.get(tf, "target_train_count"), 0)
        self.compare_scratch = _bool(tf, "compare_scratch", self.get(tf, "compare_scratch"))

    def make_train_config(self, epochs, seed, freeze=frozenset()):
        return TrainConfig(epochs=epochs, seed=seed, freeze_groups=freeze, **self.train_config_base)

    def data_root(self):
        root = self.get("experiment", "data_root") or os.environ.get(corpus_mod.DATA_ENV)
        return root or self.base_dir

    def corpus_root(self, name):
        root = self.get(self.corpora[name], "root")
        return root if os.path.isabs(root) else os.path.join(self.data_root(), root)

    def resolved_text(self):
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()

    def hash(self):
        return hashlib.sha256(self.resolved_text().encode("utf-8")).hexdigest()[:16]


# -- pipeline pieces ----------------------------------------------------------------

@contextlib.contextmanager
def stage(name):
    """Prefix module errors raised inside the block with the experiment stage."""
    try:
        yield
    except AffectLabError as exc:
        if not getattr(exc, "stage", None):
            exc.stage = name
            exc.args = (f"[{name}] {exc}",) + tuple(exc.args[1:])
        raise


def featurize(manifest, extractor, classes):
    """``(FeatureSequence, class_index)`` for every entry, in manifest order."""
    index = {c: i for i, c in enumerate(classes)}
    missing = sorted({e.canonical_label for e in manifest} - set(index))
    if missing:
        raise ClassSetMismatch(f"labels {missing} are not among the model classes {list(classes)}")
    return [(extractor(e.audio_path, clip_id=os.path.basename(e.audio_path)),
             index[e.canonical_label]) for e in manifest]


def normalize(dataset, stats):
    if stats is None:
        return dataset
    return [(stats.apply(f), y) for f, y in dataset]


def evaluate_dataset(params, classes, dataset, name="", config_hash="", provenance=""):
    if not dataset:
        raise EmptyDataset("nothing to evaluate")
    preds = predict([f for f, _ in dataset], params)
    truth = np.array([y for _, y in dataset], dtype=np.int64)
    cm = ConfusionMatrix.from_pairs(classes, truth, preds)
    return EvalReport.from_confusion(cm, config_hash=config_hash,
                                     checkpoint_provenance=provenance, name=name)


def evaluate(checkpoint, test_manifest, extractor=None):
    """Evaluate a checkpoint on a labeled manifest.

    The checkpoint's metadata supplies the class list and, when present, the
    normalization statistics of its training data.
    """
    if len(test_manifest) == 0:
        raise EmptyDataset("test manifest is empty")
    classes = checkpoint.classes
    if not classes:
        raise ClassSetMismatch("checkpoint does not record its class list")
    if len(classes) != checkpoint.hyperparams.num_classes:
        raise ClassSetMismatch("checkpoint class list does not match num_classes")
    extractor = extractor or FeatureExtractor()
    dataset = featurize(test_manifest, extractor, classes)
    stats = checkpoint.metadata.get("feature_stats")
    dataset = normalize(dataset, FeatureStats.from_dict(stats) if stats else None)
    return evaluate_dataset(checkpoint.to_params(), classes, dataset,
                            name=test_manifest.corpus_id,
                            provenance=format_provenance(checkpoint.provenance))


def stratified_subsample(manifest, count, seed):
    """``count`` entries spread as evenly as possible over the classes."""
    if count <= 0 or count >= len(manifest):
        return manifest
    rng = Xoshiro256(seed)
    by_class = {}
    for e in manifest.entries:
        by_class.setdefault(e.canonical_label, []).append(e.audio_path)
    pools = {c: rng.shuffle(sorted(p)) for c, p in sorted(by_class.items())}
    chosen, i = [], 0
    while len(chosen) < count:
        for c in pools:
            if i < len(pools[c]) and len(chosen) < count:
                chosen.append(pools[c][i])
        i += 1
    return manifest.subset(chosen)


class Experiment:
    def __init__(self, config, out_dir):
        self.cfg = config
        self.out = out_dir
        self.classes = CLASSES[config.label_mode]
        self.reports = []
        self.summary = {}
        cache = os.path.join(out_dir, "cache") if config.use_cache else None
        self.extractor = FeatureExtractor(config.frame_spec, config.with_deltas,
                                          config.sample_rate, cache)
        self._manifests = {}
        self._features = {}

    # helpers
    def manifest(self, name):
        if name not in self._manifests:
            section = self.cfg.corpora[name]
            check = _bool(section, "check_count", self.cfg.get(section, "check_count", "true"))
            with stage(f"scan {name}"):
                m = scan_corpus(self.cfg.corpus_root(name), self.cfg.get(section, "id"), check)
                self._manifests[name] = map_labels(m, LabelMap(self.cfg.label_mode))
        return self._manifests[name]

    def _extract(self, path, clip_id=None):
        if path not in self._features:
            self._features[path] = self.extractor(path, clip_id=clip_id)
        return self._features[path]

    def data(self, manifest, name):
        with stage(f"extract {name}"):
            return featurize(manifest, self._extract, self.classes)

    def hyperparams(self, dataset):
        return Hyperparams(input_dim=dataset[0][0].dim, num_classes=len(self.classes),
                           **self.cfg.model_dims)

    def fit_stats(self, dataset):
        if self.cfg.normalize == "none":
            return None
        return FeatureStats.fit([f for f, _ in dataset])

    def metadata(self, stats):
        meta = {"classes": list(self.classes), "label_mode": self.cfg.label_mode,
                "feature_hash": self.extractor.hash}
        if stats is not None:
            meta["feature_stats"] = stats.to_dict()
        return meta

    def save(self, run, ckpt, train_log=None):
        save_checkpoint(ckpt, os.path.join(self.out, "checkpoints", f"{run}.afck"))
        if train_log is not None:
            train_log.write(os.path.join(self.out, "logs", f"{run}.tsv"))

    def report(self, run, ckpt, dataset, stats, **extras):
        with stage(f"evaluate {run}"):
            rep = evaluate_dataset(ckpt.to_params(), self.classes, normalize(dataset, stats),
                                   name=run, config_hash=self.cfg.hash(),
                                   provenance=format_provenance(ckpt.provenance))
        rep.extras.update(extras)
        rep.write(os.path.join(self.out, "reports", run))
        self.reports.append(rep)
        return rep

    def fit(self, run, dataset, epochs, seed, corpus_name, initial=None, freeze=frozenset()):
        stats = self.fit_stats(dataset)
        data = normalize(dataset, stats)
        hp = self.hyperparams(dataset)
        config = self.cfg.make_train_config(epochs, seed, freeze)
        prov = {"source_corpus": corpus_name, "epochs": epochs, "seed": seed,
                "config_hash": self.cfg.hash(), "run": run}
        with stage(f"train {run}"):
            if initial is None:
                params, tlog = train(data, hp, config)
                params.provenance = prov
                ckpt = Checkpoint.from_params(params, metadata=self.metadata(stats))
            else:
                ckpt, tlog = finetune(initial, data, config, provenance=prov,
                                      metadata=self.metadata(stats))
        self.save(run, ckpt, tlog)
        return ckpt, stats

    # regimes
    def run(self):
        getattr(self, f"_run_{self.cfg.regime}")()

    def _run_baseline_same_corpus(self):
        name = self.cfg.roles["corpus"]
        manifest = self.manifest(name)
        uars, accs = [], []
        for seed in self.cfg.seeds:
            plan = make_splits(manifest, self.cfg.split, seed, self.cfg.speaker_aware)
            for k, (train_m, test_m) in enumerate(plan.folds(manifest)):
                run = f"baseline_{name}_s{seed}_f{k}"
                ckpt, stats = self.fit(run, self.data(train_m, name), self.cfg.train_epochs,
                                       seed, name)
                rep = self.report(run, ckpt, self.data(test_m, name), stats, seed=seed, fold=k)
                uars.append(rep.uar)
                accs.append(rep.accuracy)
        self.summary = {"regime": "baseline_same_corpus", "corpus": name,
                        "mean_accuracy": _r(np.mean(accs)), "mean_uar": _r(np.mean(uars)),
                        "runs": len(uars)}

    def _run_cross_corpus(self):
        train_name = self.cfg.roles["train"]
        train_data = self.data(self.manifest(train_name), train_name)
        results = {}
        for seed in self.cfg.seeds:
            run = f"cross_{train_name}_s{seed}"
            ckpt, stats = self.fit(run, train_data, self.cfg.train_epochs, seed, train_name)
            for test_name in self.cfg.roles["test"]:
                rep = self.report(f"{run}_on_{test_name}", ckpt,
                                  self.data(self.manifest(test_name), test_name), stats,
                                  seed=seed, train=train_name, test=test_name)
                results.setdefault(test_name, []).append((rep.accuracy, rep.uar))
        self.summary = {"regime": "cross_corpus", "train": train_name,
                        "tests": {t: {"mean_accuracy": _r(np.mean([a for a, _ in v])),
                                      "mean_uar": _r(np.mean([u for _, u in v]))}
                                  for t, v in results.items()}}

    def _run_transfer(self):
        cfg = self.cfg
        src_name, tgt_name = cfg.roles["source"], cfg.roles["target"]
        src_manifest = self.manifest(src_name)
        if cfg.source_split == "all":
            src_train, src_test = src_manifest, None
        else:
            src_plan = make_splits(src_manifest, cfg.source_split, cfg.seed, cfg.speaker_aware)
            src_train, src_test = src_plan.folds(src_manifest)[0]
        run = f"source_{src_name}"
        src_ckpt, src_stats = self.fit(run, self.data(src_train, src_name), cfg.pretrain_epochs,
                                       cfg.seed, src_name)
        if src_test is not None:
            self.report(run, src_ckpt, self.data(src_test, src_name), src_stats, role="source")

        tgt_manifest = self.manifest(tgt_name)
        copy_groups, freeze_groups = cfg.policy_groups
        scores = {"transfer": [], "scratch": []}
        extra = {}
        for seed in cfg.seeds:
            plan = make_splits(tgt_manifest, cfg.split, seed, cfg.speaker_aware)
            for k, (train_m, test_m) in enumerate(plan.folds(tgt_manifest)):
                train_m = stratified_subsample(train_m, cfg.target_train_count, seed)
                train_data = self.data(train_m, tgt_name)
                test_data = self.data(test_m, tgt_name)
                hp = self.hyperparams(train_data)
                policy = TransferPolicy(copy_groups, freeze_groups, fresh_init_seed=seed)
                with stage("transfer"):
                    start = transfer_parameters(src_ckpt, hp, policy)
                run = f"transfer_{src_name}_to_{tgt_name}_s{seed}_f{k}"
                ckpt, stats = self.fit(run, train_data, cfg.finetune_epochs, seed, tgt_name,
                                       initial=start, freeze=freeze_groups)
                rep = self.report(run, ckpt, test_data, stats, seed=seed, fold=k,
                                  role="transfer", train_size=len(train_data))
                scores["transfer"].append(rep.uar)
                for other in cfg.roles["also_test"]:
                    orep = self.report(f"{run}_on_{other}", ckpt,
                                       self.data(self.manifest(other), other), stats,
                                       seed=seed, fold=k, role="transfer_extra")
                    extra.setdefault(other, []).append(orep.uar)
                if cfg.compare_scratch:
                    run = f"scratch_{tgt_name}_s{seed}_f{k}"
                    ckpt, stats = self.fit(run, train_data, cfg.finetune_epochs, seed, tgt_name)
                    rep = self.report(run, ckpt, test_data, stats, seed=seed, fold=k,
                                      role="scratch", train_size=len(train_data))
                    scores["scratch"].append(rep.uar)
        self.summary = {"regime": "transfer", "source": src_name, "target": tgt_name,
                        "copy_groups": sorted(copy_groups), "freeze_groups": sorted(freeze_groups),
                        "mean_transfer_uar": _r(np.mean(scores["transfer"])),
                        "runs": len(scores["transfer"])}
        if scores["scratch"]:
            self.summary["mean_scratch_uar"] = _r(np.mean(scores["scratch"]))
            self.summary["uar_gain"] = _r(np.mean(scores["transfer"]) - np.mean(scores["scratch"]))
        if extra:
            self.summary["also_test_mean_uar"] = {k: _r(np.mean(v)) for k, v in extra.items()}

    def write_results(self):
        lines = ["run\tn\taccuracy\tuar"]
        for rep in self.reports:
            d = rep.to_dict()
            lines.append(f"{rep.name}\t{d['n']}\t{d['accuracy']:.6f}\t{d['uar']:.6f}")
        lines += ["", "summary"]
        lines += [f"{k}\t{v}" for k, v in sorted(_flatten(self.summary).items())]
        with open(os.path.join(self.out, "results.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(os.path.join(self.out, "summary.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def _r(x):
    return round(float(x), 6)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


@contextlib.contextmanager
def output_lock(out_dir):
    path = os.path.join(out_dir, ".lock")
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLocked(f"{out_dir} is in use by another experiment ({path} exists)") from None
    os.close(fd)
    try:
        yield
    finally:
        os.remove(path)


def run_experiment(config, out_dir, overrides=None):
    """Run the experiment described by ``config`` (a path or ExperimentConfig).

    Returns the output directory.  Everything written there is a pure
    function of the configuration except the wall-clock column of the
    training logs.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_file(config, overrides)
    for sub in ("checkpoints", "logs", "reports"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    with output_lock(out_dir):
        with open(os.path.join(out_dir, "config.resolved.ini"), "w", encoding="utf-8") as fh:
            fh.write(config.resolved_text())
        exp = Experiment(config, out_dir)
        exp.run()
        exp.write_results()
    return out_dir


__all__ = ["ExperimentConfig", "Experiment", "run_experiment", "evaluate", "evaluate_dataset",
           "featurize", "stratified_subsample", "REGIMES", "DataError"]
