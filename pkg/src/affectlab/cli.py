"""``affectlab`` command line.

Exit status: 0 success, 2 configuration error, 3 data error, 4 numeric
failure (non-finite loss).
"""

import argparse
import logging
import os
import sys

from . import corpus as corpus_mod
from .errors import AffectLabError, ConfigInvalid
from .features import FeatureExtractor, FeatureStats, FrameSpec, write_feature_cache
from .harness import ExperimentConfig, evaluate, featurize, normalize, run_experiment
from .model import Hyperparams, TrainConfig, train
from .transfer import (Checkpoint, TransferPolicy, finetune, load_checkpoint, save_checkpoint,
                       transfer_parameters)

log = logging.getLogger("affectlab")


def _groups(text):
    return frozenset(g.strip() for g in (text or "").split(",") if g.strip())


def _labeled_manifest(path, label_mode):
    manifest = corpus_mod.read_manifest(path)
    if any(e.canonical_label is None for e in manifest):
        manifest = corpus_mod.map_labels(manifest, corpus_mod.LabelMap(label_mode))
    return manifest


def _extractor(args):
    spec = FrameSpec(args.frame_length, args.hop, args.window, args.fft_size)
    return FeatureExtractor(spec, not args.no_deltas, args.sample_rate, args.cache_dir)


def cmd_synth_corpus(args):
    from .synthetic import generate_corpus

    m = generate_corpus(args.out, args.per_class, args.seed, args.domain, args.duration)
    print(f"wrote {len(m)} clips to {args.out}")


def cmd_scan(args):
    root = args.root or os.path.join(corpus_mod.data_root(args.data_root), args.corpus)
    manifest = corpus_mod.scan_corpus(root, args.corpus, check_count=not args.allow_partial)
    if args.label_mode:
        manifest = corpus_mod.map_labels(manifest, corpus_mod.LabelMap(args.label_mode))
    corpus_mod.write_manifest(args.out, manifest)
    print(f"{len(manifest)} entries -> {args.out}")
    if args.label_mode:
        for label, n in manifest.label_counts().items():
            print(f"  {label}\t{n}")


def cmd_extract(args):
    ex = _extractor(args)
    os.makedirs(args.out, exist_ok=True)
    paths = list(args.wav)
    if args.manifest:
        paths += [e.audio_path for e in corpus_mod.read_manifest(args.manifest)]
    for path in paths:
        seq = ex(path, clip_id=os.path.basename(path))
        stem = os.path.splitext(os.path.basename(path))[0]
        write_feature_cache(os.path.join(args.out, stem + ".afq"), seq, ex.hash)
    print(f"extracted {len(paths)} files to {args.out}")


def cmd_train(args):
    manifest = _labeled_manifest(args.manifest, args.label_mode)
    classes = corpus_mod.CLASSES[args.label_mode]
    data = featurize(manifest, _extractor(args), classes)
    stats = FeatureStats.fit([f for f, _ in data])
    hp = Hyperparams(data[0][0].dim, len(classes), args.hidden_dim, args.encoder_layers,
                     args.attention_dim)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                         seed=args.seed)
    params, tlog = train(normalize(data, stats), hp, config)
    params.provenance = {"source_corpus": manifest.corpus_id, "epochs": args.epochs,
                         "seed": args.seed, "config_hash": ""}
    ckpt = Checkpoint.from_params(params, metadata={"classes": list(classes),
                                                    "feature_stats": stats.to_dict()})
    save_checkpoint(ckpt, args.out)
    if args.log:
        tlog.write(args.log)
    if tlog.records:
        last = tlog.records[-1]
        print(f"epoch {last.epoch}: loss {last.mean_loss:.4f}, "
              f"train accuracy {last.train_accuracy:.3f}")


def cmd_transfer(args):
    source = load_checkpoint(args.source)
    hp = source.hyperparams
    if args.num_classes:
        hp = Hyperparams(hp.input_dim, args.num_classes, hp.hidden_dim, hp.encoder_layers,
                         hp.attention_dim)
    policy = TransferPolicy(_groups(args.copy_groups), _groups(args.freeze_groups), args.seed)
    params = transfer_parameters(source, hp, policy)
    meta = dict(source.metadata) if hp.num_classes == source.hyperparams.num_classes else {}
    save_checkpoint(Checkpoint.from_params(params, metadata=meta), args.out)
    print(f"copied {sorted(policy.copy_groups)} -> {args.out}")


def cmd_finetune(args):
    start = load_checkpoint(args.start)
    classes = start.classes or corpus_mod.CLASSES[args.label_mode]
    manifest = _labeled_manifest(args.manifest, args.label_mode)
    data = featurize(manifest, _extractor(args), classes)
    stats = FeatureStats.fit([f for f, _ in data])
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                         seed=args.seed, freeze_groups=_groups(args.freeze_groups))
    ckpt, tlog = finetune(start.to_params(), normalize(data, stats), config,
                          metadata={"classes": list(classes), "feature_stats": stats.to_dict()})
    save_checkpoint(ckpt, args.out)
    if args.log:
        tlog.write(args.log)
    print(f"fine-tuned {len(data)} utterances -> {args.out}")


def cmd_evaluate(args):
    ckpt = load_checkpoint(args.checkpoint)
    manifest = _labeled_manifest(args.manifest, args.label_mode)
    report = evaluate(ckpt, manifest, _extractor(args))
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        report.write(args.out)
    sys.stdout.write(report.to_table())


def cmd_experiment(args):
    overrides = {"experiment.seed": args.seed, "experiment.data_root": args.data_root}
    if args.seed is not None:
        overrides["experiment.seeds"] = str(args.seed)
    config = ExperimentConfig.from_file(args.config, overrides)
    out = args.out or config.get("experiment", "out") or "affectlab-out"
    run_experiment(config, out)
    with open(os.path.join(out, "results.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())


def _add_feature_args(p):
    p.add_argument("--frame-length", type=int, default=400)
    p.add_argument("--hop", type=int, default=160)
    p.add_argument("--window", default="hann", choices=["hann", "hamming"])
    p.add_argument("--fft-size", type=int, default=512)
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--no-deltas", action="store_true")
    p.add_argument("--cache-dir", default=None)


def _add_train_args(p, epochs=100):
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="write the training log here")
    p.add_argument("--label-mode", default="four_class", choices=sorted(corpus_mod.LABEL_MODES))


def build_parser():
    parser = argparse.ArgumentParser(prog="affectlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", default="A", choices=["A", "B"])
    p.add_argument("--duration", type=float, default=0.4)
    p.set_defaults(func=cmd_synth_corpus)

    p = sub.add_parser("scan", help="inventory a corpus into a manifest")
    p.add_argument("--corpus", required=True, choices=corpus_mod.CORPUS_IDS)
    p.add_argument("--root")
    p.add_argument("--data-root")
    p.add_argument("--out", required=True)
    p.add_argument("--label-mode", choices=sorted(corpus_mod.LABEL_MODES))
    p.add_argument("--allow-partial", action="store_true",
                   help="skip the published utterance-count check")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("extract", help="write AFQ1 feature files")
    p.add_argument("wav", nargs="*")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    _add_feature_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--encoder-layers", type=int, default=2)
    p.add_argument("--attention-dim", type=int, default=128)
    _add_train_args(p)
    _add_feature_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="copy parameter groups into a fresh model")
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--copy-groups", default="encoder,attention")
    p.add_argument("--freeze-groups", default="")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("finetune", help="continue training a checkpoint")
    p.add_argument("--start", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--freeze-groups", default="")
    _add_train_args(p)
    _add_feature_args(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="score a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="report path stem (writes .json and .txt)")
    p.add_argument("--label-mode", default="four_class", choices=sorted(corpus_mod.LABEL_MODES))
    _add_feature_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--data-root")
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except AffectLabError as exc:
        print(f"affectlab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"affectlab: error: {exc}", file=sys.stderr)
        return ConfigInvalid.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
