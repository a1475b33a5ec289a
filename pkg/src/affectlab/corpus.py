"""Corpus manifests, label harmonization and deterministic splits.

Supported on-disk layouts:

``savee``
    ``DC_a01.wav`` style names (speaker prefix + affect letters + index),
    either flat or inside per-speaker directories (``DC/a01.wav``).
``emovo``
    ``<affect>-<actor>-<sentence>.wav``, e.g. ``gio-f1-b1.wav``.
``urdu`` and ``synthetic``
    One directory per affect (``Angry/``, ``Happy/`` ...); the speaker is the
    filename prefix before the first underscore.
``iemocap``
    ``Session<N>/dialog/EmoEvaluation/<dialog>.txt`` evaluation files and
    ``Session<N>/sentences/wav/<dialog>/<utterance>.wav`` audio.  The
    categorical label on each ``[start - end]`` line is the annotators'
    majority label; ``xxx`` (no agreement) and affects outside the corpus'
    studied set are discarded.
"""

import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field, replace

from .errors import (EmptyCorpus, EvaluationFileUnparseable, LayoutNotRecognized,
                     TooFewPerClass, UnknownRawLabel, DataError)
from .rng import Xoshiro256

log = logging.getLogger(__name__)

CORPUS_IDS = ("savee", "emovo", "urdu", "iemocap", "synthetic")

# Utterance counts of correctly laid-out corpora.
EXPECTED_COUNTS = {"savee": 480, "emovo": 588, "urdu": 400, "iemocap": 5531}

DATA_ENV = "AFFECTLAB_DATA"

# raw label -> affect name, per corpus
RAW_AFFECTS = {
    "savee": {"a": "anger", "d": "disgust", "f": "fear", "h": "happiness",
              "n": "neutral", "sa": "sadness", "su": "surprise"},
    "emovo": {"rab": "anger", "dis": "disgust", "pau": "fear", "gio": "joy",
              "neu": "neutral", "tri": "sadness", "sor": "surprise"},
    "urdu": {"angry": "anger", "happy": "happiness", "neutral": "neutral", "sad": "sadness"},
    "iemocap": {"ang": "anger", "sad": "sadness", "neu": "neutral", "hap": "happiness",
                "exc": "excited"},
    "synthetic": {"anger": "anger", "sadness": "sadness", "neutral": "neutral",
                  "happiness": "happiness"},
}

LABEL_MODES = {
    "four_class": {"anger": "anger", "sadness": "sadness", "neutral": "neutral",
                   "happiness": "happiness", "joy": "happiness", "excited": "happiness",
                   "surprise": None, "fear": None, "disgust": None},
    "binary_valence": {"anger": "negative", "sadness": "negative", "fear": "negative",
                       "disgust": "negative", "happiness": "positive", "joy": "positive",
                       "excited": "positive", "surprise": "positive", "neutral": None},
}

CLASSES = {
    "four_class": ("anger", "sadness", "neutral", "happiness"),
    "binary_valence": ("negative", "positive"),
}


class CountMismatch(DataError, ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    audio_path: str
    raw_label: str
    canonical_label: str = None
    speaker_id: str = ""
    session_id: str = None


@dataclass
class CorpusManifest:
    corpus_id: str
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if self.corpus_id not in CORPUS_IDS:
            raise ValueError(f"unknown corpus id {self.corpus_id!r}")
        paths = [e.audio_path for e in self.entries]
        if len(set(paths)) != len(paths):
            dupes = [p for p, c in Counter(paths).items() if c > 1]
            raise ValueError(f"duplicate audio paths in manifest: {dupes[:3]}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def label_counts(self):
        return dict(sorted(Counter(e.canonical_label for e in self.entries).items()))

    def labels(self):
        return sorted({e.canonical_label for e in self.entries})

    def subset(self, paths):
        keep = set(paths)
        return CorpusManifest(self.corpus_id, [e for e in self.entries if e.audio_path in keep])


# -- scanning ----------------------------------------------------------------------

def _wav_files(root):
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        found += [os.path.join(dirpath, f) for f in sorted(filenames) if f.lower().endswith(".wav")]
    return found


_SAVEE_NAME = re.compile(r"^(?:(?P<spk>[A-Za-z]{2})_)?(?P<emo>sa|su|a|d|f|h|n)(?P<num>\d{2})\.wav$",
                         re.IGNORECASE)
_EMOVO_NAME = re.compile(r"^(?P<emo>dis|gio|neu|pau|rab|sor|tri)-(?P<actor>[fm]\d)-(?P<sent>[a-z]+\d*)\.wav$",
                         re.IGNORECASE)
_IEMOCAP_LINE = re.compile(r"^\[(\d+(?:\.\d+)?) - (\d+(?:\.\d+)?)\]\t(\S+)\t(\S+)\t\[[^\]]*\]\s*$")
_SESSION_DIR = re.compile(r"^Session(\d+)$")
IEMOCAP_KEEP = ("ang", "sad", "neu", "hap", "exc")


def _scan_savee(root):
    entries = []
    for path in _wav_files(root):
        m = _SAVEE_NAME.match(os.path.basename(path))
        if not m:
            continue
        speaker = m.group("spk") or os.path.basename(os.path.dirname(path))
        entries.append(CorpusEntry(path, m.group("emo").lower(), speaker_id=speaker.upper()))
    return entries


def _scan_emovo(root):
    entries = []
    for path in _wav_files(root):
        m = _EMOVO_NAME.match(os.path.basename(path))
        if m:
            entries.append(CorpusEntry(path, m.group("emo").lower(),
                                       speaker_id=m.group("actor").lower()))
    return entries


def _scan_label_dirs(root, corpus_id):
    known = RAW_AFFECTS[corpus_id]
    entries = []
    for name in sorted(os.listdir(root)):
        sub = os.path.join(root, name)
        if not os.path.isdir(sub) or name.lower() not in known:
            continue
        for path in _wav_files(sub):
            speaker = os.path.basename(path).split("_", 1)[0] if "_" in os.path.basename(path) else ""
            entries.append(CorpusEntry(path, name.lower(), speaker_id=speaker))
    return entries


def parse_iemocap_evaluation(path):
    """``(utterance_id, label)`` pairs from one EmoEvaluation file."""
    out = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.startswith("["):
                continue
            m = _IEMOCAP_LINE.match(line.rstrip("\r\n"))
            if not m:
                raise EvaluationFileUnparseable(path, line_no, line.rstrip("\r\n"))
            out.append((m.group(3), m.group(4).lower()))
    return out


def _scan_iemocap(root):
    entries = []
    sessions = sorted(d for d in os.listdir(root) if _SESSION_DIR.match(d))
    if not sessions:
        return None
    for sess in sessions:
        eval_dir = os.path.join(root, sess, "dialog", "EmoEvaluation")
        if not os.path.isdir(eval_dir):
            continue
        for fname in sorted(os.listdir(eval_dir)):
            fpath = os.path.join(eval_dir, fname)
            if not (fname.endswith(".txt") and os.path.isfile(fpath)):
                continue
            for utt, label in parse_iemocap_evaluation(fpath):
                if label not in IEMOCAP_KEEP:
                    continue
                dialog = utt.rsplit("_", 1)[0]
                wav = os.path.join(root, sess, "sentences", "wav", dialog, utt + ".wav")
                if not os.path.isfile(wav):
                    log.warning("%s: audio for %s not found", fpath, utt)
                    continue
                speaker = utt[:5] + utt.rsplit("_", 1)[1][:1]
                entries.append(CorpusEntry(wav, label, speaker_id=speaker, session_id=sess))
    return entries


def scan_corpus(root, corpus_id, check_count=True):
    """Inventory a corpus directory.

    With ``check_count`` the entry total must match the published size of
    the corpus; pass ``False`` for partial local copies.
    """
    if corpus_id not in CORPUS_IDS:
        raise ValueError(f"unknown corpus id {corpus_id!r}")
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise LayoutNotRecognized(f"{root}: not a directory")
    if not any(True for _ in os.scandir(root)):
        raise EmptyCorpus(f"{root}: directory is empty")
    if corpus_id == "savee":
        entries = _scan_savee(root)
    elif corpus_id == "emovo":
        entries = _scan_emovo(root)
    elif corpus_id == "iemocap":
        entries = _scan_iemocap(root)
    else:
        entries = _scan_label_dirs(root, corpus_id)
    if entries is None or (not entries and _wav_files(root)):
        raise LayoutNotRecognized(f"{root}: does not look like a {corpus_id} corpus")
    if not entries:
        raise EmptyCorpus(f"{root}: no {corpus_id} utterances found")
    entries.sort(key=lambda e: e.audio_path)
    expected = EXPECTED_COUNTS.get(corpus_id)
    if check_count and expected is not None and len(entries) != expected:
        raise CountMismatch(f"{root}: found {len(entries)} {corpus_id} utterances, "
                            f"expected {expected} (disable the count check for partial copies)")
    return CorpusManifest(corpus_id, entries)


def data_root(explicit=None):
    root = explicit or os.environ.get(DATA_ENV)
    if not root:
        raise LayoutNotRecognized(f"no data root given and ${DATA_ENV} is unset")
    return root


# -- labels ------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    mode: str = "four_class"

    def __post_init__(self):
        if self.mode not in LABEL_MODES:
            raise ValueError(f"unknown label mode {self.mode!r}")

    @property
    def classes(self):
        return CLASSES[self.mode]

    def canonical(self, corpus_id, raw_label):
        """Canonical label for ``raw_label``, or None when the mode drops it."""
        affect = RAW_AFFECTS[corpus_id].get(raw_label.lower())
        if affect is None:
            raise UnknownRawLabel(corpus_id, raw_label)
        return LABEL_MODES[self.mode][affect]


def map_labels(manifest, label_map=LabelMap()):
    """Attach canonical labels, dropping entries the mode excludes."""
    if isinstance(label_map, str):
        label_map = LabelMap(label_map)
    kept = []
    for e in manifest.entries:
        label = label_map.canonical(manifest.corpus_id, e.raw_label)
        if label is not None:
            kept.append(replace(e, canonical_label=label))
    if not kept:
        raise EmptyCorpus(f"{manifest.corpus_id}: every entry dropped under {label_map.mode}")
    out = CorpusManifest(manifest.corpus_id, kept)
    log.info("%s under %s: %s", manifest.corpus_id, label_map.mode, out.label_counts())
    return out


# -- manifest files ----------------------------------------------------------------

def write_manifest(path, manifest):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in manifest.entries:
            fields = [manifest.corpus_id, e.audio_path, e.raw_label, e.canonical_label or "",
                      e.speaker_id or "", e.session_id or ""]
            if any("\t" in f or "\n" in f for f in fields):
                raise ValueError(f"manifest field contains a tab or newline: {fields}")
            fh.write("\t".join(fields) + "\n")


def read_manifest(path):
    corpus_id, entries = None, []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise LayoutNotRecognized(f"{path}:{line_no}: expected 6 tab-separated fields")
            cid, audio, raw, canon, speaker, session = parts
            if corpus_id is None:
                corpus_id = cid
            elif cid != corpus_id:
                raise LayoutNotRecognized(f"{path}:{line_no}: mixed corpus ids")
            entries.append(CorpusEntry(audio, raw, canon or None, speaker, session or None))
    if corpus_id is None:
        raise EmptyCorpus(f"{path}: manifest is empty")
    return CorpusManifest(corpus_id, entries)


# -- splits ------------------------------------------------------------------------

SPLIT_SCHEMES = ("ratio_80_20", "kfold_3", "session_holdout")


@dataclass
class SplitPlan:
    scheme: str
    seed: int
    assignments: dict

    def partitions(self):
        return sorted(set(self.assignments.values()))

    def paths(self, partition):
        return sorted(p for p, part in self.assignments.items() if part == partition)

    def subset(self, manifest, partition):
        return manifest.subset(self.paths(partition))

    def folds(self, manifest):
        """``(train, test)`` manifests: one pair for holdout schemes, k for k-fold."""
        if self.scheme != "kfold_3":
            return [(self.subset(manifest, "train"), self.subset(manifest, "test"))]
        pairs = []
        for part in self.partitions():
            test = set(self.paths(part))
            pairs.append((manifest.subset([p for p in self.assignments if p not in test]),
                          manifest.subset(test)))
        return pairs


def _by_class(manifest):
    groups = {}
    for e in manifest.entries:
        if e.canonical_label is None:
            raise ValueError("make_splits needs a labeled manifest (run map_labels first)")
        groups.setdefault(e.canonical_label, []).append(e.audio_path)
    return {k: sorted(v) for k, v in sorted(groups.items())}


def _test_quota(sizes, fraction):
    """Largest-remainder allocation of round(fraction * total) test slots."""
    total = round(fraction * sum(sizes.values()))
    exact = {k: fraction * n for k, n in sizes.items()}
    quota = {k: int(v) for k, v in exact.items()}
    spare = total - sum(quota.values())
    for k in sorted(exact, key=lambda k: (-(exact[k] - quota[k]), k))[:spare]:
        quota[k] += 1
    return quota


def _session_number(session_id):
    m = re.search(r"(\d+)$", session_id or "")
    if not m:
        raise ValueError(f"session_holdout needs session ids, got {session_id!r}")
    return int(m.group(1))


def make_splits(manifest, scheme="ratio_80_20", seed=0, speaker_aware=False, test_fraction=0.2,
                n_folds=3):
    """Deterministic, class-stratified train/test assignment.

    ``speaker_aware`` keeps each speaker inside one partition (stratification is
    then only approximate).  ``session_holdout`` puts sessions 1-3 in train and
    the rest in test.
    """
    if scheme not in SPLIT_SCHEMES:
        raise ValueError(f"unknown split scheme {scheme!r}")
    rng = Xoshiro256(seed)
    assign = {}
    if scheme == "session_holdout":
        for e in manifest.entries:
            assign[e.audio_path] = "train" if _session_number(e.session_id) <= 3 else "test"
        return SplitPlan(scheme, seed, assign)
    classes = _by_class(manifest)
    if scheme == "kfold_3":
        short = {c: len(p) for c, p in classes.items() if len(p) < n_folds}
        if short:
            raise TooFewPerClass(f"classes with fewer than {n_folds} entries: {short}")
    if speaker_aware:
        return SplitPlan(scheme, seed, _speaker_split(manifest, scheme, rng, test_fraction, n_folds))
    if scheme == "ratio_80_20":
        quota = _test_quota({c: len(p) for c, p in classes.items()}, test_fraction)
        for c, paths in classes.items():
            shuffled = rng.shuffle(paths)
            for i, p in enumerate(shuffled):
                assign[p] = "test" if i < quota[c] else "train"
    else:
        offset = 0
        for c, paths in classes.items():
            for i, p in enumerate(rng.shuffle(paths)):
                assign[p] = f"fold{(offset + i) % n_folds}"
            offset += len(paths)
    return SplitPlan(scheme, seed, assign)


def _speaker_split(manifest, scheme, rng, test_fraction, n_folds):
    speakers = {}
    for e in manifest.entries:
        speakers.setdefault(e.speaker_id or e.audio_path, []).append(e.audio_path)
    order = rng.shuffle(sorted(speakers))
    assign = {}
    if scheme == "ratio_80_20":
        target, n_test = test_fraction * len(manifest), 0
        for spk in order:
            part = "test" if n_test < target else "train"
            n_test += len(speakers[spk]) if part == "test" else 0
            for p in speakers[spk]:
                assign[p] = part
    else:
        sizes = [0] * n_folds
        for spk in order:
            k = min(range(n_folds), key=lambda i: (sizes[i], i))
            sizes[k] += len(speakers[spk])
            for p in speakers[spk]:
                assign[p] = f"fold{k}"
    return assign
