"""GRU encoder, additive attention and a one-step classification decoder.

The encoder is a stack of unidirectional GRUs over the feature frames.  The
decoder projects the last encoder state into an initial decoder state, uses
it to attend over all encoder states and classifies the concatenation of
state and context::

    s0 = tanh(H[T-1] W_s + b_s)
    e_t = tanh(H[t] W_enc + s0 W_dec) v
    context = sum_t softmax(e)_t H[t]
    logits = [s0, context] W_o + b_o

Row-vector convention throughout: a weight of shape (in, out) maps ``x`` to
``x @ W``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import (DimensionMismatch, EmptyBatch, EmptyDataset, LabelOutOfRange,
                     NumericFailure, ShapeMismatch)
from .optim import OptimizerState, clip_by_global_norm, optimizer_step
from .rng import Xoshiro256

GROUPS = ("encoder", "attention", "decoder")
_GATES = ("z", "r", "h")


@dataclass(frozen=True)
class Hyperparams:
    input_dim: int
    num_classes: int
    hidden_dim: int = 128
    encoder_layers: int = 2
    attention_dim: int = 128

    def __post_init__(self):
        for name in ("input_dim", "num_classes", "hidden_dim", "encoder_layers", "attention_dim"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")

    def to_dict(self):
        return {"input_dim": self.input_dim, "num_classes": self.num_classes,
                "hidden_dim": self.hidden_dim, "encoder_layers": self.encoder_layers,
                "attention_dim": self.attention_dim}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: int(v) for k, v in d.items()})


def parameter_table(hp):
    """``(name, shape, fan_in)`` for every tensor, in declared (initialization) order."""
    h, a, C = hp.hidden_dim, hp.attention_dim, hp.num_classes
    table = []
    for layer in range(hp.encoder_layers):
        d_in = hp.input_dim if layer == 0 else h
        for gate in _GATES:
            prefix = f"encoder.l{layer}."
            table += [(prefix + f"W_{gate}", (d_in, h), d_in),
                      (prefix + f"U_{gate}", (h, h), h),
                      (prefix + f"b_{gate}", (h,), h)]
    table += [("attention.W_enc", (h, a), h),
              ("attention.W_dec", (h, a), h),
              ("attention.v", (a, 1), a),
              ("decoder.W_s", (h, h), h),
              ("decoder.b_s", (h,), h),
              ("decoder.W_o", (2 * h, C), 2 * h),
              ("decoder.b_o", (C,), 2 * h)]
    return table


def group_of(name):
    group = name.split(".", 1)[0]
    if group not in GROUPS:
        raise KeyError(f"tensor {name!r} belongs to no parameter group")
    return group


def check_groups(groups):
    unknown = set(groups) - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown parameter groups {sorted(unknown)}")
    return frozenset(groups)


class ParameterSet:
    """Named model tensors, partitioned into encoder/attention/decoder groups."""

    def __init__(self, hyperparams, tensors, provenance=None):
        self.hyperparams = hyperparams
        self.provenance = provenance
        expected = {n: s for n, s, _ in parameter_table(hyperparams)}
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise ShapeMismatch(f"parameter names differ: missing {missing}, unexpected {extra}")
        self.tensors = {}
        for name in expected:
            arr = np.asarray(tensors[name])
            if arr.shape != expected[name]:
                raise ShapeMismatch(f"{name}: expected shape {expected[name]}, got {arr.shape}")
            self.tensors[name] = arr

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def names_in(self, group):
        return [n for n in self.tensors if group_of(n) == group]

    def astype(self, dtype):
        return ParameterSet(self.hyperparams, {n: t.astype(dtype) for n, t in self.tensors.items()},
                            self.provenance)

    def copy(self):
        return ParameterSet(self.hyperparams, {n: t.copy() for n, t in self.tensors.items()},
                            self.provenance)

    def bit_equal(self, other, names=None):
        names = self.tensors if names is None else names
        return all(self[n].dtype == other[n].dtype and self[n].tobytes() == other[n].tobytes()
                   for n in names)


def init_params(hp, seed, dtype=np.float32):
    """Uniform(-k, k) with k = 1/sqrt(fan_in), drawn in declared order from xoshiro256**."""
    rng = Xoshiro256(seed)
    tensors = {}
    for name, shape, fan_in in parameter_table(hp):
        k = 1.0 / np.sqrt(fan_in)
        tensors[name] = rng.uniform(-k, k, shape).astype(dtype)
    return ParameterSet(hp, tensors)


def zero_params(hp, dtype=np.float64):
    return ParameterSet(hp, {n: np.zeros(s, dtype=dtype) for n, s, _ in parameter_table(hp)})


# -- differentiable forward pass over a (B, T, D) bucket ------------------------

def _encode(x, P, hp):
    """Top-layer GRU states as a list of T tensors of shape (B, hidden)."""
    B, T, _ = x.shape
    inputs = [ag.Tensor(x[:, t, :]) for t in range(T)]
    for layer in range(hp.encoder_layers):
        p = {k: P[f"encoder.l{layer}.{k}"] for k in
             ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")}
        h = ag.Tensor(np.zeros((B, hp.hidden_dim), dtype=x.dtype))
        states = []
        for xt in inputs:
            z = ag.sigmoid(xt @ p["W_z"] + h @ p["U_z"] + p["b_z"])
            r = ag.sigmoid(xt @ p["W_r"] + h @ p["U_r"] + p["b_r"])
            cand = ag.tanh(xt @ p["W_h"] + (r * h) @ p["U_h"] + p["b_h"])
            h = h + z * (cand - h)
            states.append(h)
        inputs = states
    return inputs


def _attend(H, s, P):
    """H: (B, T, h) tensor, s: (B, h) tensor -> (context (B, h), weights (B, T))."""
    B, T, h = H.shape
    a = P["attention.W_enc"].shape[1]
    proj = H @ P["attention.W_enc"]
    query = ag.reshape(s @ P["attention.W_dec"], (B, 1, a))
    scores = ag.reshape(ag.tanh(proj + query) @ P["attention.v"], (B, T))
    weights = ag.softmax(scores)
    context = ag.reshape(ag.reshape(weights, (B, 1, T)) @ H, (B, h))
    return context, weights


def _logits(x, P, hp):
    states = _encode(x, P, hp)
    H = ag.stack(states, axis=1)
    s0 = ag.tanh(states[-1] @ P["decoder.W_s"] + P["decoder.b_s"])
    context, weights = _attend(H, s0, P)
    logits = ag.concat([s0, context], axis=-1) @ P["decoder.W_o"] + P["decoder.b_o"]
    return logits, weights


def _tensors(params, trainable=()):
    return {n: ag.Tensor(arr, requires_grad=n in trainable, name=n)
            for n, arr in params.tensors.items()}


def _frames(features):
    return features.frames if hasattr(features, "frames") else np.asarray(features)


def _check_width(frames, hp):
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise DimensionMismatch(f"expected a T x {hp.input_dim} frame matrix, got {frames.shape}")
    if frames.shape[1] != hp.input_dim:
        raise DimensionMismatch(f"frame width {frames.shape[1]} != input_dim {hp.input_dim}")


def _buckets(items):
    """Group indices by sequence length so each bucket runs unpadded."""
    by_len = {}
    for i, frames in enumerate(items):
        by_len.setdefault(frames.shape[0], []).append(i)
    return [by_len[k] for k in sorted(by_len)]


# -- public single-utterance API -------------------------------------------------

def encode(features, params):
    """Top-layer encoder states, T x hidden_dim."""
    hp = params.hyperparams
    frames = _frames(features)
    _check_width(frames, hp)
    x = frames.astype(params.dtype)[None]
    states = _encode(x, _tensors(params), hp)
    return np.stack([s.data[0] for s in states])


def attend(H, s, params):
    """Additive attention of decoder state ``s`` over encoder states ``H`` (T x h)."""
    H = np.asarray(H, dtype=params.dtype)
    s = np.asarray(s, dtype=params.dtype)
    h = params.hyperparams.hidden_dim
    if H.ndim != 2 or H.shape[1] != h or s.shape != (h,):
        raise DimensionMismatch(f"attend needs H (T, {h}) and s ({h},), got {H.shape}, {s.shape}")
    context, weights = _attend(ag.Tensor(H[None]), ag.Tensor(s[None]), _tensors(params))
    return context.data[0], weights.data[0]


def classify(features, params):
    """Class probability vector for one utterance."""
    return predict_proba([features], params)[0]


def predict_proba(items, params):
    """Probabilities (N x num_classes) for a list of feature sequences."""
    hp = params.hyperparams
    frames = [_frames(f).astype(params.dtype) for f in items]
    for f in frames:
        _check_width(f, hp)
    out = np.zeros((len(frames), hp.num_classes), dtype=np.float64)
    P = _tensors(params)
    for idx in _buckets(frames):
        logits, _ = _logits(np.stack([frames[i] for i in idx]), P, hp)
        out[idx] = ag._softmax(logits.data.astype(np.float64))
    return out


def predict(items, params):
    """Argmax class per utterance; ties go to the lowest index."""
    return np.argmax(predict_proba(items, params), axis=1)


# -- training ----------------------------------------------------------------------

def _forward_backward(batch, params, trainable):
    if not batch:
        raise EmptyBatch("batch is empty")
    hp = params.hyperparams
    frames = [_frames(f).astype(params.dtype) for f, _ in batch]
    labels = np.array([int(y) for _, y in batch], dtype=np.int64)
    for f in frames:
        _check_width(f, hp)
    if np.any(labels < 0) or np.any(labels >= hp.num_classes):
        raise LabelOutOfRange(f"labels must lie in [0, {hp.num_classes})")
    P = _tensors(params, trainable)
    preds = np.zeros(len(batch), dtype=np.int64)
    with ag.Tape() as tape:
        total = None
        for idx in _buckets(frames):
            logits, _ = _logits(np.stack([frames[i] for i in idx]), P, hp)
            preds[idx] = np.argmax(logits.data, axis=1)
            part = ag.sum(ag.cross_entropy(logits, labels[idx]))
            total = part if total is None else total + part
        loss = total * (1.0 / len(batch))
    grads = {}
    if trainable:
        g = tape.backward(loss)
        grads = {n: g[P[n]] for n in params.tensors if n in trainable}
    return float(loss.data), grads, preds, labels


def loss_and_grads(batch, params, trainable=None):
    """Mean cross-entropy over ``batch`` and its gradient for each trainable tensor."""
    trainable = set(params.tensors) if trainable is None else set(trainable)
    loss, grads, _, _ = _forward_backward(batch, params, trainable)
    return loss, grads


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    freeze_groups: frozenset = frozenset()
    optimizer: str = "adam"
    momentum: float = 0.9
    clip_norm: float = 5.0
    precision: str = "f32"

    def __post_init__(self):
        self.freeze_groups = check_groups(self.freeze_groups)
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"precision must be f32 or f64, not {self.precision!r}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr > 0 required")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_accuracy: float
    wall_seconds: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    HEADER = "epoch\tmean_loss\ttrain_accuracy\twall_seconds"

    def to_lines(self):
        lines = [self.HEADER]
        for r in self.records:
            lines.append(f"{r.epoch}\t{r.mean_loss!r}\t{r.train_accuracy!r}\t{r.wall_seconds:.3f}")
        return lines

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as fh:
            rows = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
        return cls([EpochRecord(int(e), float(l), float(a), float(w)) for e, l, a, w in rows[1:]])

    @property
    def losses(self):
        return [r.mean_loss for r in self.records]


def train(dataset, hyperparams, config=None, initial_params=None):
    """Fit the classifier on ``dataset``, a list of ``(features, class_index)``.

    Each epoch visits the data in an order drawn from a xoshiro256** stream
    seeded with ``config.seed``; tensors in ``config.freeze_groups`` are never
    updated.  Returns ``(ParameterSet, TrainingLog)``.
    """
    config = config or TrainConfig()
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    if initial_params is None:
        params = init_params(hyperparams, config.seed, config.dtype)
    else:
        if initial_params.hyperparams != hyperparams:
            raise ShapeMismatch(f"warm start hyperparameters {initial_params.hyperparams} "
                                f"do not match {hyperparams}")
        params = initial_params.astype(config.dtype)
    trainable = {n for n in params.tensors if group_of(n) not in config.freeze_groups}
    state = OptimizerState(config.optimizer, lr=config.lr, momentum=config.momentum)
    rng = Xoshiro256(config.seed)
    log = TrainingLog()
    tensors = dict(params.tensors)
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for lo in range(0, n, config.batch_size):
            batch = [dataset[i] for i in order[lo:lo + config.batch_size]]
            current = ParameterSet(hyperparams, tensors)
            loss, grads, preds, labels = _forward_backward(batch, current, trainable)
            if not np.isfinite(loss):
                raise NumericFailure(f"non-finite loss {loss} at epoch {epoch}")
            loss_sum += loss * len(batch)
            correct += int(np.sum(preds == labels))
            if grads:
                grads, _ = clip_by_global_norm(grads, config.clip_norm)
                tensors, state = optimizer_step(tensors, grads, state)
        log.records.append(EpochRecord(epoch, loss_sum / n, correct / n,
                                       time.perf_counter() - start))
    provenance = initial_params.provenance if initial_params is not None else None
    return ParameterSet(hyperparams, tensors, provenance), log


def accuracy(dataset, params):
    preds = predict([f for f, _ in dataset], params)
    return float(np.mean(preds == np.array([y for _, y in dataset])))
