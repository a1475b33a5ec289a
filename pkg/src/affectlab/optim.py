"""SGD-with-momentum and Adam over named numpy parameters."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


@dataclass
class OptimizerState:
    algorithm: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9
    t: int = 0
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ("sgd_momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.algorithm!r}")


def optimizer_step(params, grads, state):
    """Apply one update; returns ``(new_params, state)``.

    Parameters without an entry in ``grads`` are left untouched, slots
    included, which is how frozen groups are skipped.  ``params`` itself is
    never mutated.
    """
    state.t += 1
    new = dict(params)
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        g = g.astype(p.dtype, copy=False)
        if state.algorithm == "sgd_momentum":
            buf = state.slots.get(name)
            buf = g.copy() if buf is None else state.momentum * buf + g
            state.slots[name] = buf
            new[name] = p - state.lr * buf
        else:
            m, v = state.slots.get(name, (np.zeros_like(p), np.zeros_like(p)))
            m = state.beta1 * m + (1.0 - state.beta1) * g
            v = state.beta2 * v + (1.0 - state.beta2) * g * g
            state.slots[name] = (m, v)
            m_hat = m / (1.0 - state.beta1 ** state.t)
            v_hat = v / (1.0 - state.beta2 ** state.t)
            new[name] = (p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
    return new, state


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_by_global_norm(grads, max_norm):
    """Scale all gradients together so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm
