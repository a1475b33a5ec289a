"""Confusion matrices, accuracy and unweighted average recall."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllClassesEmpty, EmptyDataset

DECIMALS = 6


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: list
    counts: np.ndarray

    def __post_init__(self):
        self.classes = list(self.classes)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        C = len(self.classes)
        if self.counts.shape != (C, C):
            raise ValueError(f"counts must be {C}x{C}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion counts must be non-negative")

    @classmethod
    def from_pairs(cls, classes, y_true, y_pred):
        """Tally integer class indices."""
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(classes, counts)

    @property
    def total(self):
        return int(self.counts.sum())

    def accuracy(self):
        if self.total == 0:
            raise EmptyDataset("accuracy of an empty confusion matrix")
        return float(np.trace(self.counts)) / self.total

    def per_class_recall(self):
        """Recall of every class that has at least one true instance."""
        rows = self.counts.sum(axis=1)
        return {c: float(self.counts[i, i]) / rows[i]
                for i, c in enumerate(self.classes) if rows[i] > 0}


def uar(confusion):
    """Mean recall over classes present in the test data.

    Classes without true instances are left out of the mean rather than
    counted as zero recall.
    """
    recalls = confusion.per_class_recall()
    if not recalls:
        raise AllClassesEmpty("no class has any true instance")
    return math.fsum(recalls.values()) / len(recalls)


def accuracy(confusion):
    return confusion.accuracy()


@dataclass
class EvalReport:
    accuracy: float
    uar: float
    per_class_recall: dict
    confusion: ConfusionMatrix
    config_hash: str = ""
    checkpoint_provenance: str = ""
    name: str = ""
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_confusion(cls, confusion, **kwargs):
        return cls(confusion.accuracy(), uar(confusion), confusion.per_class_recall(),
                   confusion, **kwargs)

    def to_dict(self):
        r = lambda v: round(float(v), DECIMALS)  # noqa: E731
        return {
            "name": self.name,
            "n": self.confusion.total,
            "accuracy": r(self.accuracy),
            "uar": r(self.uar),
            "per_class_recall": {k: r(v) for k, v in self.per_class_recall.items()},
            "confusion": {"classes": self.confusion.classes,
                          "counts": self.confusion.counts.tolist()},
            "config_hash": self.config_hash,
            "checkpoint_provenance": self.checkpoint_provenance,
            "extras": self.extras,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        cm = ConfusionMatrix(d["confusion"]["classes"], d["confusion"]["counts"])
        return cls(d["accuracy"], d["uar"], d["per_class_recall"], cm, d.get("config_hash", ""),
                   d.get("checkpoint_provenance", ""), d.get("name", ""), d.get("extras", {}))

    def to_table(self):
        f = f"{{:.{DECIMALS}f}}"
        lines = [f"report: {self.name}", f"utterances: {self.confusion.total}",
                 f"accuracy: {f.format(self.accuracy)}", f"uar: {f.format(self.uar)}",
                 "", "class\trecall"]
        for c in self.confusion.classes:
            rec = self.per_class_recall.get(c)
            lines.append(f"{c}\t{'-' if rec is None else f.format(rec)}")
        lines += ["", "true\\pred\t" + "\t".join(self.confusion.classes)]
        for c, row in zip(self.confusion.classes, self.confusion.counts):
            lines.append(c + "\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, stem):
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        with open(stem + ".txt", "w", encoding="utf-8") as fh:
            fh.write(self.to_table())
