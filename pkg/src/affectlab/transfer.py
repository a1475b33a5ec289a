"""Checkpoint files and selective parameter-group transfer.

Checkpoint layout (little-endian)::

    b"AFCK" | u32 version | u64 payload length | u32 CRC-32 of payload
    payload:
        u32 n | n bytes of JSON metadata (hyperparams, provenance, extras)
        u32 tensor count
        table, sorted by name: u16 n, name, u8 ndim, ndim x u32 dim,
                               u64 offset, u64 count   (in float32 elements)
        float32 data region

Any single-byte change in the payload changes its CRC, so a corrupted file
is rejected instead of partially loaded.
"""

import json
import os
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagic, ChecksumMismatch, DecoderClassMismatch, GroupShapeMismatch,
                     MissingFile, ShapeMismatch, ShapeTableCorrupt, TruncatedData,
                     VersionUnsupported)
from .model import (GROUPS, Hyperparams, ParameterSet, TrainConfig, check_groups, group_of,
                    init_params, train)

MAGIC = b"AFCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


@dataclass
class Checkpoint:
    hyperparams: Hyperparams
    tensors: dict
    provenance: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        self.tensors = {n: np.asarray(t, dtype=np.float32) for n, t in self.tensors.items()}
        for name in self.tensors:
            group_of(name)

    def to_params(self):
        return ParameterSet(self.hyperparams, dict(self.tensors), provenance=self.provenance)

    @classmethod
    def from_params(cls, params, provenance=None, metadata=None):
        prov = dict(params.provenance or {})
        prov.update(provenance or {})
        return cls(params.hyperparams, dict(params.tensors), prov, dict(metadata or {}))

    @property
    def classes(self):
        return self.metadata.get("classes")


def _encode_payload(ckpt):
    meta = json.dumps({"hyperparams": ckpt.hyperparams.to_dict(),
                       "provenance": ckpt.provenance,
                       "metadata": ckpt.metadata}, sort_keys=True).encode("utf-8")
    names = sorted(ckpt.tensors)
    table, blobs, offset = [], [], 0
    for name in names:
        arr = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
        raw = name.encode("utf-8")
        table.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
                     + struct.pack(f"<{arr.ndim}I", *arr.shape)
                     + struct.pack("<QQ", offset, arr.size))
        blobs.append(arr.tobytes())
        offset += arr.size
    return b"".join([struct.pack("<I", len(meta)), meta, struct.pack("<I", len(names))]
                    + table + blobs)


def checkpoint_to_bytes(ckpt):
    """The complete AFCK file image of ``ckpt``."""
    payload = _encode_payload(ckpt)
    return _HEADER.pack(MAGIC, ckpt.format_version, len(payload), zlib.crc32(payload)) + payload


def save_checkpoint(ckpt, path):
    """Write ``ckpt`` plus a human-readable ``<path>.provenance.txt`` sidecar."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(checkpoint_to_bytes(ckpt))
    os.replace(tmp, path)
    with open(f"{path}.provenance.txt", "w", encoding="utf-8") as fh:
        fh.write(format_provenance(ckpt.provenance))


def format_provenance(prov, indent=""):
    lines = []
    for key in sorted(prov):
        value = prov[key]
        if key == "chain" and isinstance(value, list):
            lines.append(f"{indent}chain:")
            for i, link in enumerate(value):
                lines.append(f"{indent}  [{i}]")
                lines.append(format_provenance(link, indent + "    ").rstrip("\n"))
        else:
            lines.append(f"{indent}{key}: {value}")
    return "\n".join(lines) + "\n"


def load_checkpoint(path):
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"{path}: no such file")
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read(), path)


def checkpoint_from_bytes(data, path="<bytes>"):
    """Parse an AFCK image; any damage raises instead of returning partial data."""
    if len(data) < _HEADER.size:
        raise TruncatedData(f"{path}: shorter than the checkpoint header")
    magic, version, length, crc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: not an AFCK checkpoint")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(version)
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise TruncatedData(f"{path}: payload is {len(payload)} bytes, header says {length}")
    if zlib.crc32(payload) != crc:
        raise ChecksumMismatch(f"{path}: payload CRC-32 mismatch")
    return _decode_payload(payload, path)


def _decode_payload(payload, path):
    try:
        (meta_len,) = struct.unpack_from("<I", payload, 0)
        meta = json.loads(payload[4:4 + meta_len].decode("utf-8"))
        pos = 4 + meta_len
        (count,) = struct.unpack_from("<I", payload, pos)
        pos += 4
        entries = []
        for _ in range(count):
            (n,) = struct.unpack_from("<H", payload, pos)
            name = payload[pos + 2:pos + 2 + n].decode("utf-8")
            pos += 2 + n
            ndim = payload[pos]
            shape = struct.unpack_from(f"<{ndim}I", payload, pos + 1)
            pos += 1 + 4 * ndim
            offset, size = struct.unpack_from("<QQ", payload, pos)
            pos += 16
            entries.append((name, shape, offset, size))
        hp = Hyperparams.from_dict(meta["hyperparams"])
    except (struct.error, UnicodeDecodeError, ValueError, KeyError, IndexError, TypeError) as exc:
        raise ShapeTableCorrupt(f"{path}: cannot parse header/table: {exc}") from None
    data_start = pos
    n_floats = (len(payload) - data_start) // 4
    tensors, expected_offset = {}, 0
    for name, shape, offset, size in entries:
        if int(np.prod(shape)) != size or offset != expected_offset or offset + size > n_floats:
            raise ShapeTableCorrupt(f"{path}: bad table entry for {name!r}")
        expected_offset += size
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=size,
                                      offset=data_start + 4 * offset).reshape(shape).copy()
    if expected_offset * 4 != len(payload) - data_start:
        raise ShapeTableCorrupt(f"{path}: data region size does not match the table")
    try:
        ParameterSet(hp, tensors)
        ckpt = Checkpoint(hp, tensors, meta.get("provenance", {}), meta.get("metadata", {}))
    except (ShapeMismatch, KeyError) as exc:
        raise ShapeTableCorrupt(f"{path}: {exc}") from None
    return ckpt


@dataclass
class TransferPolicy:
    """Which groups to copy from the source and which to freeze while fine-tuning.

    The default copies encoder and attention, re-initializes the decoder and
    fine-tunes everything.
    """

    copy_groups: frozenset = frozenset({"encoder", "attention"})
    freeze_groups: frozenset = frozenset()
    fresh_init_seed: int = 0

    def __post_init__(self):
        self.copy_groups = check_groups(self.copy_groups)
        self.freeze_groups = check_groups(self.freeze_groups)


def transfer_parameters(source, target_hp, policy=None):
    """Build target parameters: copied groups from ``source``, the rest freshly drawn."""
    policy = policy or TransferPolicy()
    src_hp = source.hyperparams
    if "decoder" in policy.copy_groups and src_hp.num_classes != target_hp.num_classes:
        raise DecoderClassMismatch(
            f"cannot copy the decoder: source has {src_hp.num_classes} classes, "
            f"target has {target_hp.num_classes}")
    fresh = init_params(target_hp, policy.fresh_init_seed, np.float32)
    tensors = dict(fresh.tensors)
    for name in fresh.tensors:
        if group_of(name) not in policy.copy_groups:
            continue
        src = source.tensors.get(name)
        if src is None or src.shape != fresh[name].shape:
            raise GroupShapeMismatch(name, fresh[name].shape, None if src is None else src.shape)
        tensors[name] = src.copy()
    provenance = {
        "transfer": {"copy_groups": sorted(policy.copy_groups),
                     "freeze_groups": sorted(policy.freeze_groups),
                     "fresh_init_seed": policy.fresh_init_seed},
        "chain": list(source.provenance.get("chain", [])) + [_strip_chain(source.provenance)],
    }
    return ParameterSet(target_hp, tensors, provenance=provenance)


def _strip_chain(prov):
    return {k: v for k, v in prov.items() if k != "chain"}


def finetune(start, low_resource_train, config=None, provenance=None, metadata=None):
    """Warm-start training from ``start``; returns ``(Checkpoint, TrainingLog)``."""
    config = config or TrainConfig()
    params, log = train(low_resource_train, start.hyperparams, config, initial_params=start)
    prov = dict(start.provenance or {})
    prov.setdefault("chain", [])
    prov["finetune"] = {"epochs": config.epochs, "seed": config.seed,
                        "freeze_groups": sorted(config.freeze_groups),
                        "train_size": len(low_resource_train)}
    prov.update(provenance or {})
    params.provenance = prov
    return Checkpoint.from_params(params, metadata=metadata), log


__all__ = ["Checkpoint", "TransferPolicy", "save_checkpoint", "load_checkpoint",
           "checkpoint_to_bytes", "checkpoint_from_bytes",
           "transfer_parameters", "finetune", "format_provenance", "GROUPS"]
