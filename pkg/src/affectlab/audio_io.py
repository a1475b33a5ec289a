"""WAV decoding and sample-rate conversion."""

import logging
import os
import struct
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy import signal

from .errors import BadMagic, MissingFile, TruncatedData, UnsupportedEncoding

log = logging.getLogger(__name__)

CANONICAL_RATE = 16000
TAPS_PER_PHASE = 64
KAISER_BETA = 8.0

_FORMAT_PCM = 1
_FORMAT_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    channels_seen: int = 1
    source_path: str = ""
    clipped_samples: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def duration_s(self):
        return len(self.samples) / self.sample_rate_hz

    def __len__(self):
        return len(self.samples)


def _read_chunks(data, path):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise BadMagic(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(data):
                raise TruncatedData(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            if fmt[0] == _FORMAT_EXTENSIBLE and size >= 26:
                # the sub-format GUID starts with the real format code
                (sub,) = struct.unpack_from("<H", data, body + 24)
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            if fmt is None:
                raise BadMagic(f"{path}: data chunk before fmt chunk")
            if body + size > len(data):
                raise TruncatedData(
                    f"{path}: data chunk declares {size} bytes, {len(data) - body} present")
            return fmt, data[body:body + size]
        pos = body + size + (size & 1)
    if fmt is None:
        raise BadMagic(f"{path}: no fmt chunk")
    raise TruncatedData(f"{path}: no data chunk")


def load_wav(path):
    """Decode a PCM16 or float32 RIFF/WAVE file into a mono clip.

    Integer samples are scaled by 1/32768; channels are averaged. Float
    samples outside [-1, 1] are clamped and counted in ``clipped_samples``.
    The original sample rate is kept.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"{path}: no such file")
    with open(path, "rb") as fh:
        data = fh.read()
    fmt, payload = _read_chunks(data, path)
    code, channels, rate, _, _, bits = fmt
    if channels < 1 or rate < 1:
        raise UnsupportedEncoding(f"{path}: {channels} channels at {rate} Hz")
    if code == _FORMAT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif code == _FORMAT_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedEncoding(f"{path}: format code {code} with {bits} bits per sample")
    frame_bytes = dtype.itemsize * channels
    n_frames = len(payload) // frame_bytes
    raw = np.frombuffer(payload[:n_frames * frame_bytes], dtype=dtype)
    raw = raw.reshape(n_frames, channels).astype(np.float64)
    if code == _FORMAT_PCM:
        raw /= 32768.0
    mono = raw.mean(axis=1)
    clipped = 0
    if code == _FORMAT_FLOAT:
        if not np.all(np.isfinite(mono)):
            raise UnsupportedEncoding(f"{path}: non-finite float samples")
        clipped = int(np.count_nonzero(np.abs(mono) > 1.0))
        if clipped:
            log.warning("%s: clamped %d samples outside [-1, 1]", path, clipped)
            mono = np.clip(mono, -1.0, 1.0)
    if mono.size == 0:
        raise TruncatedData(f"{path}: no samples")
    return AudioClip(mono, rate, channels, path, clipped)


def write_wav(path, samples, sample_rate_hz, encoding="pcm16"):
    """Write a mono or (n, channels) array as PCM16 or float32 WAV."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    channels = x.shape[1]
    if encoding == "pcm16":
        pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        code, bits = _FORMAT_PCM, 16
    elif encoding == "float32":
        pcm = x.astype("<f4")
        code, bits = _FORMAT_FLOAT, 32
    else:
        raise UnsupportedEncoding(f"cannot write encoding {encoding!r}")
    payload = pcm.tobytes()
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, sample_rate_hz,
                      sample_rate_hz * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def polyphase_filter(up, down, taps_per_phase=TAPS_PER_PHASE, beta=KAISER_BETA):
    """Kaiser-windowed sinc low-pass for an up/down rational resampler."""
    n_taps = taps_per_phase * up
    cutoff = 1.0 / max(up, down)
    return signal.firwin(n_taps, cutoff, window=("kaiser", beta)) * up


def resample(clip, target_rate_hz):
    """Convert ``clip`` to ``target_rate_hz`` with a polyphase FIR.

    Same-rate requests return an unmodified copy, so resampling is
    idempotent at a fixed rate.
    """
    if target_rate_hz <= 0:
        raise ValueError("target_rate_hz must be positive")
    src = clip.sample_rate_hz
    if src == target_rate_hz:
        return AudioClip(clip.samples.copy(), src, clip.channels_seen,
                         clip.source_path, clip.clipped_samples)
    g = gcd(src, target_rate_hz)
    up, down = target_rate_hz // g, src // g
    h = polyphase_filter(up, down)
    y = signal.resample_poly(clip.samples, up, down, window=h)
    y = np.clip(y, -1.0, 1.0)
    return AudioClip(y, target_rate_hz, clip.channels_seen, clip.source_path,
                     clip.clipped_samples)
