"""Frame-level acoustic features.

Blocks, in layout order: chroma (12), tonnetz (6), spectral contrast (7),
MFCC (13), pitch (1), log energy (1).  With deltas enabled each static block
is followed by a mirrored ``d_<name>`` block after all statics, giving 80
columns.
"""

import hashlib
import json
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import signal

from .errors import BadMagic, EmptyClip, NegativeChroma, TruncatedData

LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8

STATIC_LAYOUT = (
    ("chroma", 12),
    ("tonnetz", 6),
    ("contrast", 7),
    ("mfcc", 13),
    ("pitch", 1),
    ("energy", 1),
)

# Radii for the fifths, minor-thirds and major-thirds circles.
TONNETZ_RADII = np.array([1.0, 1.0, 1.0, 1.0, 0.5, 0.5])
_TONNETZ_ANGLES = np.array([7 * np.pi / 6, 3 * np.pi / 2, 2 * np.pi / 3])


def _tonnetz_basis():
    p = np.arange(12)
    rows = []
    for angle in _TONNETZ_ANGLES:
        rows.append(np.sin(p * angle))
        rows.append(np.cos(p * angle))
    return TONNETZ_RADII[:, None] * np.array(rows)


TONNETZ_BASIS = _tonnetz_basis()  # 6 x 12


@dataclass(frozen=True)
class FrameSpec:
    frame_length_samples: int = 400
    hop_samples: int = 160
    window: str = "hann"
    fft_size: int = 512

    def __post_init__(self):
        if self.window not in ("hann", "hamming"):
            raise ValueError(f"unknown window {self.window!r}")
        if min(self.frame_length_samples, self.hop_samples, self.fft_size) <= 0:
            raise ValueError("frame sizes must be positive")
        if self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if not self.hop_samples <= self.frame_length_samples <= self.fft_size:
            raise ValueError("need hop_samples <= frame_length_samples <= fft_size")

    def window_values(self):
        return signal.get_window(self.window, self.frame_length_samples, fftbins=True)


@dataclass(eq=False)
class FeatureSequence:
    frames: np.ndarray
    layout: list
    clip_id: str = ""
    normalized: bool = False

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        self.layout = [(str(n), int(w)) for n, w in self.layout]
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError("frames must be a T x D matrix with T >= 1")
        if sum(w for _, w in self.layout) != self.frames.shape[1]:
            raise ValueError("layout widths do not sum to the frame width")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature frames contain non-finite values")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]

    def block(self, name):
        """Columns belonging to the block called ``name``."""
        start = 0
        for n, w in self.layout:
            if n == name:
                return self.frames[:, start:start + w]
            start += w
        raise KeyError(name)


def layout_for(with_deltas):
    layout = list(STATIC_LAYOUT)
    if with_deltas:
        layout += [(f"d_{n}", w) for n, w in STATIC_LAYOUT]
    return layout


def frame_signal(samples, spec):
    """Slice into T x frame_length frames; frame t starts at t * hop."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyClip("cannot frame an empty clip")
    L, hop = spec.frame_length_samples, spec.hop_samples
    if x.size < L:
        x = np.pad(x, (0, L - x.size))
    n_frames = 1 + (x.size - L) // hop
    idx = np.arange(L)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def stft(clip, spec=FrameSpec()):
    """Complex spectrogram, T x (fft_size / 2 + 1)."""
    frames = frame_signal(clip.samples, spec) * spec.window_values()
    return np.fft.rfft(frames, n=spec.fft_size, axis=1)


def bin_frequencies(n_bins, sample_rate_hz):
    fft_size = 2 * (n_bins - 1)
    return np.arange(n_bins) * sample_rate_hz / fft_size


def chroma_map(n_bins, sample_rate_hz):
    """One-hot bin -> pitch-class matrix (n_bins x 12); the DC bin maps nowhere."""
    freqs = bin_frequencies(n_bins, sample_rate_hz)
    m = np.zeros((n_bins, 12))
    k = np.arange(1, n_bins)
    midi = 69.0 + 12.0 * np.log2(freqs[k] / 440.0)
    m[k, np.mod(np.round(midi).astype(int), 12)] = 1.0
    return m


def chromagram(spectrogram, sample_rate_hz):
    """Octave-folded power per pitch class (C=0 ... B=11), max-normalized per frame."""
    power = np.abs(spectrogram) ** 2
    chroma = power @ chroma_map(power.shape[1], sample_rate_hz)
    peak = chroma.max(axis=1, keepdims=True)
    return np.divide(chroma, peak, out=np.zeros_like(chroma), where=peak > 0)


def tonnetz(chroma):
    """Project L1-normalized chroma rows onto the 6-D tonal centroid space."""
    chroma = np.asarray(chroma, dtype=np.float64)
    if np.any(chroma < 0):
        raise NegativeChroma("chroma rows must be non-negative")
    total = chroma.sum(axis=-1, keepdims=True)
    normed = np.divide(chroma, total, out=np.zeros_like(chroma), where=total > 0)
    return normed @ TONNETZ_BASIS.T


def contrast_band_edges(sample_rate_hz, fmin=200.0, n_bands=6):
    nyquist = sample_rate_hz / 2.0
    edges = [0.0] + [fmin * 2.0 ** i for i in range(n_bands)] + [nyquist]
    return np.array(edges)


def contrast_band_masks(n_bins, sample_rate_hz, fmin=200.0, n_bands=6):
    """Boolean masks (n_bands + 1) x n_bins.

    Band 0 is everything below ``fmin``, bands 1..n_bands-1 are octaves, and
    the last band runs from ``fmin * 2**(n_bands-1)`` to Nyquist.  A band with
    no bin inside it falls back to the bin nearest its lower edge.
    """
    freqs = bin_frequencies(n_bins, sample_rate_hz)
    edges = contrast_band_edges(sample_rate_hz, fmin, n_bands)
    masks = np.zeros((n_bands + 1, n_bins), dtype=bool)
    for b in range(n_bands + 1):
        lo, hi = edges[b], edges[b + 1]
        if b == n_bands:
            masks[b] = freqs >= lo
        else:
            masks[b] = (freqs >= lo) & (freqs < hi)
        if not masks[b].any():
            masks[b, np.argmin(np.abs(freqs - lo))] = True
    return masks


def spectral_contrast(spectrogram, sample_rate_hz, quantile=0.2):
    """Per-band log peak minus log valley of the magnitude spectrum (T x 7)."""
    mag = np.abs(spectrogram)
    masks = contrast_band_masks(mag.shape[1], sample_rate_hz)
    out = np.empty((mag.shape[0], len(masks)))
    for b, mask in enumerate(masks):
        band = np.sort(mag[:, mask], axis=1)
        k = max(int(np.rint(quantile * band.shape[1])), 1)
        valley = np.maximum(band[:, :k].mean(axis=1), LOG_FLOOR)
        peak = np.maximum(band[:, -k:].mean(axis=1), LOG_FLOOR)
        out[:, b] = np.log(peak) - np.log(valley)
    return out


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_bins, sample_rate_hz, n_filters=26):
    """Triangular filters equally spaced on the mel scale, 0 Hz to Nyquist."""
    freqs = bin_frequencies(n_bins, sample_rate_hz)
    points = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), n_filters + 2))
    lo, mid, hi = points[:-2, None], points[1:-1, None], points[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(spectrogram, sample_rate_hz, n_filters=26, n_coeffs=13):
    power = np.abs(spectrogram) ** 2
    energies = power @ mel_filterbank(power.shape[1], sample_rate_hz, n_filters).T
    logmel = np.log(np.maximum(energies, LOG_FLOOR))
    return sfft.dct(logmel, type=2, norm="ortho", axis=1)[:, :n_coeffs]


def pitch_energy(clip, spec=FrameSpec(), fmin=50.0, fmax=400.0, voicing_threshold=0.3):
    """Per-frame (f0_hz, log_energy); f0 is 0 for unvoiced frames.

    f0 comes from the highest normalized autocorrelation peak in the lag range
    [sr / fmax, sr / fmin], taken on the unwindowed frame; frames whose peak
    is below ``voicing_threshold`` of the zero-lag energy are unvoiced.
    """
    frames = frame_signal(clip.samples, spec)
    sr = clip.sample_rate_hz
    L = frames.shape[1]
    spec2 = np.abs(np.fft.rfft(frames, n=2 * L, axis=1)) ** 2
    acf = np.fft.irfft(spec2, n=2 * L, axis=1)[:, :L]
    r0 = acf[:, 0]
    lo = max(int(round(sr / fmax)), 1)
    hi = min(int(round(sr / fmin)), L - 1)
    f0 = np.zeros(len(frames))
    if hi >= lo:
        rows = np.arange(len(frames))
        window = acf[:, lo:hi + 1]
        # only genuine local maxima qualify, not the edges of the lag range
        left = acf[:, lo - 1:hi]
        right = acf[:, lo + 1:hi + 2] if hi + 2 <= L else np.pad(acf[:, lo + 1:], ((0, 0), (0, 1)),
                                                                 constant_values=np.inf)
        window = np.where((window >= left) & (window > right), window, -np.inf)
        lag = lo + np.argmax(window, axis=1)
        peak = window[rows, lag - lo]
        safe = np.where(r0 > 0, r0, 1.0)
        voiced = (r0 > 0) & np.isfinite(peak) & (peak / safe >= voicing_threshold)
        # The biased estimate leans towards short lags; re-pick the lag by the
        # energy-normalized correlation in a small neighbourhood.
        cs = np.concatenate([np.zeros((len(frames), 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
        cands = np.clip(lag[:, None] + np.arange(-2, 3)[None, :], lo, hi)
        head = cs[rows[:, None], L - cands]
        tail = cs[:, L:L + 1] - cs[rows[:, None], cands]
        denom = np.sqrt(head * tail)
        nccf = np.divide(acf[rows[:, None], cands], denom, out=np.full(cands.shape, -np.inf),
                         where=denom > 0)
        lag = cands[rows, np.argmax(nccf, axis=1)]
        f0 = np.where(voiced, sr / lag, 0.0)
    log_energy = np.log(np.mean(frames ** 2, axis=1) + LOG_FLOOR)
    return np.column_stack([f0, log_energy])


def deltas(seq, width=2):
    """First-order regression deltas with edge replication."""
    x = np.asarray(seq, dtype=np.float64)
    T = x.shape[0]
    padded = np.concatenate([np.repeat(x[:1], width, axis=0), x,
                             np.repeat(x[-1:], width, axis=0)])
    denom = 2.0 * sum(n * n for n in range(1, width + 1))
    out = np.zeros_like(x)
    for n in range(1, width + 1):
        out += n * (padded[width + n:width + n + T] - padded[width - n:width - n + T])
    return out / denom


@dataclass
class FeatureStats:
    """Per-dimension mean / std used for corpus-level z-normalization."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, sequences):
        frames = np.concatenate([s.frames for s in sequences], axis=0).astype(np.float64)
        return cls(frames.mean(axis=0), np.maximum(frames.std(axis=0), STD_FLOOR))

    def apply(self, seq):
        z = (seq.frames - self.mean) / self.std
        return FeatureSequence(z.astype(seq.frames.dtype), seq.layout, seq.clip_id, True)

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def assemble_features(clip, spec=FrameSpec(), with_deltas=True, normalize="none",
                      stats=None, clip_id=None):
    """Extract every block and concatenate them in layout order."""
    if normalize not in ("none", "per_corpus_z"):
        raise ValueError(f"unknown normalization {normalize!r}")
    sr = clip.sample_rate_hz
    spectrum = stft(clip, spec)
    chroma = chromagram(spectrum, sr)
    blocks = [chroma, tonnetz(chroma), spectral_contrast(spectrum, sr),
              mfcc(spectrum, sr), pitch_energy(clip, spec)]
    static = np.concatenate(blocks, axis=1)
    frames = np.concatenate([static, deltas(static)], axis=1) if with_deltas else static
    seq = FeatureSequence(frames, layout_for(with_deltas),
                          clip_id if clip_id is not None else clip.source_path)
    if normalize == "per_corpus_z":
        if stats is None:
            raise ValueError("per_corpus_z normalization needs training-set stats")
        seq = stats.apply(seq)
    return seq


def spec_hash(spec, with_deltas):
    """Short digest identifying the extraction settings of a cache entry."""
    blob = json.dumps({"spec": asdict(spec), "with_deltas": bool(with_deltas),
                       "layout": layout_for(with_deltas), "v": 1}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# Feature cache, little-endian:
#   b"AFQ1" | u32 T | u32 D | u32 n_blocks | n_blocks x (u16 len, name, u32 width)
#   | u8 normalized | u16 len, spec hash | u16 len, clip id | T*D float32 row-major
_CACHE_MAGIC = b"AFQ1"


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<H", len(b)) + b


def write_feature_cache(path, seq, hash_):
    parts = [_CACHE_MAGIC, struct.pack("<III", seq.n_frames, seq.dim, len(seq.layout))]
    for name, width in seq.layout:
        parts += [_pack_str(name), struct.pack("<I", width)]
    parts += [struct.pack("<B", int(seq.normalized)), _pack_str(hash_), _pack_str(seq.clip_id)]
    parts.append(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


def read_feature_cache(path):
    """Return (FeatureSequence with float32 frames, spec hash)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _CACHE_MAGIC:
        raise BadMagic(f"{path}: not an AFQ1 feature file")
    try:
        T, D, n_blocks = struct.unpack_from("<III", data, 4)
        pos = 16
        layout = []

        def read_str():
            nonlocal pos
            (n,) = struct.unpack_from("<H", data, pos)
            s = data[pos + 2:pos + 2 + n].decode("utf-8")
            pos += 2 + n
            return s

        for _ in range(n_blocks):
            name = read_str()
            (width,) = struct.unpack_from("<I", data, pos)
            pos += 4
            layout.append((name, width))
        normalized = bool(data[pos])
        pos += 1
        hash_ = read_str()
        clip_id = read_str()
    except (struct.error, UnicodeDecodeError) as exc:
        raise TruncatedData(f"{path}: header truncated") from exc
    if len(data) - pos != 4 * T * D:
        raise TruncatedData(f"{path}: expected {4 * T * D} payload bytes, got {len(data) - pos}")
    frames = np.frombuffer(data, dtype="<f4", offset=pos).reshape(T, D).astype(np.float32)
    return FeatureSequence(frames, layout, clip_id, normalized), hash_


@dataclass
class FeatureExtractor:
    """Cached, float32-quantized feature extraction for whole files.

    Frames are always rounded to float32 whether or not they came from the
    cache, so a warm cache never changes downstream results.
    """

    spec: FrameSpec = field(default_factory=FrameSpec)
    with_deltas: bool = True
    sample_rate_hz: int = 16000
    cache_dir: str = None

    @property
    def hash(self):
        return spec_hash(self.spec, self.with_deltas) + f"@{self.sample_rate_hz}"

    def _cache_path(self, audio_path):
        key = hashlib.sha256(os.path.abspath(audio_path).encode()).hexdigest()[:24]
        return os.path.join(self.cache_dir, f"{key}.afq")

    def __call__(self, audio_path, clip_id=None):
        from .audio_io import load_wav, resample

        clip_id = clip_id if clip_id is not None else str(audio_path)
        cpath = self._cache_path(audio_path) if self.cache_dir else None
        if cpath and os.path.exists(cpath):
            try:
                seq, h = read_feature_cache(cpath)
            except (BadMagic, TruncatedData):
                h = None
            if h == self.hash:
                seq.clip_id = clip_id
                return seq
        clip = resample(load_wav(audio_path), self.sample_rate_hz)
        seq = assemble_features(clip, self.spec, self.with_deltas, clip_id=clip_id)
        seq.frames = seq.frames.astype(np.float32)
        if cpath:
            os.makedirs(self.cache_dir, exist_ok=True)
            write_feature_cache(cpath, seq, self.hash)
        return seq
