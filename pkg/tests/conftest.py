import numpy as np
import pytest

from affectlab.audio_io import AudioClip


def tone(freq, seconds=0.5, sr=16000, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
