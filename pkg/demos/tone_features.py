"""
Features of a pure tone
=======================

Push a few sine waves through the feature pipeline and look at what
comes out: the pitch column, the strongest chroma bin and the layout.
"""

import numpy as np

from affectlab import AudioClip, assemble_features, resample

# one second at 44.1 kHz, resampled to the 16 kHz working rate
sr = 44100
t = np.arange(sr) / sr

names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
for freq in (110.0, 196.0, 261.63, 440.0):
    clip = resample(AudioClip(0.5 * np.sin(2 * np.pi * freq * t), sr), 16000)
    seq = assemble_features(clip)
    f0 = seq.block("pitch")[:, 0]
    voiced = f0 > 0
    pc = np.bincount(np.argmax(seq.block("chroma"), axis=1), minlength=12).argmax()
    print(f"{freq:7.2f} Hz  median f0 {np.median(f0[voiced]) if voiced.any() else 0:7.2f}"
          f"  voiced {voiced.mean():4.0%}  chroma peak {names[pc]}")

# Two things to notice.  Below about 500 Hz a 512-point FFT at 16 kHz has
# bins wider than a semitone, so the low tones land on a neighbouring pitch
# class; 440 Hz is resolved and comes out as A.  And 440 Hz is above the
# pitch tracker's 400 Hz ceiling, so it reports the octave below instead.

print()
print(seq.frames.shape, "frames x columns")
for name, width in seq.layout:
    print(f"  {name:11s} {width}")
