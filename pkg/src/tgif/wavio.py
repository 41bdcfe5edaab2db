"""WAV file I/O: mono RIFF/WAVE stems at a fixed sample rate.

Stems are written as 32-bit float PCM. Reading accepts 16-bit integer,
32-bit float and 64-bit float files; anything at the wrong sample rate is
rejected (there is no resampling in this framework).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .audio import AudioClip
from .errors import AssetNotFoundError, BadInputError, RateMismatchError


def write_wav(path: str | Path, clip: AudioClip) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, clip.sample_rate, clip.samples.astype(np.float32))
    return path


def read_wav(path: str | Path, expected_rate: int | None = None, source_id: str | None = None) -> AudioClip:
    path = Path(path)
    if not path.is_file():
        raise AssetNotFoundError(str(path))
    rate, data = wavfile.read(path)
    if expected_rate is not None and rate != expected_rate:
        raise RateMismatchError(f"{path}: {rate} Hz, expected {expected_rate} Hz")
    if data.ndim != 1:
        raise BadInputError(f"{path}: expected mono, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise BadInputError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples, rate, source_id if source_id is not None else str(path))
