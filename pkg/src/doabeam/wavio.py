"""WAV reading (PCM16/24/32, float) and float32 writing."""
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import FormatError


def read_wav(path):
    """Return ``(samples, rate)``; samples are float64 in [-1, 1], shape (N,) or (N, C)."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"no such WAV file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives left-justified in int32
        x = data / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128) / 128.0
    elif data.dtype.kind == "f":
        x = data.astype(float)
    else:
        raise FormatError(f"{path}: unsupported sample type {data.dtype}")
    return x, int(rate)


def write_wav(path, samples, rate=16000):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, int(rate), np.asarray(samples, dtype=np.float32))
