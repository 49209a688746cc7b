"""Counter-based Gaussian variates.

Every draw is addressed by ``(master_seed, stream, frame_index, pixel_index)``:
the Philox key holds the seed and stream tag, the counter holds the frame
index, and each pixel consumes two consecutive 64-bit outputs. A frame can
therefore be regenerated in isolation, and any partition of frames across
workers yields identical numbers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_INV52 = 1.0 / (1 << 52)

SOURCE_STREAM = 0x5EED


def frame_raw(master_seed: int, frame_index: int, n: int, stream: int = SOURCE_STREAM) -> np.ndarray:
    """``n`` raw 64-bit words for one frame."""
    bg = np.random.Philox(key=[master_seed & _MASK64, stream & _MASK64],
                          counter=[0, 0, frame_index & _MASK64, 0])
    return bg.random_raw(n)


def uniforms_open(raw: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in the open interval (0, 1)."""
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * _INV52


def box_muller(u1: np.ndarray, u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two independent standard normals from two independent uniforms."""
    r = np.sqrt(-2.0 * np.log(u1))
    t = 2.0 * np.pi * u2
    return r * np.cos(t), r * np.sin(t)


def circular_gaussian(master_seed: int, frame_index: int, n: int, stream: int = SOURCE_STREAM) -> np.ndarray:
    """``n`` circular complex normals with unit variance (``E|z|^2 = 1``)."""
    raw = frame_raw(master_seed, frame_index, 2 * n, stream)
    u = uniforms_open(raw)
    re, im = box_muller(u[0::2], u[1::2])
    return (re + 1j * im) * np.sqrt(0.5)
