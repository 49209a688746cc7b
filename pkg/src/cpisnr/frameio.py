"""Raw binary frame files.

Layout (little-endian): magic ``b"CPIF"``, ``uint32`` version, ``uint64``
frame count, ``uint32`` dimensionality, ``uint64`` samples per axis on D_a
and D_b, ``float64`` pitches of D_a and D_b (metres), then every frame as
``float64`` intensities, D_a first then D_b. 2D frames are row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, IOFormatError
from .speckle import FrameEnsemble

MAGIC = b"CPIF"
VERSION = 1
_HEADER = struct.Struct("<4sIQIQQdd")


def write_frames(path, ensemble: FrameEnsemble) -> None:
    side_a, side_b = ensemble.side("a"), ensemble.side("b")
    header = _HEADER.pack(MAGIC, VERSION, len(ensemble), ensemble.dim, side_a, side_b,
                          ensemble.pitch_a, ensemble.pitch_b)
    data = np.concatenate([ensemble.I_A, ensemble.I_B], axis=1).astype("<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_frames(path) -> FrameEnsemble:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IOFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise IOFormatError(f"{path}: truncated header")
    magic, version, n, dim, side_a, side_b, pa, pb = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise IOFormatError(f"{path}: not a frame file (bad magic)")
    if version != VERSION:
        raise IOFormatError(f"{path}: unsupported version {version}")
    if dim not in (1, 2):
        raise IOFormatError(f"{path}: invalid dimensionality {dim}")
    na, nb = side_a**dim, side_b**dim
    expected = _HEADER.size + 8 * n * (na + nb)
    if len(raw) != expected:
        raise IOFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, na + nb)
    try:
        return FrameEnsemble(data[:, :na].astype(float), data[:, na:].astype(float), pa, pb, dim)
    except ConfigError as exc:
        raise IOFormatError(f"{path}: {exc}") from exc
