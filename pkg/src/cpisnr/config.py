"""Flat ``key = value`` run configuration.

Keys are dotted (``source.sigma_i_mm = 2.5``). Physical quantities carry a
unit suffix that is converted to SI on load, so ``geometry.z_a_mm = 150`` and
``geometry.z_a_m = 0.15`` are the same setting. Lists are comma separated and
``start:stop:count`` expands to an inclusive linear range.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IOFormatError
from .optics import GeometryConfig, LensPupil, ObjectMask, SetupKind, SourceModel

UNITS = {
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9,
    "m2": 1.0, "mm2": 1e-6, "um2": 1e-12,
}

# canonical key -> (kind, default); lengths are in metres, areas in square metres
SCHEMA: dict[str, tuple[str, object]] = {
    "mode": ("choice:1d,2d", "1d"),
    "setup": ("choice:setup1,setup2", "setup1"),
    "source.sigma_i": ("length", None),
    "source.sigma_g": ("length", None),
    "source.wavelength": ("length", 532e-9),
    "source.peak_intensity": ("float", 1.0),
    "geometry.z_a": ("length", None),
    "geometry.z_b": ("length", None),
    "geometry.S1": ("length", None),
    "geometry.S2": ("length", None),
    "geometry.f": ("length", None),
    "geometry.M": ("float", 1.0),
    "object.kind": ("choice:double_slit,disk,gaussian", "double_slit"),
    "object.width": ("length", None),
    "object.separation": ("length", None),
    "object.height": ("length", 0.0),
    "object.radius": ("length", None),
    "object.area": ("area", None),
    "pupil.kind": ("choice:gaussian,circular,unity", "gaussian"),
    "pupil.width": ("length", None),
    "detector.area": ("area", None),
    "detector_a.n": ("int", 400),
    "detector_a.pitch": ("length", None),
    "detector_b.n": ("int", 300),
    "detector_b.pitch": ("length", None),
    "speckle.seed": ("int", 0),
    "speckle.n_frames": ("int", 1000),
    "speckle.block": ("int", 256),
    "grid.oversample": ("float", 1.25),
    "image.x_min": ("length", None),
    "image.x_max": ("length", None),
    "image.n": ("int", 81),
    "refocus.coverage_tol": ("float", 0.01),
    "probe.x": ("lengths", None),
    "analysis.convention": ("choice:printed,corrected", "printed"),
    "analysis.variant": ("choice:full,far,focused,rule_of_thumb", "full"),
    "quadrature.rtol": ("float", 1e-4),
    "sweep.z_b": ("lengths", None),
    "sweep.S1": ("lengths", None),
    "plan.target_R": ("float", None),
    "output.dir": ("str", "cpisnr-out"),
    "output.svg": ("bool", False),
    "output.frames": ("bool", False),
}

_SUFFIX = re.compile(r"^(?P<base>.+)_(?P<unit>m|mm|um|nm|m2|mm2|um2)$")


def _parse_value(key: str, kind: str, text: str, scale: float):
    text = text.strip()
    try:
        if kind.startswith("choice:"):
            options = kind.split(":", 1)[1].split(",")
            if text not in options:
                raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}", key)
            return text
        if kind in ("length", "area", "float"):
            return float(text) * scale
        if kind == "int":
            v = float(text)
            if v != int(v):
                raise ConfigError(f"expected an integer, got {text!r}", key)
            return int(v)
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ConfigError(f"expected true or false, got {text!r}", key)
            return low in ("true", "yes", "1")
        if kind == "lengths":
            return [v * scale for v in parse_list(text)]
        return text
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse {text!r}", key) from None


def parse_list(text: str) -> list[float]:
    """``"1, 2, 5"`` or ``"50:150:11"`` (inclusive, ``count`` points)."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(text)
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError(text)
        return list(np.linspace(lo, hi, n)) if n > 1 else [lo]
    return [float(t) for t in text.split(",") if t.strip()]


def _resolve_key(raw_key: str) -> tuple[str, float, str]:
    """Canonical key, SI scale, and the unit suffix given."""
    raw_key = raw_key.strip()
    if raw_key in SCHEMA and SCHEMA[raw_key][0] not in ("length", "area", "lengths"):
        return raw_key, 1.0, ""
    m = _SUFFIX.match(raw_key)
    if m and m["base"] in SCHEMA:
        kind = SCHEMA[m["base"]][0]
        area_unit = m["unit"].endswith("2")
        if kind in ("length", "lengths") and not area_unit:
            return m["base"], UNITS[m["unit"]], m["unit"]
        if kind == "area" and area_unit:
            return m["base"], UNITS[m["unit"]], m["unit"]
        raise ConfigError(f"unit suffix _{m['unit']} does not fit a {kind}", raw_key)
    if raw_key in SCHEMA:
        raise ConfigError("physical quantities need a unit suffix (e.g. _mm, _um, _mm2)", raw_key)
    raise ConfigError("unknown configuration key", raw_key)


@dataclass
class RunConfig:
    """Resolved configuration: canonical keys with SI values."""

    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]], origin: str = "file") -> "RunConfig":
        cfg = cls({k: v for k, (_, v) in SCHEMA.items()})
        cfg.update(pairs, origin)
        return cfg

    def update(self, pairs, origin: str = "flag") -> "RunConfig":
        for raw_key, text in pairs:
            key, scale, _ = _resolve_key(raw_key)
            self.values[key] = _parse_value(raw_key, SCHEMA[key][0], text, scale)
            self.sources[key] = origin
        return self

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def require(self, key: str):
        v = self.values.get(key)
        if v is None:
            raise ConfigError("required setting missing", key)
        return v

    @property
    def dim(self) -> int:
        return 1 if self["mode"] == "1d" else 2

    @property
    def kind(self) -> SetupKind:
        return SetupKind(self["setup"])

    # ------------------------------------------------------------------
    # builders

    def source(self) -> SourceModel:
        si = self.require("source.sigma_i")
        sg = self.get("source.sigma_g", si / 20)
        return SourceModel(si, sg, self["source.wavelength"], self["source.peak_intensity"])

    def geometry(self) -> GeometryConfig:
        za = self.require("geometry.z_a")
        if self.kind is SetupKind.SETUP1:
            zb = self.require("geometry.z_b")
            S1 = self.get("geometry.S1", zb)
            S2 = self.values.get("geometry.S2")
            if S2 is not None:
                return GeometryConfig.setup1(za, zb, S1, S2)
            return GeometryConfig.setup1_magnified(za, zb, S1, self["geometry.M"])
        S1 = self.require("geometry.S1")
        zb = self.values.get("geometry.z_b")
        if zb is not None and abs(zb - (za + S1)) > 1e-9 * zb:
            raise ConfigError("setup2 requires z_b = z_a + S1", "geometry.z_b")
        return GeometryConfig.setup2(za, S1, self.require("geometry.S2"), self.require("geometry.f"))

    def sweep_z_b(self) -> float:
        """Fixed source-to-D_b distance of an arrangement-2 sweep."""
        zb = self.values.get("geometry.z_b")
        if zb is None:
            zb = self.require("geometry.z_a") + self.require("geometry.S1")
        return zb

    def object(self) -> ObjectMask:
        kind = self["object.kind"]
        dim = self.dim
        if kind == "double_slit":
            return ObjectMask.double_slit(self.require("object.width"), self.require("object.separation"), dim,
                                          self["object.height"])
        if kind == "disk":
            r = self.values.get("object.radius")
            if r is None:
                r = math.sqrt(self.require("object.area") / math.pi)
            return ObjectMask.disk(r, dim)
        return ObjectMask.gaussian(self.require("object.width"), dim)

    def pupil(self) -> LensPupil | None:
        kind = self["pupil.kind"]
        if kind == "unity":
            return LensPupil("unity")
        return LensPupil(kind, self.require("pupil.width"))

    def detector_area(self) -> float | None:
        a = self.values.get("detector.area")
        if a is None:
            return None
        # 1D mode reads the area as the square of the detector length
        return a if self.dim == 2 else math.sqrt(a)

    def probe_points(self) -> np.ndarray:
        xs = self.values.get("probe.x") or [0.0]
        if self.dim == 1:
            return np.asarray(xs, float)
        return np.array([[x, 0.0] for x in xs])

    def validate(self, command: str) -> None:
        """Build every object the command needs so errors surface before any work."""
        self.source()
        if command == "analytic":
            self.require("geometry.z_a" if self.kind is SetupKind.SETUP1 else "geometry.S2")
            if self.kind is SetupKind.SETUP2:
                self.require("geometry.f")
                self.sweep_z_b()
        else:
            self.geometry()
        self.object()
        if self.kind is SetupKind.SETUP2:
            p = self.pupil()
            if p.kind == "unity":
                raise ConfigError("arrangement 2 needs a finite lens pupil", "pupil.kind")
        if self["speckle.n_frames"] < 1:
            raise ConfigError("must be at least 1", "speckle.n_frames")
        if command == "simulate":
            if self["speckle.n_frames"] < 2:
                raise ConfigError("need at least 2 frames to estimate a variance", "speckle.n_frames")
            self.require("detector_a.pitch")
            self.require("detector_b.pitch")
            for key in ("detector_a.n", "detector_b.n", "image.n", "speckle.block"):
                if self[key] < 1:
                    raise ConfigError("must be at least 1", key)
        if command == "analytic":
            key = "sweep.z_b" if self.kind is SetupKind.SETUP1 else "sweep.S1"
            vals = self.values.get(key)
            if not vals:
                raise ConfigError("sweep list is empty", key)
        if command == "plan":
            t = self.require("plan.target_R")
            if not t > 0:
                raise ConfigError("must be positive", "plan.target_R")

    def manifest(self) -> dict:
        return {k: (list(v) if isinstance(v, (list, tuple)) else v) for k, v in sorted(self.values.items())}


def read_config_text(text: str, origin: str = "file") -> list[tuple[str, str]]:
    pairs = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'", origin)
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v.strip()))
    return pairs


def manifest_pairs(text: str, origin: str = "manifest") -> list[tuple[str, str]]:
    """Configuration pairs from a run manifest (values are SI, written with ``repr``)."""
    try:
        data = json.loads(text)["config"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"not a run manifest: {exc}", origin) from None
    pairs = []
    for key, v in data.items():
        if v is None or key not in SCHEMA:
            continue
        kind = SCHEMA[key][0]
        suffix = {"length": "_m", "lengths": "_m", "area": "_m2"}.get(kind, "")
        if isinstance(v, list):
            text_v = ", ".join(repr(float(x)) for x in v)
        elif isinstance(v, bool):
            text_v = "true" if v else "false"
        else:
            text_v = repr(v) if isinstance(v, float) else str(v)
        pairs.append((key + suffix, text_v))
    return pairs


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Read ``path`` (optional) and apply ``key=value`` overrides on top."""
    pairs = []
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IOFormatError(f"cannot read config {path}: {exc}") from exc
        pairs = manifest_pairs(text, str(path)) if str(path).endswith(".json") else read_config_text(text, str(path))
    cfg = RunConfig.from_pairs(pairs)
    extra = []
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value", "--set")
        k, v = item.split("=", 1)
        extra.append((k.strip(), v.strip()))
    cfg.update(extra, "flag")
    return cfg


def dump_manifest(path, cfg: RunConfig, extra: dict) -> None:
    data = {"config": cfg.manifest(), **extra}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
