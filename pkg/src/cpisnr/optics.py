"""Physical data model and deterministic wave-optics primitives.

Lengths are in meters throughout. Transverse planes are either 1D slices
(``values.shape == (n_x,)``) or 2D grids (``values.shape == (n_y, n_x)``).
Grid coordinates are centred: ``x_n = (n - (N - 1) / 2) * pitch``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, SamplingError

Array = np.ndarray


# ---------------------------------------------------------------------------
# source


@dataclass(frozen=True)
class SourceModel:
    """Gaussian-Schell chaotic source.

    Parameters
    ----------
    sigma_i : float
        Width of the intensity envelope ``I_s exp(-rho^2 / 2 sigma_i^2)``.
    sigma_g : float
        Transverse coherence width at the source.
    wavelength : float
    peak_intensity : float
        ``I_s``; every SNR output is invariant under its scaling.
    max_coherence_ratio : float
        Delta-coherence mode requires ``sigma_g <= max_coherence_ratio * sigma_i``.
    """

    sigma_i: float
    sigma_g: float
    wavelength: float
    peak_intensity: float = 1.0
    max_coherence_ratio: float = 0.1

    def __post_init__(self):
        for name in ("sigma_i", "sigma_g", "wavelength", "peak_intensity"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be strictly positive", f"source.{name}")
        if self.sigma_g > self.max_coherence_ratio * self.sigma_i:
            raise ConfigError(
                f"delta-coherence mode needs sigma_g <= {self.max_coherence_ratio:g} * sigma_i",
                "source.sigma_g",
            )

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def envelope(self, rho2: Array | float) -> Array | float:
        """Intensity envelope evaluated at squared radius ``rho2``."""
        return self.peak_intensity * np.exp(-np.asarray(rho2) / (2.0 * self.sigma_i**2))

    def coherence_factor(self, dim: int) -> float:
        """Weight of the delta-correlated mutual coherence: ``(sqrt(2 pi) sigma_g)^dim``."""
        return (math.sqrt(2.0 * math.pi) * self.sigma_g) ** dim


def coherence_length(z: float, source: SourceModel) -> float:
    """Transverse coherence length ``z / (k sigma_i)`` on a plane at distance ``z``."""
    if not z > 0:
        raise ConfigError("distance must be positive", "z")
    return z / (source.k * source.sigma_i)


# ---------------------------------------------------------------------------
# geometry


class SetupKind(str, enum.Enum):
    SETUP1 = "setup1"  # ghost image on D_a, source imaged on D_b
    SETUP2 = "setup2"  # object imaged on D_a, ghost image of the lens on D_b


@dataclass(frozen=True)
class GeometryConfig:
    """Distances of either optical arrangement.

    Setup 1: ``z_a`` source to D_a, ``z_b`` source to object, ``S1`` object to
    lens, ``S2`` lens to D_b; the lens images the source onto D_b.
    Setup 2: ``z_a`` source to object, ``z_b = z_a + S1`` source to D_b,
    ``S1`` object to lens, ``S2`` lens to D_a.
    """

    kind: SetupKind
    z_a: float
    z_b: float
    S1: float
    S2: float
    f: float
    rtol: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "kind", SetupKind(self.kind))
        for name in ("z_a", "z_b", "S1", "S2", "f"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be strictly positive", f"geometry.{name}")
        if self.kind is SetupKind.SETUP1:
            lhs = 1.0 / self.S2 + 1.0 / (self.S1 + self.z_b)
            if abs(lhs - 1.0 / self.f) > self.rtol / self.f:
                raise ConfigError("thin-lens equation 1/S2 + 1/(S1+z_b) = 1/f violated", "geometry.f")
        else:
            if abs(self.z_b - (self.z_a + self.S1)) > self.rtol * self.z_b:
                raise ConfigError("setup2 requires z_b = z_a + S1", "geometry.z_b")
            if abs(self.S1 - self.f) <= self.rtol * self.f:
                raise ConfigError("S1 = f leaves the focused image distance undefined", "geometry.S1")

    @classmethod
    def setup1(cls, z_a: float, z_b: float, S1: float, S2: float, **kw) -> "GeometryConfig":
        """Setup 1 with the focal length fixed by the thin-lens equation."""
        f = 1.0 / (1.0 / S2 + 1.0 / (S1 + z_b))
        return cls(SetupKind.SETUP1, z_a, z_b, S1, S2, f, **kw)

    @classmethod
    def setup1_magnified(cls, z_a: float, z_b: float, S1: float, M: float = 1.0, **kw) -> "GeometryConfig":
        """Setup 1 with the source imaged on D_b at magnification ``M``."""
        return cls.setup1(z_a, z_b, S1, M * (S1 + z_b), **kw)

    @classmethod
    def setup2(cls, z_a: float, S1: float, S2: float, f: float, **kw) -> "GeometryConfig":
        return cls(SetupKind.SETUP2, z_a, z_a + S1, S1, S2, f, **kw)

    @property
    def M(self) -> float:
        """Magnification of the source image on D_b (Setup 1)."""
        return self.S2 / (self.S1 + self.z_b)

    @property
    def S2f(self) -> float:
        """Lens-to-image distance of the focused object plane (Setup 2)."""
        return 1.0 / (1.0 / self.f - 1.0 / self.S1)

    @property
    def mu(self) -> float:
        """Absolute magnification of the object image (Setup 2)."""
        return self.S2f / self.S1

    def with_(self, **changes) -> "GeometryConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class RefocusParams:
    """Refocusing map ``rho_a -> alpha rho_a + beta rho_b``."""

    alpha: float
    beta: float

    @property
    def delta(self) -> float:
        return self.beta / self.alpha

    @property
    def focused(self) -> bool:
        return self.alpha == 1.0 and self.beta == 0.0


def refocus_params(geometry: GeometryConfig) -> RefocusParams:
    if geometry.kind is SetupKind.SETUP1:
        alpha = geometry.z_a / geometry.z_b
        beta = -(1.0 - alpha) / geometry.M
        if geometry.z_a == geometry.z_b:
            alpha, beta = 1.0, 0.0
        return RefocusParams(alpha, beta)
    if abs(geometry.S1 - geometry.f) <= geometry.rtol * geometry.f:
        raise ConfigError("S1 = f leaves the focused image distance undefined", "geometry.S1")
    alpha = geometry.S2 / geometry.S2f
    if alpha == 1.0:
        return RefocusParams(1.0, 0.0)
    return RefocusParams(alpha, 1.0 - alpha)


# ---------------------------------------------------------------------------
# objects and pupils


def _overlap(lo1, hi1, lo2, hi2):
    return np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None)


def _interval_coverage(lo: float, hi: float, centres: Array, pitch: float) -> Array:
    """Fraction of each pixel ``[c - p/2, c + p/2]`` covered by ``[lo, hi]``."""
    return _overlap(centres - pitch / 2, centres + pitch / 2, lo, hi) / pitch


@dataclass(frozen=True)
class ObjectMask:
    """Real transmittance ``A(rho)`` with values in ``[0, 1]``.

    Build instances with :meth:`double_slit`, :meth:`disk`, :meth:`gaussian`
    or :meth:`sampled`. Binary slits and sampled arrays are represented
    internally as piecewise-constant rectangles so that overlap integrals
    are exact.
    """

    kind: str
    dim: int
    width: float = 0.0  # slit width, or gaussian amplitude width
    separation: float = 0.0
    height: float = 0.0
    radius: float = 0.0
    values: Array | None = field(default=None, compare=False, repr=False)
    pitch: float = 0.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2", "object.dim")
        if self.kind == "double_slit":
            if not (self.width > 0 and self.separation >= self.width):
                raise ConfigError("need width > 0 and separation >= width", "object.width")
            if self.dim == 2 and not self.height > 0:
                raise ConfigError("2D slits need a positive height", "object.height")
        elif self.kind == "disk":
            if not self.radius > 0:
                raise ConfigError("radius must be positive", "object.radius")
        elif self.kind == "gaussian":
            if not self.width > 0:
                raise ConfigError("width must be positive", "object.width")
        elif self.kind == "sampled":
            v = np.asarray(self.values, dtype=float)
            if v.ndim != self.dim or not self.pitch > 0:
                raise ConfigError("sampled mask needs a dim-dimensional array and positive pitch", "object.values")
            if np.any(v < 0) or np.any(v > 1):
                raise ConfigError("transmittance must lie in [0, 1]", "object.values")
            object.__setattr__(self, "values", v)
        else:
            raise ConfigError(f"unknown object kind {self.kind!r}", "object.kind")

    # constructors -----------------------------------------------------------

    @classmethod
    def double_slit(cls, width: float, separation: float, dim: int = 1, height: float = 0.0):
        return cls("double_slit", dim, width=width, separation=separation, height=height)

    @classmethod
    def disk(cls, radius: float, dim: int = 2):
        """Disk of radius ``radius``; in 1D a single slit ``[-radius, radius]``."""
        return cls("disk", dim, radius=radius)

    @classmethod
    def gaussian(cls, width: float, dim: int = 1):
        """Gaussian aperture ``exp(-rho^2 / 2 width^2)``."""
        return cls("gaussian", dim, width=width)

    @classmethod
    def sampled(cls, values: Array, pitch: float):
        v = np.asarray(values, dtype=float)
        return cls("sampled", v.ndim, values=v, pitch=pitch)

    # piecewise representation -----------------------------------------------

    def pieces(self) -> list[tuple] | None:
        """Constant pieces ``(lo, hi, value)`` in 1D or ``(x0, x1, y0, y1, value)`` in 2D.

        ``None`` for smooth or non-rectangular masks.
        """
        if self.kind == "double_slit":
            a, d = self.width, self.separation
            xs = [(-d / 2 - a / 2, -d / 2 + a / 2), (d / 2 - a / 2, d / 2 + a / 2)]
            if self.dim == 1:
                return [(lo, hi, 1.0) for lo, hi in xs]
            h = self.height
            return [(lo, hi, -h / 2, h / 2, 1.0) for lo, hi in xs]
        if self.kind == "disk" and self.dim == 1:
            return [(-self.radius, self.radius, 1.0)]
        if self.kind == "sampled":
            v, p = self.values, self.pitch
            if self.dim == 1:
                c = _centres(v.shape[0], p)
                return [(ci - p / 2, ci + p / 2, vi) for ci, vi in zip(c, v) if vi > 0]
            cy, cx = _centres(v.shape[0], p), _centres(v.shape[1], p)
            return [
                (cx[j] - p / 2, cx[j] + p / 2, cy[i] - p / 2, cy[i] + p / 2, v[i, j])
                for i, j in zip(*np.nonzero(v))
            ]
        return None

    def breakpoints(self) -> list[float]:
        """Sorted discontinuity abscissae of a 1D mask (empty for smooth masks)."""
        pcs = self.pieces() if self.dim == 1 else None
        if not pcs:
            return []
        return sorted({x for lo, hi, _ in pcs for x in (lo, hi)})

    def half_extent(self) -> float:
        """Radius of a centred box that contains the support (8 widths for gaussians)."""
        if self.kind == "double_slit":
            r = (self.separation + self.width) / 2
            return max(r, self.height / 2) if self.dim == 2 else r
        if self.kind == "disk":
            return self.radius
        if self.kind == "gaussian":
            return 8.0 * self.width
        return max(self.values.shape) * self.pitch / 2

    # evaluation ------------------------------------------------------------

    def __call__(self, x: Array, y: Array | None = None) -> Array:
        x = np.asarray(x, dtype=float)
        if self.dim == 2 and y is None:
            raise ValueError("2D mask needs both coordinates")
        if self.kind == "gaussian":
            r2 = x**2 if self.dim == 1 else x**2 + np.asarray(y) ** 2
            return np.exp(-r2 / (2 * self.width**2))
        if self.kind == "disk" and self.dim == 2:
            return ((x**2 + np.asarray(y) ** 2) <= self.radius**2).astype(float)
        if self.kind == "sampled":
            return self._lookup(x, y)
        out = np.zeros(np.broadcast(x, x if y is None else y).shape)
        for pc in self.pieces():
            if self.dim == 1:
                lo, hi, v = pc
                out = np.where((x >= lo) & (x < hi), v, out)
            else:
                x0, x1, y0, y1, v = pc
                out = np.where((x >= x0) & (x < x1) & (y >= y0) & (y < y1), v, out)
        return out

    def _lookup(self, x, y):
        v, p = self.values, self.pitch
        ix = np.floor(x / p + v.shape[-1] / 2).astype(int)
        ok = (ix >= 0) & (ix < v.shape[-1])
        if self.dim == 1:
            return np.where(ok, v[np.clip(ix, 0, v.shape[0] - 1)], 0.0)
        iy = np.floor(np.asarray(y) / p + v.shape[0] / 2).astype(int)
        ok &= (iy >= 0) & (iy < v.shape[0])
        return np.where(ok, v[np.clip(iy, 0, v.shape[0] - 1), np.clip(ix, 0, v.shape[1] - 1)], 0.0)

    def sample(self, x: Array, y: Array | None = None, supersample: int = 8) -> Array:
        """Pixel-averaged transmittance on a uniform grid of pixel centres ``x`` (and ``y``).

        Exact for slits and sampled arrays; disks are supersampled.
        """
        x = np.asarray(x, dtype=float)
        px = x[1] - x[0] if x.size > 1 else 1.0
        pcs = self.pieces()
        if self.dim == 1:
            if pcs is None:
                return self(x)
            out = np.zeros_like(x)
            for lo, hi, v in pcs:
                out += v * _interval_coverage(lo, hi, x, px)
            return out
        y = np.asarray(y, dtype=float)
        py = y[1] - y[0] if y.size > 1 else 1.0
        if pcs is not None:
            out = np.zeros((y.size, x.size))
            for x0, x1, y0, y1, v in pcs:
                out += v * np.outer(_interval_coverage(y0, y1, y, py), _interval_coverage(x0, x1, x, px))
            return out
        if self.kind == "gaussian":
            return self(x[None, :], y[:, None])
        s = supersample
        off = (np.arange(s) - (s - 1) / 2) / s
        xx = (x[None, :, None] + px * off[None, None, :])
        yy = (y[:, None, None] + py * off[None, None, :])
        acc = np.zeros((y.size, x.size))
        for dy in range(s):
            acc += self(xx, yy[:, :, dy:dy + 1]).mean(axis=2)
        return acc / s

    # integrals -------------------------------------------------------------

    def area2(self) -> float:
        """``int |A|^2``: the transmissive area of a binary object."""
        return self._power_integral(2)

    def area4(self) -> float:
        """``int |A|^4``."""
        return self._power_integral(4)

    def _power_integral(self, n: int) -> float:
        if self.kind == "gaussian":
            return (math.sqrt(2 * math.pi / n) * self.width) ** self.dim
        if self.kind == "disk" and self.dim == 2:
            return math.pi * self.radius**2
        if self.kind == "sampled":
            return float(np.sum(self.values**n) * self.pitch**self.dim)
        if self.dim == 1:
            return float(sum(v**n * (hi - lo) for lo, hi, v in self.pieces()))
        return float(sum(v**n * (x1 - x0) * (y1 - y0) for x0, x1, y0, y1, v in self.pieces()))

    def autocorrelation(self, u: Array, uy: Array | None = None) -> Array:
        """``C(u) = int |A(o)|^2 |A(o - u)|^2 do`` evaluated at shifts ``u`` (and ``uy``)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            r2 = u**2 if self.dim == 1 else u**2 + np.asarray(uy) ** 2
            return self.area4() * np.exp(-r2 / (2 * self.width**2))
        if self.kind == "disk" and self.dim == 2:
            s = np.minimum(np.hypot(u, uy), 2 * self.radius)
            r = self.radius
            return 2 * r**2 * np.arccos(s / (2 * r)) - (s / 2) * np.sqrt(4 * r**2 - s**2)
        pcs = self.pieces()
        out = np.zeros(np.broadcast(u, u if uy is None else uy).shape)
        if self.dim == 1:
            for lo1, hi1, v1 in pcs:
                for lo2, hi2, v2 in pcs:
                    out += (v1 * v2) ** 2 * _overlap(lo1, hi1, lo2 + u, hi2 + u)
            return out
        uy = np.asarray(uy, dtype=float)
        for x0, x1, y0, y1, v1 in pcs:
            for a0, a1, b0, b1, v2 in pcs:
                out += (v1 * v2) ** 2 * _overlap(x0, x1, a0 + u, a1 + u) * _overlap(y0, y1, b0 + uy, b1 + uy)
        return out

    def gaussian_weighted_autocorrelation(self, width: float) -> float:
        """``int d^d u exp(-u^2 / width^2) C(u)``.

        Exact for gaussian masks, double slits and 1D piecewise masks; disks use
        a radial quadrature.  As ``width -> 0`` this tends to
        ``(sqrt(pi) width)^d area4`` and as ``width -> inf`` to ``area2^2``.
        """
        if width == 0:
            return 0.0
        if self.kind == "gaussian":
            s2 = 2 * self.width**2
            return self.area4() * (math.sqrt(math.pi / (1 / width**2 + 1 / s2))) ** self.dim
        if self.kind == "disk" and self.dim == 2:
            from .quadrature import integrate_1d

            r = self.radius

            def f(t):
                u = t * width
                return 2 * math.pi * u * np.exp(-t * t) * self.autocorrelation(u, 0.0) * width

            hi = min(2 * r / width, 12.0)
            return integrate_1d(f, 0.0, hi, rtol=1e-10).value
        pcs = self.pieces()
        if self.dim == 1:
            return sum((v1 * v2) ** 2 * _gauss_trapezoid(lo1, hi1, lo2, hi2, width)
                       for lo1, hi1, v1 in pcs for lo2, hi2, v2 in pcs)
        return sum((v1 * v2) ** 2 * _gauss_trapezoid(x0, x1, a0, a1, width) * _gauss_trapezoid(y0, y1, b0, b1, width)
                   for x0, x1, y0, y1, v1 in pcs for a0, a1, b0, b1, v2 in pcs)


def _antideriv2(t: Array, w: float) -> Array:
    """Second antiderivative of ``exp(-t^2/w^2)``, up to terms linear in ``t``."""
    s = math.sqrt(math.pi) * w / 2
    return s * t * special.erf(t / w) + (w * w / 2) * (np.exp(-(t / w) ** 2) - 1.0)


def _gauss_trapezoid(lo1, hi1, lo2, hi2, w):
    """``int du exp(-u^2/w^2) |[lo1,hi1] cap ([lo2,hi2] + u)|`` in closed form.

    The overlap length is ``sum_j s_j max(c_j - u, 0)``; each ramp integrates
    to a second antiderivative of the Gaussian, and the linear parts cancel.
    """
    c = np.array([hi1 - lo2, hi1 - hi2, lo1 - lo2, lo1 - hi2])
    s = np.array([1.0, -1.0, -1.0, 1.0])
    return float(np.sum(s * _antideriv2(c, w)))


def _centres(n: int, pitch: float) -> Array:
    return (np.arange(n) - (n - 1) / 2.0) * pitch


@dataclass(frozen=True)
class LensPupil:
    """Lens pupil ``P(rho)``.

    ``gaussian`` uses ``P = exp(-rho^2 / 4 width^2)`` so that
    ``A_lens = 2 pi width^2`` in 2D; ``circular`` is a hard aperture of
    radius ``width``; ``unity`` has no aperture.
    """

    kind: str = "unity"
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "circular", "unity"):
            raise ConfigError(f"unknown pupil kind {self.kind!r}", "pupil.kind")
        if self.kind != "unity" and not self.width > 0:
            raise ConfigError("pupil width must be positive", "pupil.width")

    def __call__(self, x: Array, y: Array | None = None) -> Array:
        r2 = np.asarray(x, dtype=float) ** 2
        if y is not None:
            r2 = r2 + np.asarray(y) ** 2
        if self.kind == "gaussian":
            return np.exp(-r2 / (4 * self.width**2))
        if self.kind == "circular":
            return (r2 <= self.width**2).astype(float)
        return np.ones_like(r2)

    def area(self, dim: int = 2) -> float:
        """Effective area ``int |P|^2`` (a length in 1D)."""
        if self.kind == "gaussian":
            return (math.sqrt(2 * math.pi) * self.width) ** dim
        if self.kind == "circular":
            return math.pi * self.width**2 if dim == 2 else 2 * self.width
        return math.inf


# ---------------------------------------------------------------------------
# sampled fields and propagation


@dataclass(frozen=True)
class FieldGrid:
    """Complex amplitude sampled on a centred uniform grid."""

    values: Array
    pitch: float
    plane_label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim not in (1, 2):
            raise ConfigError("field values must be 1D or 2D", "field.values")
        if not self.pitch > 0:
            raise ConfigError("pitch must be positive", "field.pitch")
        object.__setattr__(self, "values", v.astype(complex, copy=False))

    @classmethod
    def zeros(cls, n_x: int, pitch: float, n_y: int | None = None, plane_label: str = "") -> "FieldGrid":
        shape = (n_x,) if n_y is None else (n_y, n_x)
        return cls(np.zeros(shape, complex), pitch, plane_label)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def n_x(self) -> int:
        return self.values.shape[-1]

    @property
    def n_y(self) -> int:
        return 1 if self.dim == 1 else self.values.shape[0]

    @property
    def x(self) -> Array:
        return _centres(self.n_x, self.pitch)

    @property
    def y(self) -> Array:
        return _centres(self.n_y, self.pitch)

    @property
    def extent(self) -> float:
        return max(self.n_x, self.n_y) * self.pitch

    def power(self) -> float:
        """``sum |V|^2 pitch^d``."""
        return float(np.sum(np.abs(self.values) ** 2) * self.pitch**self.dim)

    def intensity(self) -> Array:
        return np.abs(self.values) ** 2


def grid_coords(n: int, pitch: float) -> Array:
    """Centred pixel coordinates of an ``n``-sample axis."""
    return _centres(n, pitch)


def check_fresnel_sampling(pitch_in: float, extent_in: float, extent_out: float, z: float,
                           wavelength: float) -> None:
    """Nyquist bound for the sampled Fresnel kernel.

    The kernel phase ``k (x - y)^2 / 2z`` must change by less than pi between
    neighbouring input samples for every input/output pair, which gives
    ``pitch_in <= wavelength z / (extent_in + extent_out)``.
    """
    bound = wavelength * z / (extent_in + extent_out)
    if pitch_in > bound * (1 + 1e-12):
        raise SamplingError(
            f"input pitch {pitch_in:.3e} m exceeds the Fresnel-kernel bound {bound:.3e} m "
            f"(z = {z:.4g} m, extents {extent_in:.3e} + {extent_out:.3e} m)"
        )


def fresnel_matrix(x_in: Array, x_out: Array, z: float, k: float, weight: float | None = None) -> Array:
    """Dense 1D Fresnel operator ``G[m, n] = sqrt(k / 2 pi i z) exp(i k (x_m - x_n)^2 / 2 z) w``.

    ``weight`` defaults to the input pitch (rectangle-rule quadrature).
    """
    if not z > 0:
        raise ConfigError("propagation distance must be positive", "distance")
    x_in = np.asarray(x_in, dtype=float)
    x_out = np.asarray(x_out, dtype=float)
    if weight is None:
        weight = x_in[1] - x_in[0] if x_in.size > 1 else 1.0
    pref = np.sqrt(k / (2 * np.pi * z)) * np.exp(-1j * np.pi / 4) * weight
    d = x_out[:, None] - x_in[None, :]
    return pref * np.exp(1j * k * d * d / (2 * z))


def fresnel_propagate(field: FieldGrid, distance: float, k: float, n_out: int | None = None,
                      pitch_out: float | None = None, check_sampling: bool = True,
                      plane_label: str = "") -> FieldGrid:
    """Paraxial free-space propagation by direct discrete Fresnel transform.

    The output grid defaults to the input grid. In 2D the separable kernel is
    applied per axis.
    """
    if not distance > 0:
        raise ConfigError("propagation distance must be positive", "distance")
    n_out = field.n_x if n_out is None else int(n_out)
    pitch_out = field.pitch if pitch_out is None else float(pitch_out)
    wavelength = 2 * np.pi / k
    if check_sampling:
        check_fresnel_sampling(field.pitch, field.extent, n_out * pitch_out, distance, wavelength)
    xo = _centres(n_out, pitch_out)
    gx = fresnel_matrix(field.x, xo, distance, k)
    if field.dim == 1:
        out = gx @ field.values
    else:
        gy = fresnel_matrix(field.y, xo, distance, k)
        out = gy @ field.values @ gx.T
    return FieldGrid(out, pitch_out, plane_label or field.plane_label)


def lens_phase(x: Array, focal_length: float, k: float, y: Array | None = None) -> Array:
    """Thin-lens transmission phase ``exp(-i k rho^2 / 2 f)``."""
    r2 = np.asarray(x, dtype=float) ** 2
    if y is not None:
        r2 = r2 + np.asarray(y) ** 2
    return np.exp(-1j * k * r2 / (2 * focal_length))


def apply_mask(field: FieldGrid, mask: ObjectMask | LensPupil | None, *, focal_length: float | None = None,
               k: float | None = None) -> FieldGrid:
    """Multiply by an object transmittance, or by a pupil and thin-lens phase.

    Lenses need ``focal_length`` and ``k``. Passing ``mask=None`` with a focal
    length applies a pupil-free thin lens.
    """
    x = field.x
    y = field.y if field.dim == 2 else None
    if isinstance(mask, ObjectMask):
        if mask.dim != field.dim:
            raise ConfigError("mask and field dimensionality differ", "object.dim")
        t = mask.sample(x, y) if field.dim == 1 else mask.sample(x, y)
        return FieldGrid(field.values * t, field.pitch, field.plane_label)
    if focal_length is None or k is None:
        raise ConfigError("a lens needs focal_length and k", "lens")
    if field.dim == 1:
        t = lens_phase(x, focal_length, k)
        if mask is not None:
            t = t * mask(x)
    else:
        xx, yy = np.meshgrid(x, y)
        t = lens_phase(xx, focal_length, k, yy)
        if mask is not None:
            t = t * mask(xx, yy)
    return FieldGrid(field.values * t, field.pitch, field.plane_label)
