"""Chaotic source realisations and frame synthesis for both arrangements."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError
from .optics import (
    FieldGrid,
    GeometryConfig,
    LensPupil,
    ObjectMask,
    SetupKind,
    SourceModel,
    check_fresnel_sampling,
    fresnel_matrix,
    grid_coords,
    lens_phase,
)


@dataclass(frozen=True)
class GridSpec:
    """Uniform centred grid: ``n`` samples per axis at ``pitch``."""

    n: int
    pitch: float

    def __post_init__(self):
        if int(self.n) < 1 or not self.pitch > 0:
            raise ConfigError("grid needs n >= 1 and pitch > 0", "grid")

    @property
    def coords(self) -> np.ndarray:
        return grid_coords(self.n, self.pitch)

    @property
    def extent(self) -> float:
        return self.n * self.pitch


@dataclass(frozen=True)
class SpeckleConfig:
    """Source statistics, source-plane sampling and frame budget."""

    source: SourceModel
    grid: GridSpec
    master_seed: int = 0
    n_frames: int = 1000
    dim: int = 1

    def __post_init__(self):
        if self.n_frames < 1:
            raise ConfigError("must be at least 1", "speckle.n_frames")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2", "mode")
        if self.grid.extent < 8 * self.source.sigma_i * (1 - 1e-12):
            raise ConfigError("source grid must span at least 8 sigma_i", "speckle.grid")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", "speckle.master_seed")

    @property
    def n_pixels(self) -> int:
        return self.grid.n**self.dim

    def pixel_variance(self) -> np.ndarray:
        """``I_s exp(-rho^2 / 2 sigma_i^2) (sqrt(2 pi) sigma_g / pitch)^d`` per pixel."""
        x = self.grid.coords
        r2 = x**2 if self.dim == 1 else x[None, :] ** 2 + x[:, None] ** 2
        scale = (math.sqrt(2 * math.pi) * self.source.sigma_g / self.grid.pitch) ** self.dim
        return self.source.envelope(r2) * scale


def sample_source_field(config: SpeckleConfig, frame_index: int) -> FieldGrid:
    """One delta-correlated circular Gaussian source realisation."""
    var = config.pixel_variance()
    z = rng.circular_gaussian(config.master_seed, frame_index, var.size).reshape(var.shape)
    return FieldGrid(z * np.sqrt(var), config.grid.pitch, "source")


def sample_source_batch(config: SpeckleConfig, start: int, stop: int) -> np.ndarray:
    """Source fields for frames ``start..stop-1``, shape ``(stop - start, n_pixels)``."""
    sd = np.sqrt(config.pixel_variance()).ravel()
    out = np.empty((stop - start, sd.size), complex)
    for i, f in enumerate(range(start, stop)):
        out[i] = rng.circular_gaussian(config.master_seed, f, sd.size) * sd
    return out


# ---------------------------------------------------------------------------
# optical transfer


@dataclass(frozen=True)
class SimulationGrids:
    """Sampling of every plane met along the two paths.

    ``object_plane`` and ``lens_plane`` only need to cover the object support
    and the illuminated part of the lens; the finite lens grid acts as an
    implicit aperture and is recorded with results.
    """

    detector_a: GridSpec
    detector_b: GridSpec
    object_plane: GridSpec
    lens_plane: GridSpec


def _chain_1d(steps, x_src):
    """Compose ``[(kind, payload)]`` steps into one transfer matrix."""
    t = None
    x_cur = x_src
    for kind, payload in steps:
        if kind == "prop":
            x_out, z, k = payload
            g = fresnel_matrix(x_cur, x_out, z, k)
            t = g if t is None else g @ t
            x_cur = x_out
        else:
            t = payload[:, None] * t
    return t


class _Path:
    """A source-to-detector path stored as per-axis propagators and pointwise factors."""

    def __init__(self, steps, x_src, dim):
        self.dim = dim
        self.steps = steps
        if dim == 1:
            self.matrix = _chain_1d(steps, x_src)
        else:
            ops = []
            x_cur = x_src
            for kind, payload in steps:
                if kind == "prop":
                    x_out, z, k = payload
                    ops.append(("prop", fresnel_matrix(x_cur, x_out, z, k)))
                    x_cur = x_out
                else:
                    ops.append(("mul", payload))
            self.ops = ops

    def apply(self, batch: np.ndarray) -> np.ndarray:
        """Detector fields for source fields ``batch`` of shape ``(n_frames, n_pixels)``."""
        if self.dim == 1:
            return batch @ self.matrix.T
        n = int(round(math.sqrt(batch.shape[1])))
        u = batch.reshape(batch.shape[0], n, n)
        for kind, op in self.ops:
            if kind == "prop":
                u = np.einsum("yi,fij,xj->fyx", op, u, op, optimize=True)
            else:
                u = u * op
        return u.reshape(batch.shape[0], -1)


def build_paths(speckle: SpeckleConfig, geometry: GeometryConfig, obj: ObjectMask, pupil: LensPupil | None,
                grids: SimulationGrids, check_sampling: bool = True) -> tuple[_Path, _Path]:
    """Transfer operators from the source plane to D_a and D_b."""
    if obj.dim != speckle.dim:
        raise ConfigError("object dimensionality differs from simulation mode", "object.dim")
    k = speckle.source.k
    lam = speckle.source.wavelength
    dim = speckle.dim
    src = speckle.grid
    pupil = pupil or LensPupil("unity")

    def prop(g_in: GridSpec, g_out: GridSpec, z: float):
        if check_sampling:
            check_fresnel_sampling(g_in.pitch, g_in.extent, g_out.extent, z, lam)
        return ("prop", (g_out.coords, z, k))

    def plane_factor(values_1d_or_2d):
        return ("mul", values_1d_or_2d if dim == 1 else values_1d_or_2d)

    xo = grids.object_plane.coords
    xl = grids.lens_plane.coords
    if dim == 1:
        a_obj = obj.sample(xo)
        lens = pupil(xl) * lens_phase(xl, geometry.f, k)
    else:
        a_obj = obj.sample(xo, xo)
        xx, yy = np.meshgrid(xl, xl)
        lens = pupil(xx, yy) * lens_phase(xx, geometry.f, k, yy)

    if geometry.kind is SetupKind.SETUP1:
        steps_a = [prop(src, grids.detector_a, geometry.z_a)]
        steps_b = [
            prop(src, grids.object_plane, geometry.z_b),
            plane_factor(a_obj),
            prop(grids.object_plane, grids.lens_plane, geometry.S1),
            plane_factor(lens),
            prop(grids.lens_plane, grids.detector_b, geometry.S2),
        ]
    else:
        steps_a = [
            prop(src, grids.object_plane, geometry.z_a),
            plane_factor(a_obj),
            prop(grids.object_plane, grids.lens_plane, geometry.S1),
            plane_factor(lens),
            prop(grids.lens_plane, grids.detector_a, geometry.S2),
        ]
        steps_b = [prop(src, grids.detector_b, geometry.z_b)]
    x_src = src.coords
    return _Path(steps_a, x_src, dim), _Path(steps_b, x_src, dim)


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class FramePair:
    I_A: np.ndarray
    I_B: np.ndarray
    frame_index: int


@dataclass
class FrameEnsemble:
    """Intensity frames on both detectors, one row per frame.

    In 2D mode rows are flattened ``(n_y * n_x)`` images.
    """

    I_A: np.ndarray
    I_B: np.ndarray
    pitch_a: float
    pitch_b: float
    dim: int = 1
    frame_indices: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.I_A = np.asarray(self.I_A, dtype=float)
        self.I_B = np.asarray(self.I_B, dtype=float)
        if self.I_A.shape[0] != self.I_B.shape[0]:
            raise ConfigError("detector frame counts differ", "frames")
        if self.frame_indices is None:
            self.frame_indices = np.arange(self.I_A.shape[0])

    def __len__(self) -> int:
        return self.I_A.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield FramePair(self.I_A[i], self.I_B[i], int(self.frame_indices[i]))

    @property
    def n_a(self) -> int:
        return self.I_A.shape[1]

    @property
    def n_b(self) -> int:
        return self.I_B.shape[1]

    def side(self, which: str) -> int:
        n = self.n_a if which == "a" else self.n_b
        return n if self.dim == 1 else int(round(math.sqrt(n)))

    def coords_a(self) -> np.ndarray:
        return grid_coords(self.side("a"), self.pitch_a)

    def coords_b(self) -> np.ndarray:
        return grid_coords(self.side("b"), self.pitch_b)

    def prefix(self, n: int) -> "FrameEnsemble":
        return FrameEnsemble(self.I_A[:n], self.I_B[:n], self.pitch_a, self.pitch_b, self.dim,
                             self.frame_indices[:n], dict(self.metadata))

    def subset(self, rows) -> "FrameEnsemble":
        return FrameEnsemble(self.I_A[rows], self.I_B[rows], self.pitch_a, self.pitch_b, self.dim,
                             self.frame_indices[rows], dict(self.metadata))


def worker_count(requested: int | None = None) -> int:
    """Worker threads: ``requested``, capped by ``CPI_THREADS`` and the CPU count."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("CPI_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError("CPI_THREADS must be an integer", "CPI_THREADS") from None
    return max(1, n)


def simulate_frames(speckle: SpeckleConfig, geometry: GeometryConfig, obj: ObjectMask,
                    pupil: LensPupil | None, grids: SimulationGrids, workers: int | None = None,
                    chunk: int = 256, first_frame: int = 0) -> FrameEnsemble:
    """Generate ``speckle.n_frames`` frame pairs starting at ``first_frame``.

    Frames are independent, so chunks are farmed out to threads; the result
    does not depend on the number of workers.
    """
    path_a, path_b = build_paths(speckle, geometry, obj, pupil, grids)
    n = speckle.n_frames
    starts = list(range(first_frame, first_frame + n, chunk))

    def run(start):
        stop = min(start + chunk, first_frame + n)
        v = sample_source_batch(speckle, start, stop)
        return np.abs(path_a.apply(v)) ** 2, np.abs(path_b.apply(v)) ** 2

    nw = worker_count(workers)
    if nw == 1 or len(starts) == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(run, starts))
    I_A = np.concatenate([p[0] for p in parts])
    I_B = np.concatenate([p[1] for p in parts])
    meta = {
        "setup": geometry.kind.value,
        "master_seed": speckle.master_seed,
        "lens_plane_extent_m": grids.lens_plane.extent,
        "object_plane_extent_m": grids.object_plane.extent,
    }
    return FrameEnsemble(I_A, I_B, grids.detector_a.pitch, grids.detector_b.pitch, speckle.dim,
                         np.arange(first_frame, first_frame + n), meta)


def exact_correlations(speckle: SpeckleConfig, geometry: GeometryConfig, obj: ObjectMask,
                       pupil: LensPupil | None, grids: SimulationGrids):
    """Exact field correlations ``(W_AA, W_BB, W_AB)`` of the discrete model (1D only).

    These are the ensemble expectations the simulator converges to.
    """
    if speckle.dim != 1:
        raise ConfigError("exact correlations are available in 1D mode only", "mode")
    path_a, path_b = build_paths(speckle, geometry, obj, pupil, grids)
    var = speckle.pixel_variance()
    ta, tb = path_a.matrix, path_b.matrix
    return (ta * var) @ ta.conj().T, (tb * var) @ tb.conj().T, (ta * var) @ tb.conj().T
