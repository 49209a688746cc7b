"""Correlation estimators on simulated or loaded frame ensembles.

Every estimate is built in two passes: detector means first, then per-frame
products of fluctuations. The refocused observable of frame ``f`` is

    S_f(x) = sum_j c_j dI_A,f(alpha x + beta b_j) dI_B,f(b_j)

with ``c_j = pitch_b^d g(b_j)`` and ``dI_A`` linearly interpolated on the D_a
grid. ``Sigma_ref = sum_f S_f / (N - 1)`` (unbiased for the covariance) and
``F`` is the sample variance of ``S_f``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, CoverageError
from .optics import RefocusParams
from .speckle import FrameEnsemble
from .stats import BlockMoments


@dataclass(frozen=True)
class CorrelationTensor:
    """Sample ``Gamma_AB(rho_a, rho_b)`` with its standard-error map.

    Arrays are indexed ``[a_pixel, b_pixel]`` over flattened detector pixels.
    """

    gamma: np.ndarray
    stderr: np.ndarray
    n_frames: int
    pitch_a: float
    pitch_b: float
    dim: int = 1


def detector_means(ensemble: FrameEnsemble) -> tuple[np.ndarray, np.ndarray]:
    return ensemble.I_A.mean(axis=0), ensemble.I_B.mean(axis=0)


def estimate_gamma_ab(ensemble: FrameEnsemble, block: int = 512) -> CorrelationTensor:
    """``Gamma_AB = sum_f dI_A dI_B / (N - 1)`` with a per-entry standard error."""
    n = len(ensemble)
    if n < 2:
        raise ConfigError("need at least two frames", "n_frames")
    ma, mb = detector_means(ensemble)
    s1 = np.zeros((ensemble.n_a, ensemble.n_b))
    s2 = np.zeros_like(s1)
    for lo in range(0, n, block):
        da = ensemble.I_A[lo:lo + block] - ma
        db = ensemble.I_B[lo:lo + block] - mb
        s1 += da.T @ db
        s2 += (da**2).T @ (db**2)
    gamma = s1 / (n - 1)
    # variance of the per-frame product, estimated from its first two moments
    var = np.clip(s2 / n - (s1 / n) ** 2, 0.0, None)
    return CorrelationTensor(gamma, np.sqrt(var / n), n, ensemble.pitch_a, ensemble.pitch_b, ensemble.dim)


# ---------------------------------------------------------------------------
# refocusing


def interp_weights(coords: np.ndarray, u: np.ndarray):
    """Linear interpolation of a uniform grid at points ``u``.

    Returns ``(i0, w0, w1, inside)``; points outside ``[coords[0], coords[-1]]``
    get zero weight and ``inside = False``.
    """
    p = coords[1] - coords[0] if coords.size > 1 else 1.0
    t = (u - coords[0]) / p
    inside = (t >= -1e-9) & (t <= coords.size - 1 + 1e-9)
    tc = np.clip(t, 0.0, coords.size - 1)
    i0 = np.minimum(np.floor(tc).astype(int), max(coords.size - 2, 0))
    w1 = tc - i0
    w0 = 1.0 - w1
    return i0, np.where(inside, w0, 0.0), np.where(inside, w1, 0.0), inside


@dataclass
class RefocusPlan:
    """Interpolation stencils for every (refocused point, D_b pixel) pair.

    ``idx[x, j, m]`` and ``w[x, j, m]`` list the D_a pixels (flattened) and
    interpolation weights that realise ``dI_A(alpha x + beta b_j)``; ``c[j]``
    is the D_b quadrature weight.
    """

    x: np.ndarray
    idx: np.ndarray
    w: np.ndarray
    c: np.ndarray
    outside_fraction: np.ndarray
    trivial: bool = False


def plan_refocus(coords_a: np.ndarray, coords_b: np.ndarray, params: RefocusParams, dim: int,
                 x_points: np.ndarray | None = None, b_weight: Callable | None = None,
                 coverage_tol: float = 0.01, on_coverage: str = "raise") -> RefocusPlan:
    """Build the refocusing stencil.

    ``x_points`` are refocused coordinates (an ``(n, 2)`` array in 2D);
    the default is every D_a pixel centre. ``b_weight(b2)`` multiplies each D_b
    pixel by a function of ``|b|^2``.
    """
    pb = (coords_b[1] - coords_b[0]) if coords_b.size > 1 else 1.0
    if dim == 1:
        B = coords_b[:, None]
        x = coords_a[:, None] if x_points is None else np.asarray(x_points, float).reshape(-1, 1)
    else:
        by, bx = np.meshgrid(coords_b, coords_b, indexing="ij")
        B = np.stack([bx.ravel(), by.ravel()], -1)
        if x_points is None:
            ay, ax = np.meshgrid(coords_a, coords_a, indexing="ij")
            x = np.stack([ax.ravel(), ay.ravel()], -1)
        else:
            x = np.asarray(x_points, float).reshape(-1, 2)
    c = np.full(B.shape[0], pb**dim)
    if b_weight is not None:
        c = c * b_weight(np.sum(B**2, axis=1))
    trivial = params.beta == 0
    na = coords_a.size
    if dim == 1:
        u = params.alpha * x[:, None, 0] + params.beta * B[None, :, 0]
        i0, w0, w1, ins = interp_weights(coords_a, u)
        idx = np.stack([i0, np.minimum(i0 + 1, na - 1)], -1)
        w = np.stack([w0, w1], -1)
    else:
        ux = params.alpha * x[:, None, 0] + params.beta * B[None, :, 0]
        uy = params.alpha * x[:, None, 1] + params.beta * B[None, :, 1]
        ix, wx0, wx1, insx = interp_weights(coords_a, ux)
        iy, wy0, wy1, insy = interp_weights(coords_a, uy)
        ix1, iy1 = np.minimum(ix + 1, na - 1), np.minimum(iy + 1, na - 1)
        idx = np.stack([iy * na + ix, iy * na + ix1, iy1 * na + ix, iy1 * na + ix1], -1)
        w = np.stack([wy0 * wx0, wy0 * wx1, wy1 * wx0, wy1 * wx1], -1)
        ins = insx & insy
    active = c > 0
    out = np.sum(~ins[:, active], axis=1) / max(int(active.sum()), 1)
    if np.any(out > coverage_tol):
        msg = (f"{np.max(out):.1%} of refocusing samples fall outside D_a for some points; "
               "enlarge D_a, shrink D_b or restrict the refocused points")
        if on_coverage == "raise":
            raise CoverageError(msg)
    return RefocusPlan(x if dim == 2 else x[:, 0], idx, w, c, out, trivial)


@dataclass
class RefocusedImage:
    """Refocused image with its per-frame variance.

    ``snr = sigma_ref / sqrt(F) * sqrt(n_frames)``; ``snr_per_sqrt_frame``
    drops the ``sqrt(n_frames)``.
    """

    x: np.ndarray
    sigma_ref: np.ndarray
    F: np.ndarray
    n_frames: int
    outside_fraction: np.ndarray
    dim: int = 1
    metadata: dict = field(default_factory=dict)
    m4: np.ndarray | None = None

    @property
    def snr_per_sqrt_frame(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.sigma_ref / np.sqrt(self.F)

    @property
    def snr(self) -> np.ndarray:
        return self.snr_per_sqrt_frame * math.sqrt(self.n_frames)

    @property
    def sigma_stderr(self) -> np.ndarray:
        """Standard error of ``sigma_ref``."""
        return np.sqrt(self.F / self.n_frames)

    @property
    def F_stderr(self) -> np.ndarray:
        """Standard error of ``F`` from the sample fourth central moment."""
        if self.m4 is None:
            return self.F * math.sqrt(2.0 / (self.n_frames - 1))
        return np.sqrt(np.clip(self.m4 - self.F**2, 0.0, None) / self.n_frames)


def per_frame_observable(plan: RefocusPlan, dA: np.ndarray, dB: np.ndarray) -> np.ndarray:
    """``S_f(x)`` for a block of fluctuation frames; shape ``(n_frames, n_x)``."""
    if plan.trivial:
        # every D_b pixel reads D_a at the same point
        lin = dB @ plan.c
        a = np.einsum("fxm,xm->fx", dA[:, plan.idx[:, 0, :]], plan.w[:, 0, :])
        return a * lin[:, None]
    out = np.empty((dA.shape[0], plan.idx.shape[0]))
    for xi in range(plan.idx.shape[0]):
        g = np.einsum("fjm,jm->fj", dA[:, plan.idx[xi]], plan.w[xi] * plan.c[:, None])
        out[:, xi] = np.einsum("fj,fj->f", g, dB)
    return out


def refocus(ensemble: FrameEnsemble, params: RefocusParams, x_points=None, b_weight: Callable | None = None,
            block_size: int = 256, coverage_tol: float = 0.01, on_coverage: str = "raise") -> RefocusedImage:
    """Refocused image ``Sigma_ref`` and per-frame variance ``F`` at each refocused point."""
    n = len(ensemble)
    if n < 2:
        raise ConfigError("need at least two frames", "n_frames")
    plan = plan_refocus(ensemble.coords_a(), ensemble.coords_b(), params, ensemble.dim, x_points, b_weight,
                        coverage_tol, on_coverage)
    ma, mb = detector_means(ensemble)
    acc = BlockMoments(block_size)
    blocks = []
    for lo in range(0, n, block_size):
        hi = min(lo + block_size, n)
        S = per_frame_observable(plan, ensemble.I_A[lo:hi] - ma, ensemble.I_B[lo:hi] - mb)
        acc.add(ensemble.frame_indices[lo:hi], S)
        blocks.append(S)
    m = acc.finalize()
    m4 = sum(np.sum((S - m.mean) ** 4, axis=0) for S in blocks) / n
    sigma = m.mean * n / (n - 1)
    return RefocusedImage(plan.x, sigma, m.variance(ddof=1), n, plan.outside_fraction, ensemble.dim,
                          {"alpha": params.alpha, "beta": params.beta}, m4)


def empirical_snr_curve(ensemble: FrameEnsemble, params: RefocusParams, n_values: Sequence[int], x_points=None,
                        b_weight: Callable | None = None) -> list[tuple[int, np.ndarray]]:
    """Empirical ``R`` on frame prefixes of the given sizes."""
    out = []
    for nf in n_values:
        if nf > len(ensemble):
            raise ConfigError(f"{nf} frames requested, {len(ensemble)} available", "n_values")
        img = refocus(ensemble.prefix(nf), params, x_points, b_weight)
        out.append((nf, img.snr))
    return out


def write_image_csv(path, image: RefocusedImage, length_unit: str = "m", intensity_unit: str = "a.u."):
    """One row per refocused point: ``x[, y], sigma_ref, F, R`` (``R`` per square-root frame)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        pos = ["x", "y"] if image.dim == 2 else ["x"]
        w.writerow([f"{p} [{length_unit}]" for p in pos]
                   + [f"sigma_ref [{intensity_unit}^2]", f"F [{intensity_unit}^4]", "R [1/sqrt(frame)]"])
        xs = np.atleast_2d(image.x.T).T if image.dim == 2 else image.x[:, None]
        for row, s, f, r in zip(xs, image.sigma_ref, image.F, image.snr_per_sqrt_frame):
            w.writerow([f"{v:.12g}" for v in row] + [f"{s:.12g}", f"{f:.12g}", f"{r:.12g}"])
