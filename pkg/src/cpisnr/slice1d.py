"""Exact moments of the refocused observable for the discrete 1D model.

For gaussian fields the single-frame observable
``S = sum_pq C_pq dI_A[p] dI_B[q]`` has mean ``sum C_pq |W_AB[p,q]|^2`` and a
variance that splits, by the complex Wick theorem, into

    F0 = sum C_pq C_rs |W_AA[p,r]|^2 |W_BB[q,s]|^2
    F1 = sum C_pq C_rs |W_AB[p,s]|^2 |W_AB[r,q]|^2
    F2 = sum C_pq C_rs W_AB[p,q] W_AB*[r,q] W_AB[r,s] W_AB*[p,s]
    F3 = sum C_pq C_rs W_AB[p,q] W_BB[q,s] W_AB*[r,s] W_AA[r,p]
    F4 = sum C_pq C_rs W_AA[p,r] W_AB[r,q] W_BB[q,s] W_AB*[p,s]

with ``Var S = F0 + F1 + 2 Re(F2 + F3 + F4)``. ``C`` is the refocusing
stencil (interpolation weight times D_b quadrature weight), so these are the
exact ensemble values the Monte Carlo estimator converges to, and fine grids
turn them into quadratures of the continuum integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .estimator import RefocusPlan, plan_refocus
from .optics import GeometryConfig, LensPupil, ObjectMask, RefocusParams, SetupKind, refocus_params
from .speckle import GridSpec, SimulationGrids, SpeckleConfig, exact_correlations


def _ceil_n(extent: float, pitch: float) -> int:
    return int(math.ceil(extent / pitch - 1e-9))


def suggest_grids(speckle_source, geometry: GeometryConfig, obj: ObjectMask, pupil: LensPupil | None,
                  detector_a: GridSpec, detector_b: GridSpec, oversample: float = 1.25,
                  object_samples: int = 10, lens_margin: float = 1.2) -> tuple[GridSpec, SimulationGrids]:
    """Source grid and plane grids meeting the Fresnel sampling bound on every hop.

    The object plane resolves the smallest mask feature with
    ``object_samples`` pixels; the lens plane covers the object support
    plus the spread of the source-side rays (``5 sigma_i`` over the distance to
    the object), capped by a finite pupil.
    """
    lam = speckle_source.wavelength
    si = speckle_source.sigma_i
    half_obj = obj.half_extent()
    z_obj = geometry.z_b if geometry.kind is SetupKind.SETUP1 else geometry.z_a
    L_src = 10 * si
    L_obj = 2 * half_obj * 1.1
    L_lens = 2 * lens_margin * (half_obj + geometry.S1 * 5 * si / z_obj)
    if pupil is not None and pupil.kind == "gaussian":
        L_lens = min(L_lens, 16 * pupil.width)
    elif pupil is not None and pupil.kind == "circular":
        L_lens = min(L_lens, 2.05 * pupil.width)
    hops_src = [(z_obj, L_obj)]
    if geometry.kind is SetupKind.SETUP1:
        hops_src.append((geometry.z_a, detector_a.extent))
        last_out = detector_b.extent
    else:
        hops_src.append((geometry.z_b, detector_b.extent))
        last_out = detector_a.extent
    p_src = min(lam * z / (L_src + out) for z, out in hops_src) / oversample
    feat = _min_feature(obj)
    p_obj = min(feat / object_samples, lam * geometry.S1 / (L_obj + L_lens) / oversample)
    p_lens = lam * geometry.S2 / (L_lens + last_out) / oversample
    src = GridSpec(_ceil_n(L_src, p_src), p_src)
    grids = SimulationGrids(detector_a, detector_b, GridSpec(_ceil_n(L_obj, p_obj), p_obj),
                            GridSpec(_ceil_n(L_lens, p_lens), p_lens))
    return src, grids


def _min_feature(obj: ObjectMask) -> float:
    pcs = obj.pieces()
    if pcs:
        return min(p[1] - p[0] for p in pcs)
    return obj.half_extent() / 4


def _stencil_entries(plan: RefocusPlan, xi: int):
    """Non-zero ``(p, q, C_pq)`` of the refocusing stencil at point ``xi``."""
    idx = plan.idx[xi]
    w = plan.w[xi] * plan.c[:, None]
    q = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    p = idx.ravel()
    cw = w.ravel()
    keep = cw != 0
    return p[keep], q[keep], cw[keep]


def variance_terms(W_AA: np.ndarray, W_BB: np.ndarray, W_AB: np.ndarray, plan: RefocusPlan) -> dict:
    """Mean ``sigma`` and ``F0 .. F4`` of the refocused observable at every plan point."""
    nx = plan.idx.shape[0]
    out = {key: np.zeros(nx, complex) for key in ("F1", "F2", "F3", "F4")}
    out["sigma"] = np.zeros(nx)
    out["F0"] = np.zeros(nx)
    for xi in range(nx):
        p, q, cw = _stencil_entries(plan, xi)
        P, R = p[:, None], p[None, :]
        Q, S = q[:, None], q[None, :]
        cc = cw[:, None] * cw[None, :]
        wab_pq = W_AB[p, q]
        out["sigma"][xi] = np.sum(cw * np.abs(wab_pq) ** 2)
        waa_pr = W_AA[P, R]
        wbb_qs = W_BB[Q, S]
        wab_ps = W_AB[P, S]
        wab_rq = W_AB[R, Q]
        out["F0"][xi] = np.sum(cc * np.abs(waa_pr) ** 2 * np.abs(wbb_qs) ** 2)
        out["F1"][xi] = np.sum(cc * np.abs(wab_ps) ** 2 * np.abs(wab_rq) ** 2)
        out["F2"][xi] = np.sum(cc * wab_pq[:, None] * np.conj(wab_rq) * wab_pq[None, :] * np.conj(wab_ps))
        out["F3"][xi] = np.sum(cc * wab_pq[:, None] * wbb_qs * np.conj(wab_pq[None, :]) * np.conj(waa_pr))
        out["F4"][xi] = np.sum(cc * waa_pr * wab_rq * wbb_qs * np.conj(wab_ps))
    return out


@dataclass
class SliceModel:
    """Discrete 1D arrangement with cached exact field correlations."""

    speckle: SpeckleConfig
    geometry: GeometryConfig
    obj: ObjectMask
    pupil: LensPupil | None
    grids: SimulationGrids
    _w: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.speckle.dim != 1:
            raise ConfigError("slice model is one-dimensional", "mode")

    @classmethod
    def build(cls, source, geometry: GeometryConfig, obj: ObjectMask, pupil: LensPupil | None,
              detector_a: GridSpec, detector_b: GridSpec, master_seed: int = 0, n_frames: int = 1,
              **grid_kw) -> "SliceModel":
        src, grids = suggest_grids(source, geometry, obj, pupil, detector_a, detector_b, **grid_kw)
        return cls(SpeckleConfig(source, src, master_seed, n_frames, 1), geometry, obj, pupil, grids)

    def correlations(self):
        if self._w is None:
            self._w = exact_correlations(self.speckle, self.geometry, self.obj, self.pupil, self.grids)
        return self._w

    def params(self) -> RefocusParams:
        return refocus_params(self.geometry)

    def plan(self, x_points=None, b_weight=None, params: RefocusParams | None = None,
             coverage_tol: float = 0.01) -> RefocusPlan:
        return plan_refocus(self.grids.detector_a.coords, self.grids.detector_b.coords,
                            params or self.params(), 1, x_points, b_weight, coverage_tol)

    def moments(self, x_points=None, b_weight=None, params: RefocusParams | None = None) -> dict:
        """Exact ``sigma`` and ``F0 .. F4`` at ``x_points`` (plus ``F = Var S``)."""
        W_AA, W_BB, W_AB = self.correlations()
        out = variance_terms(W_AA, W_BB, W_AB, self.plan(x_points, b_weight, params))
        out["F"] = out["F0"] + out["F1"].real + 2 * (out["F2"] + out["F3"] + out["F4"]).real
        return out
