"""Subleading variance terms of the refocused observable.

``Var S = F0 + dF`` with ``dF = F1 + 2 Re(F2 + F3 + F4)``. Geometric-optics
closed forms are provided for both arrangements (two-dimensional), and the
discrete 1D model of :mod:`cpisnr.slice1d` provides exact sums that converge
to the defining integrals on fine grids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import (
    AnalyticCoefficients1,
    AnalyticCoefficients2,
    _axes,
    _mask_at,
    detector_weight,
    f0_setup1_g,
    f0_setup2_g,
    sigma_ref_setup1_g,
    sigma_ref_setup2_g,
)
from .errors import ConfigError
from .objint import integrate_general
from .optics import GeometryConfig, LensPupil, ObjectMask, SetupKind, SourceModel
from .slice1d import SliceModel


@dataclass(frozen=True)
class FluctuationBreakdown:
    """Variance terms at one refocused point."""

    rho_a: object
    F0: float
    F1: complex
    F2: complex
    F3: complex
    F4: complex
    N_b: float = math.nan
    sigma_ref: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def delta_F_complex(self) -> complex:
        return self.F1 + 2 * (self.F2 + self.F3 + self.F4).real + 1j * self.F1.imag

    @property
    def delta_F(self) -> float:
        return float((self.F1 + 2 * (self.F2 + self.F3 + self.F4).real).real)

    @property
    def ratio(self) -> float:
        return abs(self.delta_F) / self.F0

    @property
    def F(self) -> float:
        return self.F0 + self.delta_F


def mode_count_estimate(source: SourceModel, geometry: GeometryConfig, obj: ObjectMask | None = None,
                        pupil: LensPupil | None = None, dim: int = 2) -> float:
    """Transverse modes reaching D_b: illuminated area over coherence area.

    The limiting plane is the object (arrangement 1, transmissive area
    ``int |A|^2``) or the lens (arrangement 2, ``int |P|^2``); the coherence
    length there is ``z / (k sigma_i)`` with ``z`` its distance from the source.
    """
    if geometry.kind is SetupKind.SETUP1:
        if obj is None:
            raise ConfigError("arrangement 1 needs the object", "object")
        area = obj.area2()
        z = geometry.z_b
    else:
        if pupil is None:
            raise ConfigError("arrangement 2 needs the lens pupil", "pupil")
        area = pupil.area(dim)
        z = geometry.z_b
    coh = z / (source.k * source.sigma_i)
    return float(area / coh**dim)


# ---------------------------------------------------------------------------
# arrangement 1


def _setup1_closed_forms(c: AnalyticCoefficients1):
    """Dimensionless parts of ``F1 .. F3`` (common factor ``|S|^8 K^2 |A|^4``)."""
    ga, gb, gr, dl, be = c.gamma_a, c.gamma_b, c.gamma_r, c.delta, c.beta
    sA, sB = c.sigma_A, c.sigma_B
    f1 = 4 * math.pi**6 / (gb**4 * gr**2)
    f2 = 4 * math.pi**6 / (gb**3 * gr * (gb * gr + 4j * dl * abs(ga) ** 2))
    q1 = be**2 / (2 * sA**2) + ga * dl**2
    gv = (2 * abs(ga) ** 2 * dl - 1j * gb * gr) * gb
    gu = gv + 2j * dl**2 * ga**2 * np.conj(ga)
    den = gb**2 * (1j * be**4 * abs(ga) ** 2 - 8 * dl**2 * ga * sA**4 * gv - (2 * be * sA) ** 2 * gu)
    scale = max(abs(gb**2 * be**4 * abs(ga) ** 2), abs(gb**2 * (2 * be * sA) ** 2 * gu), 1e-300)
    if abs(q1) == 0 or abs(den) <= 1e-14 * scale:
        raise ConfigError("degenerate geometry: vanishing denominator in the cross terms", "geometry")
    f3 = 64j * math.pi**6 * sA**2 * sB**2 * (2 * dl**2 * ga * sA**2 + be**2) / den
    return f1, complex(f2), complex(f3)


def delta_f_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask, rho_a, N_b: float = math.nan) -> FluctuationBreakdown:
    """Geometric-optics variance terms of arrangement 1 (two-dimensional).

    All three terms scale as ``|A(rho_a)|^4``; ``F3 = F4``.
    """
    if c.dim != 2:
        raise ConfigError("closed forms are two-dimensional; use the slice quadrature in 1D", "dim")
    if c.focused:
        raise ConfigError("closed forms need z_a != z_b", "geometry.z_b")
    f1, f2, f3 = _setup1_closed_forms(c)
    common = abs(c.S_AB2) ** 4 * c.K_AB**2 * float(np.abs(_mask_at(obj, rho_a)) ** 4)
    return FluctuationBreakdown(rho_a, f0_setup1_g(c, obj), complex(f1 * common), f2 * common,
                                f3 * common, f3 * common, N_b, float(sigma_ref_setup1_g(c, obj, rho_a)),
                                {"kind": "setup1-geometric"})


def f1_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask, rho_a) -> float:
    """Geometric ``F1`` for any dimensionality: ``(2 pi^3 |S|^4 / (gamma_b^2 gamma_r))^d K^2 |A|^4``."""
    per_axis = 2 * math.pi**3 * abs(c.S_AB2) ** 2 / (c.gamma_b**2 * c.gamma_r)
    return float(per_axis**c.dim * c.K_AB**2 * np.abs(_mask_at(obj, rho_a)) ** 4)


# ---------------------------------------------------------------------------
# arrangement 2


def _pupil_overlap(pupil: LensPupil, v2, dim: int):
    """``Q(v) = int |P(l)|^2 |P(l - v)|^2 dl`` as a function of ``|v|^2``."""
    if pupil.kind == "gaussian":
        return (math.sqrt(math.pi) * pupil.width) ** dim * np.exp(-np.asarray(v2) / (4 * pupil.width**2))
    if pupil.kind == "circular":
        R = pupil.width
        t = np.sqrt(np.asarray(v2, dtype=float))
        if dim == 1:
            return np.clip(2 * R - t, 0.0, None)
        s = np.minimum(t, 2 * R)
        return 2 * R**2 * np.arccos(s / (2 * R)) - (s / 2) * np.sqrt(4 * R**2 - s**2)
    raise ConfigError("an unbounded pupil has no finite overlap", "pupil.kind")


def delta_f_setup2_g(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a,
                     N_b: float = math.nan, rtol: float = 1e-5) -> FluctuationBreakdown:
    """Geometric-optics variance terms of arrangement 2; ``F3 = F4``.

    Each term is an object-plane integral against the pupil overlap ``Q``
    evaluated at the lens point hit by the ray through ``o``.
    """
    if c.dim != 2 or obj.dim != 2:
        raise ConfigError("closed forms are two-dimensional", "dim")
    if c.focused:
        raise ConfigError("closed forms need beta != 0", "geometry.S2")
    k, s, mu = c.k, c.s, c.mu
    x = _axes(rho_a, 2).reshape(2)
    sh = x / mu
    pf = (c.S1 * c.S2 * c.K_AB / c.beta * (4 * math.pi**2 * c.z_a * c.z_b / k**3) ** 2) ** 2
    A_img = float(np.abs(_mask_at(obj, -sh)) ** 2)

    def q_of(X, Y):
        return _pupil_overlap(pupil, s**2 * ((X + sh[0]) ** 2 + (Y + sh[1]) ** 2), 2)

    def f1(X, Y):
        return np.abs(obj(-X - 2 * sh[0], -Y - 2 * sh[1])) ** 2 * q_of(X, Y)

    def f2(X, Y):
        ph = -k * c.S2 * ((X + sh[0]) ** 2 + (Y + sh[1]) ** 2) / (c.S1**2 * c.beta)
        return np.exp(1j * ph) * q_of(X, Y)

    F1 = pf * integrate_general(obj, f1, power=2, rtol=rtol, max_doublings=6)
    if A_img == 0:
        F2 = F3 = 0j
    else:
        F2 = pf * A_img * integrate_general(obj, f2, power=2, rtol=rtol, max_doublings=6)
        F3 = pf * A_img * integrate_general(obj, q_of, power=2, rtol=rtol, max_doublings=6)
    return FluctuationBreakdown(rho_a, f0_setup2_g(c, obj, pupil, rho_a), complex(F1), complex(F2),
                                complex(F3), complex(F3), N_b, float(sigma_ref_setup2_g(c, obj, rho_a)),
                                {"kind": "setup2-geometric"})


# ---------------------------------------------------------------------------
# 1D quadrature through the discrete model


def delta_f_quadrature(model: SliceModel, rho_a, detector_area: float | None = None,
                       N_b: float = math.nan) -> list[FluctuationBreakdown]:
    """Variance terms at each 1D point from the discrete model's exact sums.

    ``detector_area`` (a length) applies the gaussian D_b weight used for
    arrangement 2.
    """
    xs = np.atleast_1d(np.asarray(rho_a, dtype=float))
    bw = None
    if detector_area is not None:
        bw = lambda b2: np.sqrt(detector_weight(b2, detector_area, 1))  # noqa: E731
    m = model.moments(xs, bw)
    return [FluctuationBreakdown(float(x), float(m["F0"][i]), complex(m["F1"][i]), complex(m["F2"][i]),
                                 complex(m["F3"][i]), complex(m["F4"][i]), N_b, float(m["sigma"][i]),
                                 {"kind": "slice-quadrature"})
            for i, x in enumerate(xs)]


BREAKDOWN_COLUMNS = ("rho_a [m]", "F0", "Re F1", "Re F2", "Im F2", "Re F3", "Im F3", "Re F4", "Im F4",
                     "ratio", "N_b")


def write_breakdown_csv(path, rows: list[FluctuationBreakdown], intensity_unit: str = "a.u.") -> None:
    """One row per point; variance columns are in ``intensity_unit^4``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([BREAKDOWN_COLUMNS[0]] + [f"{h} [{intensity_unit}^4]" for h in BREAKDOWN_COLUMNS[1:9]]
                   + ["ratio [1]", "N_b [1]"])
        for r in rows:
            pos = np.atleast_1d(np.asarray(r.rho_a, dtype=float))
            w.writerow([" ".join(f"{p:.9g}" for p in pos)] + [f"{v:.12g}" for v in (
                r.F0, r.F1.real, r.F2.real, r.F2.imag, r.F3.real, r.F3.imag, r.F4.real, r.F4.imag,
                r.ratio, r.N_b)])
