"""Analytic correlation functions, variances and SNR formulas for both arrangements.

Conventions (``d`` is the transverse dimension, 1 or 2):

* free propagation kernel ``sqrt(k / 2 pi i z)^d exp(i k x^2 / 2 z)``;
* source mutual coherence ``I_s exp(-s^2/2 sigma_i^2) (sqrt(2 pi) sigma_g)^d delta(s1 - s2)``;
* every prefactor ``K`` is the two-dimensional expression with its base raised to ``d``.

Many SNR functions take a ``convention``:

``"printed"``
    the closed forms exactly as published (2D only where the published form is
    dimension specific).
``"corrected"``
    forms re-derived from the same correlation functions and checked against
    the exact discrete model; they differ in the gaussian width of ``J`` for
    arrangement 1 and in keeping the ``rho_b`` dependence of the pupil factor
    for arrangement 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .errors import ConfigError, QuadratureError
from .objint import integrate_general, integrate_separable, object_nodes, piece_exp_integral
from .optics import (
    GeometryConfig,
    LensPupil,
    ObjectMask,
    SetupKind,
    SourceModel,
    _antideriv2,
    refocus_params,
)
from .quadrature import gauss_legendre_nodes, integrate_panels

CONVENTIONS = ("printed", "corrected")
VARIANTS = ("full", "focused", "far", "rule_of_thumb")


def _check(convention: str, variant: str):
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {convention!r}", "convention")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}", "variant")


def _axes(rho, dim: int) -> np.ndarray:
    r = np.atleast_1d(np.asarray(rho, dtype=float))
    if dim == 2 and r.shape[-1] != 2:
        raise ConfigError("2D positions need (x, y) pairs", "rho")
    return r


def _mask_at(obj: ObjectMask, rho) -> np.ndarray:
    r = _axes(rho, obj.dim)
    return obj(r) if obj.dim == 1 else obj(r[..., 0], r[..., 1])


def _scalar(v):
    v = np.asarray(v)
    return v.item() if v.size == 1 else v


# ---------------------------------------------------------------------------
# arrangement 1: coefficients


@dataclass(frozen=True)
class AnalyticCoefficients1:
    """Derived symbols of arrangement 1 (ghost image on D_a, source imaged on D_b)."""

    dim: int
    k: float
    sigma_i: float
    z_a: float
    z_b: float
    M: float
    alpha: float
    beta: float
    delta: float
    gamma_a: complex
    gamma_b: float
    S_AB2: complex
    K_A: float
    K_B: float
    sigma_A: float
    sigma_B: float

    @property
    def gamma_r(self) -> float:
        return self.gamma_a.real

    @property
    def gamma_i(self) -> float:
        return self.gamma_a.imag

    @property
    def S_AB(self) -> complex:
        return complex(np.sqrt(self.S_AB2))

    @property
    def K_AB(self) -> float:
        return self.K_A * self.K_B

    @property
    def defocus(self) -> float:
        """``1 - z_b / z_a``."""
        return 1.0 - self.z_b / self.z_a

    @property
    def focused(self) -> bool:
        return self.z_a == self.z_b


def coefficients_setup1(source: SourceModel, geometry: GeometryConfig, dim: int = 2) -> AnalyticCoefficients1:
    if geometry.kind is not SetupKind.SETUP1:
        raise ConfigError("expected a setup1 geometry", "geometry.kind")
    if dim not in (1, 2):
        raise ConfigError("dim must be 1 or 2", "dim")
    k, si, sg, Is = source.k, source.sigma_i, source.sigma_g, source.peak_intensity
    za, zb, M = geometry.z_a, geometry.z_b, geometry.M
    rp = refocus_params(geometry)
    S2 = 1.0 / (1.0 / si**2 + 1j * k * (1.0 / za - 1.0 / zb))
    return AnalyticCoefficients1(
        dim=dim, k=k, sigma_i=si, z_a=za, z_b=zb, M=M,
        alpha=rp.alpha, beta=rp.beta, delta=(1.0 - zb / za) / M,
        gamma_a=complex(k**2 * S2 / (2 * zb**2)), gamma_b=k / (M * zb), S_AB2=complex(S2),
        K_A=Is * (k * sg / za) ** dim, K_B=Is * (k**2 * sg / (2 * math.pi * M * zb**2)) ** dim,
        sigma_A=za / (k * si), sigma_B=zb / (k * si),
    )


def resolution_estimate(wavelength: float, z_a: float, z_b: float, feature: float) -> float:
    """Refocused resolution estimate ``(lambda z_b / a) |1 - z_b / z_a|``."""
    return wavelength * z_b / feature * abs(1.0 - z_b / z_a)


# ---------------------------------------------------------------------------
# arrangement 1: correlation functions


def gamma_ab_setup1(c: AnalyticCoefficients1, obj: ObjectMask, rho_a, rho_b, rtol: float = 1e-8):
    """Correlation of intensity fluctuations ``Gamma_AB(rho_a, rho_b)``.

    ``rho_b`` may be an array of positions (last axis of length 2 in 2D).
    """
    a = _axes(rho_a, c.dim) / c.alpha
    b = _axes(rho_b, c.dim)
    ga, gb = c.gamma_a, c.gamma_b

    def kernel(ax, bx):
        bx = np.atleast_1d(bx)
        return lambda o: np.exp(-ga * (ax - o[:, None]) ** 2 - 1j * gb * bx[None, :] * o[:, None])

    if c.dim == 1:
        amp = integrate_separable(obj, kernel(a[0], b), rtol=rtol)
    else:
        bb = b.reshape(-1, 2)
        amp = integrate_separable(obj, kernel(a[0], bb[:, 0]), kernel(a[1], bb[:, 1]), rtol=rtol)
    out = abs(c.S_AB2) ** c.dim * c.K_AB * np.abs(amp) ** 2
    return _scalar(out.reshape(np.shape(rho_b)[:-1] if c.dim == 2 else np.shape(rho_b)))


def _pairs(obj: ObjectMask):
    """Per-axis interval arrays for all ordered pairs of constant pieces."""
    pcs = obj.pieces()
    if pcs is None:
        return None
    P = np.array(pcs, dtype=float)
    n = len(P)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    w = P[i, -1] * P[j, -1]
    axes = [(P[i, 0], P[i, 1], P[j, 0], P[j, 1])]
    if obj.dim == 2:
        axes.append((P[i, 2], P[i, 3], P[j, 2], P[j, 3]))
    return w, axes


def _sigma1_axis(lo1, hi1, lo2, hi2, delta, gb, tau_w, x, rtol):
    """Per-pair ``int dtau exp(i gb x tau - tau^2/tau_w^2) h_ij(tau)`` along one axis.

    ``h_ij(tau) = int du A_i(u - delta tau/2) A_j(u + delta tau/2) exp(-i gb u tau)``.
    """
    if delta == 0:
        # tau integral is a gaussian in u: erf difference over the overlap
        lo, hi = np.maximum(lo1, lo2), np.minimum(hi1, hi2)
        a = gb * tau_w / 2
        val = math.pi / gb * (erf(a * (hi - x)) - erf(a * (lo - x)))
        return np.where(hi > lo, val, 0.0).astype(complex)
    span = max(np.max(hi1), np.max(hi2)) - min(np.min(lo1), np.min(lo2))
    tmax = 6.0 * tau_w
    bps = []
    if delta != 0:
        tmax = min(tmax, span / abs(delta))
        ends1 = np.concatenate([lo1, hi1])
        ends2 = np.concatenate([lo2, hi2])
        bps = sorted({float(t) for t in (ends2[None, :] - ends1[:, None]).ravel() / delta if abs(t) < tmax})
    R = max(abs(np.min(lo1)), abs(np.max(hi1)), abs(np.min(lo2)), abs(np.max(hi2)))
    periods = gb * (abs(x) + R) * 2 * tmax / (2 * math.pi)
    n0 = int(min(max(8, periods / 2), 4096))

    def f(t):
        t = t[:, None]
        lo = np.maximum(lo1 + delta * t / 2, lo2 - delta * t / 2)
        hi = np.minimum(hi1 + delta * t / 2, hi2 - delta * t / 2)
        h = piece_exp_integral(lo, hi, gb * t)
        return np.exp(1j * gb * x * t - t**2 / tau_w**2) * h

    return integrate_panels(f, -tmax, tmax, rtol=rtol, breakpoints=bps, n_panels=n0).value


def sigma_ref_setup1(c: AnalyticCoefficients1, obj: ObjectMask, rho_a, rtol: float = 1e-7) -> float:
    """Refocused image ``Sigma_ref(rho_a) = int d rho_b Gamma_AB(alpha rho_a + beta rho_b, rho_b)``.

    The ``rho_b`` integral is done analytically; what remains is a transverse
    integral regularised by the finite source, which is exact for any defocus
    including ``delta = 0``.
    """
    x = _axes(rho_a, c.dim)
    d = c.dim
    tau_w = 2 * c.M * c.sigma_i
    pref = (math.sqrt(math.pi) * c.sigma_i * c.z_b / c.k) ** d * c.K_AB
    if obj.kind == "gaussian":
        w = obj.width
        a = 1 / tau_w**2 + c.delta**2 / (4 * w * w) + c.gamma_b**2 * w * w / 4
        per_axis = [math.sqrt(math.pi) * w * math.sqrt(math.pi / a) * math.exp(-c.gamma_b**2 * xi**2 / (4 * a))
                    for xi in x[:d]]
        return float(pref * np.prod(per_axis))
    pr = _pairs(obj)
    if pr is None:
        raise ConfigError("exact refocused image needs a piecewise-rectangular or gaussian mask", "object")
    w, axes = pr
    total = w.astype(complex)
    for ax, (l1, h1, l2, h2) in enumerate(axes):
        total = total * _sigma1_axis(l1, h1, l2, h2, c.delta, c.gamma_b, tau_w, x[ax], rtol)
    return float(pref * np.sum(total).real)


def sigma_ref_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask, rho_a):
    """Geometric-optics refocused image ``I_s^2 pi sigma_g^4 / sigma_A^2 |A(rho_a)|^2`` (general ``d``)."""
    d = c.dim
    base = (2 * math.pi ** 1.5 * c.M * c.sigma_i**2 * c.z_b * c.sigma_B / c.k) ** d
    return _scalar(base * c.K_AB * np.abs(_mask_at(obj, rho_a)) ** 2)


def gamma_aa_setup1(c: AnalyticCoefficients1, rho1, rho2):
    """``sigma_i^(2d) K_A^2 exp(-(rho1 - rho2)^2 / sigma_A^2)``."""
    d2 = np.sum((np.atleast_1d(rho1) - np.atleast_1d(rho2)) ** 2)
    return c.sigma_i ** (2 * c.dim) * c.K_A**2 * math.exp(-d2 / c.sigma_A**2)


# ---------------------------------------------------------------------------
# arrangement 1: dominant variance


def _c4_terms(obj: ObjectMask):
    """Quadruples of pieces with per-axis interval data for the fourth-order overlap."""
    pcs = obj.pieces()
    if pcs is None:
        return None
    P = np.array(pcs, dtype=float)
    n = len(P)
    idx = np.stack(np.meshgrid(*[np.arange(n)] * 4, indexing="ij"), -1).reshape(-1, 4)
    w = np.prod(P[idx, -1], axis=1)
    keep = w != 0
    idx, w = idx[keep], w[keep]
    cols = [(0, 1)] if obj.dim == 1 else [(0, 1), (2, 3)]
    return w, [(P[idx, a], P[idx, b]) for a, b in cols]


def _gauss_trap(lo1, hi1, lo2, hi2, width):
    """Vectorised ``int du exp(-u^2/width^2) |[lo1,hi1] cap ([lo2,hi2] + u)|``."""
    hi1 = np.maximum(hi1, lo1)
    hi2 = np.maximum(hi2, lo2)
    return (_antideriv2(hi1 - lo2, width) - _antideriv2(hi1 - hi2, width)
            - _antideriv2(lo1 - lo2, width) + _antideriv2(lo1 - hi2, width))


def _c4_axis(lo, hi, sB, w, rtol):
    """Per-term ``int dq exp(-q^2/w^2) int dp exp(-p^2/sB^2) C4_axis(p, q)``.

    ``C4(p, q) = int B_q(o) B_q(o - p) do`` with ``B_q(o) = A(o) A(o - q)``;
    the ``p`` integral is closed form, ``q`` is done by panels.
    """
    span = np.max(hi) - np.min(lo)
    qmax = min(span, 10 * w)
    ends = np.unique(np.concatenate([lo.ravel(), hi.ravel()]))
    bps = sorted({float(t) for t in (ends[:, None] - ends[None, :]).ravel() if abs(t) < qmax})

    def f(q):
        q = q[:, None]
        alo = np.maximum(lo[:, 0], lo[:, 1] + q)
        ahi = np.minimum(hi[:, 0], hi[:, 1] + q)
        blo = np.maximum(lo[:, 2], lo[:, 3] + q)
        bhi = np.minimum(hi[:, 2], hi[:, 3] + q)
        return np.exp(-(q / w) ** 2) * _gauss_trap(alo, ahi, blo, bhi, sB)

    return integrate_panels(f, -qmax, qmax, rtol=rtol, breakpoints=bps, n_panels=16).value


def f0_integral_setup1(obj: ObjectMask, sigma_B: float, width: float, rtol: float = 1e-8) -> float:
    """``int dp dq exp(-p^2/sigma_B^2 - q^2/width^2) C4(p, q)`` with ``C4`` the fourth-order overlap."""
    if obj.kind == "gaussian":
        w0 = obj.width
        per = (math.sqrt(math.pi / 2) * w0 * math.sqrt(math.pi / (1 / sigma_B**2 + 1 / (2 * w0**2)))
               * math.sqrt(math.pi / (1 / width**2 + 1 / (2 * w0**2))))
        return per**obj.dim
    terms = _c4_terms(obj)
    if terms is None:
        raise ConfigError("exact variance needs a piecewise-rectangular or gaussian mask", "object")
    w, axes = terms
    out = w.copy()
    for lo, hi in axes:
        out = out * _c4_axis(lo, hi, sigma_B, width, rtol)
    return float(np.sum(out))


def f0_setup1(c: AnalyticCoefficients1, obj: ObjectMask, rho_a=None, rtol: float = 1e-8) -> float:
    """Dominant variance ``F0`` of the refocused image.

    The result does not depend on ``rho_a``; the argument is accepted for
    symmetry with the other arrangement. Out of focus the gaussian weight along
    the second difference variable has width ``2 sigma_i |1 - z_b/z_a|``.
    """
    d = c.dim
    if c.delta == 0:
        return float(c.sigma_i ** (4 * d) * c.K_AB**2 * (2 * math.pi / c.gamma_b) ** (2 * d)
                     * obj.gaussian_weighted_autocorrelation(c.sigma_B))
    width = 2 * c.sigma_i * abs(c.defocus)
    I = f0_integral_setup1(obj, c.sigma_B, width, rtol)
    return float(c.sigma_i ** (4 * d) * c.K_AB**2 * (2 * math.pi / c.gamma_b) ** d
                 * (math.sqrt(math.pi) * c.sigma_A / abs(c.beta)) ** d * I)


def f0_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask) -> float:
    """Geometric-optics ``F0``: ``C4(p, q)`` replaced by ``delta(p) C(q)``."""
    d = c.dim
    if c.delta == 0:
        return float(c.sigma_i ** (4 * d) * c.K_AB**2 * (2 * math.pi / c.gamma_b) ** (2 * d)
                     * (math.sqrt(math.pi) * c.sigma_B) ** d * obj.area4())
    J = obj.gaussian_weighted_autocorrelation(2 * c.sigma_i * abs(c.defocus))
    return float(c.sigma_i ** (4 * d) * c.K_AB**2 * (2 * math.pi / c.gamma_b) ** d
                 * (math.pi * c.sigma_A * c.sigma_B / abs(c.beta)) ** d * J)


def j_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask, convention: str = "printed") -> float:
    """Gaussian-weighted autocorrelation of ``|A|^2`` entering the geometric SNR."""
    if convention == "printed":
        return obj.gaussian_weighted_autocorrelation(math.sqrt(2) * c.sigma_i * abs(1 - c.z_a / c.z_b))
    return obj.gaussian_weighted_autocorrelation(2 * c.sigma_i * abs(c.defocus))


def snr_setup1_g(c: AnalyticCoefficients1, obj: ObjectMask, rho_a, variant: str = "full",
                 convention: str = "printed", feature: float | None = None):
    """Geometric-optics ``R / sqrt(N_f)`` of the refocused image.

    ``variant``: ``full`` (gaussian-weighted autocorrelation), ``focused``
    (``z_a = z_b`` closed form), ``far`` (deep defocus asymptote) or
    ``rule_of_thumb`` (needs ``feature``, the smallest transmissive size).
    The printed ``full`` and ``far`` forms are two-dimensional.
    """
    _check(convention, variant)
    d = c.dim
    A2 = np.abs(_mask_at(obj, rho_a)) ** 2
    D = abs(c.defocus)
    if variant == "focused" or (variant == "full" and c.focused):
        return _scalar(np.sqrt((math.sqrt(math.pi) * c.sigma_B) ** d / obj.area4()) * A2)
    if variant == "rule_of_thumb":
        if feature is None:
            raise ConfigError("rule of thumb needs the smallest feature size", "feature")
        dx = resolution_estimate(2 * math.pi / c.k, c.z_a, c.z_b, feature)
        return _scalar(math.sqrt((feature * dx) ** d) / obj.area2() * A2)
    if convention == "printed" and d != 2:
        raise ConfigError("the printed closed forms are two-dimensional; use convention='corrected'", "convention")
    lam_term = 2 * math.pi * c.sigma_B * c.sigma_i * D
    if variant == "far":
        if convention == "printed":
            return _scalar(lam_term / math.sqrt(2) / obj.area2() * A2)
        return _scalar(lam_term ** (d / 2) / obj.area2() * A2)
    J = j_setup1_g(c, obj, convention)
    if convention == "printed":
        return _scalar(lam_term / math.sqrt(2) * A2 / math.sqrt(J))
    return _scalar(lam_term ** (d / 2) * A2 / math.sqrt(J))


def snr_setup1(c: AnalyticCoefficients1, obj: ObjectMask, rho_a, rtol: float = 1e-7) -> float:
    """``Sigma_ref / sqrt(F0)`` from the exact (finite-wavelength) expressions."""
    return sigma_ref_setup1(c, obj, rho_a, rtol) / math.sqrt(f0_setup1(c, obj, rho_a, rtol))


# ---------------------------------------------------------------------------
# arrangement 2


@dataclass(frozen=True)
class AnalyticCoefficients2:
    """Derived symbols of arrangement 2 (object imaged on D_a, ghost image of the lens on D_b)."""

    dim: int
    k: float
    sigma_i: float
    z_a: float
    z_b: float
    S1: float
    S2: float
    f: float
    S2f: float
    mu: float
    alpha: float
    beta: float
    K_A: float
    K_B: float
    sigma_B: float
    A_lens: float
    A_Db: float
    P0: float

    @property
    def K_AB(self) -> float:
        return self.K_A * self.K_B

    @property
    def focused(self) -> bool:
        return self.beta == 0

    @property
    def s(self) -> float:
        """Scale ``(S2/S1) / beta`` mapping object coordinates onto the lens."""
        return self.S2 / (self.S1 * self.beta)


def coefficients_setup2(source: SourceModel, geometry: GeometryConfig, pupil: LensPupil,
                        detector_area: float | None = None, dim: int = 2) -> AnalyticCoefficients2:
    """Coefficients of arrangement 2; ``detector_area`` defaults to the lens area."""
    if geometry.kind is not SetupKind.SETUP2:
        raise ConfigError("expected a setup2 geometry", "geometry.kind")
    if dim not in (1, 2):
        raise ConfigError("dim must be 1 or 2", "dim")
    k, si, sg, Is = source.k, source.sigma_i, source.sigma_g, source.peak_intensity
    za, zb, S1, S2 = geometry.z_a, geometry.z_b, geometry.S1, geometry.S2
    rp = refocus_params(geometry)
    A_lens = pupil.area(dim)
    A_Db = A_lens if detector_area is None else detector_area
    if not A_Db > 0 or not math.isfinite(A_Db):
        raise ConfigError("detector area must be positive and finite", "detector_area")
    return AnalyticCoefficients2(
        dim=dim, k=k, sigma_i=si, z_a=za, z_b=zb, S1=S1, S2=S2, f=geometry.f,
        S2f=geometry.S2f, mu=geometry.mu, alpha=rp.alpha, beta=rp.beta,
        K_A=Is * (k**3 * sg / ((2 * math.pi) ** 2 * S1 * S2 * za)) ** dim,
        K_B=Is * (k * sg / zb) ** dim, sigma_B=zb / (k * si),
        A_lens=A_lens, A_Db=A_Db, P0=float(np.abs(pupil(0.0)) ** 2),
    )


def pupil_transform_1d(c: AnalyticCoefficients2, pupil: LensPupil, q) -> np.ndarray:
    """``P~_beta(q) = int dl P(l) exp(i k beta l^2 / 2 S2 - i k q l)`` along one axis."""
    q = np.asarray(q, dtype=float)
    k = c.k
    if pupil.kind == "gaussian":
        a = 1 / (4 * pupil.width**2) - 1j * k * c.beta / (2 * c.S2)
        return np.sqrt(np.pi / a) * np.exp(-(k * q) ** 2 / (4 * a))
    if pupil.kind == "circular":
        R = pupil.width
        flat = q.ravel()

        def f(l):
            return np.exp(1j * k * c.beta * l[:, None] ** 2 / (2 * c.S2) - 1j * k * l[:, None] * flat[None, :])

        periods = k * (np.max(np.abs(flat)) * 2 * R + abs(c.beta) * R**2 / c.S2) / (2 * math.pi)
        v = integrate_panels(f, -R, R, rtol=1e-9, n_panels=int(max(8, periods))).value
        return v.reshape(q.shape)
    raise ConfigError("an unbounded pupil has no transform", "pupil.kind")


def _lens_autocorrelation(pupil: LensPupil, t, dim: int):
    t = np.abs(np.asarray(t, dtype=float))
    if pupil.kind == "gaussian":
        return (math.sqrt(2 * math.pi) * pupil.width) ** dim * np.exp(-t**2 / (8 * pupil.width**2))
    R = pupil.width
    if dim == 1:
        return np.clip(2 * R - t, 0.0, None)
    s = np.minimum(t, 2 * R)
    return 2 * R**2 * np.arccos(s / (2 * R)) - (s / 2) * np.sqrt(4 * R**2 - s**2)


def sigma_ref_setup2(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a,
                     rtol: float = 1e-7) -> float:
    """Refocused image of arrangement 2 (1D, or 2D with a gaussian pupil and separable mask).

    The ``rho_b`` integral collapses the two object points onto
    ``o1 = o2 + beta S1 t / S2``; the remaining lens-difference integral is
    weighted by the pupil autocorrelation.
    """
    x = _axes(rho_a, c.dim)
    d, k = c.dim, c.k
    if pupil.kind == "unity":
        raise ConfigError("an unbounded pupil gives a divergent refocused image", "pupil.kind")
    if d == 2 and pupil.kind != "gaussian":
        raise ConfigError("2D exact refocused image needs a gaussian pupil", "pupil.kind")
    pref = (2 * math.pi * c.z_a * c.z_b / k**2) ** d * c.K_AB
    sh = c.beta * c.S1 / c.S2
    tmax = 2 * pupil.width if pupil.kind == "circular" else 16 * math.sqrt(2) * pupil.width
    pr = None
    if obj.kind != "gaussian":
        pr = _pairs(obj)
        if pr is None:
            raise ConfigError("exact refocused image needs a piecewise-rectangular or gaussian mask", "object")

    def axis(xa, ax):
        def f(t):
            ph = np.exp(-1j * k * c.beta * t**2 / (2 * c.S2) - 1j * k * xa * t / c.S2f)
            Q = _lens_autocorrelation(pupil, t, 1)
            cc = k * t / c.S1
            if ax is None:
                w, s = obj.width, sh * t
                inner = math.sqrt(math.pi) * w * np.exp(-s**2 / (4 * w * w) - cc**2 * w * w / 4 + 1j * cc * s / 2)
                return ph * Q * inner
            return (ph * Q)[:, None] * _pairs_axis_shift(ax, sh * t, cc)

        periods = k * (abs(xa) / c.S2f + obj.half_extent() / c.S1) * 2 * tmax / (2 * math.pi)
        n0 = int(min(max(16, periods / 2), 8192))
        return integrate_panels(f, -tmax, tmax, rtol=rtol, n_panels=n0).value

    if pr is None:
        return float(pref * np.prod([axis(xa, None) for xa in x[:d]]).real)
    w_, axes = pr
    total = w_.astype(complex)
    for i in range(d):
        total = total * axis(x[i], axes[i])
    return float(pref * np.sum(total).real)


def _pairs_axis_shift(ax, s, cc):
    """Per pair ``int A_i(o) A_j(o + s) exp(-i cc o) do`` along one axis (vectorised over nodes)."""
    lo1, hi1, lo2, hi2 = ax
    s = s[:, None]
    lo = np.maximum(lo1, lo2 - s)
    hi = np.minimum(hi1, hi2 - s)
    return piece_exp_integral(lo, hi, cc[:, None])


def detector_weight(b2, A_Db: float, dim: int):
    """Gaussian detector regularisation ``exp(-pi rho_b^2 / A_Db)`` (``A_Db`` a length in 1D)."""
    return np.exp(-math.pi * np.asarray(b2) / A_Db ** (2 / dim))


def _det_halfwidth(A_Db: float, dim: int) -> float:
    return 10 * A_Db ** (1 / dim) / math.sqrt(2 * math.pi)


def sigma_ref_setup2_g(c: AnalyticCoefficients2, obj: ObjectMask, rho_a):
    """Geometric refocused image ``I_s^2 (k^2 sigma_g^4 / S2^2) A_lens |A(-rho_a/mu)|^2`` (general ``d``)."""
    d = c.dim
    base = (2 * math.pi * c.z_a * c.z_b / c.k**2) ** d * (2 * math.pi * c.S1 / c.k) ** d
    r = -_axes(rho_a, d) / c.mu
    return _scalar(base * c.K_AB * c.A_lens * np.abs(_mask_at(obj, r)) ** 2)


def w_aa_setup2(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, y, rtol: float = 1e-9):
    """Mean intensity on D_a at ``y`` (1D): ``K_A sqrt(2 pi) z_a/k int |A|^2 |P~_beta(o/S1 + y/S2)|^2``."""
    if c.dim != 1:
        raise ConfigError("exact D_a intensity is implemented in the 1D slice", "dim")
    y = np.atleast_1d(np.asarray(y, dtype=float))

    def fx(o):
        return np.abs(pupil_transform_1d(c, pupil, o[:, None] / c.S1 + y[None, :] / c.S2)) ** 2

    v = integrate_separable(obj, fx, power=2, rtol=rtol)
    return np.real(v) * c.K_A * math.sqrt(2 * math.pi) * c.z_a / c.k


def f0_setup2(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a, rtol: float = 1e-7) -> float:
    """Dominant variance with the ``exp(-pi rho_b^2 / A_Db)`` detector regularisation (1D)."""
    if c.dim != 1:
        raise ConfigError("exact variance of arrangement 2 is implemented in the 1D slice", "dim")
    x = float(_axes(rho_a, 1)[0])
    L = _det_halfwidth(c.A_Db, 1)

    def f(b):
        W = w_aa_setup2(c, obj, pupil, c.alpha * x + c.beta * b)
        return detector_weight(b**2, c.A_Db, 1) * W**2

    I = integrate_panels(f, -L, L, rtol=rtol, n_panels=16).value
    return float((math.sqrt(math.pi) * c.sigma_i * c.z_b / c.k) * c.K_B**2 * I)


def _pupil_h(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a, b, rtol=1e-9):
    """``H(b) = int |A(o)|^2 |P(s (o + rho_a/mu) + b)|^2 do`` for an array of ``b`` (rows of 2 in 2D)."""
    d = c.dim
    x = _axes(rho_a, d)
    b = np.asarray(b, dtype=float)
    s = c.s
    if d == 1:
        bb = np.atleast_1d(b)

        def fx(o):
            return np.abs(pupil(s * (o[:, None] + x[0] / c.mu) + bb[None, :])) ** 2

        return np.real(integrate_separable(obj, fx, power=2, rtol=rtol))
    bb = b.reshape(-1, 2)
    if pupil.kind == "gaussian":
        def ax(i):
            return lambda o: np.abs(pupil(s * (o[:, None] + x[i] / c.mu) + bb[None, :, i])) ** 2
        return np.real(integrate_separable(obj, ax(0), ax(1), power=2, rtol=rtol))
    out = []
    for bx, by in bb:
        out.append(integrate_general(obj, lambda X, Y: np.abs(pupil(s * (X + x[0] / c.mu) + bx,
                                                                       s * (Y + x[1] / c.mu) + by)) ** 2,
                                     power=2, rtol=rtol))
    return np.real(np.array(out))


def j_setup2_g(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a) -> float:
    """``J = H(0)^2``: squared pupil-weighted transmissive area seen from ``rho_a``."""
    z = np.zeros(c.dim)
    return float(_pupil_h(c, obj, pupil, rho_a, z if c.dim == 2 else 0.0)[0] ** 2)


def j_setup2_weighted(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a,
                      rtol: float = 1e-6) -> float:
    """``int d rho_b exp(-pi rho_b^2 / A_Db) H(rho_b)^2``: ``A_Db J`` without freezing ``rho_b = 0``.

    With a gaussian pupil the ``rho_b`` integral is closed form and the rest is
    a double integral over the object; otherwise ``rho_b`` is integrated
    numerically (1D only).
    """
    d = c.dim
    x = _axes(rho_a, d)
    if pupil.kind == "gaussian":
        a = math.pi / c.A_Db ** (2 / d)
        sp2 = 2 * pupil.width**2  # |P(u)|^2 = exp(-u^2 / sp2)
        pref = (math.pi / (a + 2 / sp2)) ** (d / 2)
        prev = None
        n = 1
        for _ in range(4):
            X, Y, W = object_nodes(obj, n, 16, power=2)
            U = [c.s * (p + x[i] / c.mu) for i, p in enumerate([X] if d == 1 else [X, Y])]
            cur = 0.0
            # row blocks keep the pair matrix small
            for lo in range(0, W.size, 2048):
                e = 0.0
                for u in U:
                    m = (u[lo:lo + 2048, None] + u[None, :]) / 2
                    dlt = u[lo:lo + 2048, None] - u[None, :]
                    e = e - dlt**2 / (2 * sp2) - m**2 * a / (1 + a * sp2 / 2)
                cur += float(W[lo:lo + 2048] @ np.exp(e) @ W)
            cur *= pref
            if prev is not None and abs(cur - prev) <= rtol * abs(cur):
                return cur
            prev = cur
            n *= 2
        raise QuadratureError("object pair integral did not converge", cur, abs(cur - prev))
    if d != 1:
        raise ConfigError("2D detector-weighted pupil integral needs a gaussian pupil", "pupil.kind")
    L = _det_halfwidth(c.A_Db, 1) + 6 * pupil.width

    def f(b):
        return detector_weight(b**2, c.A_Db, 1) * _pupil_h(c, obj, pupil, rho_a, b) ** 2

    return float(integrate_panels(f, -L, L, rtol=rtol, n_panels=16).value)


def f0_setup2_g(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a,
                convention: str = "printed") -> float:
    """Geometric-optics ``F0`` of arrangement 2; ``printed`` evaluates the pupil factor at ``rho_b = 0``."""
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {convention!r}", "convention")
    d, k = c.dim, c.k
    if c.focused:
        raise ConfigError("geometric variance needs beta != 0; use the focused SNR", "geometry.S2")
    wpref = c.K_A * (math.sqrt(2 * math.pi) * c.z_a / k) ** d * (2 * math.pi * c.S2 / (k * abs(c.beta))) ** d
    G = c.A_Db * j_setup2_g(c, obj, pupil, rho_a) if convention == "printed" else j_setup2_weighted(c, obj, pupil, rho_a)
    return float((math.sqrt(math.pi) * c.sigma_i * c.z_b / k) ** d * c.K_B**2 * wpref**2 * G)


def snr_setup2_g(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a, variant: str = "full",
                 convention: str = "printed", obj_area: float | None = None):
    """Geometric-optics ``R / sqrt(N_f)`` of arrangement 2.

    ``variant``: ``full``, ``focused`` (``S2 = S2f``), ``far`` (pupil factor
    frozen at its centre) or ``rule_of_thumb`` (detector matched to the lens).
    ``corrected`` keeps the ``rho_b`` dependence of the pupil factor under the
    detector weight.
    """
    _check(convention, variant)
    d = c.dim
    r = -_axes(rho_a, d) / c.mu
    A2 = np.abs(_mask_at(obj, r)) ** 2
    focal = (2 * math.sqrt(math.pi) * c.sigma_B) ** (d / 2)
    if variant == "focused" or (variant == "full" and c.focused):
        return _scalar(focal / math.sqrt(c.A_Db) * np.ones_like(A2))
    inv_s = abs(1.0 / c.s) ** d
    area = obj.area2() if obj_area is None else obj_area
    if variant == "rule_of_thumb":
        return _scalar(inv_s * math.sqrt(c.sigma_B**d / c.A_lens) * c.A_lens / area * A2)
    if variant == "far":
        if convention == "printed":
            return _scalar(focal / math.sqrt(c.A_Db) * inv_s * c.A_lens / area * c.P0 * A2)
        if d == 2 and pupil.kind != "gaussian":
            raise ConfigError("corrected far asymptote in 2D needs a gaussian pupil", "pupil.kind")
        off = c.s * _axes(rho_a, d) / c.mu
        L = _det_halfwidth(c.A_Db, d) + pupil.width * 12
        # the 2D weight and gaussian pupil both factorise over axes
        a1 = c.A_Db ** (1 / d)
        g = 1.0
        for o in off[:d]:
            g *= integrate_panels(lambda b, o=o: detector_weight(b**2, a1, 1) * np.abs(pupil(b + o)) ** 4,
                                  -L, L, rtol=1e-10, n_panels=16).value
        return _scalar(focal * inv_s * c.A_lens / area / math.sqrt(g) * A2)
    if convention == "printed":
        J = j_setup2_g(c, obj, pupil, rho_a)
        return _scalar(focal / math.sqrt(c.A_Db * J) * inv_s * A2 * c.A_lens)
    G = j_setup2_weighted(c, obj, pupil, rho_a)
    return _scalar(focal / math.sqrt(G) * inv_s * A2 * c.A_lens)


def snr_setup2(c: AnalyticCoefficients2, obj: ObjectMask, pupil: LensPupil, rho_a, rtol: float = 1e-7) -> float:
    """``Sigma_ref / sqrt(F0)`` from the exact 1D expressions."""
    return sigma_ref_setup2(c, obj, pupil, rho_a, rtol) / math.sqrt(f0_setup2(c, obj, pupil, rho_a, rtol))


# ---------------------------------------------------------------------------
# comparison and planning


@dataclass(frozen=True)
class SetupModel:
    """Everything needed to evaluate one arrangement analytically."""

    source: SourceModel
    geometry: GeometryConfig
    obj: ObjectMask
    pupil: LensPupil | None = None
    detector_area: float | None = None
    dim: int = 2

    def coefficients(self):
        if self.geometry.kind is SetupKind.SETUP1:
            return coefficients_setup1(self.source, self.geometry, self.dim)
        if self.pupil is None:
            raise ConfigError("arrangement 2 needs a lens pupil", "pupil")
        return coefficients_setup2(self.source, self.geometry, self.pupil, self.detector_area, self.dim)

    def snr(self, rho_a, variant: str = "full", convention: str = "printed"):
        c = self.coefficients()
        if self.geometry.kind is SetupKind.SETUP1:
            return snr_setup1_g(c, self.obj, rho_a, variant, convention)
        return snr_setup2_g(c, self.obj, self.pupil, rho_a, variant, convention)


def compare_setups(cfg1: SetupModel, cfg2: SetupModel, rho_a=None, variant: str = "far",
                   convention: str = "printed") -> dict:
    """SNR of two arrangements at the same point and the relative frame budget.

    ``ratio = R2 / R1``; ``frames_ratio = ratio^-2`` is the fraction of frames
    the second configuration needs to match the first.
    """
    if rho_a is None:
        rho_a = np.zeros(cfg1.dim) if cfg1.dim == 2 else 0.0
    r1 = float(cfg1.snr(rho_a, variant, convention))
    r2 = float(cfg2.snr(rho_a, variant, convention))
    ratio = r2 / r1
    return {"R1_per_sqrt_Nf": r1, "R2_per_sqrt_Nf": r2, "ratio": ratio, "frames_ratio": ratio**-2}


def frames_needed(target_R: float, R_per_sqrt_frame: float) -> int:
    """Smallest frame count reaching ``target_R``: ``ceil((target / R_per_sqrt_frame)^2)``."""
    if not target_R > 0:
        raise ConfigError("must be positive", "target_R")
    if not R_per_sqrt_frame > 0:
        raise ConfigError("must be positive", "R_per_sqrt_frame")
    q = (target_R / R_per_sqrt_frame) ** 2
    n = math.ceil(q)
    # guard against round-off pushing an exact square up by one
    if n - q > 1 - 1e-9 and n > 1:
        n -= 1
    return max(1, n)


# ---------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ("sweep_variable", "R1_per_sqrt_Nf", "R1_ghost_focused", "R2_per_sqrt_Nf", "R2_focused", "ratio")


def sweep_setup1(source: SourceModel, z_a: float, z_b_values: Sequence[float], obj: ObjectMask,
                 rho_a=None, convention: str = "printed", M: float = 1.0, S1: float | None = None,
                 dim: int = 2) -> list[dict]:
    """Refocused SNR versus object distance at fixed ``z_a``, with the focused ghost image at ``z_a = z_b``."""
    if rho_a is None:
        rho_a = np.zeros(dim) if dim == 2 else 0.0
    rows = []
    for zb in z_b_values:
        row = {"sweep_variable": zb}
        try:
            g = GeometryConfig.setup1_magnified(z_a, zb, S1 if S1 is not None else zb, M)
            c = coefficients_setup1(source, g, dim)
            gf = GeometryConfig.setup1_magnified(zb, zb, S1 if S1 is not None else zb, M)
            cf = coefficients_setup1(source, gf, dim)
            row["R1_per_sqrt_Nf"] = float(snr_setup1_g(c, obj, rho_a, "full", convention))
            row["R1_ghost_focused"] = float(snr_setup1_g(cf, obj, rho_a, "focused", convention))
        except QuadratureError as exc:
            row.update(R1_per_sqrt_Nf=math.nan, R1_ghost_focused=math.nan, note=f"quadrature failed: {exc}")
        rows.append(row)
    return rows


def sweep_setup2(source: SourceModel, z_b: float, S1_values: Sequence[float], S2: float, f: float,
                 obj: ObjectMask, pupil: LensPupil, rho_a=None, convention: str = "printed",
                 detector_area: float | None = None, dim: int = 2) -> list[dict]:
    """Refocused SNR versus object-to-lens distance at fixed ``z_b = z_a + S1``.

    Rows where the lens cannot form a real image of the object plane
    (``S1 <= f``) or the source would sit behind the object carry NaN and a note.
    """
    if rho_a is None:
        rho_a = np.zeros(dim) if dim == 2 else 0.0
    rows = []
    for S1 in S1_values:
        row = {"sweep_variable": S1}
        if S1 <= f or S1 >= z_b:
            row.update(R2_per_sqrt_Nf=math.nan, R2_focused=math.nan,
                       note="no real focused image (S1 <= f)" if S1 <= f else "z_a <= 0")
            rows.append(row)
            continue
        try:
            g = GeometryConfig.setup2(z_b - S1, S1, S2, f)
            c = coefficients_setup2(source, g, pupil, detector_area, dim)
            gf = GeometryConfig.setup2(z_b - S1, S1, g.S2f, f)
            cf = coefficients_setup2(source, gf, pupil, detector_area, dim)
            row["R2_per_sqrt_Nf"] = float(snr_setup2_g(c, obj, pupil, rho_a, "full", convention))
            row["R2_focused"] = float(snr_setup2_g(cf, obj, pupil, rho_a, "focused", convention))
        except QuadratureError as exc:
            row.update(R2_per_sqrt_Nf=math.nan, R2_focused=math.nan, note=f"quadrature failed: {exc}")
        rows.append(row)
    return rows


def merge_sweeps(rows1: list[dict], rows2: list[dict]) -> list[dict]:
    """Join two sweeps on the sweep variable and add ``ratio = R2 / R1``."""
    by = {}
    for r in rows1 + rows2:
        by.setdefault(round(r["sweep_variable"], 12), {}).update(r)
    out = []
    for key in sorted(by):
        r = {c: by[key].get(c, math.nan) for c in SWEEP_COLUMNS}
        r["sweep_variable"] = by[key]["sweep_variable"]
        r["ratio"] = r["R2_per_sqrt_Nf"] / r["R1_per_sqrt_Nf"]
        if "note" in by[key]:
            r["note"] = by[key]["note"]
        out.append(r)
    return out
