"""Integrals of object transmittances against separable kernels.

Masks made of constant rectangles are integrated piece by piece (exactly in
the transverse product structure), gaussian masks are folded into the kernel,
and disks fall back to a tensor Gauss-Legendre rule in polar coordinates.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import QuadratureError
from .optics import ObjectMask
from .quadrature import gauss_legendre_nodes, integrate_panels


def axis_integral(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, rtol: float = 1e-8,
                  n_panels: int = 8, breakpoints=()) -> complex:
    return integrate_panels(f, lo, hi, rtol=rtol, n_panels=n_panels, breakpoints=breakpoints).value


def integrate_separable(obj: ObjectMask, fx: Callable, fy: Callable | None = None, power: int = 1,
                        rtol: float = 1e-8, n_panels: int = 8) -> complex:
    """``int A(o)^power fx(o_x) [fy(o_y)] do`` for a kernel that factorises over axes.

    ``fx`` and ``fy`` map node arrays to (possibly complex) values; trailing
    axes of their output are carried through, so vector-valued kernels work.
    """
    if obj.dim == 2 and fy is None:
        raise ValueError("2D objects need a kernel for each axis")
    if obj.kind == "gaussian":
        w = obj.width
        L = 8.0 * w / math.sqrt(power)

        def g(f):
            def h(x):
                v = np.asarray(f(x))
                env = np.exp(-power * x**2 / (2 * w * w))
                return env.reshape(env.shape + (1,) * (v.ndim - 1)) * v
            return h

        ix = axis_integral(g(fx), -L, L, rtol, n_panels)
        return ix if obj.dim == 1 else ix * axis_integral(g(fy), -L, L, rtol, n_panels)
    pcs = obj.pieces()
    if pcs is not None:
        total = 0.0
        for pc in pcs:
            if obj.dim == 1:
                lo, hi, v = pc
                total = total + v**power * axis_integral(fx, lo, hi, rtol, max(1, n_panels // 4))
            else:
                x0, x1, y0, y1, v = pc
                total = total + v**power * axis_integral(fx, x0, x1, rtol, max(1, n_panels // 4)) * axis_integral(
                    fy, y0, y1, rtol, max(1, n_panels // 4))
        return total
    return integrate_general(obj, lambda x, y: fx(x) * fy(y), power, rtol)


def integrate_general(obj: ObjectMask, f: Callable[[np.ndarray, np.ndarray], np.ndarray], power: int = 1,
                      rtol: float = 1e-8, order: int = 16, max_doublings: int = 7) -> complex:
    """``int A(o)^power f(o_x, o_y) d^2 o`` for any 2D mask (or 1D when ``f`` ignores ``y``)."""
    if obj.dim == 1:
        def g(x):
            return obj(x) ** power * f(x, None)
        L = obj.half_extent()
        return integrate_panels(g, -L, L, rtol=rtol, breakpoints=obj.breakpoints(), n_panels=16).value
    prev = None
    n = 4
    for _ in range(max_doublings):
        X, Y, W = object_nodes(obj, n, order, power)
        cur = np.tensordot(W, f(X, Y), axes=(0, 0))
        if prev is not None and np.max(np.abs(cur - prev)) <= rtol * max(np.max(np.abs(cur)), 1e-300):
            return cur
        prev = cur
        n *= 2
    raise QuadratureError("2D object integral did not converge; use a separable mask", prev)


def object_nodes(obj: ObjectMask, n: int, order: int = 16, power: int = 1):
    """Quadrature nodes ``(x, y, w)`` with ``sum w g(x, y) ~ int A^power g`` (``y`` is None in 1D)."""
    pcs = obj.pieces()
    if obj.dim == 1:
        if pcs is not None:
            xs, ws = [], []
            for lo, hi, v in pcs:
                x, w = gauss_legendre_nodes(lo, hi, max(1, n // 4), order)
                xs.append(x)
                ws.append(w * v**power)
            return np.concatenate(xs), None, np.concatenate(ws)
        L = obj.half_extent()
        x, w = gauss_legendre_nodes(-L, L, n, order)
        return x, None, w * obj(x) ** power
    if obj.kind == "disk":
        r, wr = gauss_legendre_nodes(0.0, obj.radius, n, order)
        t, wt = gauss_legendre_nodes(0.0, 2 * math.pi, 4 * n, order)
        R, T = np.meshgrid(r, t, indexing="ij")
        return (R * np.cos(T)).ravel(), (R * np.sin(T)).ravel(), np.outer(wr * r, wt).ravel()
    if pcs is not None:
        xs, ys, ws = [], [], []
        for x0, x1, y0, y1, v in pcs:
            x, wx = gauss_legendre_nodes(x0, x1, max(1, n // 4), order)
            y, wy = gauss_legendre_nodes(y0, y1, max(1, n // 4), order)
            X, Y = np.meshgrid(x, y, indexing="ij")
            xs.append(X.ravel())
            ys.append(Y.ravel())
            ws.append(np.outer(wx, wy).ravel() * v**power)
        return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)
    L = obj.half_extent()
    x, w = gauss_legendre_nodes(-L, L, n, order)
    X, Y = (a.ravel() for a in np.meshgrid(x, x, indexing="ij"))
    return X, Y, np.outer(w, w).ravel() * obj(X, Y) ** power


def piece_exp_integral(lo, hi, c):
    """``int_lo^hi exp(-i c u) du`` elementwise, zero for empty intervals."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    c = np.asarray(c, float)
    length = np.clip(hi - lo, 0.0, None)
    small = np.abs(c) * np.maximum(np.abs(hi), np.abs(lo)) < 1e-9
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.exp(-1j * c * lo) - np.exp(-1j * c * hi)) / (1j * c)
    # expansion around c = 0
    mid = 0.5 * (lo + hi)
    approx = length * np.exp(-1j * c * mid)
    return np.where(length > 0, np.where(small, approx, val), 0.0)
