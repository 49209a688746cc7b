"""Numerical integration helpers.

Adaptive Gauss-Kronrod (via scipy) for one-dimensional and nested integrals,
composite Gauss-Legendre rules with panel doubling for vectorised integrands,
and scrambled Sobol sampling for high-dimensional integrals. Complex
integrands are integrated as a real/imaginary pair on shared nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .errors import QuadratureError


@dataclass(frozen=True)
class QuadResult:
    value: complex | float | np.ndarray
    error: float
    n_eval: int


def _as_pair(f):
    def g(x):
        v = np.asarray(f(x))
        if np.iscomplexobj(v):
            return np.concatenate([np.atleast_1d(v.real), np.atleast_1d(v.imag)])
        return np.atleast_1d(v).astype(float)
    return g


def integrate_1d(f: Callable, a: float, b: float, rtol: float = 1e-6, atol: float = 0.0,
                 points: Sequence[float] | None = None, limit: int = 2000) -> QuadResult:
    """Adaptive Gauss-Kronrod integral of a scalar or vector (possibly complex) integrand."""
    probe = np.asarray(f(0.5 * (a + b)))
    is_complex = np.iscomplexobj(probe)
    shape = probe.shape
    pts = None
    if points is not None:
        pts = sorted(p for p in points if a < p < b) or None
    val, err, info = integrate.quad_vec(_as_pair(f), a, b, epsabs=atol, epsrel=rtol, limit=limit,
                                        points=pts, full_output=True)
    if not info.success:
        raise QuadratureError(f"adaptive quadrature did not converge on [{a:.4g}, {b:.4g}]", val, err)
    if is_complex:
        n = val.size // 2
        val = val[:n] + 1j * val[n:]
    val = val.reshape(shape) if shape else val[0]
    return QuadResult(val, float(err), int(info.neval))


def gauss_legendre_nodes(a: float, b: float, n_panels: int, order: int = 16,
                         breakpoints: Sequence[float] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on ``[a, b]`` with panels split at ``breakpoints``."""
    edges = np.unique(np.concatenate([[a, b], [p for p in breakpoints if a < p < b]]))
    lengths = np.diff(edges)
    # distribute panels in proportion to segment length, at least one each
    share = np.maximum(1, np.round(n_panels * lengths / lengths.sum()).astype(int))
    t, w = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for lo, hi, m in zip(edges[:-1], edges[1:], share):
        pe = np.linspace(lo, hi, m + 1)
        half = np.diff(pe)[:, None] / 2
        mid = (pe[:-1] + pe[1:])[:, None] / 2
        xs.append((mid + half * t).ravel())
        ws.append((half * w).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def integrate_panels(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, rtol: float = 1e-6,
                     atol: float = 0.0, breakpoints: Sequence[float] = (), n_panels: int = 8,
                     order: int = 16, max_doublings: int = 10) -> QuadResult:
    """Composite Gauss-Legendre integration, doubling panels until two estimates agree.

    ``f`` maps an array of nodes to values (trailing axes allowed; reduction is
    over the first axis).
    """
    prev = None
    n_eval = 0
    for _ in range(max_doublings + 1):
        x, w = gauss_legendre_nodes(a, b, n_panels, order, breakpoints)
        vals = np.asarray(f(x))
        n_eval += x.size
        cur = np.tensordot(w, vals, axes=(0, 0))
        if prev is not None:
            err = float(np.max(np.abs(cur - prev)))
            scale = float(np.max(np.abs(cur)))
            if err <= max(atol, rtol * scale):
                return QuadResult(cur, err, n_eval)
        prev = cur
        n_panels *= 2
    raise QuadratureError(f"panel doubling did not reach rtol={rtol:g}", prev, err)


def integrate_qmc(f: Callable[[np.ndarray], np.ndarray], lows: Sequence[float], highs: Sequence[float],
                  n_points: int = 2**20, n_replicates: int = 8, rtol: float = 1e-3, seed: int = 0,
                  batch: int = 2**16, raise_on_fail: bool = True) -> QuadResult:
    """Randomised quasi-Monte Carlo over a box.

    ``n_points`` are split across ``n_replicates`` independently scrambled
    Sobol sequences; the spread between replicates gives the error estimate.
    """
    lows = np.asarray(lows, float)
    highs = np.asarray(highs, float)
    vol = float(np.prod(highs - lows))
    m = max(1, int(np.log2(max(2, n_points // n_replicates))))
    per = 2**m
    ests = []
    for r in range(n_replicates):
        eng = qmc.Sobol(d=lows.size, scramble=True, seed=np.random.default_rng([seed, r]))
        acc = 0.0
        done = 0
        while done < per:
            take = min(batch, per - done)
            u = eng.random(take)
            acc = acc + np.sum(f(lows + u * (highs - lows)), axis=0)
            done += take
        ests.append(vol * acc / per)
    ests = np.asarray(ests)
    val = ests.mean(axis=0)
    err = float(np.max(np.abs(ests.std(axis=0, ddof=1) / np.sqrt(n_replicates))))
    if raise_on_fail and err > rtol * float(np.max(np.abs(val))):
        raise QuadratureError(f"quasi-Monte Carlo error {err:.3g} above rtol={rtol:g}", val, err)
    return QuadResult(val, err, per * n_replicates)
