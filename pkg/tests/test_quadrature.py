import math

import numpy as np
import pytest

from cpisnr import ObjectMask, QuadratureError
from cpisnr.objint import integrate_general, integrate_separable, object_nodes, piece_exp_integral
from cpisnr.quadrature import gauss_legendre_nodes, integrate_1d, integrate_panels, integrate_qmc


def test_integrate_1d_complex_vector():
    r = integrate_1d(lambda x: np.array([np.exp(1j * x), x**2]), 0.0, math.pi, rtol=1e-10)
    np.testing.assert_allclose(r.value, [2j, math.pi**3 / 3], rtol=1e-9)


def test_gauss_legendre_breakpoints():
    x, w = gauss_legendre_nodes(-1.0, 2.0, 6, breakpoints=[0.5])
    assert w.sum() == pytest.approx(3.0)
    f = np.where(x < 0.5, 1.0, 3.0)
    assert np.sum(w * f) == pytest.approx(1.5 + 4.5)


def test_integrate_panels_oscillatory():
    r = integrate_panels(lambda t: np.exp(1j * 200 * t), 0.0, 1.0, rtol=1e-12)
    assert r.value == pytest.approx((np.exp(200j) - 1) / 200j, rel=1e-10)


def test_integrate_panels_raises():
    with pytest.raises(QuadratureError):
        integrate_panels(lambda t: np.sign(t - 0.3141), 0.0, 1.0, rtol=1e-14, max_doublings=2)


def test_integrate_qmc():
    r = integrate_qmc(lambda u: np.prod(u, axis=1), [0, 0, 0], [1, 2, 1], n_points=2**14, rtol=1e-2)
    assert r.value == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(QuadratureError):
        integrate_qmc(lambda u: np.prod(u, axis=1), [0, 0], [1, 1], n_points=64, rtol=1e-12)


def test_piece_exp_integral():
    lo, hi = np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0])
    c = np.array([3.0, 3.0, 0.0])
    v = piece_exp_integral(lo, hi, c)
    assert v[0] == pytest.approx((1 - np.exp(-3j)) / 3j)
    assert v[1] == 0 and v[2] == 0
    assert piece_exp_integral(0.0, 2.0, 0.0) == pytest.approx(2.0)


def test_integrate_separable_slit_and_gaussian():
    m = ObjectMask.double_slit(1.0, 3.0)
    v = integrate_separable(m, lambda x: np.exp(-1j * x))
    exact = 2 * np.cos(1.5) * 2 * np.sin(0.5)
    assert v == pytest.approx(exact, rel=1e-10)
    g = ObjectMask.gaussian(2.0)
    assert integrate_separable(g, lambda x: np.ones_like(x), power=2) == pytest.approx(g.area2(), rel=1e-10)
    with pytest.raises(ValueError):
        integrate_separable(ObjectMask.disk(1.0), lambda x: x)


def test_integrate_general_disk():
    d = ObjectMask.disk(2.0)
    assert integrate_general(d, lambda x, y: np.ones_like(x)) == pytest.approx(4 * math.pi, rel=1e-10)
    r2 = integrate_general(d, lambda x, y: x**2 + y**2)
    assert r2 == pytest.approx(math.pi * 2.0**4 / 2, rel=1e-10)
    x, y, w = object_nodes(ObjectMask.double_slit(1.0, 3.0, dim=2, height=2.0), 8)
    assert w.sum() == pytest.approx(4.0)
