import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpisnr import ConfigError, GeometryConfig, LensPupil, ObjectMask, SamplingError, SetupKind, SourceModel
from cpisnr import refocus_params
from cpisnr.optics import (FieldGrid, apply_mask, check_fresnel_sampling, coherence_length, fresnel_propagate,
                           grid_coords)


def test_source_validation():
    s = SourceModel(1e-3, 1e-5, 500e-9)
    assert s.k == pytest.approx(2 * math.pi / 500e-9)
    assert s.coherence_factor(2) == pytest.approx(2 * math.pi * 1e-10)
    with pytest.raises(ConfigError):
        SourceModel(1e-3, 2e-4, 500e-9)
    with pytest.raises(ConfigError):
        SourceModel(-1e-3, 1e-5, 500e-9)
    assert coherence_length(0.1, s) == pytest.approx(0.1 / (s.k * 1e-3))
    with pytest.raises(ConfigError):
        coherence_length(0.0, s)


def test_setup1_geometry_and_refocus():
    g = GeometryConfig.setup1_magnified(0.15, 0.08, 0.1, 2.0)
    assert g.kind is SetupKind.SETUP1
    assert g.M == pytest.approx(2.0)
    assert 1 / g.S2 + 1 / (g.S1 + g.z_b) == pytest.approx(1 / g.f)
    p = refocus_params(g)
    assert p.alpha == pytest.approx(0.15 / 0.08)
    assert p.beta == pytest.approx(-(1 - 0.15 / 0.08) / 2.0)
    assert refocus_params(g.with_(z_a=0.08)).focused
    with pytest.raises(ConfigError):
        GeometryConfig(SetupKind.SETUP1, 0.1, 0.1, 0.1, 0.2, 0.3)


def test_setup2_geometry_and_refocus():
    g = GeometryConfig.setup2(0.22, 0.08, 0.15, 0.075)
    assert g.z_b == pytest.approx(0.30)
    assert g.S2f == pytest.approx(1 / (1 / 0.075 - 1 / 0.08))
    p = refocus_params(g)
    assert p.alpha == pytest.approx(0.15 / g.S2f)
    assert p.alpha + p.beta == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        GeometryConfig.setup2(0.22, 0.075, 0.15, 0.075)
    with pytest.raises(ConfigError):
        GeometryConfig(SetupKind.SETUP2, 0.22, 0.25, 0.08, 0.15, 0.075)


def test_double_slit_integrals():
    m = ObjectMask.double_slit(20e-6, 60e-6)
    assert m.area2() == pytest.approx(40e-6)
    assert m.area4() == pytest.approx(40e-6)
    assert m.autocorrelation(0.0) == pytest.approx(40e-6)
    assert m.autocorrelation(60e-6) == pytest.approx(20e-6)
    assert m.autocorrelation(200e-6) == 0
    assert m(np.array([-30e-6, 0.0, 30e-6])).tolist() == [1.0, 0.0, 1.0]
    with pytest.raises(ConfigError):
        ObjectMask.double_slit(20e-6, 10e-6)


def test_sample_is_pixel_average():
    m = ObjectMask.double_slit(10e-6, 30e-6)
    x = grid_coords(200, 1e-6)
    assert m.sample(x).sum() * 1e-6 == pytest.approx(m.area2())
    s2 = ObjectMask.double_slit(10e-6, 30e-6, dim=2, height=20e-6).sample(x, x)
    assert s2.sum() * 1e-12 == pytest.approx(400e-12)


def test_disk_and_gaussian_masks():
    d = ObjectMask.disk(1e-3)
    assert d.area2() == pytest.approx(math.pi * 1e-6)
    assert d.autocorrelation(0.0, 0.0) == pytest.approx(d.area2())
    assert d.autocorrelation(2e-3, 0.0) == pytest.approx(0.0, abs=1e-18)
    g = ObjectMask.gaussian(5e-6, dim=2)
    assert g.area2() == pytest.approx(math.pi * 25e-12)
    assert ObjectMask.disk(1e-3, dim=1).area2() == pytest.approx(2e-3)


def test_sampled_mask():
    m = ObjectMask.sampled(np.array([0.0, 0.5, 1.0, 0.5]), 1e-6)
    assert m.area2() == pytest.approx(1.5e-6)
    assert m.area4() == pytest.approx(1.125e-6)
    with pytest.raises(ConfigError):
        ObjectMask.sampled(np.array([0.0, 2.0]), 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-6, 50e-6), st.floats(1.0, 5.0), st.floats(0.05, 20.0))
def test_gaussian_weighted_autocorrelation_limits_and_quadrature(w, sep_ratio, width_ratio):
    m = ObjectMask.double_slit(w, sep_ratio * w)
    width = width_ratio * w
    u = np.linspace(-12 * width, 12 * width, 20001)
    direct = np.trapezoid(np.exp(-(u / width) ** 2) * m.autocorrelation(u), u)
    assert m.gaussian_weighted_autocorrelation(width) == pytest.approx(direct, rel=2e-3)


def test_gaussian_weighted_autocorrelation_asymptotes():
    m = ObjectMask.double_slit(10e-6, 30e-6)
    small = 1e-9
    assert m.gaussian_weighted_autocorrelation(small) == pytest.approx(math.sqrt(math.pi) * small * m.area4(),
                                                                       rel=1e-3)
    assert m.gaussian_weighted_autocorrelation(1.0) == pytest.approx(m.area2() ** 2, rel=1e-6)
    d = ObjectMask.disk(10e-6)
    assert d.gaussian_weighted_autocorrelation(1.0) == pytest.approx(d.area2() ** 2, rel=1e-5)


def test_pupil():
    p = LensPupil("gaussian", 1e-3)
    assert p.area(2) == pytest.approx(2 * math.pi * 1e-6)
    x = np.linspace(-8e-3, 8e-3, 4001)
    assert np.trapezoid(np.abs(p(x)) ** 2, x) == pytest.approx(p.area(1), rel=1e-6)
    assert LensPupil("circular", 1e-3).area(1) == pytest.approx(2e-3)
    with pytest.raises(ConfigError):
        LensPupil("square", 1e-3)


def test_fresnel_gaussian_beam():
    # free propagation of a gaussian amplitude matches its closed form
    k = 2 * math.pi / 500e-9
    w0, z = 50e-6, 0.02
    f = FieldGrid(np.exp(-grid_coords(512, 2e-6) ** 2 / (2 * w0**2)), 2e-6)
    out = fresnel_propagate(f, z, k, n_out=256, pitch_out=4e-6)
    q = 1 + 1j * z / (k * w0**2)
    exact = np.exp(-out.x**2 / (2 * w0**2 * q)) / np.sqrt(q)
    np.testing.assert_allclose(out.values, exact, atol=1e-6)
    assert out.power() == pytest.approx(f.power(), rel=1e-6)


def test_fresnel_sampling_check():
    with pytest.raises(SamplingError):
        check_fresnel_sampling(10e-6, 5e-3, 5e-3, 0.01, 500e-9)
    check_fresnel_sampling(0.1e-6, 5e-3, 5e-3, 0.01, 500e-9)


def test_lens_focuses_plane_wave():
    k = 2 * math.pi / 500e-9
    f = FieldGrid(np.ones(1024), 2e-6)
    lensed = apply_mask(f, LensPupil("circular", 0.8e-3), focal_length=0.05, k=k)
    out = fresnel_propagate(lensed, 0.05, k, n_out=201, pitch_out=1e-6)
    assert np.argmax(out.intensity()) == 100
    with pytest.raises(ConfigError):
        apply_mask(f, LensPupil("circular", 1e-3))
