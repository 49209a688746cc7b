import numpy as np
import pytest

from cpisnr import ConfigError, GeometryConfig, LensPupil, ObjectMask, SamplingError, SourceModel
from cpisnr.speckle import (FrameEnsemble, GridSpec, SimulationGrids, SpeckleConfig, sample_source_batch,
                            sample_source_field, simulate_frames, worker_count)

from conftest import SRC


def test_speckle_config_validation():
    with pytest.raises(ConfigError):
        SpeckleConfig(SRC, GridSpec(100, 1e-6))  # narrower than 8 sigma_i
    with pytest.raises(ConfigError):
        SpeckleConfig(SRC, GridSpec(1000, 5e-6), n_frames=0)
    with pytest.raises(ConfigError):
        GridSpec(0, 1e-6)


def test_source_field_statistics():
    cfg = SpeckleConfig(SRC, GridSpec(400, 12.5e-6), master_seed=1)
    batch = sample_source_batch(cfg, 0, 4000)
    np.testing.assert_array_equal(batch[17], sample_source_field(cfg, 17).values)
    var = cfg.pixel_variance()
    emp = np.mean(np.abs(batch) ** 2, axis=0)
    centre = var > 0.5 * var.max()
    np.testing.assert_allclose(emp[centre], var[centre], rtol=0.1)
    # neighbouring pixels are uncorrelated
    c = np.mean(batch[:, 200] * batch[:, 201].conj())
    assert abs(c) < 5 * var[200] / np.sqrt(4000)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CPI_THREADS", "1")
    assert worker_count(8) == 1
    monkeypatch.setenv("CPI_THREADS", "x")
    with pytest.raises(ConfigError):
        worker_count()


def test_simulation_independent_of_partition(focused_model):
    m = focused_model
    sp = SpeckleConfig(m.speckle.source, m.speckle.grid, 3, 40, 1)
    a = simulate_frames(sp, m.geometry, m.obj, None, m.grids, workers=1, chunk=64)
    b = simulate_frames(sp, m.geometry, m.obj, None, m.grids, workers=3, chunk=7)
    np.testing.assert_array_equal(a.I_A, b.I_A)
    np.testing.assert_array_equal(a.I_B, b.I_B)
    tail = simulate_frames(SpeckleConfig(sp.source, sp.grid, 3, 15, 1), m.geometry, m.obj, None, m.grids,
                           first_frame=25)
    np.testing.assert_array_equal(tail.I_A, a.I_A[25:])
    assert tail.frame_indices[0] == 25


def test_mean_intensity_matches_exact(focused_model, focused_frames):
    W_AA, W_BB, _ = focused_model.correlations()
    ia, ib = focused_frames.I_A.mean(0), focused_frames.I_B.mean(0)
    n = len(focused_frames)
    # chaotic light: each pixel mean has relative standard error 1/sqrt(N)
    za = (ia - W_AA.diagonal().real) / (W_AA.diagonal().real / np.sqrt(n))
    lit = W_BB.diagonal().real > 0.2 * W_BB.diagonal().real.max()
    zb = (ib - W_BB.diagonal().real)[lit] / (W_BB.diagonal().real[lit] / np.sqrt(n))
    assert np.mean(np.abs(za) < 4) > 0.99
    assert np.mean(np.abs(zb) < 4) > 0.99


def test_sampling_error_on_coarse_grid():
    g = GeometryConfig.setup1_magnified(0.1, 0.1, 0.05, 1.0)
    grids = SimulationGrids(GridSpec(100, 2e-6), GridSpec(100, 20e-6), GridSpec(50, 4e-6), GridSpec(200, 50e-6))
    sp = SpeckleConfig(SRC, GridSpec(100, 60e-6), n_frames=2)
    with pytest.raises(SamplingError):
        simulate_frames(sp, g, ObjectMask.double_slit(40e-6, 120e-6), None, grids)


def test_dimension_mismatch():
    g = GeometryConfig.setup1_magnified(0.1, 0.1, 0.05, 1.0)
    grids = SimulationGrids(GridSpec(10, 2e-6), GridSpec(10, 20e-6), GridSpec(10, 4e-6), GridSpec(10, 50e-6))
    sp = SpeckleConfig(SRC, GridSpec(1000, 5e-6), n_frames=2)
    with pytest.raises(ConfigError):
        simulate_frames(sp, g, ObjectMask.disk(1e-4, dim=2), None, grids)


def test_two_dimensional_smoke():
    src = SourceModel(0.1e-3, 5e-6, 532e-9)
    g = GeometryConfig.setup2(0.05, 0.04, 0.12, 0.03)
    grids = SimulationGrids(GridSpec(24, 8e-6), GridSpec(24, 10e-6), GridSpec(24, 6e-6), GridSpec(40, 10e-6))
    sp = SpeckleConfig(src, GridSpec(48, 17e-6), n_frames=3, dim=2)
    ens = simulate_frames(sp, g, ObjectMask.disk(50e-6), LensPupil("gaussian", 0.1e-3), grids)
    assert ens.I_A.shape == (3, 576) and ens.I_B.shape == (3, 576)
    assert ens.side("a") == 24 and np.all(ens.I_A >= 0)


def test_ensemble_views():
    e = FrameEnsemble(np.ones((4, 3)), np.ones((4, 2)), 1e-6, 2e-6)
    assert len(e.prefix(2)) == 2
    assert e.subset([1, 3]).frame_indices.tolist() == [1, 3]
    assert [p.frame_index for p in e] == [0, 1, 2, 3]
    with pytest.raises(ConfigError):
        FrameEnsemble(np.ones((4, 3)), np.ones((3, 2)), 1e-6, 2e-6)
