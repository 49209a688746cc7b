"""Acceptance checks 1-11.

Each test records one ``PASS``/``FAIL`` line (printed at the end of the
pytest run by ``conftest.py``, or directly when this file is executed as a
script) and then asserts the outcome.
"""

import math
import time

import numpy as np
import pytest

from cpisnr import GeometryConfig, LensPupil, ObjectMask, SourceModel
from cpisnr.analytic import (SetupModel, coefficients_setup1, coefficients_setup2, compare_setups,
                             f0_setup1, sigma_ref_setup1, snr_setup1_g, snr_setup2_g, sweep_setup1, sweep_setup2)
from cpisnr.appendix import delta_f_quadrature, delta_f_setup1_g, delta_f_setup2_g, mode_count_estimate
from cpisnr.estimator import estimate_gamma_ab, refocus
from cpisnr.slice1d import SliceModel
from cpisnr.speckle import GridSpec, SpeckleConfig, build_paths, sample_source_batch, simulate_frames

RESULTS: list[str] = []

LAM = 532e-9
FIG_SRC = SourceModel(2.5e-3, 2.5e-3 / 20, LAM)
FIG_DISK = ObjectMask.disk(math.sqrt(4e-6 / math.pi))
FIG_PUPIL = LensPupil("gaussian", 2.5e-3)
FIG_ZA = 0.15
FIG2_ZB = 0.30  # source to D_b in the second arrangement (z_a + S1)
ORIGIN = [0.0, 0.0]


def report(label: str, ok: bool, detail: str) -> bool:
    line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def fig_setup1(z_b):
    return GeometryConfig.setup1_magnified(FIG_ZA, z_b, z_b, 1.0)


def fig_setup2(S1, S2=0.15, f=0.075):
    return GeometryConfig.setup2(FIG2_ZB - S1, S1, S2, f)


# ---------------------------------------------------------------------------
# shared ensembles

SMALL_SRC = SourceModel(0.5e-3, 25e-6, LAM)
SMALL_SLITS = ObjectMask.double_slit(40e-6, 120e-6)


def small_focused(seed: int, n_frames: int) -> SliceModel:
    g = GeometryConfig.setup1_magnified(0.1, 0.1, 0.05, 1.0)
    return SliceModel.build(SMALL_SRC, g, SMALL_SLITS, None, GridSpec(401, 2e-6), GridSpec(301, 20e-6),
                            master_seed=seed, n_frames=n_frames)


def run(model: SliceModel):
    return simulate_frames(model.speckle, model.geometry, model.obj, model.pupil, model.grids)


@pytest.fixture(scope="module")
def small_run():
    m = small_focused(3, 10_000)
    return m, run(m)


# wider slits and a larger source: many modes per frame, so the variance
# corrections stay small and the focused closed form applies
WIDE_SRC = SourceModel(2e-3, 1e-4, LAM)
WIDE_SLITS = ObjectMask.double_slit(200e-6, 600e-6)
WIDE_IN = np.concatenate([np.linspace(-380e-6, -220e-6, 17), np.linspace(220e-6, 380e-6, 17)])
WIDE_OUT = np.array([-560e-6, -500e-6, -100e-6, -50e-6, 0.0, 50e-6, 100e-6, 500e-6, 560e-6])


@pytest.fixture(scope="module")
def wide_run():
    g = GeometryConfig.setup1_magnified(0.1, 0.1, 0.05, 1.0)
    m = SliceModel.build(WIDE_SRC, g, WIDE_SLITS, None, GridSpec(751, 2e-6), GridSpec(501, 50e-6),
                         master_seed=5, n_frames=10_000)
    t = time.time()
    ens = run(m)
    xs = np.concatenate([WIDE_IN, WIDE_OUT])
    img = refocus(ens, m.params(), xs)
    mo = m.moments(xs)
    return m, img, mo, time.time() - t


# ---------------------------------------------------------------------------


def test_criterion_01_chaotic_statistics(small_run):
    m, ens = small_run
    I = ens.I_A
    mean = I.mean(0)
    lit = mean > 0.5 * mean.max()
    c = I[:, lit].var(0) / mean[lit] ** 2
    ok = abs(c.mean() - 1) <= 0.05
    report("1", ok, f"<dI^2>/<I>^2 = {c.mean():.4f} averaged over {lit.sum()} well-lit D_a pixels "
                    f"(range {c.min():.3f}..{c.max():.3f}); {len(ens)} frames, 1D")
    assert ok


def _pair_check(F, W, pairs):
    """``<|E_i|^2 |E_j|^2>`` against ``<|E_i|^2><|E_j|^2> + |<E_i E_j*>|^2``; returns z-scores."""
    z = []
    for i, j in pairs:
        x = np.abs(F[:, i]) ** 2 * np.abs(F[:, j]) ** 2
        pred = W[i, i].real * W[j, j].real + abs(W[i, j]) ** 2
        z.append((x.mean() - pred) / (x.std() / math.sqrt(x.size)))
    return np.array(z)


def test_criterion_02_wick_factorisation():
    n = 100_000
    rng = np.random.default_rng(2)
    # source plane: small grid, delta-correlated field
    sp = SpeckleConfig(SMALL_SRC, GridSpec(48, 8 * SMALL_SRC.sigma_i / 48), master_seed=21, n_frames=n)
    E = np.concatenate([sample_source_batch(sp, lo, min(lo + 20_000, n)) for lo in range(0, n, 20_000)])
    W = np.diag(sp.pixel_variance()).astype(complex)
    idx = rng.choice(np.arange(16, 32), size=(10, 2))
    idx[:3, 1] = idx[:3, 0]  # equal-index pairs
    z_src = _pair_check(E, W, idx)
    # propagated fields on D_a and D_b, which are correlated across pixels
    m = small_focused(22, n)
    pa, pb = build_paths(m.speckle, m.geometry, m.obj, None, m.grids)
    rows_a = np.array([195, 200, 203, 210, 230])
    rows_b = np.array([140, 150, 155, 160, 170])
    T = np.vstack([pa.matrix[rows_a], pb.matrix[rows_b]])
    var = m.speckle.pixel_variance()
    Wp = (T * var) @ T.conj().T
    Fp = np.concatenate([sample_source_batch(m.speckle, lo, min(lo + 5000, n)) @ T.T for lo in range(0, n, 5000)])
    prop_pairs = [(0, 0), (0, 1), (1, 2), (0, 3), (2, 4), (5, 5), (5, 6), (0, 5), (2, 7), (4, 9)]
    z_prop = _pair_check(Fp, Wp, prop_pairs)
    ok = bool(np.all(np.abs(z_src) < 4) and np.all(np.abs(z_prop) < 4))
    report("2", ok, f"{n} realisations; source-plane pairs max |z| = {np.abs(z_src).max():.2f}, "
                    f"propagated D_a/D_b pairs max |z| = {np.abs(z_prop).max():.2f} (limit 4)")
    assert ok


def test_criterion_03_sqrt_frames_law():
    t = time.time()
    # below ~1000 frames the sample F of the heavy-tailed products is biased low, inflating R
    sizes = np.array([1000, 2000, 4000, 8000, 16000])
    xs = np.array([-70e-6, -60e-6, -50e-6, 50e-6, 60e-6, 70e-6])
    slopes = []
    for seed in range(100, 120):
        m = small_focused(seed, int(sizes[-1]))
        ens = run(m)
        R = [refocus(ens.prefix(int(s)), m.params(), xs).snr.mean() for s in sizes]
        slopes.append(np.polyfit(np.log(sizes), np.log(R), 1)[0])
    s = float(np.mean(slopes))
    ok = abs(s - 0.5) <= 0.05
    report("3", ok, f"log-log slope of R vs N_f = {s:.4f} (mean of 20 seeds, spread {np.std(slopes):.3f}); "
                    f"{time.time() - t:.0f} s")
    assert ok


def test_criterion_04_focused_ghost_image(small_run):
    m, ens = small_run
    G = estimate_gamma_ab(ens)
    xa = ens.coords_a()
    sel = np.abs(xa) <= 150e-6
    mc = G.gamma[sel].sum(axis=1) * ens.pitch_b
    c = coefficients_setup1(SMALL_SRC, m.geometry, dim=1)
    oracle = np.array([sigma_ref_setup1(c, SMALL_SLITS, x) for x in xa[sel]])
    err = math.sqrt(np.mean((mc - oracle) ** 2)) / oracle.max()
    ok = err < 0.05
    report("4", ok, f"peak-normalised L2 error {err:.4f} over {sel.sum()} points (limit 0.05); {len(ens)} frames")
    assert ok


def test_criterion_05_focused_closed_form(wide_run):
    c2 = coefficients_setup1(FIG_SRC, fig_setup1(FIG_ZA))
    fig = snr_setup1_g(c2, FIG_DISK, ORIGIN, "focused")
    ok_fig = abs(fig / 4.502e-3 - 1) < 1e-3
    m, img, mo, dt = wide_run
    c1 = coefficients_setup1(WIDE_SRC, m.geometry, dim=1)
    closed = snr_setup1_g(c1, WIDE_SLITS, 300e-6, "focused")
    n_in = WIDE_IN.size
    r_mc = img.snr_per_sqrt_frame[:n_in]
    r_exact = (mo["sigma"] / np.sqrt(mo["F"]))[:n_in]
    rel = r_mc.mean() / closed - 1
    ok = ok_fig and abs(rel) < 0.15
    report("5", ok, f"2D figure value R/sqrt(N_f) = {fig:.4e} (expected 4.502e-3); 1D focused closed form "
                    f"{closed:.4f}, Monte Carlo {r_mc.mean():.4f} +- {r_mc.std() / math.sqrt(n_in):.4f} "
                    f"({rel:+.1%}, limit 15%), exact discrete {r_exact.mean():.4f}; {img.n_frames} frames, "
                    f"{dt:.0f} s")
    assert ok


def test_criterion_06_f0_flatness(wide_run):
    # analytic F0 at five probe points, continuum out of focus and discrete slice model at focus
    m, img, mo, _ = wide_run
    probes1 = np.array([0.0, 150e-6, 300e-6, 450e-6, 600e-6])
    c1 = coefficients_setup1(WIDE_SRC, GeometryConfig.setup1_magnified(0.1, 0.08, 0.05, 1.0), dim=1)
    f2 = np.array([f0_setup1(c1, WIDE_SLITS, x) for x in probes1])
    f1 = m.moments(probes1)["F0"]
    spread = max(np.ptp(f2) / f2.mean(), np.ptp(f1) / f1.mean())
    # Monte Carlo F with the exactly known corrections removed: no object-shaped step
    n_in = WIDE_IN.size
    dF = mo["F"] - mo["F0"]
    f0_mc = img.F - dF
    se = img.F_stderr
    d = f0_mc[:n_in].mean() - f0_mc[n_in:].mean()
    # neighbouring points are correlated, so use the per-point error as a conservative error of each mean
    sd = math.hypot(se[:n_in].mean(), se[n_in:].mean())
    raw = (img.F[:n_in].mean() - img.F[n_in:].mean()) / sd
    ok = spread < 1e-3 and abs(d) < 3 * sd
    report("6", ok, f"analytic F0 spread {spread:.1e} over 5 points (limit 1e-3); Monte Carlo F - dF "
                    f"in-object minus out-of-object = {d / sd:+.2f} sigma (limit 3); raw F step {raw:+.1f} sigma "
                    f"is the predicted dF/F0 = {dF[:n_in].mean() / mo['F0'].mean():.3f}")
    assert ok


def test_criterion_07_setup2_focused():
    c = coefficients_setup2(FIG_SRC, fig_setup2(0.08), FIG_PUPIL)
    cf = coefficients_setup2(FIG_SRC, fig_setup2(0.08, S2=fig_setup2(0.08).S2f), FIG_PUPIL)
    pts = [[0.0, 0.0], [0.3e-3, 0.0], [1e-3, -0.5e-3], [5e-3, 0.0]]
    vals = np.array([snr_setup2_g(cf, FIG_DISK, FIG_PUPIL, p, "focused") for p in pts])
    ident = 2 * c.sigma_B * math.sqrt(math.pi / c.A_Db)
    flat = np.ptp(vals) / vals.mean()
    ok = flat < 1e-12 and abs(vals[0] / ident - 1) < 1e-6 and abs(vals[0] / 5.7e-3 - 1) < 0.01
    report("7", ok, f"R/sqrt(N_f) = {vals[0]:.6e}, 2 sigma_B sqrt(pi/A_Db) = {ident:.6e} "
                    f"(sigma_B = {c.sigma_B * 1e6:.2f} um), spread over rho_a {flat:.1e}")
    assert ok


def test_criterion_08_defocus_scaling():
    t = time.time()
    # arrangement 1: vary z_a at fixed z_b over a decade of |1 - z_b/z_a| deep out of focus
    zb = 0.15
    D = np.geomspace(5, 50, 6)
    R1 = [snr_setup1_g(coefficients_setup1(FIG_SRC, GeometryConfig.setup1_magnified(zb / (1 + d), zb, zb, 1.0)),
                       FIG_DISK, ORIGIN, "full") for d in D]
    e1 = np.polyfit(np.log(D), np.log(R1), 1)[0]
    # arrangement 2: vary the focal length at S1 = S2 so that 1 - S2/S2f spans a decade
    S = 0.15
    betas = -np.geomspace(2, 20, 6)
    R2, bs = [], []
    for b in betas:
        g = GeometryConfig.setup2(0.15, S, S, 1 / (1 / S + (1 - b) / S))
        c = coefficients_setup2(FIG_SRC, g, FIG_PUPIL)
        bs.append(abs(c.beta))
        R2.append(snr_setup2_g(c, FIG_DISK, FIG_PUPIL, ORIGIN, "full"))
    e2 = np.polyfit(np.log(bs), np.log(R2), 1)[0]
    ok = abs(e1 - 1) <= 0.1 and abs(e2 - 2) <= 0.1
    report("8", ok, f"exponent arrangement 1 = {e1:.4f} (|1 - z_b/z_a| in 5..50), arrangement 2 = {e2:.4f} "
                    f"(|1 - S2/S2f| in 2..20); {time.time() - t:.1f} s")
    assert ok


def test_criterion_09_cross_setup_comparison():
    out = compare_setups(SetupModel(FIG_SRC, fig_setup1(0.08), FIG_DISK),
                         SetupModel(FIG_SRC, fig_setup2(0.08), FIG_DISK, FIG_PUPIL), ORIGIN, "far")
    ratio, fr = out["ratio"], out["frames_ratio"]
    # "about one tenth" read through the ratio tolerance: frames_ratio = ratio^-2 with ratio in 3.2 +- 10%
    lo, hi = 1 / (1.1 * 3.2) ** 2, 1 / (0.9 * 3.2) ** 2
    ok = abs(ratio / 3.2 - 1) <= 0.1 and lo <= fr <= hi and abs(fr * ratio**2 - 1) < 1e-12
    report("9", ok, f"ratio = {ratio:.4f} (3.2 +- 10%), frames_ratio = {fr:.4f} (window {lo:.4f}..{hi:.4f})")
    assert ok


def test_criterion_10a_focused_reduction(small_run):
    m, _ = small_run
    xs = np.array([-70e-6, -60e-6, -50e-6, 50e-6, 60e-6, 70e-6])
    mo = m.moments(xs)
    s2 = mo["sigma"] ** 2
    e1 = np.max(np.abs(mo["F1"].real / s2 - 1))
    e2 = np.max(np.abs(mo["F2"] / s2 - 1))
    ok = e1 < 1e-3 and e2 < 1e-3
    report("10a", ok, f"at focus max |F1/Sigma^2 - 1| = {e1:.1e}, max |F2/Sigma^2 - 1| = {e2:.1e} (limit 1e-3)")
    assert ok


def test_criterion_10b_f3_equals_f4():
    # arrangement 1: discrete quadrature in the geometric regime
    src = SourceModel(0.2e-3, 10e-6, LAM)
    g1 = GeometryConfig.setup1_magnified(0.1, 0.09, 0.05, 1.0)
    m1 = SliceModel.build(src, g1, ObjectMask.double_slit(200e-6, 500e-6), None, GridSpec(800, 4e-6),
                          GridSpec(200, 12e-6))
    q1 = delta_f_quadrature(m1, [250e-6])[0]
    # arrangement 2: discrete quadrature with the gaussian detector weight
    g2 = GeometryConfig.setup2(0.05, 0.1, 0.09, 0.05)
    pup = LensPupil("gaussian", 0.2e-3)
    m2 = SliceModel.build(SourceModel(1e-3, 5e-5, LAM), g2, ObjectMask.double_slit(200e-6, 500e-6), pup,
                          GridSpec(400, 4e-6), GridSpec(200, 8e-6))
    q2 = delta_f_quadrature(m2, [-250e-6 * g2.mu], detector_area=pup.area(1))[0]
    # two-dimensional closed forms
    c1 = coefficients_setup1(FIG_SRC, fig_setup1(0.12))
    b1 = delta_f_setup1_g(c1, FIG_DISK, ORIGIN)
    c2 = coefficients_setup2(FIG_SRC, fig_setup2(0.1), FIG_PUPIL)
    b2 = delta_f_setup2_g(c2, FIG_DISK, FIG_PUPIL, ORIGIN)
    d1, d2 = abs(q1.F3 / q1.F4 - 1), abs(q2.F3 / q2.F4 - 1)
    ok = d1 < 0.01 and d2 < 0.01 and b1.F3 == b1.F4 and b2.F3 == b2.F4
    report("10b", ok, f"quadrature |F3/F4 - 1| = {d1:.1e} (arrangement 1), {d2:.1e} (arrangement 2), limit 1e-2; "
                      "closed forms equal")
    assert ok


def test_criterion_10c_corrections_suppressed():
    lines, ok = [], True
    for zb in (0.12, 0.14, 0.149):
        g = fig_setup1(zb)
        nb = mode_count_estimate(FIG_SRC, g, FIG_DISK)
        b = delta_f_setup1_g(coefficients_setup1(FIG_SRC, g), FIG_DISK, ORIGIN, nb)
        good = nb > 100 and abs(b.ratio) < 10 / nb
        ok &= good
        lines.append(f"z_b={zb * 1e3:.0f} mm: |dF|/F0 = {abs(b.ratio):.2e}, 10/N_b = {10 / nb:.2e}")
    # reported for context: far from focus and arrangement 2 (see notes)
    g = fig_setup1(0.08)
    nb = mode_count_estimate(FIG_SRC, g, FIG_DISK)
    b = delta_f_setup1_g(coefficients_setup1(FIG_SRC, g), FIG_DISK, ORIGIN, nb)
    g2 = fig_setup2(0.1)
    nb2 = mode_count_estimate(FIG_SRC, g2, pupil=FIG_PUPIL)
    b2 = delta_f_setup2_g(coefficients_setup2(FIG_SRC, g2, FIG_PUPIL), FIG_DISK, FIG_PUPIL, ORIGIN, nb2)
    report("10c", ok, "; ".join(lines) + f" [context: arrangement 1 z_b=80 mm ratio*N_b = {b.ratio * nb:.1f}, "
                      f"arrangement 2 S1=100 mm ratio*N_b = {b2.ratio * nb2:.1f}]")
    assert ok


def test_criterion_10d_monte_carlo_variance(wide_run):
    m, img, mo, _ = wide_run
    xs = np.concatenate([WIDE_IN, WIDE_OUT])
    pick = [int(np.argmin(np.abs(xs - x))) for x in (300e-6, -220e-6, 0.0)]
    z = (img.F[pick] - mo["F"][pick]) / img.F_stderr[pick]
    ok = bool(np.all(np.abs(z) < 5))
    report("10d", ok, "F_MC vs F0 + dF at x = " + ", ".join(f"{xs[i] * 1e6:.0f} um: {zz:+.2f} sigma"
                                                            for i, zz in zip(pick, z))
           + f" (limit 5); {img.n_frames} frames")
    assert ok


def test_criterion_11_figure_shapes():
    t = time.time()
    zbs = np.linspace(0.05, 0.149, 34)
    rows1 = sweep_setup1(FIG_SRC, FIG_ZA, zbs, FIG_DISK)
    near = [r["R1_per_sqrt_Nf"] for r in rows1 if r["sweep_variable"] >= 0.1]
    dec1 = bool(np.all(np.diff(near) <= 0))
    rows1c = sweep_setup1(FIG_SRC, FIG_ZA, zbs, FIG_DISK, convention="corrected")
    nearc = [r["R1_per_sqrt_Nf"] for r in rows1c if r["sweep_variable"] >= 0.1]
    dec1c = bool(np.all(np.diff(nearc) <= 0))
    t1 = time.time() - t
    t = time.time()
    rows2 = sweep_setup2(FIG_SRC, FIG2_ZB, np.linspace(0.08, 0.149, 24), 0.15, 0.075, FIG_DISK, FIG_PUPIL)
    defined = [r for r in rows2 if np.isfinite(r["R2_per_sqrt_Nf"])]
    above = all(r["R2_per_sqrt_Nf"] >= r["R2_focused"] * (1 - 1e-9) for r in defined)
    t2 = time.time() - t
    ok = dec1 and above and t1 < 900 and t2 < 900
    report("11", ok, f"arrangement 1 SNR non-increasing for z_b in 100..149 mm: {dec1} "
                     f"(R1 {near[0]:.3e} -> {near[-1]:.3e}; re-derived forms: {dec1c}); arrangement 2 refocused >= "
                     f"focused at {len(defined)}/{len(rows2)} defined points: {above}; sweeps {t1:.1f} s, {t2:.1f} s")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
