"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 I/O error.
"""

from __future__ import annotations

import csv
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analytic import (
    SetupModel,
    compare_setups,
    detector_weight,
    frames_needed,
    sweep_setup1,
    sweep_setup2,
)
from .config import RunConfig, dump_manifest, load_config
from .errors import ConfigError, CoverageError, IOFormatError, QuadratureError, SamplingError
from .estimator import refocus, write_image_csv
from .frameio import write_frames
from .optics import SetupKind, refocus_params
from .slice1d import suggest_grids
from .speckle import GridSpec, SpeckleConfig, simulate_frames
from .svgplot import write_line_plot

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{v:.12g}"


def _outdir(cfg: RunConfig, out: str | None) -> Path:
    d = Path(out or cfg["output.dir"])
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFormatError(f"cannot create output directory {d}: {exc}") from exc
    return d


def _load(config, overrides, out, seed=None, frames=None) -> RunConfig:
    extra = list(overrides)
    if seed is not None:
        extra.append(f"speckle.seed={seed}")
    if frames is not None:
        extra.append(f"speckle.n_frames={frames}")
    if out is not None:
        extra.append(f"output.dir={out}")
    return load_config(config, extra)


def _image_points(cfg: RunConfig, geometry, obj) -> np.ndarray:
    half = obj.half_extent() * 1.5
    if geometry.kind is SetupKind.SETUP2:
        half *= geometry.mu
    lo = cfg.get("image.x_min", -half)
    hi = cfg.get("image.x_max", half)
    xs = np.linspace(lo, hi, cfg["image.n"]) if cfg["image.n"] > 1 else np.array([lo])
    return xs if cfg.dim == 1 else np.stack([xs, np.zeros_like(xs)], -1)


def _b_weight(cfg: RunConfig, geometry, pupil):
    if geometry.kind is SetupKind.SETUP1:
        return None
    area = cfg.detector_area() or pupil.area(cfg.dim)
    return lambda b2: np.sqrt(detector_weight(b2, area, cfg.dim))


def _prefix_sizes(n: int) -> list[int]:
    sizes = []
    m = min(100, n)
    while m < n:
        sizes.append(m)
        m *= 2
    sizes.append(n)
    return sorted(set(max(2, s) for s in sizes))


def _manifest_extra(command: str, **kw) -> dict:
    return {"command": command, "artifact_version": __version__, **kw}


@click.group()
@click.version_option(__version__, prog_name="cpisnr")
def cli():
    """Signal-to-noise analysis of correlation plenoptic imaging."""


_common = [
    click.option("-c", "--config", type=click.Path(dir_okay=False), help="key = value configuration file"),
    click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE",
                 help="override a configuration key (repeatable)"),
    click.option("-o", "--out", default=None, help="output directory (overrides output.dir)"),
]


def common(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


@cli.command()
@common
@click.option("--seed", type=int, default=None, help="master seed (overrides speckle.seed)")
@click.option("--frames", type=int, default=None, help="frame count (overrides speckle.n_frames)")
@click.option("--svg", is_flag=True, help="also write an SVG of the refocused image")
def simulate(config, overrides, out, seed, frames, svg):
    """Simulate frames, refocus them and estimate the empirical SNR."""
    cfg = _load(config, overrides, out, seed, frames)
    cfg.validate("simulate")
    d = _outdir(cfg, None)
    source, geometry, obj = cfg.source(), cfg.geometry(), cfg.object()
    pupil = cfg.pupil() if geometry.kind is SetupKind.SETUP2 else None
    det_a = GridSpec(cfg["detector_a.n"], cfg.require("detector_a.pitch"))
    det_b = GridSpec(cfg["detector_b.n"], cfg.require("detector_b.pitch"))
    src_grid, grids = suggest_grids(source, geometry, obj, pupil, det_a, det_b, cfg["grid.oversample"])
    speckle = SpeckleConfig(source, src_grid, cfg["speckle.seed"], cfg["speckle.n_frames"], cfg.dim)
    ens = simulate_frames(speckle, geometry, obj, pupil, grids)
    params = refocus_params(geometry)
    bw = _b_weight(cfg, geometry, pupil)
    xs = _image_points(cfg, geometry, obj)
    img = refocus(ens, params, xs, bw, cfg["speckle.block"], cfg["refocus.coverage_tol"])
    files = ["image.csv", "snr.csv", "manifest.json"]
    write_image_csv(d / "image.csv", img)
    probes = cfg.probe_points()
    with open(d / "snr.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        pos = ["x [m]", "y [m]"] if cfg.dim == 2 else ["x [m]"]
        w.writerow(["n_frames [1]"] + pos + ["sigma_ref [a.u.^2]", "F [a.u.^4]", "R [1]", "R_per_sqrt_frame [1]"])
        for nf in _prefix_sizes(len(ens)):
            sub = refocus(ens.prefix(nf), params, probes, bw, cfg["speckle.block"], cfg["refocus.coverage_tol"])
            for i in range(len(probes)):
                p = np.atleast_1d(probes[i])
                w.writerow([str(nf)] + [_fmt(v) for v in p]
                           + [_fmt(sub.sigma_ref[i]), _fmt(sub.F[i]), _fmt(sub.snr[i]), _fmt(sub.snr_per_sqrt_frame[i])])
    if cfg["output.frames"]:
        write_frames(d / "frames.cpif", ens)
        files.append("frames.cpif")
    if svg or cfg["output.svg"]:
        write_line_plot(d / "image.svg", xs if cfg.dim == 1 else xs[:, 0], {"sigma_ref": img.sigma_ref},
                        xlabel="x [m]", ylabel="refocused image [a.u.^2]")
        files.append("image.svg")
    grid_info = {"source": [src_grid.n, src_grid.pitch],
                 "object_plane": [grids.object_plane.n, grids.object_plane.pitch],
                 "lens_plane": [grids.lens_plane.n, grids.lens_plane.pitch],
                 "detector_a": [det_a.n, det_a.pitch], "detector_b": [det_b.n, det_b.pitch]}
    dump_manifest(d / "manifest.json", cfg, _manifest_extra(
        "simulate", seed=cfg["speckle.seed"], grids=grid_info, alpha=params.alpha, beta=params.beta,
        max_outside_fraction=float(np.max(img.outside_fraction)), outputs=files))
    click.echo(f"simulated {len(ens)} frames; wrote {', '.join(files)} to {d}")


@cli.command()
@common
@click.option("--svg", is_flag=True, help="also write an SVG of the sweep")
def analytic(config, overrides, out, svg):
    """Sweep the analytic SNR (z_b for arrangement 1, S1 for arrangement 2)."""
    cfg = _load(config, overrides, out)
    cfg.validate("analytic")
    d = _outdir(cfg, None)
    source, obj = cfg.source(), cfg.object()
    conv = cfg["analysis.convention"]
    probe = cfg.probe_points()[0]
    if cfg.kind is SetupKind.SETUP1:
        values = cfg["sweep.z_b"]
        rows = sweep_setup1(source, cfg["geometry.z_a"], values, obj, probe, conv, cfg["geometry.M"],
                            cfg.values.get("geometry.S1"), cfg.dim)
        var, refoc, foc = "z_b [m]", "R1_per_sqrt_Nf", "R1_ghost_focused"
    else:
        pupil = cfg.pupil()
        values = cfg["sweep.S1"]
        rows = sweep_setup2(source, cfg.sweep_z_b(), values, cfg["geometry.S2"], cfg["geometry.f"], obj, pupil,
                            probe, conv, cfg.detector_area(), cfg.dim)
        var, refoc, foc = "S1 [m]", "R2_per_sqrt_Nf", "R2_focused"
    with open(d / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([var, "R_refocused [1/sqrt(frame)]", "R_focused [1/sqrt(frame)]", "note"])
        for r in rows:
            w.writerow([_fmt(r["sweep_variable"]), _fmt(r.get(refoc, math.nan)), _fmt(r.get(foc, math.nan)),
                        r.get("note", "")])
    files = ["sweep.csv", "manifest.json"]
    if svg or cfg["output.svg"]:
        x = [r["sweep_variable"] for r in rows]
        write_line_plot(d / "sweep.svg", x, {"refocused": [r.get(refoc, math.nan) for r in rows],
                                             "focused": [r.get(foc, math.nan) for r in rows]},
                        xlabel=var, ylabel="R / sqrt(N_f)")
        files.append("sweep.svg")
    failed = sum(1 for r in rows if "note" in r)
    dump_manifest(d / "manifest.json", cfg, _manifest_extra("analytic", rows=len(rows), annotated_rows=failed,
                                                            outputs=files))
    click.echo(f"{len(rows)} sweep rows ({failed} annotated); wrote {', '.join(files)} to {d}")


def _model(cfg: RunConfig) -> SetupModel:
    g = cfg.geometry()
    pupil = cfg.pupil() if g.kind is SetupKind.SETUP2 else None
    return SetupModel(cfg.source(), g, cfg.object(), pupil, cfg.detector_area(), cfg.dim)


@cli.command()
@click.option("-c", "--config", "config1", type=click.Path(dir_okay=False), required=True,
              help="first configuration (reference)")
@click.option("-C", "--config2", "config2", type=click.Path(dir_okay=False), required=True,
              help="second configuration")
@click.option("-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="override applied to both")
@click.option("-o", "--out", default=None, help="output directory")
def compare(config1, config2, overrides, out):
    """SNR ratio and relative frame budget of two configurations."""
    cfg1 = _load(config1, overrides, out)
    cfg2 = _load(config2, overrides, out)
    cfg1.validate("compare")
    cfg2.validate("compare")
    if cfg1.dim != cfg2.dim:
        raise ConfigError("both configurations need the same mode", "mode")
    s1, s2 = cfg1.source(), cfg2.source()
    for name in ("wavelength", "sigma_i"):
        if not math.isclose(getattr(s1, name), getattr(s2, name), rel_tol=1e-9):
            click.echo(f"warning: source.{name} differs between configurations", err=True)
    d = _outdir(cfg1, out)
    m1, m2 = _model(cfg1), _model(cfg2)
    variant, conv = cfg1["analysis.variant"], cfg1["analysis.convention"]
    rows = []
    for p in cfg1.probe_points():
        r = compare_setups(m1, m2, p, variant, conv)
        rows.append((np.atleast_1d(p), r))
    with open(d / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        pos = ["x [m]", "y [m]"] if cfg1.dim == 2 else ["x [m]"]
        w.writerow(pos + ["R1 [1/sqrt(frame)]", "R2 [1/sqrt(frame)]", "ratio [1]", "frames_ratio [1]"])
        for p, r in rows:
            w.writerow([_fmt(v) for v in p] + [_fmt(r["R1_per_sqrt_Nf"]), _fmt(r["R2_per_sqrt_Nf"]),
                                                _fmt(r["ratio"]), _fmt(r["frames_ratio"])])
    dump_manifest(d / "manifest.json", cfg1, _manifest_extra("compare", config2=cfg2.manifest(),
                                                             outputs=["compare.csv", "manifest.json"]))
    for p, r in rows:
        click.echo(f"at {', '.join(f'{v:.4g}' for v in p)} m: R1/sqrt(N_f) = {r['R1_per_sqrt_Nf']:.4g}, "
                   f"R2/sqrt(N_f) = {r['R2_per_sqrt_Nf']:.4g}, ratio = {r['ratio']:.4g}, "
                   f"second needs {r['frames_ratio']:.3g} of the frames")


@cli.command()
@common
@click.option("--target-R", "target", type=float, default=None, help="target SNR (overrides plan.target_R)")
def plan(config, overrides, out, target):
    """Frames needed to reach a target SNR at the probe points."""
    extra = list(overrides) + ([f"plan.target_R={target}"] if target is not None else [])
    cfg = _load(config, extra, out)
    cfg.validate("plan")
    d = _outdir(cfg, None)
    m = _model(cfg)
    t = cfg["plan.target_R"]
    with open(d / "plan.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        pos = ["x [m]", "y [m]"] if cfg.dim == 2 else ["x [m]"]
        w.writerow(pos + ["R_per_sqrt_frame [1]", "target_R [1]", "frames_needed [1]"])
        for p in cfg.probe_points():
            r = float(m.snr(p, cfg["analysis.variant"], cfg["analysis.convention"]))
            n = frames_needed(t, r)
            w.writerow([_fmt(v) for v in np.atleast_1d(p)] + [_fmt(r), _fmt(t), str(n)])
            click.echo(f"at {', '.join(f'{v:.4g}' for v in np.atleast_1d(p))} m: "
                       f"R/sqrt(N_f) = {r:.4g}, {n} frames for R = {t:g}")
    dump_manifest(d / "manifest.json", cfg, _manifest_extra("plan", outputs=["plan.csv", "manifest.json"]))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="cpisnr", standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except (ConfigError, SamplingError, CoverageError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except QuadratureError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        return EXIT_NUMERIC
    except (IOFormatError, OSError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
