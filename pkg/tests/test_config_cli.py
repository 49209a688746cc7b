import csv
import json
from pathlib import Path

import numpy as np
import pytest

from cpisnr import ConfigError, IOFormatError, SetupKind
from cpisnr.cli import main
from cpisnr.config import load_config, manifest_pairs, parse_list, read_config_text
from cpisnr.svgplot import line_plot, write_line_plot

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_list():
    assert parse_list("1, 2,5") == [1.0, 2.0, 5.0]
    assert parse_list("50:150:3") == [50.0, 100.0, 150.0]
    assert parse_list("") == []
    with pytest.raises(ValueError):
        parse_list("1:2")


def test_units_and_overrides(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("mode = 1d\nsource.sigma_i_mm = 0.5  # comment\nobject.width_um = 40\nobject.kind = double_slit\n"
                 "object.separation_um = 120\n")
    cfg = load_config(p, ["source.wavelength_nm=600", "speckle.n_frames=10"])
    assert cfg["source.sigma_i"] == pytest.approx(0.5e-3)
    assert cfg["source.wavelength"] == pytest.approx(600e-9)
    assert cfg["speckle.n_frames"] == 10
    assert cfg.sources["speckle.n_frames"] == "flag"
    assert cfg.source().sigma_g == pytest.approx(0.5e-3 / 20)
    assert cfg.object().area2() == pytest.approx(80e-6)
    assert cfg.dim == 1 and cfg.kind is SetupKind.SETUP1


@pytest.mark.parametrize("line", ["source.sigma_i = 1", "source.sigma_i_mm2 = 1", "bogus.key = 1",
                                  "speckle.n_frames = 2.5", "mode = 3d", "source.sigma_i_mm = abc"])
def test_bad_keys(line):
    with pytest.raises(ConfigError):
        load_config(None, [line.replace(" = ", "=")])


def test_read_config_text_errors():
    assert read_config_text("# only a comment\n\n") == []
    with pytest.raises(ConfigError):
        read_config_text("no equals sign")
    with pytest.raises(IOFormatError):
        load_config("/nonexistent/file.cfg")
    with pytest.raises(ConfigError):
        manifest_pairs("{}")


def test_validate_requirements():
    cfg = load_config(CONFIGS / "setup1_fig.cfg")
    cfg.validate("analytic")
    with pytest.raises(ConfigError):
        load_config(CONFIGS / "setup1_fig.cfg", ["sweep.z_b_mm="]).validate("analytic")
    with pytest.raises(ConfigError):
        load_config(CONFIGS / "desk1d.cfg", ["speckle.n_frames=1"]).validate("simulate")
    with pytest.raises(ConfigError):
        load_config(CONFIGS / "desk1d.cfg").validate("plan")


def _rows(path):
    return list(csv.reader(open(path)))


def test_cli_simulate_reproducible(tmp_path, capsys):
    args = ["simulate", "-c", str(CONFIGS / "desk1d.cfg"), "--frames", "300", "-s", "image.n=11"]
    assert main(args + ["-o", str(tmp_path / "a"), "--svg"]) == 0
    assert main(args + ["-o", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "image.csv").read_bytes() == (b / "image.csv").read_bytes()
    assert (a / "image.svg").read_text().startswith("<svg")
    man = json.loads((a / "manifest.json").read_text())
    assert man["config"]["speckle.n_frames"] == 300
    # re-running from the manifest reproduces the outputs
    assert main(["simulate", "-c", str(a / "manifest.json"), "-o", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "snr.csv").read_bytes() == (a / "snr.csv").read_bytes()
    assert len(_rows(a / "image.csv")) == 12
    assert "simulated 300 frames" in capsys.readouterr().out


def test_cli_simulate_frames_file(tmp_path):
    from cpisnr.frameio import read_frames

    assert main(["simulate", "-c", str(CONFIGS / "desk1d.cfg"), "--frames", "20", "-s", "output.frames=true",
                 "-o", str(tmp_path)]) == 0
    assert len(read_frames(tmp_path / "frames.cpif")) == 20


def test_cli_analytic_and_compare(tmp_path, capsys):
    assert main(["analytic", "-c", str(CONFIGS / "setup1_fig.cfg"), "-o", str(tmp_path / "s1"), "--svg"]) == 0
    rows = _rows(tmp_path / "s1" / "sweep.csv")
    assert len(rows) == 35 and (tmp_path / "s1" / "sweep.svg").exists()
    assert main(["analytic", "-c", str(CONFIGS / "setup2_fig.cfg"), "-o", str(tmp_path / "s2")]) == 0
    assert main(["compare", "-c", str(CONFIGS / "setup1_fig.cfg"), "-C", str(CONFIGS / "setup2_fig.cfg"),
                 "-s", "analysis.variant=far", "-o", str(tmp_path / "cmp")]) == 0
    r = _rows(tmp_path / "cmp" / "compare.csv")[1]
    assert float(r[-2]) == pytest.approx(3.5, rel=1e-6)
    assert "ratio = 3.5" in capsys.readouterr().out


def test_cli_plan(tmp_path):
    assert main(["plan", "-c", str(CONFIGS / "setup1_fig.cfg"), "--target-R", "5", "-o", str(tmp_path)]) == 0
    r = _rows(tmp_path / "plan.csv")[1]
    R = float(r[-3])
    assert int(r[-1]) == int(np.ceil((5 / R) ** 2))


def test_cli_exit_codes(tmp_path):
    assert main(["simulate", "-c", str(CONFIGS / "desk1d.cfg"), "--frames", "0", "-o", str(tmp_path)]) == 2
    assert main(["simulate", "-c", str(tmp_path / "missing.cfg")]) == 4
    assert main(["analytic", "-s", "source.sigma_i=1"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["simulate", "-c", str(CONFIGS / "desk1d.cfg"), "-s", "geometry.z_b_mm=-5",
                 "-o", str(tmp_path)]) == 2
    assert main(["analytic", "-c", str(CONFIGS / "setup2_fig.cfg"), "-s", "pupil.kind=unity",
                 "-o", str(tmp_path)]) == 2


def test_svg_plot(tmp_path):
    svg = line_plot([0, 1, 2, 3], {"a": [1, 2, np.nan, 4], "b & c": [0, 0, 0, 0]}, "x", "y", "t")
    assert svg.count("<polyline") == 3 and "b &amp; c" in svg
    write_line_plot(tmp_path / "p.svg", [0, 1], {"a": [np.nan, np.nan]})
    assert (tmp_path / "p.svg").read_text().endswith("</svg>\n")
