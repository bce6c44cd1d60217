"""Command-line behavior: outputs, manifests, exit codes, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from vaporlens.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

FAST_SCAN = """
[gain_control]
raman_offset_mhz = -0.1
[loss_control]
raman_offset_mhz = 0.1
[scan]
freq_start_mhz = -0.2
freq_stop_mhz = 0.2
n_points = 9
[scan.pinhole]
enabled = true
[grid]
n = 512
pitch_um = 30.0
"""


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "fast.toml"
    path.write_text(FAST_SCAN)
    return path


def manifest(outdir):
    return json.loads((Path(outdir) / "manifest.json").read_text())


class TestChi:
    def test_sweep_outputs(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["chi", str(CONFIGS / "default.toml"),
                     "--output-dir", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "zero_crossings_mhz" in stdout
        assert "maximum" in stdout
        rows = np.genfromtxt(out / "chi.csv", delimiter=",", names=True)
        assert rows.dtype.names == ("delta_mhz", "chi_re", "chi_im",
                                    "n_minus_1", "alpha_per_m")
        i0 = np.argmin(np.abs(rows["delta_mhz"]))
        assert abs(rows["chi_im"][i0]) < 1e-12
        assert rows["n_minus_1"][i0] == pytest.approx(1e-6, rel=1e-6)
        names = {f["name"] for f in manifest(out)["files"]}
        assert names == {"chi.csv", "chi.svg"}

    def test_kappa_zero_gives_zero_columns(self, tmp_path):
        cfg = tmp_path / "quiet.toml"
        cfg.write_text("[scenario]\nkappa = 0.0\n")
        out = tmp_path / "out"
        assert main(["chi", str(cfg), "--output-dir", str(out), "--no-plot"]) == 0
        rows = np.genfromtxt(out / "chi.csv", delimiter=",", names=True)
        assert np.all(rows["chi_re"] == 0.0)
        assert np.all(rows["chi_im"] == 0.0)

    def test_window_override(self, tmp_path):
        out = tmp_path / "out"
        main(["chi", str(CONFIGS / "default.toml"), "--from", "-0.5", "--to",
              "0.5", "--points", "11", "--output-dir", str(out), "--no-plot"])
        rows = np.genfromtxt(out / "chi.csv", delimiter=",", names=True)
        assert rows.shape[0] == 11
        assert rows["delta_mhz"][0] == -0.5


class TestScan:
    def test_intensity_scan_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = main(["scan", str(CONFIGS / "spacing_p08.toml"),
                     "--output-dir", str(out)])
        assert code == 0
        rows = np.genfromtxt(out / "scan.csv", delimiter=",", names=True)
        deltas, ratios = rows["delta_mhz"], rows["intensity_ratio"]
        assert deltas[np.argmax(ratios)] == pytest.approx(-0.4, abs=0.02)
        assert deltas[np.argmin(ratios)] == pytest.approx(+0.4, abs=0.02)
        assert (out / "scan.svg").exists()

    @pytest.mark.parametrize("name,spacing", [
        ("spacing_p08", +0.8), ("spacing_p04", +0.4),
        ("spacing_m04", -0.4), ("spacing_m08", -0.8),
    ])
    def test_shipped_configs_reproduce_orderings(self, tmp_path, name, spacing):
        out = tmp_path / name
        assert main(["scan", str(CONFIGS / f"{name}.toml"),
                     "--output-dir", str(out), "--no-plot"]) == 0
        rows = np.genfromtxt(out / "scan.csv", delimiter=",", names=True)
        deltas, ratios = rows["delta_mhz"], rows["intensity_ratio"]
        gain_at = deltas[np.argmax(ratios)]
        loss_at = deltas[np.argmin(ratios)]
        assert loss_at - gain_at == pytest.approx(spacing, abs=0.02)

    def test_pinhole_scan_and_threads(self, fast_config, tmp_path):
        out = tmp_path / "out"
        code = main(["scan", str(fast_config), "--threads", "2",
                     "--output-dir", str(out), "--no-plot"])
        assert code == 0
        rows = np.genfromtxt(out / "scan.csv", delimiter=",", names=True)
        assert np.all(np.isfinite(rows["pinhole_norm"]))

    def test_pinhole_off_override(self, fast_config, tmp_path):
        out = tmp_path / "out"
        main(["scan", str(fast_config), "--pinhole", "off",
              "--output-dir", str(out), "--no-plot"])
        text = (out / "scan.csv").read_text().splitlines()[1]
        assert ",,," in text.replace(", ", ",")  # empty pinhole cells

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main(["scan", str(CONFIGS / "spacing_p04.toml"), "--noise", "0.01",
                         "--seed", "11", "--output-dir", str(out)])
            assert code == 0
            outs.append(out)
        m1, m2 = manifest(outs[0]), manifest(outs[1])
        assert m1["files"] == m2["files"]
        assert (outs[0] / "scan.csv").read_bytes() == (outs[1] / "scan.csv").read_bytes()
        assert (outs[0] / "scan.svg").read_bytes() == (outs[1] / "scan.svg").read_bytes()


class TestFitCommand:
    def test_fit_scan_round_trip(self, tmp_path):
        scan_out = tmp_path / "scan"
        main(["scan", str(CONFIGS / "spacing_p08.toml"), "--output-dir",
              str(scan_out), "--no-plot"])
        fit_out = tmp_path / "fit"
        code = main(["fit", str(scan_out / "scan.csv"),
                     "--config", str(CONFIGS / "spacing_p08.toml"),
                     "--output-dir", str(fit_out)])
        assert code == 0
        report = (fit_out / "fit_report.txt").read_text()
        values = dict(line.split(" = ") for line in report.strip().splitlines())
        assert values["converged"] == "true"
        assert float(values["resonance1.center_mhz"]) == pytest.approx(-0.4, abs=1e-4)
        assert float(values["resonance2.center_mhz"]) == pytest.approx(+0.4, abs=1e-4)
        curve = np.genfromtxt(fit_out / "chi_prime.csv", delimiter=",", names=True)
        assert curve.dtype.names == ("freq_mhz", "chi_re", "delta_n")
        # fitted chi' curve peaks where the true scenario's chi' peaks
        from vaporlens import lineshape, medium
        from vaporlens.config import load_scan_config
        cfg = load_scan_config(CONFIGS / "spacing_p08.toml")
        truth = lineshape.chi_at(medium.build_model(cfg.scenario),
                                 curve["freq_mhz"])
        assert (curve["freq_mhz"][np.argmax(curve["chi_re"])]
                == curve["freq_mhz"][np.argmax(truth.real)])
        assert np.allclose(curve["delta_n"], curve["chi_re"] / 2.0)

    def test_flat_data_exits_fit_code(self, tmp_path):
        data = tmp_path / "flat.csv"
        data.write_text("freq_mhz,value,sigma\n" + "".join(
            f"{x!r},1.0,1.0\n" for x in np.linspace(-1, 1, 41)))
        assert main(["fit", str(data), "--output-dir", str(tmp_path)]) == 4


class TestCalibrateCommand:
    def test_round_trip(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["calibrate", str(CONFIGS / "default.toml"),
                     "--target-dn", "2e-6", "--output-dir", str(out)])
        assert code == 0
        assert "kappa = " in capsys.readouterr().out
        from vaporlens import medium
        from vaporlens.config import load_scan_config
        cfg = load_scan_config(out / "calibrated.toml")
        _, dn = medium.peak_delta_n(cfg.scenario)
        assert dn == pytest.approx(2e-6, rel=1e-9)


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[scan\nbroken")
        assert main(["chi", str(bad), "--output-dir", str(tmp_path)]) == 2

    def test_unknown_key_is_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[scan]\nn_pts = 3")
        assert main(["scan", str(bad), "--output-dir", str(tmp_path)]) == 2

    def test_physics_error_is_3(self, tmp_path):
        cfg = tmp_path / "bad_pinhole.toml"
        cfg.write_text("""
[scan]
n_points = 3
[scan.pinhole]
enabled = true
radius_um = 10.0
[grid]
n = 512
pitch_um = 30.0
""")
        assert main(["scan", str(cfg), "--output-dir", str(tmp_path),
                     "--no-plot"]) == 3
