import numpy as np
import pytest

from qsrs import io
from qsrs.cli import EXIT_FIT, EXIT_OK, EXIT_USAGE, main


def run(tmp_path, *argv):
    code = main(["--out", str(tmp_path), *argv])
    dirs = sorted(p for p in tmp_path.iterdir() if p.is_dir())
    return code, dirs


def summary(d):
    out = {}
    for line in (d / "summary.txt").read_text().splitlines():
        k, v = line.split(" = ", 1)
        out[k] = v
    return out


def test_fit_opa_bundled(tmp_path):
    code, dirs = run(tmp_path, "fit-opa")
    assert code == EXIT_OK
    s = summary(dirs[0])
    assert float(s["w0"]) == pytest.approx(0.855, rel=1e-3)
    assert float(s["a01"]) == pytest.approx(3.0, rel=1e-3)
    assert (dirs[0] / "config.txt").exists()
    assert dirs[0].name.startswith("fit-opa-")


def test_fit_opa_noisy_fixture(tmp_path):
    code, dirs = run(tmp_path, "fit-opa", "--fixture", "noisy")
    s = summary(dirs[0])
    for k, v in (("w0", 0.855), ("a00", 0.6), ("a01", 3.0)):
        assert float(s[k]) == pytest.approx(v, rel=0.05)


def test_fit_opa_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("r,intensity\n0,1\n0.1,oops\n")
    assert main(["--out", str(tmp_path / "o"), "fit-opa", str(bad)]) == EXIT_USAGE
    assert ":3:" in capsys.readouterr().err


def test_fit_opa_failure_exit_code(tmp_path):
    prof = tmp_path / "p.csv"
    r = np.linspace(0, 2.5, 60)
    io.write_csv(prof, ["r", "intensity"], zip(r, 0.3 + 0.3 * np.sin(8 * r) ** 2))
    code, _ = run(tmp_path / "o", "--set", "opa.rms_tol=1e-4", "fit-opa", str(prof))
    assert code == EXIT_FIT


def test_squeeze_sweep(tmp_path):
    code, dirs = run(tmp_path, "squeeze-sweep")
    s = summary(dirs[0])
    assert float(s["no_aperture_db"]) == pytest.approx(0.909, abs=0.01)
    r, v, db = io.read_csv(dirs[0] / "squeeze.csv", ["r_ap", "variance", "squeezing_db"])
    assert db.max() >= float(s["no_aperture_db"])


@pytest.mark.parametrize("sets", [["squeeze.eta=0"], ["opa.a00=1", "opa.a01=1"]])
def test_squeeze_sweep_flat_cases(tmp_path, sets):
    flags = [a for kv in sets for a in ("--set", kv)]
    code, dirs = run(tmp_path, *flags, "squeeze-sweep")
    _, _, db = io.read_csv(dirs[0] / "squeeze.csv", ["r_ap", "variance", "squeezing_db"])
    assert np.allclose(db, 0.0, atol=1e-12)


def test_snr_sweep_argmax(tmp_path):
    code, dirs = run(tmp_path, "snr-sweep")
    r, s = io.read_csv(dirs[0] / "snr.csv", ["ratio", "snr"])
    k = np.argmax(s)
    assert abs(r[k] - 0.5) <= max(np.diff(r)[max(k - 1, 0)], np.diff(r)[min(k, len(r) - 2)])
    assert r[0] == pytest.approx(0.07) and r[-1] == pytest.approx(10)


def test_reproducible_csv(tmp_path):
    _, d1 = run(tmp_path / "a", "--seed", "5", "--set", "lockin.trials=3", "lockin-demo")
    _, d2 = run(tmp_path / "b", "--seed", "5", "--set", "lockin.trials=3", "lockin-demo")
    for name in ("gain.csv", "psd.csv", "demod.csv", "config.txt", "trace.bin"):
        assert (d1[0] / name).read_bytes() == (d2[0] / name).read_bytes()
    assert d1[0].name.split("-")[-1] == d2[0].name.split("-")[-1]


def test_seed_flag_before_or_after_subcommand(tmp_path):
    _, d1 = run(tmp_path / "a", "--seed", "9", "phantom-gen")
    code = main(["phantom-gen", "--seed", "9", "--out", str(tmp_path / "b")])
    d2 = sorted((tmp_path / "b").iterdir())
    assert code == EXIT_OK
    assert (d1[0] / "config.txt").read_text() == (d2[0] / "config.txt").read_text()
    assert "seed = 9\n" in (d1[0] / "config.txt").read_text()


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("QSRS_OUT", str(tmp_path / "env"))
    assert main(["snr-sweep"]) == EXIT_OK
    assert len(list((tmp_path / "env").iterdir())) == 1


def test_dwell_bundled(tmp_path):
    code, dirs = run(tmp_path, "dwell")
    s = summary(dirs[0])
    assert float(s["tau_min_s"]) == pytest.approx(3.05e-6, rel=0.15)
    assert float(s["time_saving"]) == pytest.approx(0.22, abs=0.01)
    tau, snr = io.read_csv(dirs[0] / "dwell.csv", ["tau_s", "snr"])
    assert np.all(np.diff(tau) > 0)


def test_image_multispectral(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("scan.rows = 50\nscan.cols = 50\nscan.pitch_nm = 200\nscan.synthesis = baseband\n")
    code, dirs = run(tmp_path / "o", "--config", str(cfg), "image", "--multispectral")
    assert code == EXIT_OK
    names = {p.name for p in dirs[0].iterdir()}
    assert {"dna.pgm", "protein.pgm", "lipid.pgm", "composite.ppm"} <= names
    s = summary(dirs[0])
    for c in ("dna", "protein", "lipid"):
        assert float(s[f"enhancement_db_{c}"]) > 0.3


def test_image_options(tmp_path):
    args = ["--set", "scan.rows=50", "--set", "scan.cols=50", "--set", "scan.pitch_nm=200",
            "--set", "scan.synthesis=baseband", "image", "--shift", "2926", "--squeeze", "off",
            "--enhance-region", "0,0,10,10"]
    code, dirs = run(tmp_path, *args)
    assert code == EXIT_OK
    s = summary(dirs[0])
    assert s["squeeze"] == "False" and s["enhance_region"] == "0,0,10,10"
    assert abs(float(s["enhancement_db"])) < 0.5
    x, y, dc, snr = io.read_csv(dirs[0] / "image.csv", ["x", "y", "dc", "snr_db"])
    assert x.size == 2500


def test_usage_errors(tmp_path):
    assert main(["--out", str(tmp_path), "nope"]) == EXIT_USAGE
    assert main(["--out", str(tmp_path), "--set", "bogus=1", "snr-sweep"]) == EXIT_USAGE
    assert main(["--out", str(tmp_path), "image", "--squeeze", "maybe"]) == EXIT_USAGE
    assert main(["--out", str(tmp_path), "image", "--enhance-region", "1,2,3"]) == EXIT_USAGE
