import numpy as np
import pytest

from qsrs import io
from qsrs.config import DEFAULTS, RunConfig
from qsrs.errors import UsageError


def test_csv_round_trip(tmp_path):
    p = io.write_csv(tmp_path / "a.csv", ["r", "intensity"], [(0.0, 1.5), (0.1, 2.25)])
    assert p.read_bytes() == b"r,intensity\n0.0,1.5\n0.1,2.25\n"
    r, y = io.read_csv(p, ["r", "intensity"])
    assert np.array_equal(r, [0.0, 0.1]) and np.array_equal(y, [1.5, 2.25])


@pytest.mark.parametrize("body, line", [
    ("r,intensity\n0,1\n0.1,abc\n", 3),
    ("r,intensity\n0,1\n0.1\n", 3),
    ("r,intensity\n0,nan\n", 2),
])
def test_csv_errors_report_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(UsageError, match=f":{line}:"):
        io.read_csv(p, ["r", "intensity"])


def test_csv_missing_column(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(UsageError, match="missing column"):
        io.read_csv(p, ["r"])
    with pytest.raises(UsageError):
        io.read_csv(tmp_path / "none.csv", ["r"])


def test_trace_binary_layout(tmp_path):
    x = np.linspace(-1, 1, 7)
    p = io.write_trace_binary(tmp_path / "t.bin", x, 250e6)
    data = p.read_bytes()
    assert len(data) == 16 + 8 * 7
    assert data[:4] == io.TRACE_MAGIC
    assert np.frombuffer(data[4:12], "<f8")[0] == 250e6
    assert np.frombuffer(data[12:16], "<u4")[0] == 7
    y, rate = io.read_trace_binary(p)
    assert rate == 250e6 and np.array_equal(x, y)
    p.write_bytes(data[:-8])
    with pytest.raises(UsageError):
        io.read_trace_binary(p)


def test_pgm_and_ppm(tmp_path):
    img = np.array([[0.0, 0.5], [1.0, 0.25]])
    p = io.write_pgm(tmp_path / "a.pgm", img)
    data = p.read_bytes()
    assert data.startswith(b"P5\n2 2\n65535\n")
    assert data[-8:-6] == b"\x00\x00"  # big-endian zero
    assert data[-4:-2] == b"\xff\xff"
    assert np.allclose(io.read_pnm(p), img, atol=1 / 65535)
    rgb = np.stack([img, img[::-1], img.T], axis=-1)
    assert np.allclose(io.read_pnm(io.write_ppm(tmp_path / "a.ppm", rgb)), rgb, atol=1 / 65535)
    with pytest.raises(UsageError):
        io.write_pgm(tmp_path / "b.pgm", img * 2)


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "x.txt", "hello")
    assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]


def test_config_defaults_and_overrides():
    cfg = RunConfig.from_text("seed = 4\n# comment\nnoise.electronic_db = none\nscan.squeeze = off\n")
    assert cfg["seed"] == 4
    assert cfg["noise.electronic_db"] is None
    assert cfg["scan.squeeze"] is False
    assert cfg.noise().electronic_ratio == 0.0
    text = cfg.resolved_text()
    assert all(f"{k} = " in text for k in DEFAULTS)


def test_config_rejects_unknown_and_bad_values():
    with pytest.raises(UsageError, match=":2:"):
        RunConfig.from_text("seed = 1\nbogus = 2\n")
    with pytest.raises(UsageError):
        RunConfig.from_text("seed = x\n")
    with pytest.raises(UsageError):
        RunConfig.from_text("just text\n")


def test_config_digest_tracks_values():
    a, b = RunConfig(), RunConfig({"seed": "1"})
    assert a.digest() == RunConfig().digest()
    assert a.digest() != b.digest()
    assert RunConfig.from_text(a.resolved_text()).resolved_text() == a.resolved_text()


def test_config_builders():
    cfg = RunConfig()
    assert cfg.opa_model().as_tuple() == (0.855, 0.6, 3.0)
    assert cfg.noise().squeezing == pytest.approx(10 ** -0.11)
    assert cfg.noise(squeeze=False).squeezing == 1.0
    assert cfg.scan().wall_time == pytest.approx(18.0)
    assert cfg.illumination().ratio == pytest.approx(0.5)
