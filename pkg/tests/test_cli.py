import json
import math

import pytest

from diamond_ib import sweep
from diamond_ib.channel import ChannelConfig
from diamond_ib.cli import load_config, main
from diamond_ib.sweep import RatePoint, SweepSpec, emit, preset, read_json, run_sweep

SMALL = """\
mode: capacity_sweep
grid: [5, 20, 40]
channel:
  M: 3
  N1: 3
  N2: 3
  snr_db: 30
qci_bits: [1, 4]
monte_carlo:
  samples: 300
  seed: 17
  grid_samples: 20000
"""


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


@pytest.fixture(scope="module")
def small_points():
    spec = SweepSpec("capacity_sweep", (5, 20, 40), ChannelConfig.from_snr_db(30.0),
                     qci_bits=(1, 4), samples=300, seed=17, grid_samples=20_000)
    return spec, run_sweep(spec)


def test_csv_layout(small_points, tmp_path):
    spec, pts = small_points
    text = emit(pts, "csv", spec, str(tmp_path / "o.csv"))
    lines = text.splitlines()
    assert len(lines) == 4
    assert lines[0] == "snr_db,c_bits,r_ub,r_lb1_B1,r_lb1_B4,r_lb2,r_lb2_stderr"
    # 4 bits per level on 3 sub-channels costs 12 bits, more than C = 5
    assert lines[1].split(",")[4] == "NA"
    assert (tmp_path / "o.csv").read_text() == text


def test_rows_obey_bound_ordering(small_points):
    _, pts = small_points
    for p in pts:
        assert p.ok
        for v in p.r_lb1.values():
            assert v is None or v <= p.r_ub
        assert p.r_lb2 <= p.r_ub + 3 * p.r_lb2_stderr


def test_json_round_trip(small_points, tmp_path):
    spec, pts = small_points
    path = tmp_path / "o.json"
    emit(pts, "json", spec, str(path))
    meta, back = read_json(str(path))
    assert meta["seed"] == 17 and meta["samples"] == 300
    assert "version" in meta and "tolerances" in meta
    for a, b in zip(pts, back):
        assert (a.snr_db, a.c_bits, a.r_ub, a.r_lb2, a.r_lb2_stderr) == \
               (b.snr_db, b.c_bits, b.r_ub, b.r_lb2, b.r_lb2_stderr)
        assert a.r_lb1 == b.r_lb1


def test_emit_requires_points(small_points):
    spec, _ = small_points
    with pytest.raises(ValueError):
        emit([], "csv", spec)


def test_sweep_spec_validation():
    base = ChannelConfig()
    with pytest.raises(ValueError):
        SweepSpec("snr_sweep", (), base)
    with pytest.raises(ValueError):
        SweepSpec("snr_sweep", (10, 0), base)
    with pytest.raises(ValueError):
        SweepSpec("bogus", (0,), base)
    with pytest.raises(ValueError):
        SweepSpec("snr_sweep", (0,), base, qci_bits=(-1,))
    with pytest.raises(ValueError):
        SweepSpec("single_point", (0, 10), base)


def test_presets():
    f2, f3 = preset("fig2"), preset("fig3")
    assert f2.grid == (0, 10, 20, 30, 40, 50) and f2.base.C1 == 40
    assert f3.grid == tuple(range(5, 61, 5)) and f3.base.sigma2 == pytest.approx(1e-4)
    assert f2.qci_bits == (1, 2, 3, 4)
    with pytest.raises(ValueError):
        preset("fig9")


def test_snr_maps_to_noise_power():
    cfg = preset("fig2").point_config(20.0)
    assert cfg.sigma2 == pytest.approx(1e-2) and cfg.C2 == 40


def test_cli_writes_file_and_is_reproducible(small_config, tmp_path, capsys):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", str(small_config), "--out", str(out1)]) == 0
    assert main(["--config", str(small_config), "--out", str(out2), "--jobs", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_overrides_and_stdout(small_config, capsys):
    assert main(["--config", str(small_config), "--format", "json", "--seed", "3",
                 "--samples", "50"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["metadata"]["seed"] == 3 and doc["metadata"]["samples"] == 50
    assert len(doc["points"]) == 3


@pytest.mark.parametrize("text,expected", [
    ("mode: snr_sweep\ngrid: []\n", "small.yaml:2: grid:"),
    ("mode: snr_sweep\ngrid: [0]\nchannel:\n  M: 0\n", "small.yaml:4: channel.M:"),
    ("mode: snr_sweep\ngrid: [0]\nextra: 1\n", "small.yaml:1: <root>:"),
    ("mode: snr_sweep\ngrid: [0, 10\n", "small.yaml:3:1: YAML syntax error"),
    ("mode: snr_sweep\ngrid: [10, 0]\n", "strictly increasing"),
    ("- 1\n- 2\n", "must be a mapping"),
])
def test_config_errors_have_locations(tmp_path, capsys, text, expected):
    path = tmp_path / "small.yaml"
    path.write_text(text)
    assert main(["--config", str(path)]) == 1
    assert expected in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "nope.yaml")]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_bad_jobs(small_config, capsys):
    assert main(["--config", str(small_config), "--jobs", "0"]) == 1


def test_partial_failure_exit_code(small_config, tmp_path, monkeypatch, capsys):
    real = sweep.upper_bound_rate

    def flaky(cfg):
        if cfg.C1 == 20:
            raise RuntimeError("boom")
        return real(cfg)

    monkeypatch.setattr(sweep, "upper_bound_rate", flaky)
    out = tmp_path / "p.csv"
    assert main(["--config", str(small_config), "--out", str(out)]) == 2
    rows = out.read_text().splitlines()
    assert rows[2].split(",")[2] == "NA"
    assert rows[1].split(",")[2] != "NA"
    assert "boom" in capsys.readouterr().err


def test_load_config_defaults(small_config):
    spec = load_config(str(small_config))
    assert spec.mode == "capacity_sweep" and spec.format == "csv"
    assert spec.base.sigma2 == pytest.approx(1e-3)


def test_single_point_asymmetric(tmp_path):
    path = tmp_path / "one.yaml"
    path.write_text("mode: single_point\ngrid: [20]\nchannel: {C1: 10, C2: 30}\nqci_bits: [0]\n"
                    "monte_carlo: {samples: 100, grid_samples: 1000}\n")
    spec = load_config(str(path))
    (pt,) = run_sweep(spec)
    assert pt.snr_db == 20 and math.isnan(pt.c_bits)
    assert pt.r_lb1[0] == 0.0


def test_wide_source_has_no_qci(tmp_path):
    spec = SweepSpec("single_point", (10,), ChannelConfig(M=4, N1=3, N2=3, C1=10, C2=10),
                     qci_bits=(1,), samples=100, grid_samples=1000)
    (pt,) = run_sweep(spec)
    assert pt.r_lb1[1] is None and pt.ok and pt.r_ub > 0


def test_ratepoint_ok_flag():
    assert RatePoint(0.0, 1.0, 1.0).ok
    assert not RatePoint(0.0, 1.0, None, errors=["x"]).ok
