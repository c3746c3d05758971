from __future__ import annotations

import json
from types import SimpleNamespace

import numpy as np
import pytest

from ffmfg.cli import run_command
from ffmfg.errors import ParseError, ValidationError
from ffmfg.experiments import preset
from ffmfg.grid import build_grid
from ffmfg.io import parse_config, preset_to_dict, read_field_csv, time_label, write_field_csv


def test_parse_preset_passthrough():
    cfg = parse_config('{"preset":"test1_ff","output_dir":"out"}')
    assert cfg.preset == preset("test1_ff")
    assert cfg.output_dir == "out"
    assert cfg.snapshot_times == preset("test1_ff").sample_times


def test_parse_dt_above_h_names_contract():
    obj = preset_to_dict(preset("test1_ff"))
    obj["scheme"]["dt"] = 2 * obj["scheme"]["h"]
    with pytest.raises(ValidationError) as info:
        parse_config(json.dumps(obj))
    assert info.value.key == "scheme"
    assert "dt <= h" in str(info.value)


@pytest.mark.parametrize("pid", ["test1_ff", "test1_fb", "test3_advert_switch", "test5b_moving"])
def test_inline_duplicate_equals_preset(pid):
    p = preset(pid)
    cfg = parse_config(json.dumps(preset_to_dict(p)))
    assert cfg.preset == p
    assert cfg.preset.tags == p.tags
    assert cfg.preset.manifest() == p.manifest()


def test_inline_untagged_is_non_paper():
    obj = preset_to_dict(preset("test3_clusters"))
    del obj["provenance"]
    cfg = parse_config(json.dumps(obj))
    assert {r["provenance"] for r in cfg.preset.manifest()} == {"non_paper"}


def test_parse_errors():
    with pytest.raises(ParseError) as info:
        parse_config('{"preset": "test1_ff",\n  "output_dir": }')
    assert info.value.line == 2
    with pytest.raises(ValidationError):
        parse_config('{"preset": "nosuch"}')
    with pytest.raises(ValidationError):
        parse_config('{"preset": "test1_ff", "colour": 1}')
    both = preset_to_dict(preset("test1_ff")) | {"preset": "test1_ff"}
    with pytest.raises(ValidationError):
        parse_config(json.dumps(both))
    with pytest.raises(ValidationError) as info:
        parse_config('{"preset": "test3_clusters", "snapshot_times": [5, 1]}')
    assert info.value.key == "snapshot_times"
    with pytest.raises(ValidationError):
        parse_config('{"preset": "test3_clusters", "snapshot_times": [0, 11]}')


def test_field_csv_three_nodes(tmp_path):
    g = build_grid(1, 0, 1, 0.5)
    path = tmp_path / "f.csv"
    write_field_csv(g, np.array([0.0, 1.0, 2.0]), path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().split("\n") == ["x1,value", "0,0", "0.5,1", "1,2", ""]


def test_field_csv_2d_row_major(tmp_path):
    # grids need 3 nodes per axis, so a 2x2 lattice is described by hand
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    g = SimpleNamespace(dim=2, shape=(2, 2), size=4, points=pts)
    path = tmp_path / "f.csv"
    write_field_csv(g, np.array([[1.0, 2.0], [3.0, 4.0]]), path)
    lines = path.read_text().splitlines()
    assert lines == ["x1,x2,value", "0,0,1", "0,1,2", "1,0,3", "1,1,4"]


def test_field_csv_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    g = build_grid(2, -1, 1, 0.25)
    f = rng.normal(size=g.shape) * 10.0 ** rng.integers(-300, 300, size=g.shape)
    path = tmp_path / "f.csv"
    write_field_csv(g, f, path)
    header, rows = read_field_csv(path)
    assert header == ["x1", "x2", "value"]
    assert rows[:, 2].tobytes() == f.ravel().tobytes()
    np.testing.assert_array_equal(rows[:, :2], g.points)


def test_control_map_header(tmp_path):
    g = build_grid(2, 0, 1, 0.5)
    path = tmp_path / "c.csv"
    write_field_csv(g, np.zeros((2, *g.shape)), path)
    assert path.read_text().splitlines()[0] == "x1,x2,value1,value2"


def test_time_label():
    assert time_label(0.38) == "0.38"
    assert time_label(0.38000000000000006) == "0.38"
    assert time_label(10.0) == "10"


def test_cli_unknown_preset(tmp_path, capsys):
    assert run_command(["--preset", "nosuch", "--out", str(tmp_path)]) == 1
    assert "UnknownPreset" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path):
    assert run_command([]) == 1
    assert run_command(["--preset", "test1_ff", "--snapshots", "a,b"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert run_command(["--config", str(bad)]) == 1
    assert run_command(["--config", str(tmp_path / "missing.json")]) == 1


def test_cli_runtime_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = tmp_path / "c.json"
    obj = preset_to_dict(preset("test3_clusters"))
    obj["T"] = 0.1
    obj["model"]["schedule"][0]["t_end"] = 0.1
    obj["sample_times"] = [0.0, 0.1]
    obj["output_dir"] = str(blocker / "sub")  # a path below a regular file cannot be created
    cfg.write_text(json.dumps(obj))
    assert run_command(["--config", str(cfg), "--quiet"]) == 2


def test_cli_bundle_layout(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    obj = preset_to_dict(preset("test3_clusters"))
    obj["T"] = 1.0
    obj["model"]["schedule"][0]["t_end"] = 1.0
    obj["sample_times"] = [0.0, 0.5, 1.0]
    cfg.write_text(json.dumps(obj))
    out = tmp_path / "out"
    assert run_command(["--config", str(cfg), "--out", str(out), "--snapshots", "0,1"]) == 0
    assert "mean opinion" in capsys.readouterr().out
    obs = (out / "observables.csv").read_text().splitlines()
    assert obs[0] == "t,mean_opinion,mass,sup_U,fp_residual,cluster_count"
    assert len(obs) - 1 == round(1.0 / 0.02) + 1
    names = sorted(p.name for p in (out / "fields").iterdir())
    assert names == ["M_t0.csv", "M_t1.csv", "U_t0.csv", "U_t1.csv", "ctrl_t0.csv", "ctrl_t1.csv"]
    meta = json.loads((out / "run.meta").read_text())
    assert meta["snapshot_times"] == [0.0, 1.0]
    for row in meta["parameters"]:
        assert set(row) == {"parameter", "value", "provenance", "quote"}
        assert row["provenance"] in ("paper", "non_paper")
