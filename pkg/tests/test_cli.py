import json
import subprocess
import sys

import numpy as np
import pytest

from gaborwf.cli import load_config, main
from gaborwf.exceptions import ConfigError


def _cfg(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def _run(tmp_path, cmd, data, *extra, environ=None):
    out = tmp_path / "out"
    rc = main([cmd, "--config", _cfg(tmp_path, data), "--out", str(out), *extra],
              environ={} if environ is None else environ)
    return rc, out


CHIRP = {"grid": {"n": 512}, "window": {"sigma": 1.0}, "input": {"kind": "chirp", "c": 1.0},
         "stft": {"hop": 4}}
DELTA = {"grid": {"n": 1024}, "input": {"kind": "delta"}, "weight": {"kind": "power", "a": 0.5},
         "lattice": {"a0": 1.0, "b0": 1.0}}


def test_stft_chirp_ridge(tmp_path):
    rc, out = _run(tmp_path, "stft", CHIRP)
    assert rc == 0
    s = json.loads((out / "stft_summary.json").read_text())
    ridge = np.array(s["ridge"])
    # inside the grid the column maximum follows xi = c x
    inner = np.abs(ridge[:, 0]) <= 20
    dxi = 2 * np.pi / (2 * s["grid"]["half_extent"])
    assert np.max(np.abs(ridge[inner, 1] - ridge[inner, 0])) <= 2 * dxi
    for f in ("stft.bin", "heatmap.pgm", "log_modulus.csv"):
        assert (out / f).stat().st_size > 0


def test_stft_zero_signal_floor_heatmap(tmp_path):
    rc, out = _run(tmp_path, "stft", {"grid": {"n": 64}, "input": {"kind": "zero"}})
    assert rc == 0
    raw = (out / "heatmap.pgm").read_bytes()
    assert set(raw.split(b"255\n", 1)[1]) == {0}
    assert json.loads((out / "stft_summary.json").read_text())["zero"] is True


def test_missing_field_exit_2(tmp_path, capsys):
    rc, _ = _run(tmp_path, "stft", {"grid": {"n": 64}})
    assert rc == 2
    assert "input" in capsys.readouterr().err
    rc, _ = _run(tmp_path, "stft", {"grid": {"n": 64}, "input": {"kind": "chirp"}})
    assert rc == 2
    assert "input.c" in capsys.readouterr().err
    rc, _ = _run(tmp_path, "frames", {"grid": {"n": 64}})
    assert rc == 2
    assert "lattice" in capsys.readouterr().err


def test_bad_values_exit_2(tmp_path, capsys):
    assert _run(tmp_path, "stft", {"grid": {"n": 100}, "input": {"kind": "zero"}})[0] == 2
    assert "grid.n" in capsys.readouterr().err
    assert main(["stft", "--config", str(tmp_path / "none.json")], environ={}) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["stft", "--config", str(tmp_path / "broken.json")], environ={}) == 2


def test_numeric_guard_exit_3(tmp_path):
    rc, _ = _run(tmp_path, "stft", {"grid": {"n": 64}, "input": {"kind": "chirp", "c": 5.0}})
    assert rc == 3


def test_wfs_both_deterministic(tmp_path):
    rc, out = _run(tmp_path, "wfs", DELTA, "--method", "both")
    assert rc == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    rc, _ = _run(tmp_path, "wfs", DELTA, "--method", "both", "--threads", "3")
    assert rc == 0
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    rep = json.loads(first["wfs_compare.json"])
    assert rep["symmetric_difference"] <= 2
    est = json.loads(first["wfs_cone.json"])
    assert {44, 45, 46, 134, 135, 136} & set(est["bins"])
    # floats carry 17 significant digits
    assert f"{est['threshold']:.17g}" in first["wfs_cone.json"].decode()


def test_env_overrides(tmp_path):
    cfg = load_config(_cfg(tmp_path, DELTA), {"WFS_GRID_N": "2048", "WFS_THREADS": "2",
                                              "WFS_WEIGHT": "ignored"})
    assert cfg.raw["grid"]["n"] == 2048 and cfg.threads == 2
    assert cfg.raw["weight"] == DELTA["weight"]
    with pytest.raises(ConfigError) as exc:
        load_config(_cfg(tmp_path, DELTA), {"WFS_THREADS": "x"})
    assert exc.value.field == "WFS_THREADS"


def test_frames_command(tmp_path):
    rc, out = _run(tmp_path, "frames", {"grid": {"n": 512, "half_extent": 16.0},
                                        "lattice": {"a0": 1.0, "b0": 1.0}})
    assert rc == 0
    fb = json.loads((out / "frame_bounds.json").read_text())
    assert 0 < fb["A"] <= fb["B"]
    rec = json.loads((out / "reconstruction.json").read_text())
    assert rec["max"] < 1e-8
    assert (out / "dual_window.csv").read_text().startswith("x")


def test_op_command(tmp_path):
    cfg = {"grid": {"n": 1024}, "input": {"kind": "delta"},
           "operator": {"type": "kn", "symbol": {"kind": "cone_cutoff"}}}
    rc, out = _run(tmp_path, "op", cfg)
    assert rc == 0
    rep = json.loads((out / "containment.json").read_text())
    assert rep["contained"]
    rc, _ = _run(tmp_path, "op", {**cfg, "operator": {"type": "kn"}})
    assert rc == 2


def test_selftest_exit_codes(tmp_path):
    assert main(["selftest", "--only", "5"], environ={}) == 0
    assert main(["selftest", "--only", "9"], environ={}) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gaborwf", "stft", "--config",
                        _cfg(tmp_path, {"grid": {"n": 64}})], capture_output=True, text=True)
    assert r.returncode == 2 and "input" in r.stderr
