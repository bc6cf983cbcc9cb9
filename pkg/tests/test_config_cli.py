import json
import subprocess
import sys

import numpy as np
import pytest

from llgorbit.cli import main
from llgorbit.config import ConfigErrors, RunConfig, config_hash, parse_config, serialize_config
from llgorbit.grid import read_snapshot, ShapeSpec

GOOD = """\
# prolate test particle
[shape]
kind = ellipsoid
aspect = 2, 1, 1
resolution = 5

[params]
eta = 0.1
alpha = 1.0
lambda = 0.001
period = 1.0

[field]
kind = uniform_rotating
u = 0, 1, 0
v = 0, 0, 1

[run]
seed = 7
threads = 1
"""


def test_parse_good_config():
    cfg = parse_config(GOOD)
    assert cfg.shape == ShapeSpec("ellipsoid", (2.0, 1.0, 1.0))
    assert cfg.resolution == (5, 5, 5)
    assert cfg.params.eta == 0.1 and cfg.params.lam == 0.001
    assert cfg.params.field_spec.period == cfg.params.period
    assert cfg.seed == 7 and cfg.threads == 1


def test_serialize_roundtrip():
    cfg = parse_config(GOOD)
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)
    assert config_hash(cfg) != config_hash(parse_config(GOOD.replace("seed = 7", "seed = 8")))


def test_all_errors_reported_with_lines():
    bad = """\
[shape]
kind = ellipsoid
kind = cuboid
resolution = 5
colour = blue

[params]
eta = fast

[nonsense]
x = 1
"""
    with pytest.raises(ConfigErrors) as exc:
        parse_config(bad)
    lines = {ln for ln, _ in exc.value.errors}
    assert {3, 5, 8, 10} <= lines
    msg = str(exc.value)
    assert "duplicate" in msg and "lines 2 and 3" in msg
    assert "colour" in msg and "nonsense" in msg


def test_missing_required_keys():
    with pytest.raises(ConfigErrors) as exc:
        parse_config("[shape]\nkind = cuboid\n")
    msg = str(exc.value)
    assert "resolution" in msg and "eta" in msg


@pytest.mark.parametrize("text", [
    GOOD.replace("eta = 0.1", "eta = -0.1"),
    GOOD.replace("aspect = 2, 1, 1", "aspect = 2, 0, 1"),
    GOOD.replace("v = 0, 0, 1", "v = 0, 1, 0"),
    GOOD.replace("seed = 7", "seed = -1"),
])
def test_constraint_violations(text):
    with pytest.raises(ConfigErrors):
        parse_config(text)


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main([*args, "--out-dir", str(out)])
    return code, out


def test_cli_demag_tensor(tmp_path, capsys):
    code, out = run(tmp_path, "demag-tensor", "--shape", "ellipsoid:1,1,1", "--resolution", "6")
    assert code == 0
    text = (out / "demag_tensor.txt").read_text()
    assert "shape_condition=violated" in text
    man = json.loads((out / "manifest_demag-tensor.json").read_text())
    assert set(man) >= {"config_hash", "versions", "timings"}


def test_cli_pipeline(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(GOOD)
    code, out = run(tmp_path, "minimize", "--config", str(cfg))
    assert code == 0
    snap = out / "minimizer.magf"
    mask, m = read_snapshot(snap)
    assert mask.sum() == len(m)

    code, _ = run(tmp_path, "energy", "--config", str(cfg), "--in", str(snap))
    assert code == 0 and "total=" in capsys.readouterr().out

    code, _ = run(tmp_path, "evolve", "--config", str(cfg), "--in", str(snap), "--t1", "0.05",
                  "--sample-every", "2", "--snapshots")
    assert code == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,energy,mx,my,mz,raw_drift,post_drift" and len(rows) > 2
    assert (out / "snapshot_00000.magf").exists()

    code, _ = run(tmp_path, "spectrum", "--config", str(cfg), "--in", str(snap))
    assert code == 0
    assert (out / "spectrum_verdict.txt").read_text().startswith("clearance=clear")


def test_cli_periodic_and_refusal(tmp_path, capsys):
    code, out = run(tmp_path, "periodic", "--resolution", "5", "--alpha", "1",
                    "--lambda-list", "0,0.0005,0.001")
    assert code == 0
    rows = (out / "branch.csv").read_text().splitlines()
    assert len(rows) == 4
    code, _ = run(tmp_path, "periodic", "--shape", "ellipsoid:1,1,1", "--resolution", "5",
                  "--alpha", "1", "--lambda", "0.001", name="sphere")
    assert code == 2
    assert "shape condition" in capsys.readouterr().err


def test_cli_scaling(tmp_path):
    code, out = run(tmp_path, "scaling", "--resolution", "5", "--etas", "0.05,0.1,0.2")
    assert code == 0
    assert (out / "scaling_fit.csv").read_text().startswith("quantity,slope,prefactor")


def test_cli_check(tmp_path):
    code, out = run(tmp_path, "check", "--resolution", "5")
    assert code == 0
    assert "overall=PASS" in (out / "check.txt").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[shape]\nkind = blob\n")
    assert run(tmp_path, "demag-tensor", "--config", str(bad))[0] == 2
    assert run(tmp_path, "energy", "--resolution", "4", "--in", str(tmp_path / "missing.magf"))[0] == 2
    junk = tmp_path / "junk.magf"
    junk.write_bytes(b"MAGF" + b"\0" * 7)
    assert run(tmp_path, "energy", "--resolution", "4", "--in", str(junk))[0] == 2
    assert run(tmp_path, "evolve", "--resolution", "4", "--in", str(junk), "--t1", "1")[0] == 2
    err = capsys.readouterr().err
    assert "configuration error" in err and "input error" in err


def test_cli_mismatched_snapshot(tmp_path):
    code, out = run(tmp_path, "minimize", "--resolution", "5")
    assert code == 0
    code, _ = run(tmp_path, "energy", "--resolution", "6", "--in", str(out / "minimizer.magf"))
    assert code == 2


def test_cli_oversized_dt(tmp_path):
    code, out = run(tmp_path, "minimize", "--resolution", "4")
    code, _ = run(tmp_path, "evolve", "--resolution", "4", "--in", str(out / "minimizer.magf"),
                  "--t1", "1", "--dt", "10")
    assert code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "llgorbit", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


def test_threads_env_default(monkeypatch):
    monkeypatch.setenv("LLGORBIT_THREADS", "3")
    cfg = RunConfig(ShapeSpec("cuboid"), (4, 4, 4), parse_config(GOOD).params)
    assert cfg.threads == 3


def test_cli_outputs_are_bit_identical(tmp_path):
    args = ["evolve", "--resolution", "5", "--alpha", "1", "--lambda", "0.01", "--seed", "3"]
    outs = []
    for name in ("a", "b"):
        code, out = run(tmp_path, "minimize", "--resolution", "5", name=name)
        assert code == 0
        code, _ = run(tmp_path, *args, "--in", str(out / "minimizer.magf"), "--t1", "0.05",
                      "--snapshots", name=name)
        assert code == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir() if p.suffix in (".csv", ".magf"))
    assert "trajectory.csv" in files and "minimizer.magf" in files
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    np.testing.assert_array_equal(read_snapshot(outs[0] / "minimizer.magf")[1],
                                  read_snapshot(outs[1] / "minimizer.magf")[1])
