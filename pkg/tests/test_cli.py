import json
import math

import pytest

from sharpmax import io as sio
from sharpmax.cli import ExitStatus, RunConfig, UsageError, main
from sharpmax.funcrep import make_plf

SQRT7 = math.sqrt(7.0)


@pytest.fixture
def tent_file(tmp_path, tent):
    path = tmp_path / "tent.json"
    sio.save_function(tent, path)
    return path


@pytest.fixture
def nonpeak_file(tmp_path):
    path = tmp_path / "nonpeak.json"
    sio.save_function(make_plf([-2.0, -1.0, 0.0, 1.0, 2.0], [0.0, 1.0, 0.5, 1.0, 0.0], 1), path)
    return path


def _rows(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, ln.split(",")))) for ln in lines[1:]]


def test_constants_p2(capsys):
    assert main(["constants", "--p", "2"]) == ExitStatus.OK
    (row,) = _rows(capsys.readouterr().out)
    assert row["c_p"] == pytest.approx(1.6118549, abs=1e-7)
    assert row["gap"] <= 1e-10


def test_constants_batch(capsys):
    assert main(["constants", "--p", "1.5,2,3,5,10", "--alpha-grid", "2000"]) == ExitStatus.OK
    assert len(_rows(capsys.readouterr().out)) == 5


def test_constants_json(capsys):
    assert main(["constants", "--p", "3", "--format", "json"]) == ExitStatus.OK
    (doc,) = json.loads(capsys.readouterr().out)
    assert doc["tau"] == pytest.approx(1.17995, abs=1e-5)


def test_maxfn_tent(capsys, tent_file):
    assert main(["maxfn", "--fn", str(tent_file), "--grid", "3,1,4"]) == ExitStatus.OK
    rows = _rows(capsys.readouterr().out)
    row = next(r for r in rows if r["x"] == 2.0)
    assert row["g"] == pytest.approx((3 - SQRT7) / 2, abs=1e-15)
    assert row["delta"] == pytest.approx(SQRT7, rel=1e-14)


def test_maxfn_symmetry(capsys, tent_file):
    assert main(["maxfn", "--fn", str(tent_file)]) == ExitStatus.OK
    rows = _rows(capsys.readouterr().out)
    for a, b in zip(rows, reversed(rows)):
        assert a["x"] == -b["x"]
        assert a["g"] == pytest.approx(b["g"], rel=1e-13)
        assert a["s"] == pytest.approx(-b["s"], rel=1e-13)


def test_maxfn_require_peak(capsys, nonpeak_file):
    assert main(["maxfn", "--fn", str(nonpeak_file), "--require-peak"]) == ExitStatus.USAGE
    # without the gate the profile is exploratory and the run succeeds
    assert main(["maxfn", "--fn", str(nonpeak_file)]) == ExitStatus.OK


def test_maxfn_bad_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["maxfn", "--fn", str(bad)]) == ExitStatus.USAGE
    assert main(["maxfn", "--fn", str(tmp_path / "missing.json")]) == ExitStatus.USAGE
    assert main(["maxfn"]) == ExitStatus.USAGE


def test_sharpness_default(capsys):
    assert main(["sharpness", "--p", "2"]) == ExitStatus.OK
    rows = _rows(capsys.readouterr().out)
    ratios = [r["ratio"] for r in rows]
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] >= 0.98 * 1.6118549
    assert all(r["ratio_over_c_p"] <= 1 + 1e-6 for r in rows)


def test_sharpness_usage_and_assertion():
    assert main(["sharpness", "--caps", "10"]) == ExitStatus.USAGE
    assert main(["sharpness", "--caps", "10,100,1000", "--band", "0.001"]) == ExitStatus.ASSERTION


def test_variational_tent(capsys, tent_file):
    assert main(["variational", "--fn", str(tent_file), "--alpha", "auto", "--format", "json"]) == ExitStatus.OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["I_s"] == pytest.approx(2 / 3, rel=5e-3)
    assert doc["chain_ok"] is True


def test_variational_usage(tent_file, nonpeak_file):
    assert main(["variational", "--fn", str(tent_file), "--alpha", "0.3"]) == ExitStatus.USAGE
    assert main(["variational", "--fn", str(tent_file), "--alpha", "abc"]) == ExitStatus.USAGE
    assert main(["variational", "--fn", str(nonpeak_file)]) == ExitStatus.USAGE
    assert main(["variational", "--fn", str(tent_file), "--p", "0.5"]) == ExitStatus.USAGE


def test_variational_assertion():
    assert main(["variational", "--seed", "3", "--budget", "1e-12"]) == ExitStatus.ASSERTION


@pytest.mark.slow
def test_variational_seed_sweep(capsys):
    assert main(["variational", "--seed", "0:20"]) == ExitStatus.OK
    assert len(json.loads(capsys.readouterr().out)) == 20


def test_weaktype(capsys, tent_file):
    assert main(["weaktype", "--fn", str(tent_file), "--lambdas", "1e-3,1,13"]) == ExitStatus.OK
    out = capsys.readouterr().out.strip().splitlines()
    ratios = [float(line.rsplit(",", 1)[1]) for line in out[1:]]
    assert max(ratios) >= 0.95 and max(ratios) <= 1 + 1e-6
    assert main(["weaktype", "--fn", str(tent_file), "--lambdas", "2,4,2"]) == ExitStatus.OK
    out = capsys.readouterr().out.strip().splitlines()
    assert all(float(line.rsplit(",", 1)[1]) == 0.0 for line in out[1:])


def test_weaktype_usage(tent_file):
    assert main(["weaktype", "--fn", str(tent_file), "--lambdas=-1,1,3"]) == ExitStatus.USAGE


def test_help_and_unknown():
    assert main(["--help"]) == ExitStatus.OK
    assert main(["frobnicate"]) == ExitStatus.USAGE
    assert main(["constants", "--threads", "0"]) == ExitStatus.USAGE


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig("constants", p=[1.0])
    with pytest.raises(UsageError):
        RunConfig("constants", tol=0.0)


@pytest.mark.parametrize(
    "argv",
    [
        ["constants", "--p", "2,3", "--alpha-grid", "500"],
        ["maxfn", "--seed", "4"],
        ["variational", "--seed", "2", "--format", "json"],
        ["weaktype", "--seed", "1,2"],
    ],
)
def test_byte_identical_repeats(tmp_path, argv):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert main(argv + ["--out", str(a)]) == ExitStatus.OK
    assert main(argv + ["--out", str(b), "--threads", "2"]) == ExitStatus.OK
    assert a.read_bytes() == b.read_bytes()
