import json

import pytest

from krein.cli import floats, ints, main
from krein.errors import BadParameter


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def test_number_lists():
    assert floats("1,2,4") == (1.0, 2.0, 4.0)
    assert floats("1e-3:1e-1:log10:3") == pytest.approx((1e-3, 1e-2, 1e-1))
    assert floats("0:1:lin:3") == (0.0, 0.5, 1.0)
    assert len(floats("1e-3:1e-1:log10")) == 5
    assert ints("1,5, 9") == (1, 5, 9)
    for bad in ("a,b", "0:1:log10", "1:2:cubic", "1:2:lin:1"):
        with pytest.raises(BadParameter):
            floats(bad)


def test_cz_command(tmp_path, capsys):
    assert run(tmp_path, "cz", "--u", "0:1/2=3;1/2:1=1", "--beta", "3/2") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "[0, 1]"
    assert json.loads(out[-1]) == {"covered": True, "maximal": True, "disjoint": True, "sum_bound": True}
    assert run(tmp_path, "cz", "--u", "0:1=0", "--u2", "0:1=1", "--beta", "1", "--p2", "2") == 0


def test_bad_config_exits_2_with_manifest(tmp_path, capsys):
    assert run(tmp_path, "steklov", "--dr", "30") == 2
    assert "BadParameter" in capsys.readouterr().err
    man = json.loads((tmp_path / "steklov.json").read_text())
    assert man["status"] == "error" and man["config"]["dr"] == 30.0


def test_cz_bad_step_exits_2(tmp_path):
    assert run(tmp_path, "cz", "--u", "0:1/3=1", "--beta", "1") == 2


def test_steklov_command(tmp_path, capsys):
    assert run(tmp_path, "steklov", "--weight", "const:c=1", "--r-max", "4", "--stride", "2") == 0
    body = (tmp_path / "steklov.csv").read_text()
    assert body.splitlines()[0] == "r,p,norm"
    man = json.loads((tmp_path / "steklov.json").read_text())
    assert man["config"]["weight"] == "const:c=1"


def test_convergence_rerun(tmp_path):
    assert run(tmp_path, "mixed", "--weight", "gauss:delta=0.05", "--r-max", "4", "--stride", "1",
               "--convergence") == 0
    coarse = json.loads((tmp_path / "mixed.json").read_text())
    fine = json.loads((tmp_path / "mixed-refined.json").read_text())
    assert fine["config"]["dr"] == 0.025
    assert fine["config"]["lam_half"] == 256.0 and fine["config"]["n_points"] == 8192
    assert fine["summary"]["split"] == pytest.approx(coarse["summary"]["split"], rel=1e-3)


def test_slope_remainder_diverge(tmp_path):
    assert run(tmp_path, "slope", "--deltas", "1e-3:1e-1:log10:3", "--r-max", "4", "--stride", "2") == 0
    assert run(tmp_path, "remainder", "--k", "0", "--deltas", "0.01,0.03,0.1", "--r-max", "4", "--stride", "2") == 0
    assert run(tmp_path, "diverge", "--p2", "1.5", "--p", "1.5", "--n", "1,2,4") == 0
    assert (tmp_path / "diverge.csv").exists()
    assert run(tmp_path, "diverge", "--p2", "1.5", "--p", "1.8") == 2


def test_verify_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "verify", "--only", "11") == 0
    assert "C11" in capsys.readouterr().out
    man = json.loads((tmp_path / "verify-quick.json").read_text())
    assert man["summary"]["failed"] == 0
    # the divergence criterion does not hold on this discretisation, so verify reports it
    assert run(tmp_path, "verify", "--level", "full", "--only", "8") == 1


def test_parser_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "nonsense")
    assert exc.value.code == 2
