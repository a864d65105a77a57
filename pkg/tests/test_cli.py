from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from truncext.cli import main
from truncext.lynden_bell import premium_estimate
from truncext.model import model_from_p, sample_truncated_pairs
from truncext.sample import read_csv, write_csv


@pytest.fixture
def hand_csv(tmp_path):
    p = tmp_path / "hand.csv"
    p.write_text("x,y\n1,1\n2,3\n4,9\n8,27\n")
    return p


@pytest.fixture
def burr_csv(tmp_path):
    p = tmp_path / "burr.csv"
    write_csv(sample_truncated_pairs(model_from_p(0.9, 0.6), 3000, 3), p)
    return p


def test_estimate_hand(hand_csv, capsys):
    assert main(["estimate", "--input", str(hand_csv), "--k", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    l2, l3 = math.log(2), math.log(3)
    assert out["estimate"]["gamma1_hat"] == pytest.approx(1.5 * l2 * l3 / (l3 - l2), abs=1e-10)
    assert out["ci"] is None and "2k < n" in out["ci_error"]


def test_estimate_auto(burr_csv, capsys):
    assert main(["estimate", "--input", str(burr_csv), "--k", "auto",
                 "--mc-points", "2000"]) == 0
    cap = capsys.readouterr()
    out = json.loads(cap.out)
    assert out["ci"]["lcb"] < out["estimate"]["gamma1_hat"] < out["ci"]["ucb"]
    assert "gamma1_hat" in cap.err


def test_estimate_bad_inputs(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1,2\n3,x\n")
    assert main(["estimate", "--input", str(p), "--k", "2"]) == 2
    assert ":3:" in capsys.readouterr().err
    p.write_text("")
    assert main(["estimate", "--input", str(p)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["estimate", "--input", str(p), "--k", "many"])
    assert e.value.code == 2


def test_estimate_degenerate(tmp_path, capsys):
    p = tmp_path / "deg.csv"
    p.write_text("x,y\n1,5\n2,5\n4,5\n8,9\n")
    assert main(["estimate", "--input", str(p), "--k", "2"]) == 3


def test_premium_matches_library(burr_csv, capsys):
    s = read_csv(burr_csv)
    k = 120
    u = 5 * s.x_sorted[s.n - k - 1]
    assert main(["premium", "--input", str(burr_csv), "--retention", repr(float(u)), "--k", str(k),
                 "--mc-points", "2000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pi_hat"] == premium_estimate(s, k, u).pi_hat
    assert out["ci"]["lcb"] <= out["pi_hat"] <= out["ci"]["ucb"]


def test_premium_errors(tmp_path, burr_csv, capsys):
    assert main(["premium", "--input", str(burr_csv), "--retention", "0.01", "--k", "100"]) == 2
    assert "pivot" in capsys.readouterr().err
    heavy = tmp_path / "heavy.csv"
    write_csv(sample_truncated_pairs(model_from_p(0.9, 2.0), 3000, 1), heavy)
    assert main(["premium", "--input", str(heavy), "--retention", "1e6", "--k", "100"]) == 3
    assert "infinite" in capsys.readouterr().err


def test_simulate_csv(capsys):
    assert main(["simulate", "point", "--p", "0.9", "--gamma1", "0.6", "--N", "300",
                 "--replicates", "3", "--format", "csv", "--workers", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("p,gamma1,N,mean_n") and len(lines) == 2


def test_console_script(hand_csv):
    r = subprocess.run([sys.executable, "-m", "truncext.cli", "estimate", "--input",
                        str(hand_csv), "--k", "2"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["estimate"]["k"] == 2
