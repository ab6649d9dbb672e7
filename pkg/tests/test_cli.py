import json
import os
import subprocess
import sys

import pytest

from suppexp import cli, discrete
from suppexp import extfun as ef


@pytest.fixture
def run(capsys, monkeypatch):
    for k in list(os.environ):
        if k.startswith("SUPPEXP_"):
            monkeypatch.delenv(k)

    def _run(*argv):
        code = cli.run(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err
    return _run


@pytest.fixture
def pattern_file(tmp_path):
    p = tmp_path / "example6x4.txt"
    p.write_text(discrete.example_pattern().to_coo_text())
    return str(p)


def test_discrete_phi_example(run, pattern_file):
    code, out, _ = run("discrete", "phi", "--pattern", pattern_file, "--exact")
    assert code == 0 and out.strip() == "0,3,4,6,6"


def test_discrete_phi_json_mode(run, pattern_file):
    code, out, _ = run("discrete", "phi", "--pattern", pattern_file, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["result"]["values"] == [0, 3, 4, 6, 6]
    assert doc["config"]["seed"] == 0


def test_zero_function_transform_is_hypothesis_violation(run, tmp_path):
    p = tmp_path / "zero.json"
    p.write_text(json.dumps(ef.Const(0).to_json()))
    code, _, err = run("fn", "transform", "--op", "double-conjugate", "--f", str(p))
    assert code == 2 and "hypothesis violation" in err


def test_usage_errors(run):
    assert run("bogus")[0] == 64
    assert run("fn", "eval", "--f", "sqrt", "--x", "abc")[0] == 64
    assert run("poset", "compare", "--f", "sqrt_capped", "--g", "id", "--n-max", "0")[0] == 64
    assert run("fn", "eval", "--f", "/nonexistent.json", "--x", "1")[0] == 64


def test_fn_eval(run):
    code, out, _ = run("fn", "eval", "--f", "sqrt", "--x", "4", "1/4")
    assert code == 0 and json.loads(out)["result"]["values"] == {"4": "2", "1/4": "1/2"}


def test_compare_not_contained(run):
    code, out, _ = run("poset", "compare", "--f", "sqrt_capped", "--g", "id")
    res = json.loads(out)["result"]
    assert code == 0 and res["relation"] == "NotContained"
    assert res["witness"]["condition"] == "RatioBlowupAtZero"


def test_verify_round_trip(run, tmp_path):
    path = tmp_path / "v.json"
    assert run("poset", "compare", "--f", "sqrt_capped", "--g", "id", "--out", str(path))[0] == 0
    code, out, _ = run("poset", "verify", "--verdict", str(path))
    assert code == 0 and json.loads(out)["result"]["ok"]
    doc = json.loads(path.read_text())
    doc["result"]["witness"]["sequences"]["1"][0][1] = "0.5"
    path.write_text(json.dumps(doc))
    assert run("poset", "verify", "--verdict", str(path))[0] == 2


def test_byte_identical_outputs(run, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"a{i}.json"
        assert run("chains", "antichain", "--stages", "3", "--out", str(p))[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_flag_beats_environment(run, monkeypatch):
    monkeypatch.setenv("SUPPEXP_N_MAX", "2")
    cfg = json.loads(run("fn", "eval", "--f", "sqrt", "--x", "1")[1])["config"]
    assert cfg["n_max"] == 2
    cfg = json.loads(run("fn", "eval", "--f", "sqrt", "--x", "1", "--n-max", "5")[1])["config"]
    assert cfg["n_max"] == 5


def test_bad_environment_value(run, monkeypatch):
    monkeypatch.setenv("SUPPEXP_STAGES", "many")
    assert run("fn", "eval", "--f", "sqrt", "--x", "1")[0] == 64


def test_classify(run):
    code, out, _ = run("poset", "classify", "--f", "x_plus_one")
    assert code == 0 and json.loads(out)["result"]["region"] == "ICODfin"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "suppexp", "fn", "check", "--f", "sqrt", "--class", "ICOD"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["result"]["status"] == "Holds"
