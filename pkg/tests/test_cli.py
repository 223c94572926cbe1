import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from trajlens import corpus
from trajlens.cli import run
from trajlens.dp import finite_values
from trajlens.report import PREPORT_CSV_COLUMNS, REPORT_SCHEMA


def invoke(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = invoke(capsys, *argv)
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    return code, doc


@pytest.fixture
def twostate_file(tmp_path):
    path = tmp_path / "twostate.json"
    path.write_text(json.dumps({"type": "dp", "states": [
        {"id": "s0", "payoff": 0, "successors": ["s0", "s1"]},
        {"id": "s1", "payoff": 1, "successors": ["s1"]},
    ]}))
    return path


def test_solve_model_file(capsys, twostate_file):
    code, doc = report(capsys, "solve", "--model", str(twostate_file), "--horizon", "3")
    assert code == 0
    assert doc["result"]["finite"]["values"]["s0"][2] == 2 / 3
    assert doc["provenance"]["source"] == {"model": str(twostate_file)}


def test_check_p_ls_violated(capsys):
    code, doc = report(capsys, "check-p", "--corpus", "ls-nonregular", "--param", "K=50",
                       "--epsilon", "0.05", "--horizons", "60,80,100")
    assert code == 2
    res = doc["result"]
    assert res["verdict"] == "VIOLATED"
    assert res["witness"]["t"] == 0.5 and res["witness"]["deviation"] == -0.25
    assert res["witness"]["state"] == "a1"
    assert doc["provenance"]["source"] == {"corpus": "ls-nonregular", "params": {"K": 50}}


def test_check_p_holds(capsys):
    code, doc = report(capsys, "check-p", "--corpus", "two-state", "--epsilon", "0.05",
                       "--horizons", "100,200")
    assert code == 0 and doc["result"]["verdict"] == "HOLDS" and doc["result"]["threshold"] == 100


def test_check_pprime(capsys):
    code, doc = report(capsys, "check-pprime", "--corpus", "three-cycle", "--epsilon", "0.05",
                       "--lambdas", "0.05,0.02")
    assert code == 0 and doc["result"]["kind"] == "P'"


def test_check_p_csv_columns(capsys):
    code, out, _ = invoke(capsys, "check-p", "--corpus", "absorbing", "--epsilon", "0.05",
                          "--horizons", "10", "--grid", "0,0.5,1", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == PREPORT_CSV_COLUMNS == ("horizon", "state", "t", "deviation", "epsilon", "verdict")
    assert len(rows) == 1 + 4 * 3
    assert {r[5] for r in rows[1:]} == {"HOLDS"}


def test_game_solve_big_match(capsys):
    code, doc = report(capsys, "game-solve", "--corpus", "big-match", "--horizon", "100")
    assert code == 0
    assert np.max(np.abs(np.array(doc["result"]["finite"]["values"]["play"]) - 0.5)) <= 1e-9


def test_eval_profile_gamma(capsys, tmp_path):
    code, doc = report(capsys, "eval-profile", "--corpus", "gamma", "--state", "s", "--horizon", "11",
                       "--sigma", "pure:s=4", "--tau", "pure", "--v-ref", "0", "--grid", "6/11", "--exact")
    assert code == 0
    res = doc["result"]
    assert res["cumulative"] == [0, 0, 1, 2, 3, 4, 5, 4, 3, 2, 1, 0]
    assert res["deviation"] == [5 / 11]
    assert res["worst"]["t_exact"] == "6/11"


def test_eval_profile_file(capsys, tmp_path):
    prof = tmp_path / "tau.json"
    prof.write_text(json.dumps({"type": "markov-profile", "stationary": {"play": [0.5, 0.5]}}))
    code, doc = report(capsys, "eval-profile", "--corpus", "big-match", "--state", "play",
                       "--horizon", "6", "--sigma", "pure", "--tau", str(prof))
    assert code == 0 and doc["result"]["cumulative"] == [k / 2 for k in range(7)]


def test_enumerate(capsys):
    code, doc = report(capsys, "enumerate", "--corpus", "ls-nonregular", "--param", "K=5",
                       "--state", "a1", "--horizon", "6")
    assert code == 0 and doc["result"]["count"] == 1
    assert doc["result"]["plays"][0]["sequence"] == ["a1", "a2", "a3", "b3,1", "b3,2", "b3,3"]
    code, doc = report(capsys, "enumerate", "--corpus", "two-state", "--state", "s0",
                       "--horizon", "5", "--epsilon", "1", "--limit", "3")
    assert doc["result"]["flags"] == ["LIMIT_REACHED"]


def test_probe_uniform(capsys):
    code, doc = report(capsys, "probe-uniform", "--corpus", "absorbing", "--state", "z2",
                       "--epsilon", "0.01", "--threshold", "1", "--nmax", "20")
    assert code == 0 and doc["result"]["passes"]
    code, _ = report(capsys, "probe-uniform", "--corpus", "ls-nonregular", "--param", "K=40",
                     "--state", "a1", "--epsilon", "0.1", "--threshold", "20", "--nmax", "40")
    assert code == 2


def test_corpus_list(capsys):
    code, out, _ = invoke(capsys, "corpus", "list", "--format", "json")
    assert code == 0
    assert [e["name"] for e in json.loads(out)] == corpus.names()


@pytest.mark.parametrize("name, params", [("ls-nonregular", ["K=9"]), ("two-state", []), ("constant", ["c=0.3"])])
def test_emit_then_solve_round_trip(capsys, tmp_path, name, params):
    path = tmp_path / "m.json"
    args = ["corpus", "emit", name, "--out", str(path)]
    for p in params:
        args += ["--param", p]
    assert run(args) == 0
    code, doc = report(capsys, "solve", "--model", str(path), "--horizon", "25")
    entry = corpus.generate(name, dict(p.split("=") for p in params))
    table = finite_values(entry.model, 25)
    got = doc["result"]["finite"]["values"]
    for s, sid in enumerate(entry.model.ids):
        assert got[sid] == table.horizon_values[1:, s].tolist()
    _, direct = report(capsys, "solve", "--corpus", name, *sum((["--param", p] for p in params), []),
                       "--horizon", "25")
    assert direct["result"] == doc["result"]
    assert direct["provenance"]["model_sha256"] == doc["provenance"]["model_sha256"]


def test_output_is_deterministic(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        run(["check-p", "--corpus", "ls-nonregular", "--param", "K=20", "--epsilon", "0.05",
             "--horizons", "30,40", "--out", str(path)])
        outs.append(path.read_text())
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "argv, fragment",
    [
        (["solve", "--corpus", "nope", "--horizon", "3"], "unknown corpus entry"),
        (["solve", "--horizon", "3"], "exactly one of --model or --corpus"),
        (["solve", "--corpus", "big-match", "--horizon", "3"], "needs a dynamic program"),
        (["game-solve", "--corpus", "two-state", "--horizon", "3"], "needs a stochastic game"),
        (["solve", "--corpus", "ls-nonregular", "--param", "K=x", "--horizon", "3"], "not a valid int"),
        (["enumerate", "--corpus", "two-state", "--state", "zz", "--horizon", "3"], "zz"),
        (["eval-profile", "--corpus", "big-match", "--state", "play", "--horizon", "3", "--sigma", "pure:nowhere=1"],
         "bad pure choice"),
    ],
)
def test_input_errors(capsys, argv, fragment):
    code, _, err = invoke(capsys, *argv)
    assert code == 1
    assert fragment in err


def test_argument_range_errors(capsys):
    for argv in (["check-pprime", "--corpus", "two-state", "--epsilon", "0.1", "--lambdas", "1.5"],
                 ["check-p", "--corpus", "two-state", "--epsilon", "-1", "--horizons", "5"],
                 ["solve", "--corpus", "two-state", "--horizon", "0"]):
        code, _, err = invoke(capsys, *argv)
        assert code == 1 and "expected" in err


def test_malformed_json_location(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"type": "dp",\n "states": [}\n')
    code, _, err = invoke(capsys, "solve", "--model", str(path), "--horizon", "2")
    assert code == 1 and f"{path}:2:" in err


def test_schema_violation_location(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"type": "dp", "states": [{"id": "a", "payoff": 2, "successors": ["a"]}]}))
    code, _, err = invoke(capsys, "solve", "--model", str(path), "--horizon", "2")
    assert code == 1 and "states[0].payoff" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "trajlens", "corpus", "list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "big-match" in proc.stdout
