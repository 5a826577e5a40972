import json
import subprocess
import sys
from importlib.resources import files

import pytest

from regen_srs.cli import main
from regen_srs.errors import SchemaError, ValidationError
from regen_srs.io import build_job, check_schema

DATA = files("regen_srs") / "data"
GOLDEN = ["P.csv", "P.json", "pi.csv", "pi.json", "mu.csv", "mu.json"]


def spec(name):
    return str(DATA / name)


def test_reproduce_matches_goldens(tmp_path):
    assert main(["reproduce", "example4", "--out", str(tmp_path)]) == 0
    for name in GOLDEN:
        assert (tmp_path / name).read_bytes() == (DATA / "example4" / name).read_bytes(), name


def test_reproduce_values(tmp_path):
    main(["reproduce", "example4", "--out", str(tmp_path)])
    doc = json.loads((tmp_path / "pi.json").read_text())
    assert doc["pi"] == [[29, 160], [183, 800], [1, 4], [17, 50]]
    rows = (tmp_path / "P.csv").read_text().splitlines()
    assert rows[4] == "3,3/32,3/16,1/4,15/32"


def test_explicit_spec_agrees_with_builtin(tmp_path):
    assert main(["stationary", spec("example4_srs.json"), "--out", str(tmp_path)]) == 0
    for name in GOLDEN:
        assert (tmp_path / name).read_bytes() == (DATA / "example4" / name).read_bytes(), name


def test_identity_simulation_constant(tmp_path):
    assert main(["simulate", spec("identity.json"), "--horizon", "50", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()[1:]
    assert {line.split(",")[1] for line in lines} == {"0.25"}


def test_two_state_chain(tmp_path):
    assert main(["stationary", spec("two_state_chain.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "pi.csv").read_text() == "state,pi\na,2/5\nb,3/5\n"


@pytest.mark.parametrize("verb, extra", [
    ("simulate", ["--horizon", "200"]),
    ("couple", ["--horizon", "200"]),
    ("embedded", ["--cycles", "5000"]),
    ("splitting", ["--method", "mc", "--cycles", "5000"]),
    ("limit", ["--samples", "5000"]),
    ("contraction", ["--k-max", "3", "--replications", "500"]),
])
def test_replay_byte_identical(tmp_path, verb, extra):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main([verb, spec("example4_srs.json"), "--backend", "float", "--seed", "7",
                     "--out", str(out), *extra]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert "metadata.json" in outs[0]


def test_metadata_sidecar(tmp_path):
    main(["simulate", spec("example4_srs.json"), "--horizon", "10", "--seed", "3", "--out", str(tmp_path)])
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["seed"] == 3 and meta["command"] == "simulate"
    assert len(meta["spec_sha256"]) == 64


def test_validate_example4(capsys):
    assert main(["validate", spec("example4_srs.json")]) == 0
    out = capsys.readouterr().out
    assert "PASS  aperiodicity: cycle lengths [2, 3]" in out


def test_validate_periodic(capsys):
    assert main(["validate", spec("periodic.json")]) == 2
    assert "FAIL  aperiodicity" in capsys.readouterr().out


def test_validate_huggett_borrowing_limit(tmp_path, capsys):
    doc = json.loads((DATA / "huggett.json").read_text())
    doc["a_lower"] = -20.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == 2
    assert "FAIL  a_lower + e_1 - a_lower/R > 0" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["huggett.json", "growth.json", "risksharing.json"])
def test_validate_models(name):
    assert main(["validate", spec(name)]) == 0


def test_schema_error_path(tmp_path, capsys):
    doc = json.loads((DATA / "example4_srs.json").read_text())
    doc["driver"]["cycles"][1][1] = "oops"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as info:
        check_schema(doc)
    assert info.value.path == "$.driver.cycles[1][1]"
    assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "$.driver.cycles[1][1]" in capsys.readouterr().err


def test_ambiguous_stationary_exit(tmp_path, capsys):
    assert main(["stationary", spec("risksharing_first_best.json"), "--out", str(tmp_path)]) == 2
    assert "closed classes" in capsys.readouterr().err


def test_nonconvergence_exit(tmp_path):
    assert main(["solve", "huggett", "--max-iter", "2", "--out", str(tmp_path)]) == 3


def test_solve_growth(tmp_path):
    assert main(["solve", "growth", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["monotone"] and meta["lemma_failures"] == 0
    assert (tmp_path / "policy.csv").read_text().startswith("state,shock,policy,value\n")


def test_solve_risksharing(tmp_path):
    assert main(["solve", "risksharing", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["first_best"] is False and meta["c_min"] < meta["c_max"]


def test_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2


def test_build_job_rejects_unknown_kind():
    with pytest.raises(ValidationError):
        build_job({"kind": "nonsense"})


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "regen_srs.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "0.1.0"
