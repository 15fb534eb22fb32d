import csv
import hashlib
import json

import numpy as np
import pytest

from csg.cli import main
from csg.instances import g1, g2, g3, random_slater_game
from csg.io import canonical_json, multistrategy_to_dict, spec_to_dict
from csg.model import MultiStrategy


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, json.loads(out.read_text())


def test_validate_g1(files, tmp_path):
    spec = files("g1.json", spec_to_dict(g1()))
    code, doc = run(["validate", "--spec", spec], tmp_path)
    assert code == 0 and doc["violations"] == [] and doc["exit_code"] == 0
    m = doc["manifest"]
    assert m["command"] == "validate" and m["version"]
    with open(spec, "rb") as fh:
        assert m["inputs"] == {spec: hashlib.sha256(fh.read()).hexdigest()}


def test_validate_rejects_bad_rows(files, tmp_path):
    doc = spec_to_dict(g1())
    doc["transition"]["s0"] = [[0.7, 0.7]]
    code, out = run(["validate", "--spec", files("bad.json", doc)], tmp_path)
    assert code == 2 and out["violations"]


def test_cop_g2(files, tmp_path):
    code, doc = run(["cop", "--spec", files("g2.json", spec_to_dict(g2())), "--player", "1"], tmp_path)
    assert code == 0 and doc["value"] == pytest.approx(0.5, abs=1e-8)


def test_cop_infeasible_exit_code(files, tmp_path):
    code, doc = run(["cop", "--spec", files("g2.json", spec_to_dict(g2(kappa=-1.0))), "--player", "1"],
                    tmp_path)
    assert code == 4 and doc["exit_code"] == 4


def test_cop_player_out_of_range(files, tmp_path):
    code, doc = run(["cop", "--spec", files("g2.json", spec_to_dict(g2())), "--player", "2"], tmp_path)
    assert code == 2 and "player" in doc["error"]


def test_nash_g2(files, tmp_path):
    code, doc = run(["nash", "--spec", files("g2.json", spec_to_dict(g2()))], tmp_path)
    assert code == 0 and doc["converged"] and doc["max_gap"] <= 1e-9


def test_nash_not_converged_exit_code(files, tmp_path):
    # prisoner's dilemma: uniform play is not an equilibrium and no sweep is allowed
    spec = g3([[1, 3], [0, 2]], [[1, 0], [3, 2]])
    code, doc = run(["nash", "--spec", files("pd.json", spec_to_dict(spec)),
                     "--max-sweeps", "0", "--restarts", "0"], tmp_path)
    assert code == 3 and not doc["converged"]


def test_eval_with_mc(files, tmp_path):
    spec = g2()
    phi = MultiStrategy.uniform(spec)
    code, doc = run(["eval", "--spec", files("g2.json", spec_to_dict(spec)),
                     "--strategy", files("phi.json", multistrategy_to_dict(spec, phi)),
                     "--mc", "2000", "--seed", "3"], tmp_path)
    assert code == 0 and doc["J"] == [[0.5, 0.5]] and doc["feasible"] == [True]
    assert doc["mc"]["episodes"] == 2000 and doc["manifest"]["seed"] == 3


def test_truncate_writes_csv(files, tmp_path):
    params = files("p.json", {"q": 0.5, "g": 0.5, "alpha": 0.4, "M": 12})
    table = tmp_path / "sweep.csv"
    code, doc = run(["truncate", "--model", "example1", "--params", params, "--ms", "4,16",
                     "--csv", str(table), "--restarts", "0"], tmp_path)
    assert code in (0, 3)
    rows = list(csv.DictReader(table.open()))
    assert [r["m"] for r in rows] == ["4", "16"] and rows[0]["M"] == "12"
    assert len(doc["records"]) == 2
    for r in rows:
        assert float(r["gap_one"]) <= float(r["bound"])


def test_truncate_rejects_bad_ms(files, tmp_path):
    code, doc = run(["truncate", "--model", "example1", "--ms", "16,4"], tmp_path)
    assert code == 2


def test_check_with_weights(files, tmp_path):
    spec = files("g2.json", spec_to_dict(g2()))
    code, doc = run(["check", "--spec", spec, "--w", files("w.json", [1.0]), "--zhang", "--slater"],
                    tmp_path)
    assert code == 0 and doc["drift"]["delta_min"] == 1.0 and doc["slater"]["min_slack"] == 0.5
    code, doc = run(["check", "--spec", spec, "--w", files("w0.json", [0.5])], tmp_path)
    assert code == 2


def test_check_flags_failed_slater(files, tmp_path):
    code, doc = run(["check", "--spec", files("g2.json", spec_to_dict(g2(kappa=0.0))), "--slater"],
                    tmp_path)
    assert code == 4 and doc["slater"]["flagged"]


def test_example1_report(tmp_path):
    code, doc = run(["example1", "--q", "0.5", "--g", "0.5", "--alpha", "0.4", "--levels", "100"],
                    tmp_path)
    assert code == 0 and doc["model"]["states"][:2] == ["1", "1*"]
    assert doc["certificates"]["drift_stop"]["delta_min"] == pytest.approx(2.0)


def test_unknown_flag_and_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["nash", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_spec_file(tmp_path):
    code, doc = run(["validate", "--spec", str(tmp_path / "nope.json")], tmp_path)
    assert code == 2 and "cannot read" in doc["error"]


def test_threads_env_fallback(files, tmp_path, monkeypatch):
    spec = files("g.json", spec_to_dict(random_slater_game(np.random.default_rng(0))))
    argv = ["nash", "--spec", spec, "--max-sweeps", "20", "--restarts", "0"]
    monkeypatch.setenv("CSG_THREADS", "2")
    _, a = run(argv, tmp_path, "a.json")
    assert a["manifest"]["options"]["threads"] is None
    monkeypatch.setenv("CSG_THREADS", "x")
    code, _ = run(argv, tmp_path, "b.json")
    assert code == 2
    monkeypatch.delenv("CSG_THREADS")
    _, c = run(argv + ["--threads", "1"], tmp_path, "c.json")
    assert a["trajectory"] == c["trajectory"]


def test_manifest_sidecar_has_duration(files, tmp_path):
    side = tmp_path / "manifest.json"
    main(["validate", "--spec", files("g1.json", spec_to_dict(g1())), "--out", str(tmp_path / "o.json"),
          "--manifest", str(side)])
    doc = json.loads(side.read_text())
    assert doc["duration_seconds"] >= 0 and doc["command"] == "validate"


def test_canonical_json_float_format():
    assert canonical_json({"b": 0.1, "a": 1}) == canonical_json({"a": 1, "b": 0.1})
    assert "0.10000000000000001" in canonical_json({"x": 0.1})
