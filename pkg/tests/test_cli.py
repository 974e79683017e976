import csv
import io
import json

import jsonschema
import pytest

from coalwalk import cli
from coalwalk.bounds import BoundsReport, Row
from coalwalk.graph import complete_graph, cycle_graph, serialize


@pytest.fixture
def k4(tmp_path):
    path = tmp_path / "k4.txt"
    path.write_text(serialize(complete_graph(4)))
    return str(path)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def validate(doc, kind):
    jsonschema.validate(doc, cli.output_schema(kind))


def test_generate_star(capsys):
    code, out, _ = run(capsys, "generate", "--family", "star", "--n", "5")
    assert code == 0
    lines = out.splitlines()
    man = json.loads(next(l for l in lines if l.startswith("# manifest: "))[len("# manifest: "):])
    validate(man, "manifest")
    assert man["command"] == "generate" and man["params"]["n"] == 5
    edges = [l for l in lines if not l.startswith("#")]
    assert len(edges) == 4 and all(l.split()[0] == "0" for l in edges)


def test_generate_parity_error(capsys):
    code, _, err = run(capsys, "generate", "--family", "random-regular", "--n", "9", "--r", "3")
    assert code == 2 and "error" in err


def test_missing_required_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["analyze"])
    assert exc.value.code == 2


def test_bad_trials_usage_error(capsys, k4):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--graph", k4, "--trials", "0"])
    assert exc.value.code == 2


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", "--graph", str(tmp_path / "nope.txt"))
    assert code == 2 and "error" in err


def test_analyze(capsys, k4):
    code, out, _ = run(capsys, "analyze", "--graph", k4, "--lazy")
    assert code == 0
    doc = json.loads(out)
    validate(doc, "analyze")
    assert doc["spectrum"]["lambda2"] == pytest.approx(1 / 3)
    assert doc["k_star"] == 2
    assert doc["manifest"]["graph_sha256"] == complete_graph(4).digest()


def test_analyze_periodic_graph(capsys, tmp_path):
    path = tmp_path / "c4.txt"
    path.write_text(serialize(cycle_graph(4)))
    code, out, _ = run(capsys, "analyze", "--graph", str(path))
    assert code == 0
    validate(json.loads(out), "analyze")


def test_simulate_meeting(capsys, k4):
    code, out, _ = run(capsys, "simulate", "--graph", k4, "--lazy", "--starts", "0,1",
                       "--trials", "20000", "--seed", "3")
    assert code == 0
    doc = json.loads(out)
    validate(doc, "simulate")
    meet = doc["stats"]["meeting"]
    assert abs(meet["mean"] - 4.5) <= 3 * meet["stderr"]


def test_simulate_bipartite_refused(capsys, tmp_path):
    path = tmp_path / "c4.txt"
    path.write_text(serialize(cycle_graph(4)))
    code, _, err = run(capsys, "simulate", "--graph", str(path), "--no-lazy", "--trials", "5")
    assert code == 2 and "lazy" in err


@pytest.mark.parametrize("process,expected", [("meeting", 4.5), ("coalescing", None), ("voter", None)])
def test_exact(capsys, k4, process, expected):
    code, out, _ = run(capsys, "exact", "--graph", k4, "--lazy", "--process", process)
    assert code == 0
    doc = json.loads(out)
    validate(doc, "exact")
    if expected is not None:
        assert doc["value"] == pytest.approx(expected)
    assert doc["infinite"] is False


def test_exact_duality_via_cli(capsys, k4):
    vals = []
    for process in ("coalescing", "voter"):
        _, out, _ = run(capsys, "exact", "--graph", k4, "--lazy", "--process", process)
        vals.append(json.loads(out)["value"])
    assert vals[0] == pytest.approx(vals[1], abs=1e-8)


def test_exact_too_large(capsys, tmp_path):
    path = tmp_path / "k7.txt"
    path.write_text(serialize(complete_graph(7)))
    code, _, err = run(capsys, "exact", "--graph", str(path))
    assert code == 2 and "n <=" in err


def test_bounds_json_and_csv(capsys, k4, tmp_path):
    code, out, _ = run(capsys, "bounds", "--graph", k4, "--trials", "200")
    assert code == 0
    doc = json.loads(out)
    validate(doc, "bounds")
    assert all(r["status"] != "fail" for r in doc["rows"])
    target = tmp_path / "rows.csv"
    code, out, _ = run(capsys, "bounds", "--graph", k4, "--trials", "200", "--format", "csv",
                       "-o", str(target))
    assert code == 0 and out == ""
    rows = list(csv.reader(io.StringIO(target.read_text())))
    assert rows[0][0] == "name"
    man = json.loads((tmp_path / "rows.csv.manifest.json").read_text())
    validate(man, "manifest")


def test_bounds_exit_code_on_literal_failure(capsys, k4, monkeypatch):
    bad = BoundsReport([Row("fake", "literal", "1 <= 0", 1.0, 0.0, None, "fail", "exact")])
    monkeypatch.setattr(cli, "make_report", lambda g, o: bad)
    code, out, _ = run(capsys, "bounds", "--graph", k4)
    assert code == 1
    assert json.loads(out)["rows"][0]["status"] == "fail"


def test_scaling_csv(capsys):
    code, out, _ = run(capsys, "scaling", "--family", "star", "--sizes", "4,8", "--trials", "200")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [4, 8]
    assert all(float(r["mean"]) > 0 for r in rows)


def test_replay_reproduces(capsys, k4, tmp_path):
    first = tmp_path / "a.json"
    code, _, _ = run(capsys, "simulate", "--graph", k4, "--lazy", "--trials", "500", "--seed", "9",
                     "-o", str(first))
    assert code == 0
    second = tmp_path / "b.json"
    assert cli.main(["replay", str(first), "-o", str(second)]) == 0
    a, b = json.loads(first.read_text()), json.loads(second.read_text())
    assert a["stats"] == b["stats"]
    assert a["manifest"]["params"] == b["manifest"]["params"]


def test_replay_generated_edge_list(capsys, tmp_path):
    first = tmp_path / "g.txt"
    cli.main(["generate", "--family", "random_regular", "--n", "10", "--r", "3", "--seed", "4",
              "-o", str(first)])
    second = tmp_path / "h.txt"
    cli.main(["replay", str(first), "-o", str(second)])
    strip = lambda t: [l for l in t.splitlines() if not l.startswith("#")]
    assert strip(first.read_text()) == strip(second.read_text())


def test_config_precedence(capsys, k4, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# settings\ngraph = {k4}\ntrials = 300\nseed = 5\nlazy = true\n")
    _, out, _ = run(capsys, "simulate", "--config", str(cfg))
    params = json.loads(out)["manifest"]["params"]
    assert params["trials"] == 300 and params["seed"] == 5 and params["lazy"] is True
    _, out, _ = run(capsys, "simulate", "--config", str(cfg), "--trials", "40", "--no-lazy")
    params = json.loads(out)["manifest"]["params"]
    assert params["trials"] == 40 and params["lazy"] is False and params["seed"] == 5
    assert params["workers"] == 1


def test_bad_config_line(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trials 5\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--config", str(cfg)])
    assert exc.value.code == 2
