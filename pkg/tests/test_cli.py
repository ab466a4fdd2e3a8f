import json

import pytest

from geoflow.cli import main
from geoflow.concepts import parse_graph
from geoflow.engine import read_trace
from geoflow.wellformed import validate
from helpers import corpus_files


@pytest.fixture
def hotel(workflows):
    return str(workflows / "hotel_coffee.json")


def test_validate_ok_and_ill_formed(capsys, hotel):
    assert main(["validate", hotel]) == 0
    assert capsys.readouterr().out.strip() == "well-formed"
    bad = str(corpus_files("g2_cond")[0])
    assert main(["validate", bad, "--json"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["well_formed"] is False


def test_parse_and_config_errors(tmp_path, capsys, hotel):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["validate", str(broken)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    assert main(["--fixtures", str(tmp_path / "nofix"), "exec", hotel]) == 2
    assert main(["--registry", str(tmp_path / "nope.json"), "validate", hotel]) == 2
    assert main(["pairs", hotel, "--targets", "g9", "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_exec_prints_answer_and_trace(tmp_path, capsys, hotel):
    trace = tmp_path / "t.jsonl"
    assert main(["exec", hotel, "--trace", str(trace), "--no-timestamps"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["answer"] == "driving_distance: 245 m\ndriving_time: 71 s"
    header, steps = read_trace(trace)
    assert set(header) == {"graph_hash", "fixtures_hash", "registry_version"}
    assert len(steps) == 6


def test_exec_ill_formed_is_domain_error(capsys):
    assert main(["exec", str(corpus_files("g1_")[0])]) == 1
    capsys.readouterr()


def test_exec_unbound_source(tmp_path, capsys):
    g = {
        "nodes": [
            {"id": "a", "concept": "Location", "role": "Extent"},
            {"id": "b", "concept": "Location", "role": "Measure"},
        ],
        "edges": [{"from": "a", "to": "b", "operator": "geocode"}],
    }
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g))
    assert main(["exec", str(path)]) == 1
    assert "UnboundSource" in capsys.readouterr().err


def test_exec_operator_failure_writes_partial_trace(tmp_path, capsys):
    g = {
        "nodes": [
            {"id": "a", "phrase": "Atlantis", "concept": "Location", "role": "Extent"},
            {"id": "b", "concept": "Location", "role": "Measure"},
        ],
        "edges": [{"from": "a", "to": "b", "operator": "geocode"}],
    }
    path = tmp_path / "g.json"
    path.write_text(json.dumps(g))
    trace = tmp_path / "t.jsonl"
    assert main(["exec", str(path), "--trace", str(trace)]) == 3
    assert "OperatorFailure" in capsys.readouterr().err
    lines = trace.read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["failure"]["step"] == 1


def test_factorize(capsys, hotel):
    assert main(["factorize", hotel]) == 0
    fg = json.loads(capsys.readouterr().out)
    assert any(op["id"] == "op:directions->route" for op in fg["operators"])


def test_compose(tmp_path, capsys):
    plan = {
        "parts": [
            {"template": "Object-Field-Measure", "bindings": {"origin": "Hotel Astra", "target": "Belem Tower"}},
            {"template": "Location-Bearing-Classify", "bindings": {}},
        ],
        "wiring": [
            {"from": {"part": 0, "port": "origin_point"}, "to": {"part": 1, "port": "origin"}},
            {"from": {"part": 0, "port": "target_point"}, "to": {"part": 1, "port": "target"}},
        ],
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    out = tmp_path / "g.json"
    q = "How far is Belem Tower from Hotel Astra and in which direction?"
    assert main(["compose", "--question", q, "--plan", str(plan_path), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "suggested templates:" in printed and "similar examples:" in printed
    g = parse_graph(out.read_bytes())
    assert g.question == q and validate(g).well_formed

    plan["wiring"].append({"from": {"part": 1, "port": "origin_point"}, "to": {"part": 0, "port": "origin"}})
    plan_path.write_text(json.dumps(plan))
    assert main(["compose", "--question", q, "--plan", str(plan_path)]) == 1
    assert "CompositionIllFormed" in capsys.readouterr().err


def test_pairs(tmp_path, capsys, hotel):
    assert main(["pairs", hotel, "--seed", "1", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    bundles = sorted(tmp_path.glob("hotel_coffee.g*.json"))
    assert bundles
    for path in bundles:
        b = json.loads(path.read_text())
        assert b["seed"] == 1 and b["target"] in b["violated"]


def test_pairs_rejects_ill_formed_input(tmp_path, capsys):
    assert main(["pairs", str(corpus_files("g3_")[0]), "--out", str(tmp_path)]) == 1
    capsys.readouterr()
