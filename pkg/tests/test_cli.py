from __future__ import annotations

import json

import pytest

from slicecount.automata import dump_automaton, load_automaton
from slicecount.cli import main
from slicecount.decomp import ArborealDecomposition, OliveTreeDecomposition
from slicecount.digraph import make_digraph
from slicecount.slices import SliceTerm

from corpus import corpus

GS = corpus()


@pytest.fixture(autouse=True)
def _isolated_budget(monkeypatch):
    # main() writes --budget into the environment; restore it after each test
    monkeypatch.setenv("SLICECOUNT_BUDGET", "")


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_count_three_cycle(tmp_path, capsys):
    g = write(tmp_path, "g3cycle.json", GS["three-cycle"].to_json())
    code, out, _ = run(capsys, "count", g, "--formula", "@cycle", "-k", "2", "-l", "3")
    assert code == 0 and out.strip() == "1"


def test_verify_bidirected_triangle(tmp_path, capsys):
    g = write(tmp_path, "bitriangle.json", GS["bidirected-triangle"].to_json())
    code, out, _ = run(capsys, "verify", g, "--formula", "@cycle", "-k", "2", "-l", "3")
    assert code == 0 and out.strip() == "pipeline=2 oracle=2 OK"


def test_count_huge_graph_needs_a_decomposition(tmp_path, capsys):
    g = write(tmp_path, "huge.json", make_digraph(9, [(i, i + 1) for i in range(1, 9)]).to_json())
    code, _, err = run(capsys, "count", g, "--formula", "true", "-k", "1")
    assert code == 3
    assert "supply --decomposition" in err and "size 9" in err and "cap 6" in err


def test_budget_flag_raises_a_cap(tmp_path, capsys):
    g = write(tmp_path, "p7.json", make_digraph(7, [(i, i + 1) for i in range(1, 7)]).to_json())
    code, _, _ = run(capsys, "count", g, "--formula", "true", "-k", "1")
    assert code == 3
    code, out, _ = run(capsys, "--budget", "dtw_vertices=7", "count", g, "--formula", "true", "-k", "1", "-l", "7")
    assert code == 0 and out.strip() == "1"


@pytest.mark.parametrize("argv", [
    [],
    ["count"],
    ["count", "g.json", "-k", "2"],
    ["count", "g.json", "--formula", "true", "-k", "0"],
    ["count", "g.json", "--formula", "true", "-k", "1", "-l", "lots"],
    ["automaton", "frobnicate", "a.txt"],
    ["compile", "true", "-c", "-1"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(capsys, *argv)
    assert code == 1 and "usage" in err


def test_invalid_inputs(tmp_path, capsys):
    g = write(tmp_path, "g.json", GS["path3"].to_json())
    assert run(capsys, "count", str(tmp_path / "missing.json"), "--formula", "true", "-k", "1")[0] == 2
    assert run(capsys, "count", g, "--formula", "(exists-v x (src x x))", "-k", "1")[0] == 2
    assert run(capsys, "count", g, "--formula", "(exists-v x (vlabel x zzz))", "-k", "1")[0] == 2
    bad = write(tmp_path, "bad.json", {"vertices": [{"id": "a", "label": "a"}], "edges": [{"id": "e", "source": "a", "target": "q"}]})
    assert run(capsys, "count", bad, "--formula", "true", "-k", "1")[0] == 2
    other = write(tmp_path, "other.json", {"something": 1})
    assert run(capsys, "count", g, "--formula", "true", "-k", "1", "--decomposition", other)[0] == 2
    code, _, _ = run(capsys, "compile", "(vlabel x a)")
    assert code == 2


def test_formula_from_file(tmp_path, capsys):
    g = write(tmp_path, "g.json", GS["bidirected-triangle"].to_json())
    f = tmp_path / "phi.mso"
    f.write_text("(and @strongly-connected (@union-paths 2))")
    code, out, _ = run(capsys, "count", g, "--formula", str(f), "-k", "2", "-l", "3")
    assert code == 0 and out.strip() == "5"


def test_json_mode_is_stable(tmp_path, capsys):
    g = write(tmp_path, "g.json", GS["two-cycle"].to_json())
    argv = ["--json", "verify", g, "--formula", "@cycle", "-k", "2"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    a, b = json.loads(first), json.loads(second)
    assert set(a) == {"result", "stats", "parameters"}
    assert a["result"] == {"pipeline": 1, "oracle": 1, "agree": True}
    assert {"states", "transitions", "seconds"} <= set(a["stats"])
    a["stats"].pop("seconds")
    b["stats"].pop("seconds")
    assert a == b


def test_decompose_and_convert_round_trip(tmp_path, capsys):
    g = write(tmp_path, "g.json", GS["three-cycle"].to_json())
    code, out, _ = run(capsys, "decompose", g, "--good")
    assert code == 0
    d = ArborealDecomposition.from_json(json.loads(out))
    dpath = write(tmp_path, "d.json", d.to_json())
    code, _, err = run(capsys, "decompose", g, "--width", "0")
    assert code == 2 and "minimum is 1" in err
    olive, unit = tmp_path / "o.json", tmp_path / "u.json"
    code, out, _ = run(capsys, "convert", g, dpath, "--olive-out", str(olive), "--unit-out", str(unit))
    assert code == 0
    dumped = json.loads(out)
    ot = OliveTreeDecomposition.from_json(json.loads(olive.read_text()))
    t = SliceTerm.load(str(unit))
    assert OliveTreeDecomposition.from_json(dumped["olive"]) == ot
    assert SliceTerm.from_json(dumped["unit"]) == t
    assert SliceTerm.from_json(t.to_json()) == t
    code, out, _ = run(capsys, "count", g, "--formula", "@cycle", "-k", "2", "--decomposition", str(olive))
    assert code == 0 and out.strip() == "1"


def test_compile_and_automaton_operations(tmp_path, capsys):
    edge, path = tmp_path / "edge.ta", tmp_path / "path.ta"
    assert run(capsys, "compile", "(exists-e y (= y y))", "-c", "1", "-o", str(edge))[0] == 0
    assert run(capsys, "compile", "(@union-paths 1)", "-c", "1", "-o", str(path))[0] == 0
    a = load_automaton(edge.read_text())
    assert dump_automaton(a) == edge.read_text()

    def count(p, depth=3):
        code, out, _ = run(capsys, "automaton", "count-depth", str(p), "--depth", str(depth))
        assert code == 0
        return int(out)

    both = tmp_path / "both.ta"
    both.write_text(run(capsys, "automaton", "intersect", str(edge), str(path))[1])
    assert 0 < count(both) < min(count(edge), count(path))
    # a language and its complement together hold every term of the depth
    totals = []
    for p in (edge, path):
        comp = tmp_path / (p.name + ".not")
        comp.write_text(run(capsys, "automaton", "complement", str(p))[1])
        totals.append(count(p) + count(comp))
    assert totals[0] == totals[1] > count(edge)
    assert run(capsys, "automaton", "intersect", str(edge))[0] == 1
    assert run(capsys, "automaton", "member", str(edge))[0] == 1
    assert run(capsys, "automaton", "count-depth", str(edge))[0] == 1


def test_compile_respects_the_transition_cap(capsys):
    code, _, err = run(capsys, "--budget", "transitions=5000", "compile", "@cycle", "-c", "1")
    assert code == 3 and "materialize" in err and "5001" in err


def test_membership_of_a_converted_term(tmp_path, capsys):
    g = write(tmp_path, "g.json", make_digraph(2, [(1, 2)]).to_json())
    d = write(tmp_path, "d.json", ArborealDecomposition.build({"": ["v2"], "1": ["v1"]}).to_json())
    unit = tmp_path / "u.json"
    assert run(capsys, "convert", g, d, "--unit-out", str(unit))[0] == 0
    for formula, verdict in [("(@union-paths 1)", "accepted"), ("(not (exists-e y (= y y)))", "rejected")]:
        ta = tmp_path / "a.ta"
        assert run(capsys, "compile", formula, "-c", "1", "-o", str(ta))[0] == 0
        code, out, _ = run(capsys, "automaton", "member", str(ta), "--term", str(unit))
        assert code == 0 and out.strip() == verdict
