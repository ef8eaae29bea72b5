from fractions import Fraction

import json
import pytest

from qgames.arena import Edge, VertexId
from qgames.cli import main, parse_arena, serialize_arena, truncate_generator
from qgames.strategies import (FIRST_EDGE, StepCounterPlusK, StepCounterTable,
                               parse_strategy, serialize_strategy)
from qgames.zoo import make

F = Fraction
V = VertexId

POS_ARENA = """\
arena pos
vertex a owner=1
vertex b owner=2
edge a b weight=1
edge b a weight=-1
edge b b weight=0
start a
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_arena_roundtrip():
    arena = parse_arena(POS_ARENA)
    assert arena.name == "pos"
    assert arena.owner(V("a")) == 1
    assert arena.start == V("a")
    text = serialize_arena(arena)
    again = parse_arena(text)
    assert serialize_arena(again) == text


@pytest.mark.parametrize("text,needle", [
    ("vortex a owner=1\nstart a\n", "line 1"),
    ("vertex a owner=3\nstart a\n", "owner must be 1 or 2"),
    ("vertex a owner=1\nvertex a owner=2\nstart a\n", "declared twice"),
    ("vertex a owner=1\nedge a a weight=0\n", "no start vertex"),
    ("vertex a owner=1\nedge a b weight=0\nstart a\n", "dangling"),
    ("vertex a owner=1\nvertex b owner=2\nedge a b weight=0\nstart a\n",
     "blocking vertex b"),
])
def test_parse_arena_errors(text, needle):
    with pytest.raises(ValueError, match=needle):
        parse_arena(text)


def test_truncate_generator_seals_the_boundary():
    entry = make("a3")
    explicit = truncate_generator(entry.arena, entry.start, 5)
    boundary = [v for v in explicit.vertices
                if explicit.edges(v) == (Edge(v, F(0), v),)
                and not entry.arena.is_sink(v)]
    assert boundary
    text = serialize_arena(explicit)
    assert serialize_arena(parse_arena(text)) == text


def test_cli_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, "pos.txt", POS_ARENA)
    assert main(["validate", "--arena", path]) == 0
    out = capsys.readouterr().out
    assert "validate: ok" in out


def test_cli_validate_zoo_uri(capsys):
    assert main(["validate", "--arena", "zoo:bitarena", "--depth", "10"]) == 0


def test_cli_simulate_deterministic_csv(tmp_path):
    out1 = str(tmp_path / "r1.csv")
    out2 = str(tmp_path / "r2.csv")
    argv = ["simulate", "--arena", "zoo:bitarena", "--p1", "opposite",
            "--p2", "allzero", "--horizon", "20"]
    assert main(argv + ["--out", out1]) == 0
    assert main(argv + ["--out", out2]) == 0
    data = open(out1).read()
    assert data == open(out2).read()
    assert data.splitlines()[0] == "step,from,to,weight,tp,mp,mem1,mem2"
    assert len(data.splitlines()) == 21


def test_cli_defeat_verify_cycle(tmp_path, capsys):
    # a step-counter table on a3 that exits at its own pinned step loses
    # to the opponent entering exactly there
    t2, r0 = V("t", (2,)), V("r0")
    sc = StepCounterTable({(t2, 7): Edge(t2, F(2), r0)}, 8, FIRST_EDGE,
                          name="exit2")
    strat = _write(tmp_path, "exit2.strategy", serialize_strategy(sc))
    cert = str(tmp_path / "cert.json")
    assert main(["defeat", "--arena", "zoo:a3", "--strategy", strat,
                 "--out", cert]) == 0
    capsys.readouterr()

    assert main(["verify", "--arena", "zoo:a3", "--cert", cert,
                 "--p1", strat, "--p2", "p2_enter_2"]) == 0
    assert "accepted" in capsys.readouterr().out

    tampered = json.loads(open(cert).read())
    tampered["body"]["final_tp"] = "-5"
    bad = _write(tmp_path, "bad.json", json.dumps(tampered))
    assert main(["verify", "--arena", "zoo:a3", "--cert", bad,
                 "--p1", strat, "--p2", "p2_enter_2"]) == 1
    assert "refuted" in capsys.readouterr().out


def test_cli_defeat_rejects_wrong_strategy_class(tmp_path, capsys):
    strat = _write(tmp_path, "ml.strategy",
                   "strategy ml kind=memoryless\nmove t(0) -> e(0,1) weight=0\n")
    assert main(["defeat", "--arena", "zoo:a3", "--strategy", strat]) == 1
    assert "step-counter" in capsys.readouterr().err


def test_cli_synthesize_writes_a_strategy(tmp_path, capsys):
    path = _write(tmp_path, "pos.txt", POS_ARENA)
    out = str(tmp_path / "pos.strategy")
    assert main(["synthesize", "--arena", path, "--objective",
                 "tp:limsup:>=:0", "--m-max", "2", "--out", out]) == 0
    assert "certified: yes" in capsys.readouterr().out
    sigma = parse_strategy(open(out).read())
    assert isinstance(sigma, StepCounterPlusK)


def test_cli_synthesize_is_deterministic(tmp_path):
    path = _write(tmp_path, "pos.txt", POS_ARENA)
    outs = []
    for name in ("s1", "s2"):
        out = str(tmp_path / name)
        assert main(["synthesize", "--arena", path, "--objective",
                     "mp:limsup:>=:0", "--m-max", "2", "--out", out]) == 0
        outs.append(open(out).read())
    assert outs[0] == outs[1]


def test_cli_synthesize_rejects_strict_tp(tmp_path, capsys):
    path = _write(tmp_path, "pos.txt", POS_ARENA)
    assert main(["synthesize", "--arena", path, "--objective",
                 "tp:limsup:>:0"]) == 1
    assert "rewrite" in capsys.readouterr().err


def test_cli_zoo_list_and_export(tmp_path, capsys):
    assert main(["zoo", "list"]) == 0
    out = capsys.readouterr().out
    assert "bitarena" in out and "a4guarded" in out
    path = str(tmp_path / "a4.txt")
    assert main(["zoo", "export", "--arena", "zoo:a4", "--depth", "6",
                 "--out", path]) == 0
    text = open(path).read()
    assert serialize_arena(parse_arena(text)) == text


def test_cli_bench_prints_grid(capsys):
    assert main(["bench"]) == 0
    out = capsys.readouterr().out
    assert "zoo:bitarena" in out
    assert "width" in out.splitlines()[0]


def test_cli_error_paths(tmp_path, capsys, monkeypatch):
    assert main(["validate", "--arena", str(tmp_path / "missing.txt")]) == 1
    capsys.readouterr()
    monkeypatch.setenv("QG_NODE_CAP", "lots")
    assert main(["zoo", "list"]) == 1
    assert "QG_NODE_CAP" in capsys.readouterr().err
