from fractions import Fraction

import pytest

from qgames.arena import ArenaExplicit, Edge, MealyMemory, VertexId
from qgames.engine import (ColourStarvation, Divergence, EarlyExitNegative,
                           Inconclusive, KoenigBound, LevelSatisfaction,
                           RefutedBranch, SinkPayoff, certificate_from_json,
                           certificate_to_json, check_certificate,
                           explore_consistent, koenig_bound, play)
from qgames.objectives import OpenSub
from qgames.strategies import (FIRST_EDGE, FiniteMemory, Memoryless, Scripted,
                               StepCounterTable)

F = Fraction
V = VertexId


def E(src, w, dst):
    return Edge(src, F(w), dst)


A, B, C, S = V("a"), V("b"), V("c"), V("s")


def branch_arena():
    # P1 at a picks +1 to b; P2 at b returns via -1 or 0; s is a sink
    return ArenaExplicit(
        {A: 1, B: 2, S: 1},
        [E(A, 1, B), E(A, -2, S), E(B, -1, A), E(B, 0, A), E(S, 0, S)],
        A)


P1_UP = Memoryless({A: E(A, 1, B)})
P1_SINK = Memoryless({A: E(A, -2, S)})


def test_play_records_traces_and_csv():
    arena = branch_arena()
    p2 = Memoryless({B: E(B, -1, A)}, player=2)
    record = play(arena, A, P1_UP, p2, 5)
    assert [str(e.dst) for e in record.edges] == ["b", "a", "b", "a", "b"]
    assert record.tp_trace == [F(1), F(0), F(1), F(0), F(1)]
    assert record.final_tp == F(1)
    assert record.tp_at(0) == F(0)
    assert record.vertex_at(2) == A
    csv = record.to_csv()
    assert csv.splitlines()[0] == "step,from,to,weight,tp,mp,mem1,mem2"
    assert len(csv.splitlines()) == 6


def test_play_stops_at_sink():
    arena = branch_arena()
    p2 = Memoryless({B: E(B, 0, A)}, player=2)
    record = play(arena, A, P1_SINK, p2, 50)
    assert record.termination == "sink"
    assert record.final_tp == F(-2)
    assert len(record.edges) == 1


def test_play_rejects_non_edge():
    arena = branch_arena()
    bad = Memoryless({A: E(A, 7, B)})
    p2 = Memoryless({B: E(B, 0, A)}, player=2)
    with pytest.raises(ValueError):
        play(arena, A, bad, p2, 3)


def test_explore_consistent_widths():
    arena = branch_arena()
    tree = explore_consistent(arena, A, P1_UP, 4)
    # P2's two replies at b double the branch count every other level
    assert tree.level_widths == [1, 1, 2, 2, 4]
    assert tree.complete


def grow_arena():
    # P1 gains 1, P2 replies 0 or 1: the total payoff can only grow
    return ArenaExplicit(
        {A: 1, B: 2},
        [E(A, 1, B), E(B, 0, A), E(B, 1, A)], A)


def test_koenig_bound_tp_inf():
    arena = grow_arena()
    one = Memoryless({A: E(A, 1, B)})
    res = koenig_bound(arena, A, one, OpenSub("tp-inf", m=1, i=1), 10)
    assert isinstance(res, KoenigBound)
    assert res.level == 1
    # against the worst reply 0, TP reaches 2 at step 3
    res2 = koenig_bound(arena, A, one, OpenSub("tp-inf", m=2, i=1), 10)
    assert isinstance(res2, KoenigBound)
    assert res2.level == 3


def test_koenig_bound_refutes_capped_branch():
    arena = branch_arena()
    # P2 replying -1 forever keeps TP at most 1, so TP >= 2 never fires
    res = koenig_bound(arena, A, P1_UP, OpenSub("tp-inf", m=2, i=1), 30)
    assert isinstance(res, RefutedBranch)


def test_koenig_bound_inconclusive_on_depth():
    arena = grow_arena()
    one = Memoryless({A: E(A, 1, B)})
    res = koenig_bound(arena, A, one, OpenSub("tp-inf", m=50, i=1), 6)
    assert isinstance(res, Inconclusive)


def test_refuted_branch_requires_real_pumping():
    # P1 memoryless into a cycle whose running totals stay below the bar
    arena = ArenaExplicit(
        {A: 1, B: 2},
        [E(A, -1, B), E(B, 0, A), E(B, 1, A)], A)
    down = Memoryless({A: E(A, -1, B)})
    res = koenig_bound(arena, A, down, OpenSub("tp-inf", m=1, i=1), 30)
    assert isinstance(res, RefutedBranch)
    assert res.cycle_tp <= 0
    # but a zero cycle touching the bar is NOT refuted for tp-sup: the
    # step index alone delays satisfaction
    up = ArenaExplicit(
        {A: 1, B: 2},
        [E(A, 1, B), E(B, -1, A), E(B, 0, B)], A)
    sigma = Memoryless({A: E(A, 1, B)})
    res2 = koenig_bound(arena=up, v0=A, sigma=sigma,
                        open_sub=OpenSub("tp-sup", m=3), max_depth=10)
    assert isinstance(res2, KoenigBound)


def test_certificate_json_roundtrip_all_variants():
    certs = [
        SinkPayoff(F(-2), S, 1),
        EarlyExitNegative(F(-1), F(0), 9),
        KoenigBound(3, OpenSub("tp-sup", m=2)),
        KoenigBound(2, OpenSub("buchi", colour=F(1), i=2)),
        LevelSatisfaction([(1, 1), (2, 4)]),
        Divergence("decrease", [0, 2, 4], 6, decrease=F(1), elevation=F(1),
                   ceiling=F(0), cycle_from=0, round_states=["x", "x", "x"]),
        Divergence("stagnation", [0, 3], 6, ceiling=F(-1)),
        ColourStarvation(F(1), 4, 60),
    ]
    for cert in certs:
        again = certificate_from_json(certificate_to_json(cert))
        assert again == cert


def test_certificate_json_rejects_unknown_schema():
    with pytest.raises(ValueError):
        certificate_from_json('{"schema": "other/9", "variant": "SinkPayoff", "body": {}}')


def test_check_sink_payoff_and_tamper():
    arena = branch_arena()
    p2 = Memoryless({B: E(B, 0, A)}, player=2)
    cert = SinkPayoff(F(-2), S, 1)
    ctx = {"arena": arena, "v0": A, "sigma1": P1_SINK, "sigma2": p2}
    assert check_certificate(cert, ctx).ok
    assert not check_certificate(SinkPayoff(F(-1), S, 1), ctx).ok
    assert not check_certificate(SinkPayoff(F(-2), B, 1), ctx).ok


def test_check_divergence_decrease_with_ceiling():
    # P1 forced single edges: rounds a -> b -> a lose 1 and spike to +1
    arena = ArenaExplicit(
        {A: 1, B: 1},
        [E(A, 1, B), E(B, -2, A)], A)
    one = Memoryless(lambda ar, v: ar.edges(v)[0])
    p2 = Memoryless(lambda ar, v: ar.edges(v)[0], player=2)
    cert = Divergence("decrease", [0, 2, 4, 6], 8, decrease=F(1),
                      elevation=F(1), ceiling=F(1), cycle_from=0)
    ctx = {"arena": arena, "v0": A, "sigma1": one, "sigma2": p2}
    assert check_certificate(cert, ctx).ok
    # an absolute ceiling below the observed spike is refuted
    low = Divergence("decrease", [0, 2, 4, 6], 8, decrease=F(1),
                     elevation=F(1), ceiling=F(0), cycle_from=0)
    assert not check_certificate(low, ctx).ok
    # claiming a larger per-round decrease than observed is refuted
    greedy = Divergence("decrease", [0, 2, 4, 6], 8, decrease=F(2),
                        elevation=F(1), ceiling=F(1), cycle_from=0)
    assert not check_certificate(greedy, ctx).ok


def test_check_divergence_stagnation():
    arena = ArenaExplicit(
        {A: 1, B: 1},
        [E(A, -1, B), E(B, 0, A)], A)
    one = Memoryless(lambda ar, v: ar.edges(v)[0])
    p2 = Memoryless(lambda ar, v: ar.edges(v)[0], player=2)
    ctx = {"arena": arena, "v0": A, "sigma1": one, "sigma2": p2}
    cert = Divergence("stagnation", [2, 4, 6], 8, ceiling=F(-1))
    assert check_certificate(cert, ctx).ok
    # a non-negative ceiling is rejected outright
    bad = Divergence("stagnation", [2, 4, 6], 8, ceiling=F(0))
    assert not check_certificate(bad, ctx).ok


def test_check_colour_starvation():
    arena = ArenaExplicit(
        {A: 1, B: 1},
        [E(A, 1, B), E(B, 0, A)], A)
    one = Memoryless(lambda ar, v: ar.edges(v)[0])
    p2 = Memoryless(lambda ar, v: ar.edges(v)[0], player=2)
    ctx = {"arena": arena, "v0": A, "sigma1": one, "sigma2": p2}
    # colour 2 never occurs at all
    assert check_certificate(ColourStarvation(F(2), 0, 20), ctx).ok
    # colour 1 keeps occurring, so the claim is refuted
    assert not check_certificate(ColourStarvation(F(1), 2, 20), ctx).ok


def test_check_koenig_bound_reproduces():
    arena = grow_arena()
    one = Memoryless({A: E(A, 1, B)})
    sub = OpenSub("tp-inf", m=2, i=1)
    cert = koenig_bound(arena, A, one, sub, 10)
    assert isinstance(cert, KoenigBound)
    ctx = {"arena": arena, "v0": A, "sigma1": one}
    assert check_certificate(cert, ctx).ok
    tampered = KoenigBound(cert.level - 1, sub)
    assert not check_certificate(tampered, ctx).ok


def test_check_level_satisfaction():
    arena = grow_arena()
    one = Memoryless({A: E(A, 1, B)})
    ctx = {"arena": arena, "v0": A, "sigma1": one,
           "subs": lambda m: OpenSub("tp-inf", m=m, i=1)}
    good = LevelSatisfaction([(1, 1), (2, 3)])
    assert check_certificate(good, ctx).ok
    bad = LevelSatisfaction([(2, 2)])
    assert not check_certificate(bad, ctx).ok
