from fractions import Fraction

import pytest

from qgames.arena import (ArenaExplicit, Edge, History, MealyMemory, StepCounter,
                          VertexId, encodes_step_count, product)
from qgames.engine import play
from qgames.strategies import (ERROR, FIRST_EDGE, FiniteMemory, HorizonExceeded,
                               Memoryless, Scripted, StepCounterPlusK,
                               StepCounterTable, collapse_sc_fm, consistent,
                               parse_strategy, serialize_strategy)

F = Fraction
V = VertexId


def E(src, w, dst):
    return Edge(src, F(w), dst)


A, B, C = V("a"), V("b"), V("c")


def two_choice_arena():
    return ArenaExplicit(
        {A: 1, B: 2, C: 1},
        [E(A, 1, B), E(A, 0, C), E(B, -1, A), E(B, 0, A), E(C, 0, A)],
        A)


def test_memoryless_table_and_fallback():
    arena = two_choice_arena()
    sigma = Memoryless({A: E(A, 0, C)})
    assert sigma.choose(arena, A, 5, None).dst == C
    # vertices missing from the table are an error, not a silent fallback
    with pytest.raises(KeyError):
        sigma.choose(arena, C, 0, None)
    assert sigma.signature(0, None) == ()


def test_finite_memory_threads_state():
    arena = two_choice_arena()
    mealy = MealyMemory((0, 1), 0, lambda m, e: 1 - m)
    sigma = FiniteMemory(mealy, lambda ar, v, m: ar.edges(v)[m % len(ar.edges(v))])
    state = sigma.initial_state()
    first = sigma.choose(arena, A, 0, state)
    state = sigma.step_state(state, first)
    assert state == 1
    assert sigma.choose(arena, A, 1, state) != first


def test_step_counter_table_horizon_behaviour():
    arena = two_choice_arena()
    table = {(A, 0): E(A, 0, C), (A, 2): E(A, 1, B)}
    sigma = StepCounterTable(table, horizon=3, fallback=FIRST_EDGE)
    assert sigma.choose(arena, A, 0, None).dst == C
    assert sigma.choose(arena, A, 2, None).dst == B
    # past the horizon the fallback takes over
    assert sigma.choose(arena, A, 9, None) == arena.edges(A)[0]
    strict = StepCounterTable(table, horizon=3, fallback=ERROR)
    with pytest.raises(HorizonExceeded):
        strict.choose(arena, A, 9, None)


def test_step_counter_plus_k_bit_update():
    arena = two_choice_arena()
    flip = E(A, 1, B)
    table = {(A, 0, 0): E(A, 0, C), (A, 0, 1): flip}
    bitupd = {(0, 0, E(A, 0, C)): 1}
    sigma = StepCounterPlusK(2, table, 4, bitupd, FIRST_EDGE)
    state = sigma.initial_state()
    assert state == (0, 0)
    move = sigma.choose(arena, A, 0, state)
    state = sigma.step_state(state, move)
    assert state == (1, 1)
    # missing bit-update entries keep the mode
    state = sigma.step_state(state, E(C, 0, A))
    assert state == (2, 1)


def test_scripted_decide_and_signature():
    arena = two_choice_arena()
    sigma = Scripted("len_parity", lambda ar, h: ar.edges(h.to_vertex)[len(h) % 2],
                     step_determined=True)
    assert sigma.decide(arena, History(A)) == arena.edges(A)[0]
    assert sigma.signature(0, None) == ()
    free = Scripted("free", lambda ar, h: ar.edges(h.to_vertex)[0])
    assert free.signature(0, None) is None


def test_consistent_accepts_own_play_and_rejects_deviation():
    arena = two_choice_arena()
    sigma = Memoryless({A: E(A, 1, B)})
    p2 = Memoryless({B: E(B, -1, A)}, player=2)
    record = play(arena, A, sigma, p2, 6)
    assert consistent(arena, sigma, record.history())
    deviant = History(A, (E(A, 0, C),))
    assert not consistent(arena, sigma, deviant)


def _sc_encoding_arena():
    # strict alternation a -> b -> a encodes the step count mod nothing:
    # use the step-counter product to make lengths unique
    base = ArenaExplicit({A: 1, B: 2},
                         [E(A, 1, B), E(B, -1, A), E(B, 0, A)], A)
    return product(base, StepCounter())


def test_collapse_sc_to_memoryless_is_faithful():
    arena = _sc_encoding_arena()
    start = arena.start
    res = encodes_step_count(arena, start, 12)
    assert res.counterexample is None
    levels = res.levels

    table = {}
    for v, n in levels.items():
        if arena.owner(v) == 1:
            table[(v, n)] = arena.edges(v)[n % len(arena.edges(v))]
    sigma = StepCounterTable(table, 12, FIRST_EDGE)
    collapsed = collapse_sc_fm(arena, sigma, levels)
    assert isinstance(collapsed, Memoryless)
    p2 = Memoryless(lambda ar, v: ar.edges(v)[-1], player=2)
    r1 = play(arena, start, sigma, p2, 10)
    r2 = play(arena, start, collapsed, p2, 10)
    assert r1.edges == r2.edges


def test_collapse_sc_plus_k_is_faithful():
    arena = _sc_encoding_arena()
    start = arena.start
    levels = encodes_step_count(arena, start, 12).levels

    table = {}
    bitupd = {}
    for v, n in levels.items():
        es = arena.edges(v)
        if arena.owner(v) == 1:
            table[(v, n, 0)] = es[0]
            table[(v, n, 1)] = es[-1]
        for e in es:
            bitupd[(n, 0, e)] = 1 if e.weight < 0 else 0
            bitupd[(n, 1, e)] = 1
    sigma = StepCounterPlusK(2, table, 12, bitupd, FIRST_EDGE)
    collapsed = collapse_sc_fm(arena, sigma, levels)
    assert isinstance(collapsed, FiniteMemory)
    p2 = Memoryless(lambda ar, v: ar.edges(v)[0], player=2)
    r1 = play(arena, start, sigma, p2, 10)
    r2 = play(arena, start, collapsed, p2, 10)
    assert r1.edges == r2.edges


def test_collapse_rejects_other_kinds():
    arena = two_choice_arena()
    with pytest.raises(TypeError):
        collapse_sc_fm(arena, Memoryless({}), {})


def test_serialize_parse_memoryless_roundtrip():
    sigma = Memoryless({A: E(A, 1, B), C: E(C, 0, A)}, name="demo")
    text = serialize_strategy(sigma)
    back = parse_strategy(text)
    assert isinstance(back, Memoryless)
    assert back.table == sigma.table
    assert serialize_strategy(back) == text


def test_serialize_parse_sc_roundtrip():
    table = {(A, 0): E(A, 0, C), (A, 2): E(A, 1, B)}
    sigma = StepCounterTable(table, 5, FIRST_EDGE, name="sched")
    back = parse_strategy(serialize_strategy(sigma))
    assert isinstance(back, StepCounterTable)
    assert back.table == table and back.horizon == 5


def test_serialize_parse_sc_plus_k_roundtrip():
    table = {(A, 0, 0): E(A, 0, C), (A, 1, 1): E(A, 1, B)}
    bitupd = {(0, 0, E(A, 0, C)): 1, (1, 1, E(A, 1, B)): 0}
    sigma = StepCounterPlusK(2, table, 4, bitupd, FIRST_EDGE, name="bit")
    text = serialize_strategy(sigma)
    back = parse_strategy(text)
    assert isinstance(back, StepCounterPlusK)
    assert back.table == table
    assert back.bit_update == bitupd
    assert serialize_strategy(back) == text


def test_fm_files_are_rejected():
    mealy = MealyMemory((0,), 0, lambda m, e: 0)
    sigma = FiniteMemory(mealy, {(A, 0): E(A, 1, B)})
    text = serialize_strategy(sigma)
    with pytest.raises(ValueError):
        parse_strategy(text)


def test_parse_strategy_error_reporting():
    with pytest.raises(ValueError, match="missing 'strategy' header"):
        parse_strategy("move a -> b weight=1\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_strategy("strategy x kind=memoryless\nnonsense here\n")
