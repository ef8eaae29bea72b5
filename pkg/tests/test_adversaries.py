from fractions import Fraction

import pytest

from qgames.adversaries import (AdversaryPlan, DefeatResult, NoCliqueFound,
                                defeat_fm_match, defeat_sc_buchi,
                                defeat_sc_on_A3, ramsey_adversary)
from qgames.arena import MealyMemory, VertexId
from qgames.engine import (ColourStarvation, Divergence, EarlyExitNegative,
                           Inconclusive, check_certificate)
from qgames.strategies import FiniteMemory, Memoryless, Scripted
from qgames.zoo import make

F = Fraction
V = VertexId


def _pick_weight(w):
    def choose(ar, v):
        for e in ar.edges(v):
            if e.weight == F(w):
                return e
        return ar.edges(v)[0]

    return choose


def _ctx(entry, result):
    return {"arena": entry.arena, "v0": entry.start,
            "sigma1": None, "sigma2": result.p2}


def test_defeat_memoryless_always_three_on_a1prime():
    entry = make("a1prime", b=8)
    sigma = Memoryless(_pick_weight(3), name="always3")
    result = defeat_fm_match(sigma, entry)
    assert not result.partial
    assert isinstance(result.certificate, Divergence)
    assert result.certificate.mode == "decrease"
    # the opponent owes one more than the fixed reply
    assert result.record.edges[0].weight == F(-4)
    ctx = _ctx(entry, result)
    ctx["sigma1"] = sigma
    assert check_certificate(result.certificate, ctx).ok


def test_defeat_two_state_alternator_on_a1prime():
    entry = make("a1prime", b=8)
    mealy = MealyMemory((0, 1), 0,
                        lambda m, e: 1 - m if e.src == V("t") else m)

    def decide(ar, v, m):
        if v != V("t"):
            return ar.edges(v)[0]
        return _pick_weight(1 if m == 0 else 5)(ar, v)

    sigma = FiniteMemory(mealy, decide, name="alternator")
    result = defeat_fm_match(sigma, entry)
    assert isinstance(result.certificate, Divergence)
    # challenges track the state-dependent replies 1 and 5
    challenges = [e.weight for e in result.record.edges if e.src == V("s")]
    assert challenges[:4] == [F(-2), F(-6), F(-2), F(-6)]
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(result.certificate, ctx).ok


def test_defeat_fm_match_truncation_cap_is_partial():
    entry = make("a1prime", b=8)
    sigma = Memoryless(_pick_weight(8), name="always_top")
    result = defeat_fm_match(sigma, entry)
    assert result.partial
    assert result.certificate is None
    assert any("cap" in n or "failed" in n for n in result.notes)


def test_defeat_fm_match_guards():
    entry = make("a1prime")
    with pytest.raises(TypeError):
        defeat_fm_match(Scripted("s", lambda ar, h: ar.edges(h.to_vertex)[0]),
                        entry)
    with pytest.raises(ValueError):
        defeat_fm_match(Memoryless(lambda ar, v: ar.edges(v)[0]), make("a3"))


def test_defeat_fm_match_on_a2():
    entry = make("a2")
    sigma = Memoryless(lambda ar, v: ar.edges(v)[0], name="first")
    result = defeat_fm_match(sigma, entry)
    assert result.certificate is not None
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(result.certificate, ctx).ok


def _exit_from(index):
    def fn(ar, h):
        v = h.to_vertex
        if v.name != "t":
            return ar.edges(v)[0]
        for e in ar.edges(v):
            if (e.dst.name == "r0") == (v.params[0] >= index):
                return e
        raise AssertionError

    return Scripted("exit_from_%d" % index, fn, step_determined=True)


def test_defeat_sc_on_a3_enters_at_the_exit_step():
    entry = make("a3")
    result = defeat_sc_on_A3(_exit_from(2), entry)
    assert isinstance(result, DefeatResult)
    cert = result.certificate
    assert isinstance(cert, EarlyExitNegative)
    assert cert.final_tp == F(-1)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": _exit_from(2), "sigma2": result.p2}
    assert check_certificate(cert, ctx).ok


def test_defeat_sc_on_a3_never_exit_stagnates():
    entry = make("a3")

    def delay(ar, h):
        v = h.to_vertex
        if v.name != "t":
            return ar.edges(v)[0]
        for e in ar.edges(v):
            if e.dst.name == "e":
                return e
        raise AssertionError

    sigma = Scripted("never_exit", delay, step_determined=True)
    result = defeat_sc_on_A3(sigma, entry)
    assert isinstance(result, DefeatResult)
    cert = result.certificate
    assert isinstance(cert, Divergence)
    assert cert.mode == "stagnation" and cert.ceiling == F(-1)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(cert, ctx).ok


def test_defeat_sc_on_a3_rejects_history_dependent_strategies():
    entry = make("a3")
    with pytest.raises(TypeError):
        defeat_sc_on_A3(entry.strategy("delay_twice_exit"), entry)
    with pytest.raises(TypeError):
        defeat_sc_on_A3(Scripted("free", lambda ar, h: ar.edges(h.to_vertex)[0]),
                        entry)


def test_ramsey_defeats_always_delay():
    entry = make("a4")
    sigma = entry.strategy("always_delay")
    plan, result = ramsey_adversary(sigma, entry)
    assert isinstance(plan, AdversaryPlan)
    assert isinstance(result.certificate, Divergence)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(result.certificate, ctx).ok


def test_ramsey_defeats_delay_twice_exit():
    entry = make("a4")
    sigma = entry.strategy("delay_twice_exit")
    plan, result = ramsey_adversary(sigma, entry)
    cert = result.certificate
    assert isinstance(cert, EarlyExitNegative)
    # entering at depth ell costs -2(ell+1); two stretched delays and the
    # final exit recover at most 2 + (ell') + 1 short of the debt
    assert cert.final_tp == F(-plan.entry + 1)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(cert, ctx).ok


def test_ramsey_guards_and_no_clique():
    entry = make("a4")
    with pytest.raises(TypeError):
        ramsey_adversary(entry.strategy("adaptive"), entry)
    with pytest.raises(NoCliqueFound) as exc:
        ramsey_adversary(entry.strategy("always_delay"), entry, window=1)
    assert exc.value.window == 1
    assert exc.value.needed == 3


def test_defeat_sc_buchi_starves_the_loop_colour():
    entry = make("buchib", b=6)

    def always_exit(ar, h):
        v = h.to_vertex
        if v.name != "v":
            return ar.edges(v)[0]
        for e in ar.edges(v):
            if e.dst.name == "u":
                return e
        raise AssertionError

    sigma = Scripted("always_exit", always_exit, step_determined=True)
    result = defeat_sc_buchi(sigma, entry)
    assert isinstance(result, DefeatResult)
    cert = result.certificate
    assert isinstance(cert, ColourStarvation)
    assert cert.colour == F(1)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(cert, ctx).ok


def test_defeat_sc_buchi_starves_the_exit_colour():
    entry = make("buchib", b=6)

    def exit_once(ar, h):
        v = h.to_vertex
        if v.name != "v":
            return ar.edges(v)[0]
        want = "u" if len(h) == 0 else "v"
        for e in ar.edges(v):
            if e.dst.name == want:
                return e
        raise AssertionError

    sigma = Scripted("exit_once", exit_once, step_determined=True)
    result = defeat_sc_buchi(sigma, entry)
    assert isinstance(result, DefeatResult)
    cert = result.certificate
    assert isinstance(cert, ColourStarvation)
    assert cert.colour == F(0)
    ctx = {"arena": entry.arena, "v0": entry.start,
           "sigma1": sigma, "sigma2": result.p2}
    assert check_certificate(cert, ctx).ok


def test_defeat_sc_buchi_guards():
    entry = make("buchib")
    with pytest.raises(TypeError):
        defeat_sc_buchi(entry.strategy("alternating"), entry)
    with pytest.raises(ValueError):
        defeat_sc_buchi(Scripted("x", lambda ar, h: ar.edges(h.to_vertex)[0],
                                 step_determined=True), make("a3"))
