"""Constructive opponent counterstrategies with checkable certificates.

Each routine targets a specific zoo family and a class of maximizer
strategies that provably cannot win there, builds the punishing opponent
explicitly, simulates the unique resulting play, and packages the
evidence as a certificate the engine can re-check independently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .arena import Arena, Edge, History, VertexId, V
from .engine import (Certificate, ColourStarvation, Divergence, EarlyExitNegative,
                     Inconclusive, PlayRecord, play, _fmt_mem)
from .strategies import (FiniteMemory, Memoryless, Scripted, StepCounterTable,
                         Strategy)
from .zoo import ZooEntry, a4_router, _edge_to, _first_edge


@dataclass
class DefeatResult:
    p2: Strategy
    certificate: Optional[Certificate]
    record: PlayRecord
    partial: bool = False
    notes: list[str] = field(default_factory=list)


def _require_incremental_fm(sigma: Strategy, what: str) -> None:
    if not isinstance(sigma, (FiniteMemory, Memoryless)):
        raise TypeError("%s needs a finite-memory strategy, got %s"
                        % (what, type(sigma).__name__))


def _replay_state(sigma: Strategy, h: History):
    state = sigma.initial_state()
    for e in h.edges:
        state = sigma.step_state(state, e)
    return state


def _fold_state(sigma: Strategy, state, edges) -> object:
    for e in edges:
        state = sigma.step_state(state, e)
    return state


def _state_count(sigma: Strategy) -> int:
    if isinstance(sigma, FiniteMemory):
        return len(sigma.mealy.states)
    return 1


def _closing_rounds(record: PlayRecord, starts: list[int]) -> Optional[int]:
    """Index into ``starts`` whose (vertex family, memory) signature equals
    the final boundary's, so the certified rounds close a cycle."""
    def sig(step: int):
        vertex = record.vertex_at(step)
        m1 = None if step == 0 else record.mem1_trace[step - 1]
        m2 = None if step == 0 else record.mem2_trace[step - 1]
        return (vertex.name, _fmt_mem(m1), _fmt_mem(m2))

    last = sig(starts[-1])
    for idx in range(len(starts) - 1):
        if sig(starts[idx]) == last:
            return idx
    return None


# ---------------------------------------------------------------------------
# Finite memory loses the repeated match game (A1' and A2)


def defeat_fm_match(sigma: Strategy, entry: ZooEntry, rounds: int = 24,
                    probe_cap: int = 256, descent_cap: int = 4096) -> DefeatResult:
    """Opponent beating any finite-memory responder on the repeated match
    families: track the responder's memory, precompute the largest number
    it can answer from that state, and owe one more."""
    _require_incremental_fm(sigma, "defeat_fm_match")
    if entry.name == "a1prime":
        return _defeat_a1prime(sigma, entry, rounds)
    if entry.name == "a2":
        return _defeat_a2(sigma, entry, rounds, probe_cap, descent_cap)
    raise ValueError("defeat_fm_match targets a1prime or a2, not %r" % entry.name)


def _defeat_a1prime(sigma: Strategy, entry: ZooEntry, rounds: int) -> DefeatResult:
    arena = entry.arena
    b = entry.params["b"]
    s, t = V("s"), V("t")
    capped = []

    def reply_weight(state_after_challenge) -> Fraction:
        return sigma.choose(arena, t, 0, state_after_challenge).weight

    def fn(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v != s:
            return _first_edge(ar, v)
        state = _replay_state(sigma, h)
        f = max(reply_weight(sigma.step_state(state, e)) for e in ar.edges(s))
        want = f + 1
        if want > b:
            capped.append(len(h))
            want = Fraction(b)
        return _edge_to_weight(ar, s, -want)

    p2 = Scripted("owe_one_more", fn, player=2)
    horizon = 2 * rounds
    record = play(arena, entry.start, sigma, p2, horizon)
    starts = [step for step in range(0, len(record.edges) + 1)
              if record.vertex_at(step) == s]
    return _finish_decrease(entry, sigma, p2, record, starts,
                            partial=bool(capped),
                            notes=(["truncation cap bound the response"] if capped else []))


def _edge_to_weight(arena: Arena, v: VertexId, weight: Fraction) -> Edge:
    for e in arena.edges(v):
        if e.weight == weight:
            return e
    raise AssertionError("no edge of weight %s at %s" % (weight, v))


def _finish_decrease(entry: ZooEntry, sigma: Strategy, p2: Strategy,
                     record: PlayRecord, starts: list[int], partial: bool,
                     notes: list[str]) -> DefeatResult:
    payoffs = [record.tp_at(bb) - record.tp_at(aa) for aa, bb in zip(starts, starts[1:])]
    if not payoffs or max(payoffs) > -1:
        notes = notes + ["a round failed to lose at least 1; no certificate"]
        return DefeatResult(p2, None, record, True, notes)
    elevation = max(
        max(record.tp_at(x) for x in range(aa, bb + 1)) - record.tp_at(aa)
        for aa, bb in zip(starts, starts[1:]))
    cf = _closing_rounds(record, starts)
    if cf is None:
        notes = notes + ["memory cycle did not close within the horizon"]
        return DefeatResult(p2, None, record, True, notes)
    cert = Divergence("decrease", starts, len(record.edges), decrease=Fraction(1),
                      elevation=elevation, cycle_from=cf)
    return DefeatResult(p2, cert, record, partial, notes)


def _defeat_a2(sigma: Strategy, entry: ZooEntry, rounds: int,
               probe_cap: int, descent_cap: int) -> DefeatResult:
    arena = entry.arena
    INF = None  # descent never exits within the cap

    def descent_length(i: int, m_b) -> Optional[int]:
        state = m_b
        k = 0
        while k < descent_cap:
            v = V("b", (i, k))
            move = sigma.choose(arena, v, 0, state)
            if move.dst.name == "a":
                return k
            state = sigma.step_state(state, move)
            k += 1
        return INF

    def probe(i: int, m0) -> int:
        """Challenge height j making this round lose: the responder either
        answers k < j or descends past the cap."""
        state = m0
        for j in range(1, probe_cap + 1):
            climb = Edge(V("a", (i, j - 1)), Fraction(1), V("a", (i, j)))
            state = sigma.step_state(state, climb) if j > 1 else \
                sigma.step_state(m0, climb)
            dive = Edge(V("a", (i, j)), Fraction(-2 * j), V("b", (i, 0)))
            k = descent_length(i, sigma.step_state(state, dive))
            if k is INF or k < j:
                return j
        raise RuntimeError("no losing challenge within the probe cap")

    # memoized per (i, formatted state) so the scripted opponent is pure
    targets: dict[tuple, int] = {}

    def fn(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name != "a":
            return _first_edge(ar, v)
        i, jj = v.params
        cut = len(h)
        while cut > 0 and not (h.edges[cut - 1].dst.name == "a"
                               and h.edges[cut - 1].dst.params[1] == 0):
            cut -= 1
        m0 = _replay_state(sigma, h.prefix(cut))
        key = (i, _fmt_mem(m0))
        if key not in targets:
            targets[key] = probe(i, m0)
        target = targets[key]
        climb = dive = None
        for e in ar.edges(v):
            if e.dst.name == "a":
                climb = e
            else:
                dive = e
        return climb if jj < target else dive

    p2 = Scripted("owe_one_more_a2", fn, player=2)
    horizon = max(64, rounds * 16)
    record = play(arena, entry.start, sigma, p2, horizon)
    starts = [step for step in range(0, len(record.edges) + 1)
              if record.vertex_at(step).name == "a" and record.vertex_at(step).params[1] == 0]
    if len(starts) >= 3 and starts[-1] - starts[-2] > 0:
        result = _finish_decrease(entry, sigma, p2, record, starts, False, [])
        if result.certificate is not None:
            return result
    # the responder descends forever: certify along the descent itself
    return _certify_endless_descent(sigma, p2, record)


def _certify_endless_descent(sigma: Strategy, p2: Strategy, record: PlayRecord
                             ) -> DefeatResult:
    tail = [step for step in range(len(record.edges) + 1)
            if record.vertex_at(step).name == "b"]
    runs = [step for step in tail if step + 8 <= len(record.edges)
            and all(record.vertex_at(x).name == "b" for x in range(step, step + 8))]
    if len(runs) < 3:
        return DefeatResult(p2, None, record, True,
                            ["no usable round or descent structure found"])
    # pick boundaries sharing the responder's memory state
    by_state: dict[str, list[int]] = {}
    for step in runs:
        m1 = None if step == 0 else record.mem1_trace[step - 1]
        by_state.setdefault(_fmt_mem(m1), []).append(step)
    best = max(by_state.values(), key=len)
    if len(best) < 2:
        return DefeatResult(p2, None, record, True,
                            ["descent memory state never repeats in the window"])
    starts = best
    cert = Divergence("decrease", starts, len(record.edges), decrease=Fraction(1),
                      elevation=Fraction(0), cycle_from=0)
    return DefeatResult(p2, cert, record, False,
                        ["responder never exits the descending chain"])


# ---------------------------------------------------------------------------
# Step counters lose on A3


def _require_step_counter(sigma: Strategy, what: str) -> None:
    if isinstance(sigma, StepCounterTable):
        return
    if isinstance(sigma, Scripted) and sigma.step_determined:
        return
    raise TypeError("%s needs a step-counter strategy (table or step-determined "
                    "script); %s decisions can differ across same-step histories"
                    % (what, type(sigma).__name__))


def defeat_sc_on_A3(sigma: Strategy, entry: ZooEntry, horizon: int = 400) -> Union[DefeatResult, Inconclusive]:
    """On A3 every history reaching the i-th decision vertex has length
    3i+1, so a step-counter strategy's decision there is fixed.  If it
    ever exits, enter exactly there (total -1); if it never exits within
    the horizon, enter at the first vertex and let it delay forever below
    0."""
    _require_step_counter(sigma, "defeat_sc_on_A3")
    if entry.name != "a3":
        raise ValueError("defeat_sc_on_A3 targets a3, not %r" % entry.name)
    arena = entry.arena
    probe = play(arena, entry.start, sigma, entry.strategy("p2_enter_0"), horizon)
    exit_index = None
    for e in probe.edges:
        if e.src.name == "t" and e.dst.name == "r0":
            exit_index = e.src.params[0]
            break
    if exit_index is not None:
        p2 = entry.strategy("p2_enter_%d" % exit_index)
        record = play(arena, entry.start, sigma, p2, horizon)
        if record.termination != "sink":
            return Inconclusive("horizon too small to absorb after entering at %d"
                                % exit_index, depth=horizon)
        cert = EarlyExitNegative(record.final_tp, Fraction(0), len(record.edges))
        return DefeatResult(p2, cert, record,
                            notes=["entered at index %d, the strategy's own exit step"
                                   % exit_index])
    if probe.termination == "sink":
        return Inconclusive("play absorbed without a decision-vertex exit", depth=horizon)
    starts = [step for step in range(len(probe.edges) + 1)
              if probe.vertex_at(step).name == "t"]
    if len(starts) < 2:
        return Inconclusive("horizon too small to cover any decision vertex",
                            depth=horizon)
    cert = Divergence("stagnation", starts, len(probe.edges), ceiling=Fraction(-1),
                      cycle_from=0)
    return DefeatResult(entry.strategy("p2_enter_0"), cert, probe,
                        notes=["no exit within the horizon; the play stays at -1"])


# ---------------------------------------------------------------------------
# Ramsey adversary on A4


class NoCliqueFound(Exception):
    def __init__(self, window: int, needed: int):
        super().__init__("no monochromatic index clique of size %d within window %d; "
                         "enlarge the window (existence is guaranteed only in the "
                         "infinite limit)" % (needed, window))
        self.window = window
        self.needed = needed


@dataclass
class AdversaryPlan:
    entry: int
    routing: list[int]
    rationale: dict


@dataclass
class RamseyLabel:
    exit_profile: tuple  # per-state: True iff the strategy exits
    gadget_update: tuple  # per-state: successor state index

    def __hash__(self):
        return hash((self.exit_profile, self.gadget_update))


def _gadget_edges(i: int, j: int) -> list[Edge]:
    """The expanded delay path from the i-th decision vertex stretched j
    rounds: one delay edge, j-1 climbs, then the 2j-step drop."""
    t_i = V("t", (i,))
    out = [Edge(t_i, Fraction(1), V("g", (i, 1)))]
    for c in range(1, j):
        out.append(Edge(V("g", (i, c)), Fraction(1), V("g", (i, c + 1))))
    out.append(Edge(V("g", (i, j)), Fraction(-1), V("dr", (i, j, 1))))
    for p in range(1, 2 * j - 1):
        out.append(Edge(V("dr", (i, j, p)), Fraction(-1), V("dr", (i, j, p + 1))))
    out.append(Edge(V("dr", (i, j, 2 * j - 1)), Fraction(0), V("t", (i + j,))))
    return out


def ramsey_adversary(sigma: Strategy, entry: ZooEntry, window: int = 2000,
                     horizon: int = 4000, max_cliques: int = 64
                     ) -> tuple[AdversaryPlan, DefeatResult]:
    """Defeat a finite-memory strategy on the delay-gadget arena.

    Pairs of decision indices are coloured by the strategy's exit profile
    at both endpoints plus its memory update along the stretched delay
    path between them.  On a monochromatic clique of size K+2 the memory
    at successive decision vertices follows one fixed map, so the
    strategy either exits within K delays (entering deep enough makes the
    total negative) or its memory cycles while every stretched delay
    loses at least 1.
    """
    _require_incremental_fm(sigma, "ramsey_adversary")
    if entry.name not in ("a4", "a4guarded"):
        raise ValueError("ramsey_adversary targets a4 or a4guarded, not %r" % entry.name)
    arena = entry.arena
    states = list(sigma.mealy.states) if isinstance(sigma, FiniteMemory) else [None]
    index = {m: n for n, m in enumerate(states)}
    K = len(states)
    size = K + 2

    exit_cache: dict[int, tuple] = {}
    update_cache: dict[tuple[int, int], tuple] = {}

    def exit_profile(i: int) -> tuple:
        if i not in exit_cache:
            t_i = V("t", (i,))
            exit_cache[i] = tuple(
                sigma.choose(arena, t_i, 3 * (i + 1), m).dst.name == "r0"
                for m in states)
        return exit_cache[i]

    def gadget_update(i: int, j: int) -> tuple:
        if (i, j) not in update_cache:
            edges = _gadget_edges(i, j)
            update_cache[(i, j)] = tuple(
                index[_fold_state(sigma, m, edges)] for m in states)
        return update_cache[(i, j)]

    def label(i: int, k: int) -> RamseyLabel:
        return RamseyLabel(exit_profile(i) + exit_profile(k), gadget_update(i, k - i))

    lo, hi = K, K + window

    # cheap pre-pass: an entry index where the strategy exits at once
    # already loses -i-1; no clique machinery needed
    for i in range(lo, min(hi, lo + 256) + 1):
        state = _entry_state(sigma, entry, i)
        if exit_profile(i)[index[state]]:
            p2 = a4_router(i, [1])
            record = play(arena, entry.start, sigma, p2, horizon)
            if record.termination != "sink" or not record.final_tp < 0:
                continue
            cert = EarlyExitNegative(record.final_tp, Fraction(0), len(record.edges))
            plan = AdversaryPlan(i, [i],
                                 rationale={"window": window, "states": K,
                                            "label": "entry exit"})
            return plan, DefeatResult(p2, cert, record,
                                      notes=["exits immediately when entered at %d" % i])

    failures: list[str] = []
    failed_first: dict[int, int] = {}
    for clique in _cliques(lo, hi, size, label, max_cliques):
        if failed_first.get(clique[0], 0) >= 2:
            continue
        # independent re-verification of monochromaticity
        labels = {label(a, bb) for a, bb in itertools.combinations(clique, 2)}
        assert len(labels) == 1, "clique search returned a non-monochromatic set"
        result = _run_plan(sigma, entry, clique, states, index,
                           exit_profile, gadget_update, horizon)
        if result is not None:
            plan = AdversaryPlan(clique[0], list(clique),
                                 rationale={"window": window, "states": K,
                                            "label": next(iter(labels))})
            return plan, result
        failures.append("clique %r did not certify" % (clique,))
        failed_first[clique[0]] = failed_first.get(clique[0], 0) + 1
    raise NoCliqueFound(window, size)


def _cliques(lo: int, hi: int, size: int, label, max_cliques: int):
    """Lexicographically ordered monochromatic cliques with gaps >= 2."""
    emitted = 0

    def extend(chosen: list[int], colour):
        nonlocal emitted
        if emitted >= max_cliques:
            return
        if len(chosen) == size:
            emitted += 1
            yield tuple(chosen)
            return
        nxt_lo = lo if not chosen else chosen[-1] + 2
        for cand in range(nxt_lo, hi + 1):
            if colour is None:
                if len(chosen) == 0:
                    yield from extend([cand], None)
                else:
                    yield from extend(chosen + [cand], label(chosen[0], cand))
                continue
            if all(label(c, cand) == colour for c in chosen):
                yield from extend(chosen + [cand], colour)
            if emitted >= max_cliques:
                return

    yield from extend([], None)


def _run_plan(sigma: Strategy, entry: ZooEntry, clique: tuple, states, index,
              exit_profile, gadget_update, horizon) -> Optional[DefeatResult]:
    arena = entry.arena
    gaps = [b - a for a, b in zip(clique, clique[1:])]
    # predicted memory trajectory at successive decision vertices
    start_state = _entry_state(sigma, entry, clique[0])
    m = index[start_state]
    exits_at = None
    traj = [m]
    f = exit_profile(clique[0])
    delta = gadget_update(clique[0], clique[1] - clique[0])
    for n in range(len(clique)):
        if f[traj[n]]:
            exits_at = n
            break
        if n + 1 < len(clique):
            traj.append(delta[traj[n]])

    if exits_at is not None:
        p2 = a4_router(clique[0], gaps[:max(exits_at, 1)])
        record = play(arena, entry.start, sigma, p2, horizon)
        if record.termination != "sink":
            return None
        expected = Fraction(-clique[0] + exits_at - 1)
        if record.final_tp != expected or not record.final_tp < 0:
            return None
        cert = EarlyExitNegative(record.final_tp, Fraction(0), len(record.edges))
        return DefeatResult(p2, cert, record,
                            notes=["exited after %d delays from entry %d"
                                   % (exits_at, clique[0])])

    # no exit on the clique: the memory trajectory repeats; cycle the gaps
    first, repeat = None, None
    for n, mn in enumerate(traj):
        if traj.index(mn) < n:
            first, repeat = traj.index(mn), n
            break
    cycle_from = first if first is not None else 0
    p2 = a4_router(clique[0], gaps, cycle_from=cycle_from)
    record = play(arena, entry.start, sigma, p2, horizon)
    if record.termination == "sink":
        # the strategy exited once the cycled gaps left the clique; a
        # negative total still defeats it, otherwise try another clique
        if record.final_tp < 0:
            cert = EarlyExitNegative(record.final_tp, Fraction(0),
                                     len(record.edges))
            return DefeatResult(p2, cert, record,
                                notes=["late exit beyond the clique from entry %d"
                                       % clique[0]])
        return None
    starts = [step for step in range(len(record.edges) + 1)
              if record.vertex_at(step).name == "t"]
    if len(starts) < 3:
        return None
    payoffs = [record.tp_at(bb) - record.tp_at(aa) for aa, bb in zip(starts, starts[1:])]
    if max(payoffs) > -1:
        return None
    elevation = max(
        max(record.tp_at(x) for x in range(aa, bb + 1)) - record.tp_at(aa)
        for aa, bb in zip(starts, starts[1:]))
    cf = _closing_rounds(record, starts)
    if cf is None:
        return None
    cert = Divergence("decrease", starts, len(record.edges), decrease=Fraction(1),
                      elevation=elevation, cycle_from=cf)
    # monochromatic-cycle soundness: the predicted round map must match
    # the simulated memory trace at every certified boundary
    for n, step in enumerate(starts[:len(traj)]):
        simulated = None if step == 0 else record.mem1_trace[step - 1]
        if simulated != states[traj[n]]:
            return None
    return DefeatResult(p2, cert, record,
                        notes=["all-delay memory cycle from round %d" % cycle_from])


def _entry_state(sigma: Strategy, entry: ZooEntry, ell0: int):
    """The strategy's memory on arrival at the ell0-th decision vertex."""
    arena = entry.arena
    state = sigma.initial_state()
    v = entry.start
    while True:
        if v.name == "t":
            return state
        if v.name == "s":
            (i,) = v.params
            e = _edge_to(arena, v, "s") if 0 <= i < ell0 else \
                (_first_edge(arena, v) if i < 0 else _edge_to(arena, v, "d"))
        else:
            e = _first_edge(arena, v)
        state = sigma.step_state(state, e)
        v = e.dst


# ---------------------------------------------------------------------------
# Step counters lose the two-colour objective on BuchiB


def defeat_sc_buchi(sigma: Strategy, entry: ZooEntry, horizon: int = 600
                    ) -> Union[DefeatResult, Inconclusive]:
    """Steer every arrival at the decision vertex into one of the
    strategy's exit steps (the loop colour starves), or past the finitely
    many exit steps (the exit colour starves)."""
    _require_step_counter(sigma, "defeat_sc_buchi")
    if entry.name != "buchib":
        raise ValueError("defeat_sc_buchi targets buchib, not %r" % entry.name)
    arena = entry.arena
    b = entry.extras["truncation"]
    v = V("v", ())

    def choice_at(s: int) -> Edge:
        if isinstance(sigma, Scripted):
            # any same-length history gives the same move; probe with loops
            loop = next(e for e in arena.edges(v) if e.dst == v)
            return sigma.decide(arena, History(v, (loop,) * s))
        return sigma.choose(arena, v, s, None)

    exit_steps = {s for s in range(horizon + 1) if choice_at(s).dst.name == "u"}

    blocked: list[int] = []

    def pad_length(step_at_u: int) -> int:
        for n in range(1, b + 1):
            if step_at_u + n in exit_steps:
                return n
        if not any(s > step_at_u for s in exit_steps):
            return 1  # exits exhausted: any padding works
        blocked.append(step_at_u)
        return 1

    def fn(ar: Arena, h: History) -> Edge:
        w = h.to_vertex
        if w.name != "u":
            return _first_edge(ar, w)
        n = pad_length(len(h))
        for e in ar.edges(w):
            if n == 1 and e.dst.name == "v":
                return e
            if e.dst.name == "w" and e.dst.params[0] == n:
                return e
        raise AssertionError("no padding of length %d" % n)

    p2 = Scripted("pad_into_exits", fn, player=2)
    record = play(arena, entry.start, sigma, p2, horizon)
    loop_steps = [i for i, e in enumerate(record.edges) if e.src == v and e.dst == v]
    exit_uses = [i for i, e in enumerate(record.edges) if e.src == v and e.dst.name == "u"]
    if blocked:
        return Inconclusive("cannot steer into an exit from step %d within padding %d"
                            % (blocked[0], b), depth=blocked[0])
    if not loop_steps or (exit_uses and loop_steps[-1] < exit_uses[0]):
        after = 0 if not loop_steps else loop_steps[-1] + 1
        cert = ColourStarvation(Fraction(1), after, len(record.edges))
        return DefeatResult(p2, cert, record,
                            notes=["every arrival hits an exit step"])
    if exit_uses and loop_steps and exit_uses[-1] < loop_steps[-1]:
        last_zero = max(i for i, e in enumerate(record.edges) if e.weight == 0)
        cert = ColourStarvation(Fraction(0), last_zero + 1, len(record.edges))
        return DefeatResult(p2, cert, record,
                            notes=["exit steps exhausted; the loop colour remains"])
    return Inconclusive("both colours keep occurring within the horizon",
                        depth=len(record.edges))


__all__ = [
    "AdversaryPlan", "DefeatResult", "NoCliqueFound", "RamseyLabel",
    "defeat_fm_match", "defeat_sc_buchi", "defeat_sc_on_A3", "ramsey_adversary",
]
