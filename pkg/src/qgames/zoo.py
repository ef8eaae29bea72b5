"""Parametric arena families with their scripted strategies and regions.

Each entry bundles a lazily generated arena, the closed-form strategies
the analysis of that arena relies on, and (where relevant) a scripted
winning-region predicate.  Entries are addressed by ``zoo:<name>?k=v``
URIs on the command line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .arena import (Arena, ArenaGenerator, Edge, History, MealyMemory,
                    VertexId, P1, P2, V)
from .strategies import FiniteMemory, Memoryless, Scripted, Strategy


def E(src: VertexId, w, dst: VertexId) -> Edge:
    return Edge(src, Fraction(w), dst)


@dataclass
class ZooEntry:
    name: str
    params: dict
    arena: Arena
    start: VertexId
    note: str
    strategies: dict[str, Strategy] = field(default_factory=dict)
    strategy_factories: dict[str, Callable[[int], Strategy]] = field(default_factory=dict)
    wprime: Optional[Callable[[VertexId, Fraction], bool]] = None
    extras: dict = field(default_factory=dict)

    def strategy(self, name: str) -> Strategy:
        if name in self.strategies:
            return self.strategies[name]
        for prefix, factory in self.strategy_factories.items():
            if name.startswith(prefix):
                suffix = name[len(prefix):]
                try:
                    arg = int(suffix)
                except ValueError:
                    continue
                return factory(arg)
        raise KeyError("entry %s has no strategy %r (have: %s)"
                       % (self.name, name, ", ".join(sorted(self.strategies))))


def _first_edge(arena: Arena, v: VertexId) -> Edge:
    return arena.edges(v)[0]


def _edge_to(arena: Arena, v: VertexId, dst_name: str) -> Edge:
    for e in arena.edges(v):
        if e.dst.name == dst_name:
            return e
    raise KeyError("no edge from %s to a %r vertex" % (v, dst_name))


# ---------------------------------------------------------------------------
# A1 and A1': one-shot and repeated match-the-number games (truncated)


def _make_a1(b: int = 8, repeated: bool = False) -> ZooEntry:
    if b < 1:
        raise ValueError("truncation must be >= 1")
    s, t, q = V("s"), V("t"), V("q")
    back = s if repeated else q

    def expand(v: VertexId):
        if v == s:
            return P2, tuple(E(s, -i, t) for i in range(1, b + 1))
        if v == t:
            return P1, tuple(E(t, i, back) for i in range(0, b + 1))
        if v == q:
            return P1, (E(q, 0, q),)
        raise KeyError(v)

    name = "a1prime" if repeated else "a1"
    arena = ArenaGenerator(s, expand, name=name)

    def match_plus_one(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v != t:
            return _first_edge(ar, v)
        challenge = -h.edges[-1].weight  # P2 just played -i
        reply = min(int(challenge) + 1, b)
        for e in ar.edges(t):
            if e.weight == reply:
                return e
        raise AssertionError("missing reply edge %d" % reply)

    note = ("one challenge-response round (repeated when primed): the opponent "
            "owes -i, the responder answers +j; every finite-memory responder "
            "tops out at some bound and loses to -bound-1. Truncated to "
            "challenges 1..%d." % b)
    return ZooEntry(name, {"b": b}, arena, s, note,
                    strategies={"match_plus_one": Scripted("match_plus_one", match_plus_one)},
                    extras={"sink": None if repeated else q, "truncation": b})


# ---------------------------------------------------------------------------
# A2: acyclic finitely branching unfolding of the repeated match game


def _make_a2() -> ZooEntry:
    def expand(v: VertexId):
        i, j = v.params
        if v.name == "a":  # P2 climbing chain, +1 per step
            return P2, (E(v, 1, V("a", (i, j + 1))), E(v, -2 * j, V("b", (i, 0))))
        if v.name == "b":  # P1 descending chain, -1 per step
            return P1, (E(v, -1, V("b", (i, j + 1))), E(v, 2 * j, V("a", (i + 1, 0))))
        raise KeyError(v)

    start = V("a", (0, 0))
    arena = ArenaGenerator(start, expand, name="a2")

    def match_plus_one(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name != "b":
            return _first_edge(ar, v)
        k = v.params[1]
        challenge = None
        for e in reversed(h.edges):
            if e.dst.name == "b" and e.dst.params[1] == 0 and e.src.name == "a":
                challenge = e.src.params[1]  # P2 descended from a(i, j)
                break
        if challenge is None:
            challenge = k  # suffix start inside the chain: exit now
        climb, exit_edge = None, None
        for e in ar.edges(v):
            if e.dst.name == "b":
                climb = e
            else:
                exit_edge = e
        return exit_edge if k >= challenge + 1 else climb

    note = ("acyclic, finitely branching round game: the opponent climbs j "
            "unit steps then drops 2j, the responder descends k unit steps "
            "then regains 2k; answering k = j+1 nets +1 per round, so the "
            "running mean is positive at every round boundary.")
    return ZooEntry("a2", {}, arena, start, note,
                    strategies={"match_plus_one": Scripted("match_plus_one", match_plus_one)},
                    strategy_factories={"p2_pick_": _a2_p2_factory(arena)})


def _a2_p2_factory(arena: Arena):
    def factory(j: int) -> Strategy:
        def fn(ar: Arena, h: History) -> Edge:
            v = h.to_vertex
            if v.name != "a":
                return _first_edge(ar, v)
            jj = v.params[1]
            climb, dive = None, None
            for e in ar.edges(v):
                if e.dst.name == "a":
                    climb = e
                else:
                    dive = e
            return climb if jj < j else dive

        return Scripted("p2_pick_%d" % j, fn, player=2)

    return factory


# ---------------------------------------------------------------------------
# A3: the step-counter defeater


def _a3_expand(v: VertexId):
    if v.name == "s":
        (i,) = v.params
        descent_to = V("t", (0,)) if i == 0 else V("d", (i, 1))
        return P2, (E(v, 1, V("s", (i + 1,))), E(v, -1, descent_to))
    if v.name == "d":  # descent intermediates, 2i+1 weight -1 edges total
        i, p = v.params
        nxt = V("t", (i,)) if p == 2 * i else V("d", (i, p + 1))
        return P2, (E(v, -1, nxt),)
    if v.name == "t":
        (i,) = v.params
        return P1, (E(v, 0, V("e", (i, 1))), E(v, i, V("r0", ())))
    if v.name == "e":  # delay intermediates, 3 weight-0 edges per delay
        i, p = v.params
        nxt = V("t", (i + 1,)) if p == 2 else V("e", (i, p + 1))
        return P1, (E(v, 0, nxt),)
    if v.name == "r0":
        return P1, (E(v, 0, v),)
    raise KeyError(v)


def _make_a3() -> ZooEntry:
    start = V("s", (0,))
    arena = ArenaGenerator(start, _a3_expand, name="a3")

    note = ("top row of +1 steps with -1 descents of length 2i+1, so every "
            "entry lands at the i-th decision vertex with total exactly "
            "-i-1; three-step weight-0 delays link decision vertices; the "
            "exit from the j-th one regains +j. Delaying twice then exiting "
            "always banks at least +1, but a pure step-counter's decision at "
            "each vertex is pinned to one step and can be entered against.")
    entry = ZooEntry("a3", {}, arena, start, note,
                     strategies={"delay_twice_exit": delay_twice_exit_fm("e")},
                     strategy_factories={"p2_enter_": _descend_at_factory(arena)})
    return entry


def delay_twice_exit_fm(delay_dst_name: str) -> FiniteMemory:
    """Three-state strategy: delay at the first two decision vertices seen,
    exit at the third.  The state counts taken delays, capped at 2."""

    def update(m, e: Edge):
        if e.src.name == "t" and e.dst.name == delay_dst_name:
            return min(m + 1, 2)
        return m

    def decide(ar: Arena, v: VertexId, m):
        if v.name != "t":
            return _first_edge(ar, v)
        if m == 2:
            return _edge_to(ar, v, "r0")
        return _edge_to(ar, v, delay_dst_name)

    return FiniteMemory(MealyMemory((0, 1, 2), 0, update), decide,
                        name="delay_twice_exit")


def _descend_at_factory(arena: Arena):
    def factory(i: int) -> Strategy:
        def fn(ar: Arena, h: History) -> Edge:
            v = h.to_vertex
            if v.name != "s":
                return _first_edge(ar, v)
            (j,) = v.params
            advance, descend = None, None
            for e in ar.edges(v):
                if e.dst.name == "s":
                    advance = e
                else:
                    descend = e
            return advance if j < i else descend

        return Scripted("p2_enter_%d" % i, fn, player=2)

    return factory


# ---------------------------------------------------------------------------
# A4: the delay-gadget arena defeating finite memory plus a step counter


def _a4_expand(v: VertexId):
    if v.name == "s":
        (i,) = v.params
        if i < 0:  # guard vertex of the liminf variant
            return P2, (E(v, 1, V("s", (0,))),)
        return P2, (E(v, -1, V("d", (i, 1))), E(v, 0, V("s", (i + 1,))))
    if v.name == "d":  # entry descent: 2i+3 edges, total -2(i+1)
        i, p = v.params
        if p == 2 * i + 2:
            return P2, (E(v, 0, V("t", (i,))),)
        return P2, (E(v, -1, V("d", (i, p + 1))),)
    if v.name == "t":
        (i,) = v.params
        return P1, (E(v, 1, V("g", (i, 1))), E(v, i + 1, V("r0", ())))
    if v.name == "g":  # gadget chain: climb +1 or drop towards t(i+j)
        i, j = v.params
        return P2, (E(v, -1, V("dr", (i, j, 1))), E(v, 1, V("g", (i, j + 1))))
    if v.name == "dr":  # drop path: 2j edges in total, summing to -2j+1
        i, j, p = v.params
        if p == 2 * j - 1:
            return P2, (E(v, 0, V("t", (i + j,))),)
        return P2, (E(v, -1, V("dr", (i, j, p + 1))),)
    if v.name == "r0":
        return P1, (E(v, 0, v),)
    raise KeyError(v)


def _make_a4(guarded: bool = False) -> ZooEntry:
    start = V("s", (-1,)) if guarded else V("s", (0,))
    name = "a4guarded" if guarded else "a4"
    arena = ArenaGenerator(start, _a4_expand, name=name)

    def sigma_k_factory(k: int) -> Strategy:
        def fn(ar: Arena, h: History) -> Edge:
            v = h.to_vertex
            if v.name != "t":
                return _first_edge(ar, v)
            delays = sum(1 for e in h.edges if e.src.name == "t" and e.dst.name == "g")
            if delays < k:
                return _edge_to(ar, v, "g")
            return _edge_to(ar, v, "r0")

        return Scripted("sigma_%d" % k, fn)

    def adaptive_fn(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name != "t":
            return _first_edge(ar, v)
        entry = None
        for e in h.edges:
            if e.dst.name == "t":
                entry = e.dst.params[0]
                break
        if entry is None:
            entry = v.params[0]
        delays = sum(1 for e in h.edges if e.src.name == "t" and e.dst.name == "g")
        if delays < entry + 1:
            return _edge_to(ar, v, "g")
        return _edge_to(ar, v, "r0")

    def always_delay_decide(ar: Arena, v: VertexId, m):
        if v.name == "t":
            return _edge_to(ar, v, "g")
        return _first_edge(ar, v)

    always_delay = FiniteMemory(MealyMemory((0,), 0, lambda m, e: 0),
                                always_delay_decide, name="always_delay")

    note = ("delay-gadget arena: entering at the i-th decision vertex costs "
            "-2(i+1); the opponent can stretch each delay j extra rounds for "
            "payoff -j+1 over 3j steps, so all entry paths share a length; "
            "exiting the k-th vertex regains k+1. Adapting the number of "
            "delays to the observed entry wins exactly 0, while any finite "
            "bank of delay counts can be routed into ever-longer stretches.")
    return ZooEntry(name, {"guarded": guarded}, arena, start, note,
                    strategies={
                        "adaptive": Scripted("adaptive", adaptive_fn),
                        "delay_twice_exit": delay_twice_exit_fm("g"),
                        "always_delay": always_delay,
                    },
                    strategy_factories={
                        "sigma_": sigma_k_factory,
                        "p2_enter_": _a4_router_simple_factory(),
                    },
                    extras={"router": a4_router})


def a4_router(entry: int, gaps: list[int], cycle_from: int = 0) -> Strategy:
    """Opponent routing on A4: enter at ``entry``, then stretch each delay
    by the successive gaps (cycling from ``cycle_from`` when exhausted)."""
    if entry < 0 or any(g < 1 for g in gaps):
        raise ValueError("entry >= 0 and gaps >= 1 required")

    def gap_at(idx: int) -> int:
        if idx < len(gaps):
            return gaps[idx]
        if not gaps:
            return 1
        cycle = gaps[cycle_from:] or gaps
        return cycle[(idx - len(gaps)) % len(cycle)]

    def fn(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name == "s":
            (j,) = v.params
            if j < entry:
                return _edge_to(ar, v, "s")
            return _edge_to(ar, v, "d")
        if v.name == "g":
            i, j = v.params
            drops = sum(1 for e in h.edges if e.src.name == "t" and e.dst.name == "g")
            target = gap_at(drops - 1)  # current stretch began at the latest delay
            if j < target:
                return _edge_to(ar, v, "g")
            for e in ar.edges(v):
                if e.dst.name != "g":
                    return e
            raise AssertionError
        return _first_edge(ar, v)

    return Scripted("router_%d_%s" % (entry, "-".join(map(str, gaps))), fn, player=2)


def _a4_router_simple_factory():
    def factory(entry: int) -> Strategy:
        return a4_router(entry, [1])

    return factory


# ---------------------------------------------------------------------------
# BitArena: total-payoff rounds where one bit of memory is essential


def _bit_expand(v: VertexId):
    if v.name == "v":
        (i,) = v.params
        if i == 0:
            return P2, (E(v, -1, V("v", (1,))),)
        return P2, (E(v, 0, V("vz", (i,))), E(v, i, V("vc", (i,))))
    if v.name == "vz":
        (i,) = v.params
        return P2, (E(v, 0, V("u", (i,))),)
    if v.name == "vc":
        (i,) = v.params
        return P2, (E(v, -i - 1, V("u", (i,))),)
    if v.name == "u":
        (i,) = v.params
        return P1, (E(v, 0, V("uz", (i,))), E(v, i, V("uc", (i,))))
    if v.name == "uz":
        (i,) = v.params
        return P1, (E(v, 0, V("v", (i + 1,))),)
    if v.name == "uc":
        (i,) = v.params
        return P1, (E(v, -i - 1, V("v", (i + 1,))),)
    raise KeyError(v)


def bitarena_wprime(v: VertexId, r: Fraction) -> bool:
    """Scripted region of (vertex, current sum) pairs the maximizer wins
    the limsup-total-payoff-at-least-0 game from."""
    (i,) = v.params
    if v.name == "v":
        return r >= (0 if i == 0 else -i)
    if v.name in ("vz", "u"):
        return r >= -i - 1
    if v.name == "uz":
        return r >= -(i + 1)
    if v.name in ("vc", "uc"):
        return r >= 0
    raise KeyError(v)


def _make_bitarena() -> ZooEntry:
    start = V("v", (0,))
    arena = ArenaGenerator(start, _bit_expand, name="bitarena")

    def opp_update(m, e: Edge):
        if e.src.name == "v":
            return 1 if e.dst.name == "vc" else 0
        return m

    def opp_decide(ar: Arena, v: VertexId, m):
        if v.name != "u":
            return _first_edge(ar, v)
        return _edge_to(ar, v, "uz" if m == 1 else "uc")

    opposite = FiniteMemory(MealyMemory((0, 1), 0, opp_update), opp_decide,
                            name="opposite")

    def p2_const(dst_name: str, label: str) -> Strategy:
        def choose(ar: Arena, v: VertexId) -> Edge:
            if v.name == "v" and len(ar.edges(v)) > 1:
                return _edge_to(ar, v, dst_name)
            return _first_edge(ar, v)

        return Memoryless(choose, player=2, name=label)

    def safe_choose(ar: Arena, v: VertexId) -> Edge:
        if v.name == "u":
            return _edge_to(ar, v, "uz")
        return _first_edge(ar, v)

    note = ("alternating climb-or-stay rounds: in round i either side may "
            "swing +i then -i-1 or keep level over two steps, so all "
            "histories to a vertex share a length; playing the opposite of "
            "the opponent's round move loses exactly 1 per round while "
            "touching 0 once each round, which wins the limsup total-payoff "
            "condition; with only a step counter the touching rounds can be "
            "dodged.")
    return ZooEntry("bitarena", {}, arena, start, note,
                    strategies={
                        "opposite": opposite,
                        "allzero": p2_const("vz", "allzero"),
                        "allclimb": p2_const("vc", "allclimb"),
                        "safe": Memoryless(safe_choose, name="safe"),
                    },
                    wprime=bitarena_wprime,
                    extras={"winning_from": bitarena_winning_from})


def bitarena_winning_from(vertex: VertexId, r: Fraction) -> Strategy:
    """A strategy winning the limsup-TP>=0 game from ``vertex`` with
    current sum ``r`` (for pairs inside the region): respond with the
    opposite of the opponent's move each full round, stay level on a
    partial first round."""

    def fn(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name != "u":
            return _first_edge(ar, v)
        last = h.edges[-1] if h.edges else None
        if last is not None and last.src.name == "vc":
            return _edge_to(ar, v, "uz")
        if last is not None and last.src.name == "vz":
            return _edge_to(ar, v, "uc")
        return _edge_to(ar, v, "uz")

    return Scripted("opposite_from_%s" % vertex, fn)


# ---------------------------------------------------------------------------
# Buechi-style entries


def _make_buchia(k: int = 3) -> ZooEntry:
    if k < 2:
        raise ValueError("need at least 2 colours")
    start = V("x", (0,))

    def expand(v: VertexId):
        if v.name == "x":
            (i,) = v.params
            forward = E(v, 0, V("x", (i + 1,)))
            if i == 0:
                return P1, (forward,)
            colour = 1 + (i - 1) % (k - 1)
            return P1, (forward, E(v, colour, V("y", (i,))))
        if v.name == "y":
            (i,) = v.params
            return P1, (E(v, 0, V("x", (i + 1,))),)
        raise KeyError(v)

    arena = ArenaGenerator(start, expand, name="buchia")

    def round_robin(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name == "x" and len(ar.edges(v)) > 1:
            return _edge_to(ar, v, "y")
        return _first_edge(ar, v)

    note = ("infinite line with cyclically coloured detours; sweeping every "
            "detour sees all %d colour codes infinitely often. With an "
            "unbounded colour supply no finite-memory walker can keep "
            "reaching new colours; this entry truncates the palette." % k)
    return ZooEntry("buchia", {"k": k}, arena, start, note,
                    strategies={"round_robin": Scripted("round_robin", round_robin,
                                                        step_determined=True)})


def _make_buchib(b: int = 6) -> ZooEntry:
    if b < 1:
        raise ValueError("truncation must be >= 1")
    start = V("v", ())

    def expand(v: VertexId):
        if v.name == "v":
            return P1, (E(v, 1, v), E(v, 0, V("u", ())))
        if v.name == "u":
            out = [E(v, 0, V("v", ())) if n == 1 else E(v, 0, V("w", (n, 1))) for n in range(1, b + 1)]
            return P2, tuple(out)
        if v.name == "w":
            n, p = v.params
            nxt = V("v", ()) if p == n - 1 else V("w", (n, p + 1))
            return P2, (E(v, 0, nxt),)
        raise KeyError(v)

    arena = ArenaGenerator(start, expand, name="buchib")

    def alternating(ar: Arena, h: History) -> Edge:
        v = h.to_vertex
        if v.name != "v":
            return _first_edge(ar, v)
        last = h.edges[-1] if h.edges else None
        if last is not None and last.src == v and last.dst == v:
            return _edge_to(ar, v, "u")  # colour 0 after the colour-1 loop
        for e in ar.edges(v):
            if e.dst == v:
                return e
        raise AssertionError

    note = ("two colours: a colour-1 self-loop at the decision vertex and a "
            "colour-0 exit into opponent-chosen colour-0 padding of length "
            "1..%d; alternating loop-then-exit sees both colours forever, "
            "but any step-counter exit schedule can be padded into." % b)
    return ZooEntry("buchib", {"b": b}, arena, start, note,
                    strategies={"alternating": Scripted("alternating", alternating)},
                    extras={"truncation": b})


# ---------------------------------------------------------------------------
# Non-uniformity example: debts resolved arbitrarily far down a free ray


def _make_nonuniform(start_index: int = 0) -> ZooEntry:
    start = V("st", (start_index,))

    def expand(v: VertexId):
        if v.name == "st":
            (i,) = v.params
            return P1, (E(v, -i, V("ray", (0,))),)
        if v.name == "ray":
            (j,) = v.params
            return P1, (E(v, j, V("r0", ())), E(v, 0, V("ray", (j + 1,))))
        if v.name == "r0":
            return P1, (E(v, 0, v),)
        raise KeyError(v)

    arena = ArenaGenerator(start, expand, name="nonuniform")

    def exit_at_factory(j: int) -> Strategy:
        def fn(ar: Arena, h: History) -> Edge:
            v = h.to_vertex
            if v.name != "ray":
                return _first_edge(ar, v)
            if v.params[0] >= j:
                return _edge_to(ar, v, "r0")
            return _edge_to(ar, v, "ray")

        return Scripted("exit_at_%d" % j, fn, step_determined=True)

    note = ("every start vertex owes its own debt before a shared free ray "
            "whose j-th exit repays +j; each start wins by exiting far "
            "enough, but no single strategy with a step counter and one bit "
            "serves all starts, because the required exit point grows with "
            "the debt while the shared ray looks identical.")
    return ZooEntry("nonuniform", {"start": start_index}, arena, start, note,
                    strategy_factories={"exit_at_": exit_at_factory})


# ---------------------------------------------------------------------------
# Registry


_REGISTRY: dict[str, Callable[..., ZooEntry]] = {
    "a1": _make_a1,
    "a1prime": lambda b=8: _make_a1(b, repeated=True),
    "a2": _make_a2,
    "a3": _make_a3,
    "a4": _make_a4,
    "a4guarded": lambda: _make_a4(guarded=True),
    "bitarena": _make_bitarena,
    "buchia": _make_buchia,
    "buchib": _make_buchib,
    "nonuniform": _make_nonuniform,
}


def names() -> list[str]:
    return sorted(_REGISTRY)


def make(name: str, **params) -> ZooEntry:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError("unknown zoo entry %r (have: %s)" % (name, ", ".join(names())))
    return factory(**params)


def parse_uri(uri: str) -> ZooEntry:
    """Parse ``zoo:<name>?<k>=<v>&...`` into an entry."""
    if not uri.startswith("zoo:"):
        raise ValueError("zoo URIs start with 'zoo:'")
    rest = uri[len("zoo:"):]
    name, _, query = rest.partition("?")
    params = {}
    if query:
        for pair in query.split("&"):
            key, _, val = pair.partition("=")
            if not key or not val:
                raise ValueError("malformed zoo parameter %r" % pair)
            params[key] = int(val)
    return make(name, **params)
