"""Finite-arena value solvers and constructive strategy synthesis.

The synthesizers realize the two constructive upper bounds: a pure
step-counter strategy for prefix-independent objectives that decompose
into open, step-monotonic sub-objectives (bubble construction), and a
step-counter-plus-one-bit strategy for the limsup-total-payoff-at-least-0
objective.  Both work bubble by bubble: certify one open sub-objective up
to a bound level, freeze the table up to that level, continue with a
fresh winning continuation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from .arena import Arena, ArenaExplicit, Edge, History, VertexId, Weight, node_cap_from_env
from .engine import KoenigBound, koenig_bound
from .objectives import (Decomposition, Lasso, OpenSub, lasso_limit,
                         prefix_compare, LE, BOTH, POS_INF, NEG_INF, TP, MP)
from .strategies import (FIRST_EDGE, FiniteMemory, Memoryless, Scripted,
                         StepCounterPlusK, StepCounterTable, Strategy)

ExtValue = Union[Fraction, float]


# ---------------------------------------------------------------------------
# Value solving on finite arenas


@dataclass
class ValueMap:
    family: str
    values: dict[VertexId, ExtValue]
    witness: Optional[Memoryless]


def solve_values(arena: ArenaExplicit, family: str, witness_cap: int = 1 << 14) -> ValueMap:
    """Game values per vertex for mean payoff or limsup total payoff.

    Mean payoff uses exact value iteration long enough that rounding to
    denominators at most |V| recovers the value.  Limsup total payoff is
    +/-inf on the positive/negative mean-payoff regions and a bounded
    exact fixed point on the zero region.  The returned witness is a
    memoryless strategy achieving the value against every memoryless
    opponent, found by enumeration and absent if the profile space
    exceeds ``witness_cap``.
    """
    if not isinstance(arena, ArenaExplicit):
        raise TypeError("value solving needs an explicit finite arena")
    if family == "mp":
        values = _mp_values(arena)
        witness = _mp_witness(arena, values, witness_cap)
        return ValueMap("mp", values, witness)
    if family == "tpsup":
        values = _tpsup_values(arena, witness_cap)
        witness = _tpsup_witness(arena, values, witness_cap)
        return ValueMap("tpsup", values, witness)
    raise ValueError("unknown value family %r" % family)


def _scaled_int_weights(arena: ArenaExplicit) -> tuple[dict[Edge, int], int, int]:
    import math

    denom = 1
    for v in arena.vertices:
        for e in arena.edges(v):
            denom = denom * e.weight.denominator // math.gcd(denom, e.weight.denominator)
    scaled = {}
    w_max = 1
    for v in arena.vertices:
        for e in arena.edges(v):
            w = int(e.weight * denom)
            scaled[e] = w
            w_max = max(w_max, abs(w))
    return scaled, denom, w_max


def _mp_values(arena: ArenaExplicit) -> dict[VertexId, ExtValue]:
    scaled, denom, w_max = _scaled_int_weights(arena)
    vs = arena.vertices
    n = len(vs)
    horizon = 4 * n * n * n * w_max
    x = {v: 0 for v in vs}
    for _ in range(horizon):
        x = {v: (max if arena.owner(v) == 1 else min)(
            scaled[e] + x[e.dst] for e in arena.edges(v)) for v in vs}
    out: dict[VertexId, ExtValue] = {}
    for v in vs:
        out[v] = Fraction(x[v], horizon).limit_denominator(n) / denom
    return out


def _reachable(arena: ArenaExplicit, v: VertexId, moves: dict[VertexId, Edge]) -> set[VertexId]:
    seen = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        es = [moves[u]] if u in moves else list(arena.edges(u))
        for e in es:
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    return seen


def _min_cycle_mean(arena: ArenaExplicit, vertices: set[VertexId],
                    moves: dict[VertexId, Edge]) -> Optional[Fraction]:
    """Minimum mean over cycles inside ``vertices`` of the graph where
    player-1 vertices follow ``moves`` and the rest keep all edges."""
    vs = sorted(vertices)
    index = {v: k for k, v in enumerate(vs)}
    n = len(vs)
    edges = []
    for v in vs:
        es = [moves[v]] if v in moves else list(arena.edges(v))
        for e in es:
            if e.dst in vertices:
                edges.append((index[v], index[e.dst], e.weight))
    # Karp: d[k][v] = min weight of a k-edge walk ending at v
    inf = None
    d = [[inf] * n for _ in range(n + 1)]
    for v in range(n):
        d[0][v] = Fraction(0)
    for k in range(1, n + 1):
        for (a, b, w) in edges:
            if d[k - 1][a] is not None:
                cand = d[k - 1][a] + w
                if d[k][b] is None or cand < d[k][b]:
                    d[k][b] = cand
    best = None
    for v in range(n):
        if d[n][v] is None:
            continue
        worst = None
        for k in range(n):
            if d[k][v] is None:
                continue
            mean = (d[n][v] - d[k][v]) / (n - k)
            if worst is None or mean > worst:
                worst = mean
        if worst is not None and (best is None or worst < best):
            best = worst
    return best


def _p1_profiles(arena: ArenaExplicit, cap: int) -> Optional[list[dict[VertexId, Edge]]]:
    p1 = [v for v in arena.vertices if arena.owner(v) == 1]
    size = 1
    for v in p1:
        size *= len(arena.edges(v))
        if size > cap:
            return None
    choices = [arena.edges(v) for v in p1]
    return [dict(zip(p1, combo)) for combo in itertools.product(*choices)]


def _mp_witness(arena: ArenaExplicit, values: dict[VertexId, ExtValue],
                cap: int) -> Optional[Memoryless]:
    profiles = _p1_profiles(arena, cap)
    if profiles is None:
        return None
    for moves in profiles:
        ok = True
        for v in arena.vertices:
            reach = _reachable(arena, v, moves)
            if _min_cycle_mean(arena, reach, moves) != values[v]:
                ok = False
                break
        if ok:
            return Memoryless(dict(moves), name="mp_witness")
    return None


def _tpsup_values(arena: ArenaExplicit, cap: int = 1 << 14) -> dict[VertexId, ExtValue]:
    mp = _mp_values(arena)
    out: dict[VertexId, ExtValue] = {}
    zero = set()
    for v in arena.vertices:
        if mp[v] > 0:
            out[v] = POS_INF
        elif mp[v] < 0:
            out[v] = NEG_INF
        else:
            zero.add(v)
    if not zero:
        return out
    # exact values on the zero-mean region.  Edges leaving the region are
    # never taken: entering the positive region contradicts a zero mean
    # for the maximizer, the negative region yields -inf, and dually for
    # the minimizer, so the restricted subgame is non-blocking.  Limsup
    # total payoff admits positional optimal strategies for both players
    # on finite arenas, so a max-min over positional profiles evaluated
    # on the induced lassos is exact.
    adj: dict[VertexId, list[Edge]] = {}
    for v in zero:
        keep = [e for e in arena.edges(v) if e.dst in zero]
        if not keep:
            raise AssertionError("zero region not closed at %s" % v)
        adj[v] = keep
    order = sorted(zero)
    sub = ArenaExplicit({v: arena.owner(v) for v in zero},
                        [e for es in adj.values() for e in es],
                        order[0], name=arena.name + "+zero")
    p1_profiles = _p1_profiles(sub, cap)
    p2_profiles = _opponent_profiles(sub, cap)
    if p1_profiles is None or p2_profiles is None:
        raise RuntimeError("zero-region profile space exceeds the cap %d" % cap)
    for v in order:
        best = None
        for m1 in p1_profiles:
            worst = None
            for m2 in p2_profiles:
                val = lasso_limit(TP, "limsup", lasso_of_profiles(sub, v, m1, m2))
                if worst is None or val < worst:
                    worst = val
            if best is None or worst > best:
                best = worst
        out[v] = best
    return out


def lasso_of_profiles(arena: ArenaExplicit, v: VertexId, moves1: dict[VertexId, Edge],
                      moves2: dict[VertexId, Edge]) -> Lasso:
    """The unique lasso from v when both players play positionally."""
    at = v
    path = []
    seen = {v: 0}
    weights = []
    while True:
        e = moves1[at] if arena.owner(at) == 1 else moves2[at]
        weights.append(e.weight)
        path.append(e)
        at = e.dst
        if at in seen:
            cut = seen[at]
            return Lasso(tuple(weights[:cut]), tuple(weights[cut:]))
        seen[at] = len(path)


def brute_force_values(arena: ArenaExplicit, family: str, cap: int = 1 << 14
                       ) -> Optional[dict[VertexId, ExtValue]]:
    """Max-min over all memoryless profile pairs, evaluated on lassos."""
    kind = MP if family == "mp" else TP
    p1_profiles = _p1_profiles(arena, cap)
    swapped = _opponent_profiles(arena, cap)
    if p1_profiles is None or swapped is None:
        return None
    out: dict[VertexId, ExtValue] = {}
    for v in arena.vertices:
        best = None
        for m1 in p1_profiles:
            worst = None
            for m2 in swapped:
                val = lasso_limit(kind, "limsup", lasso_of_profiles(arena, v, m1, m2))
                if worst is None or val < worst:
                    worst = val
            if best is None or worst > best:
                best = worst
        out[v] = best
    return out


def _opponent_profiles(arena: ArenaExplicit, cap: int) -> Optional[list[dict[VertexId, Edge]]]:
    p2 = [v for v in arena.vertices if arena.owner(v) == 2]
    size = 1
    for v in p2:
        size *= len(arena.edges(v))
        if size > cap:
            return None
    return [dict(zip(p2, combo)) for combo in itertools.product(*[arena.edges(v) for v in p2])]


def _tpsup_witness(arena: ArenaExplicit, values: dict[VertexId, ExtValue],
                   cap: int) -> Optional[Memoryless]:
    profiles = _p1_profiles(arena, cap)
    opponents = _opponent_profiles(arena, cap)
    if profiles is None or opponents is None:
        return None
    for moves in profiles:
        ok = True
        for v in arena.vertices:
            worst = None
            for m2 in opponents:
                val = lasso_limit(TP, "limsup", lasso_of_profiles(arena, v, moves, m2))
                if worst is None or val < worst:
                    worst = val
            if worst != values[v]:
                ok = False
                break
        if ok:
            return Memoryless(dict(moves), name="tpsup_witness")
    return None


# ---------------------------------------------------------------------------
# sigma_safe and the W' region


@dataclass
class WPrimeRegion:
    """(vertex, current sum) pairs from which the limsup-TP>=0 game is
    winnable; upward closed in the sum."""

    contains: Callable[[VertexId, Fraction], bool]

    def __call__(self, v: VertexId, r: Fraction) -> bool:
        return self.contains(v, r)


def sigma_safe(arena: ArenaExplicit) -> tuple[Memoryless, WPrimeRegion, ValueMap]:
    """Memoryless strategy maximizing weight + value of the target, which
    never leaves the winnable (vertex, sum) region."""
    vm = solve_values(arena, "tpsup")

    def score(e: Edge) -> ExtValue:
        val = vm.values[e.dst]
        if isinstance(val, float):
            return val
        return e.weight + val

    table = {}
    for v in arena.vertices:
        if arena.owner(v) != 1:
            continue
        best = arena.edges(v)[0]
        for e in arena.edges(v)[1:]:
            if score(e) > score(best):
                best = e
        table[v] = best

    def contains(v: VertexId, r: Fraction) -> bool:
        val = vm.values[v]
        if val == POS_INF:
            return True
        if val == NEG_INF:
            return False
        return r + val >= 0

    return Memoryless(table, name="sigma_safe"), WPrimeRegion(contains), vm


# ---------------------------------------------------------------------------
# Minimal consistent histories and the step-counter conversion


@dataclass
class MinHistory:
    vertex: VertexId
    depth: int
    tp: Fraction
    satisfied: bool
    lex: tuple[int, ...]
    parent: Optional["MinHistory"]
    edge: Optional[Edge]
    aux: object = None  # strategy bookkeeping (e.g. tracked bit)

    def history(self, origin: VertexId) -> History:
        edges = []
        node = self
        while node.edge is not None:
            edges.append(node.edge)
            node = node.parent
        edges.reverse()
        return History(origin, tuple(edges))

    def word(self) -> tuple[Weight, ...]:
        out = []
        node = self
        while node.edge is not None:
            out.append(node.edge.weight)
            node = node.parent
        out.reverse()
        return tuple(out)


def _less_minimal(open_sub: OpenSub, a: MinHistory, b: MinHistory) -> bool:
    """Is candidate a strictly more minimal (worse continuation-wise) than
    the kept b, or equivalent with a smaller lexicographic key?"""
    if a.satisfied != b.satisfied:
        return b.satisfied
    if open_sub.family != "buchi" and not a.satisfied:
        # equal lengths, so TP order coincides with MP order
        if a.tp != b.tp:
            return a.tp < b.tp
    return a.lex < b.lex


def minimal_history_levels(arena: Arena, v0: VertexId, sigma_prime: Strategy,
                           open_sub: OpenSub, depth: int,
                           decision: Optional[Callable[["MinHistory"], Edge]] = None
                           ) -> list[dict[VertexId, MinHistory]]:
    """Per (vertex, level) minimal sigma_prime-consistent history.

    The prefix order is a congruence, so extending only the kept minima
    preserves the property that the kept history at a cell is dominated by
    no consistent history there; ties break lexicographically over edge
    indices.  ``decision`` overrides how the strategy's move after a kept
    history is computed (used by the bit-tracking synthesizer).
    """
    if decision is None:
        decision = lambda node: sigma_prime.decide(arena, node.history(v0))
    root = MinHistory(v0, 0, Fraction(0), False, (), None, None)
    levels = [{v0: root}]
    for d in range(depth):
        nxt: dict[VertexId, MinHistory] = {}
        for v, node in levels[d].items():
            if arena.owner(v) == sigma_prime.player:
                edges = [decision(node)]
            else:
                edges = list(arena.edges(v))
            order = {e: k for k, e in enumerate(arena.edges(v))}
            for e in edges:
                tp = node.tp + e.weight
                sat = node.satisfied or open_sub.step_satisfies(d + 1, tp, e.weight)
                child = MinHistory(e.dst, d + 1, tp, sat, node.lex + (order[e],), node, e)
                kept = nxt.get(e.dst)
                if kept is None or _less_minimal(open_sub, child, kept):
                    nxt[e.dst] = child
        levels.append(nxt)
    return levels


def sc_from_strategy(arena: Arena, v0: VertexId, sigma_prime: Strategy,
                     open_sub: OpenSub, depth: int) -> StepCounterTable:
    """Step-counter table playing, at (v, s), the move the given strategy
    makes after the minimal consistent length-s history ending at v."""
    levels = minimal_history_levels(arena, v0, sigma_prime, open_sub, depth)
    table = {}
    for d, cells in enumerate(levels[:depth]):
        for v, node in cells.items():
            if arena.owner(v) == sigma_prime.player:
                table[(v, d)] = sigma_prime.decide(arena, node.history(v0))
    return StepCounterTable(table, depth, FIRST_EDGE, player=sigma_prime.player,
                            name=sigma_prime.name + "+sc")


def domination_holds(arena: Arena, v0: VertexId, open_sub: OpenSub,
                     levels: list[dict[VertexId, MinHistory]],
                     histories_by_level: list[list[History]]) -> bool:
    """Every given history must dominate the kept minimal history at its
    (endpoint, length) cell."""
    for d, hs in enumerate(histories_by_level):
        for h in hs:
            node = levels[d].get(h.to_vertex)
            if node is None:
                return False
            if prefix_compare(open_sub, node.word(), h.word) not in (BOTH, LE):
                return False
    return True


# ---------------------------------------------------------------------------
# Oracles


@dataclass
class RegionOracle:
    """Winning-region oracle for a prefix-independent objective: region
    membership plus a winning strategy from any member vertex."""

    in_region: Callable[[VertexId], bool]
    strategy_from: Callable[[VertexId], Strategy]
    uniform_memoryless: bool = False


def finite_mp_oracle(arena: ArenaExplicit) -> RegionOracle:
    vm = solve_values(arena, "mp")
    if vm.witness is None:
        raise RuntimeError("no memoryless witness found within the profile cap")

    def in_region(v: VertexId) -> bool:
        return vm.values[v] >= 0

    return RegionOracle(in_region, lambda v: vm.witness, uniform_memoryless=True)


@dataclass
class WPrimeOracle:
    """Oracle for the non-prefix-independent limsup-TP>=0 objective:
    region over (vertex, sum) pairs, a safe memoryless strategy, and a
    winning strategy from any pair in the region."""

    wprime: Callable[[VertexId, Fraction], bool]
    safe: Strategy
    winning_from: Callable[[VertexId, Fraction], Strategy]
    uniform_memoryless: bool = False


def finite_wprime_oracle(arena: ArenaExplicit) -> WPrimeOracle:
    safe, region, vm = sigma_safe(arena)
    if vm.witness is None:
        raise RuntimeError("no memoryless witness found within the profile cap")
    bf = brute_force_values(arena, "tpsup")
    if bf is not None and bf != vm.values:
        raise RuntimeError("value attainment cross-check failed: %r vs %r"
                           % (vm.values, bf))
    return WPrimeOracle(region.contains, safe, lambda v, r: vm.witness,
                        uniform_memoryless=True)


# ---------------------------------------------------------------------------
# Bubble synthesis (step counter, prefix-independent objectives)


@dataclass
class SynthReport:
    schedule: list[tuple[int, int]]  # (m, k_m)
    strategy: Optional[Strategy]
    level_certs: list[tuple[int, int, bool]]  # (m, k_m, recertified)
    region_ok: bool
    complete: bool
    failure: Optional[str] = None

    @property
    def certified(self) -> bool:
        return (self.complete and self.region_ok
                and all(ok for (_, _, ok) in self.level_certs))


def _composite(arena: Arena, v0: VertexId, fixed: dict[tuple[VertexId, int], Edge],
               boundary: int, oracle: RegionOracle) -> Strategy:
    cache: dict[VertexId, Strategy] = {}

    def fn(ar: Arena, h: History) -> Edge:
        if len(h) < boundary:
            try:
                return fixed[(h.to_vertex, len(h))]
            except KeyError:
                raise KeyError("fixed table missing entry (%s, %d)" % (h.to_vertex, len(h)))
        w = h.prefix(boundary).to_vertex
        strat = cache.get(w)
        if strat is None:
            strat = cache[w] = oracle.strategy_from(w)
        return strat.decide(ar, h.suffix_from(boundary))

    return Scripted("composite@%d" % boundary, fn,
                    step_determined=oracle.uniform_memoryless)


def bubble_synthesize(arena: Arena, v0: VertexId, decomposition: Decomposition,
                      m_max: int, oracle: RegionOracle, depth_cap: int = 400,
                      node_cap: Optional[int] = None) -> SynthReport:
    """Fix a step-counter table on growing step intervals, one open
    sub-objective per bubble, then re-certify every level on the final
    table and check the winning region is never left."""
    if node_cap is None:
        node_cap = node_cap_from_env()
    if not oracle.in_region(v0):
        raise ValueError("start vertex %s is outside the winning region" % v0)
    fixed: dict[tuple[VertexId, int], Edge] = {}
    schedule: list[tuple[int, int]] = []
    k_prev = 0
    for m in range(1, m_max + 1):
        sub = decomposition.sub(m)
        comp = _composite(arena, v0, fixed, k_prev, oracle)
        kb = koenig_bound(arena, v0, comp, sub, depth_cap, node_cap)
        if not isinstance(kb, KoenigBound):
            return SynthReport(schedule, None, [], False, False,
                               failure="bubble %d: %r" % (m, kb))
        k_m = max(kb.level, k_prev + 1)
        levels = minimal_history_levels(arena, v0, comp, sub, k_m)
        new_fixed: dict[tuple[VertexId, int], Edge] = {}
        for d, cells in enumerate(levels[:k_m]):
            for v, node in cells.items():
                if arena.owner(v) == 1:
                    move = comp.decide(arena, node.history(v0))
                    new_fixed[(v, d)] = move
                    if d < k_prev and fixed.get((v, d)) != move:
                        return SynthReport(schedule, None, [], False, False,
                                           failure="bubble %d rewrote the fixed table" % m)
        fixed = new_fixed
        k_prev = k_m
        schedule.append((m, k_m))

    strategy = StepCounterTable(fixed, k_prev, FIRST_EDGE, name="bubble_sc")
    level_certs = []
    for (m, k_m) in schedule:
        again = koenig_bound(arena, v0, strategy, decomposition.sub(m), k_m, node_cap)
        level_certs.append((m, k_m, isinstance(again, KoenigBound) and again.level <= k_m))
    region_ok = _region_preserved(arena, v0, strategy, k_prev, oracle.in_region, node_cap)
    return SynthReport(schedule, strategy, level_certs, region_ok, True)


def _region_preserved(arena: Arena, v0: VertexId, strategy: Strategy, depth: int,
                      member: Callable[[VertexId], bool], node_cap: int) -> bool:
    from .engine import explore_consistent

    tree = explore_consistent(arena, v0, strategy, depth, node_cap)
    for level in tree.levels:
        for node in level:
            if not member(node.vertex):
                return False
    return tree.complete


# ---------------------------------------------------------------------------
# Step-counter + 1 bit synthesis for limsup total payoff >= 0


def sc1bit_synthesize(arena: Arena, v0: VertexId, m_max: int, oracle: WPrimeOracle,
                      depth_cap: int = 400, node_cap: Optional[int] = None) -> SynthReport:
    """Synthesize a step-counter-plus-one-bit strategy for the objective
    that the running total payoff is at least 0 in the limit superior.

    Per bubble, with boundary k: the scheduled sub-objective asks for a
    running total at least -1/(k+1) at some position past k+1.  Bit 0
    mimics the strategy induced by minimal consistent histories; the bit
    flips to 1 as soon as the mimicked history's one-step extension
    already satisfies the sub-objective, after which a safe memoryless
    strategy keeps the (vertex, sum) pair winnable; the bit resets at
    every bubble boundary.
    """
    if node_cap is None:
        node_cap = node_cap_from_env()
    if not oracle.wprime(v0, Fraction(0)):
        raise ValueError("start %s with sum 0 is outside the winnable region" % v0)

    table: dict[tuple[VertexId, int, int], Edge] = {}
    bitupd: dict[tuple[int, int, Edge], int] = {}
    schedule: list[tuple[int, int]] = []
    k_prev = 0

    for _ in range(m_max):
        m_sched = k_prev + 1
        sub = OpenSub("tp-sup", m=m_sched)

        # reset the bit entering this bubble: the update on every edge
        # crossing the boundary yields mode 0
        if k_prev > 0:
            partial = StepCounterPlusK(2, dict(table), k_prev, dict(bitupd),
                                       FIRST_EDGE, name="sc1bit_partial")
            for e in _edges_at_level(arena, v0, partial, k_prev - 1, node_cap):
                bitupd[(k_prev - 1, 0, e)] = 0
                bitupd[(k_prev - 1, 1, e)] = 0
        current = StepCounterPlusK(2, dict(table), max(k_prev, 1), dict(bitupd),
                                   FIRST_EDGE, name="sc1bit_partial")
        comp = _Sc1BitComposite(arena, v0, current, k_prev, oracle)

        built = _build_bubble(arena, v0, comp, sub, k_prev, table, bitupd,
                              oracle, depth_cap, node_cap)
        if built is None:
            return SynthReport(schedule, None, [], False, False,
                               failure="bubble m=%d: no bound within the depth cap" % m_sched)
        k_m, violation = built
        if violation is not None:
            return SynthReport(schedule, None, [], False, False,
                               failure="left the winnable region: %s" % violation)
        schedule.append((m_sched, k_m))
        k_prev = k_m

    strategy = StepCounterPlusK(2, table, k_prev, bitupd, FIRST_EDGE, name="sc1bit")
    level_certs = []
    for (m, k_m) in schedule:
        again = koenig_bound(arena, v0, strategy, OpenSub("tp-sup", m=m), k_m, node_cap)
        level_certs.append((m, k_m, isinstance(again, KoenigBound) and again.level <= k_m))
    region_ok = _wprime_preserved(arena, v0, strategy, k_prev, oracle.wprime, node_cap)
    return SynthReport(schedule, strategy, level_certs, region_ok, True)


class _Sc1BitComposite(Scripted):
    """Fixed bit-tracking table up to the boundary, then a winning
    continuation from the reached (vertex, sum) pair."""

    def __init__(self, arena: Arena, v0: VertexId, fixed: StepCounterPlusK,
                 boundary: int, oracle: WPrimeOracle):
        self._arena = arena
        self._v0 = v0
        self._fixed = fixed
        self._boundary = boundary
        self._oracle = oracle
        self._cache: dict[tuple[VertexId, Fraction], Strategy] = {}
        super().__init__("sc1bit_composite@%d" % boundary, self._fn,
                         step_determined=False)

    def _fn(self, ar: Arena, h: History) -> Edge:
        if len(h) < self._boundary:
            state = self._fixed.initial_state()
            for e in h.edges:
                state = self._fixed.step_state(state, e)
            hit = self._fixed.table.get((h.to_vertex, len(h), state[1]))
            if hit is None:
                raise KeyError("fixed sc+1bit table missing (%s, %d, %d)"
                               % (h.to_vertex, len(h), state[1]))
            return hit
        pre = h.prefix(self._boundary)
        key = (pre.to_vertex, pre.total())
        strat = self._cache.get(key)
        if strat is None:
            strat = self._cache[key] = self._oracle.winning_from(*key)
        return strat.decide(ar, h.suffix_from(self._boundary))


def _edges_at_level(arena: Arena, v0: VertexId, strategy: StepCounterPlusK,
                    level: int, node_cap: int) -> list[Edge]:
    """All edges the consistent tree of the fixed table can take at a level."""
    from .engine import explore_consistent

    tree = explore_consistent(arena, v0, strategy, level + 1, node_cap)
    out = []
    seen = set()
    for node in tree.levels[level + 1] if len(tree.levels) > level + 1 else []:
        if node.edge is not None and node.edge not in seen:
            seen.add(node.edge)
            out.append(node.edge)
    return out


def _build_bubble(arena: Arena, v0: VertexId, comp: Strategy, sub: OpenSub,
                  k_prev: int, table: dict, bitupd: dict, oracle: WPrimeOracle,
                  depth_cap: int, node_cap: int):
    """Extend the table over one bubble.  Returns (k_m, violation) or None
    if the depth cap is hit before every consistent branch satisfies."""
    levels = minimal_history_levels(arena, v0, comp, sub, 0)
    min_cells = levels[0]

    # exploration nodes of the strategy under construction: (vertex, bit,
    # tp, satisfied); decisions below k_prev follow the existing table,
    # above it bit 0 mimics the minimal history and bit 1 plays safe
    @dataclass
    class _ENode:
        vertex: VertexId
        bit: int
        tp: Fraction
        satisfied: bool
        parent: Optional["_ENode"] = None
        edge: Optional[Edge] = None

    def _cell_of(n: "_ENode") -> MinHistory:
        """A minimal-history cell backed by the exploration node's own
        play, for vertices the mimic never reaches (a bit reset at a
        bubble boundary can land on a safe-strategy detour)."""
        chain = []
        cur = n
        while cur is not None:
            chain.append(cur)
            cur = cur.parent
        chain.reverse()
        cell = None
        lex: tuple = ()
        for depth, en in enumerate(chain):
            if en.edge is not None:
                order = {e: k for k, e in enumerate(arena.edges(en.edge.src))}
                lex = lex + (order[en.edge],)
            cell = MinHistory(en.vertex, depth, en.tp, en.satisfied, lex, cell, en.edge)
        return cell

    frontier = [_ENode(v0, 0, Fraction(0), False)]
    mim_levels = [min_cells]
    violation = None
    d = 0
    while d < depth_cap:
        if d >= max(k_prev, 1) and d >= sub.step_index and all(n.satisfied for n in frontier):
            break
        cells = mim_levels[d]
        if d >= k_prev:
            for n in frontier:
                if n.bit == 0 and n.vertex not in cells:
                    cells[n.vertex] = _cell_of(n)
        # fill this level's table entries from the construction
        for v, node in cells.items():
            if arena.owner(v) == 1 and d >= k_prev:
                table[(v, d, 0)] = comp.decide(arena, node.history(v0))
        for n in frontier:
            if arena.owner(n.vertex) == 1 and n.bit == 1:
                key = (n.vertex, d, 1)
                if key not in table:
                    table[key] = oracle.safe.choose(arena, n.vertex, d, None)
        # bit updates for this level, driven by the minimal histories
        if d >= k_prev:
            for v, node in cells.items():
                edges = ([comp.decide(arena, node.history(v0))]
                         if arena.owner(v) == 1 else list(arena.edges(v)))
                for e in edges:
                    fires = node.satisfied or sub.step_satisfies(d + 1, node.tp + e.weight, e.weight)
                    bitupd[(d, 0, e)] = 1 if fires else 0

        # advance the minimal-history cells
        nxt_cells: dict[VertexId, MinHistory] = {}
        for v, node in cells.items():
            edges = ([comp.decide(arena, node.history(v0))]
                     if arena.owner(v) == 1 else list(arena.edges(v)))
            order = {e: k for k, e in enumerate(arena.edges(v))}
            for e in edges:
                tp = node.tp + e.weight
                sat = node.satisfied or sub.step_satisfies(d + 1, tp, e.weight)
                child = MinHistory(e.dst, d + 1, tp, sat, node.lex + (order[e],), node, e)
                kept = nxt_cells.get(e.dst)
                if kept is None or _less_minimal(sub, child, kept):
                    nxt_cells[e.dst] = child
        mim_levels.append(nxt_cells)

        # advance the exploration of the strategy under construction
        nxt_frontier: dict[tuple, _ENode] = {}
        for n in frontier:
            if arena.owner(n.vertex) == 1:
                if n.bit == 0:
                    move = table.get((n.vertex, d, 0))
                    if move is None:
                        raise AssertionError("missing bit-0 entry (%s, %d)" % (n.vertex, d))
                    edges = [move]
                else:
                    edges = [table[(n.vertex, d, 1)]]
            else:
                edges = list(arena.edges(n.vertex))
            for e in edges:
                tp = n.tp + e.weight
                sat = n.satisfied or sub.step_satisfies(d + 1, tp, e.weight)
                bit = bitupd.get((d, n.bit, e), n.bit)
                if not oracle.wprime(e.dst, tp):
                    violation = "(%s, %s) at step %d" % (e.dst, tp, d + 1)
                child = _ENode(e.dst, bit, tp, sat, n, e)
                key = (e.dst, bit, tp, sat)
                nxt_frontier[key] = child
        frontier = list(nxt_frontier.values())
        if violation is not None:
            return (d + 1, violation)
        d += 1
    else:
        return None

    # every consistent branch satisfied at level d; ensure bit-1 coverage
    # for the remaining in-bubble levels was recorded along the way
    k_m = max(d, k_prev + 1)
    return (k_m, None)


def _wprime_preserved(arena: Arena, v0: VertexId, strategy: Strategy, depth: int,
                      member: Callable[[VertexId, Fraction], bool], node_cap: int) -> bool:
    from .engine import explore_consistent

    tree = explore_consistent(arena, v0, strategy, depth, node_cap)
    for level in tree.levels:
        for node in level:
            if not member(node.vertex, node.tp):
                return False
    return tree.complete
