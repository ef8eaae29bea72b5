"""Play simulation, consistent-history exploration, and certificates.

All infinite-play claims are certified through finite evidence: sink
payoffs, bound levels at which an open sub-objective is satisfied on
every consistent branch, or divergence witnesses (a repeating memory
cycle whose rounds strictly decrease the total payoff).  Certificate
checkers re-derive every claimed quantity from scratch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

from .arena import Arena, Edge, History, VertexId, Weight, node_cap_from_env
from .objectives import OpenSub
from .strategies import FiniteMemory, Memoryless, Scripted, Strategy

CERT_SCHEMA = "qg-cert/1"


# ---------------------------------------------------------------------------
# Play simulation


@dataclass
class PlayRecord:
    origin: VertexId
    edges: list[Edge]
    tp_trace: list[Fraction]
    mem1_trace: list[object]
    mem2_trace: list[object]
    termination: str  # "horizon" | "sink"

    @property
    def colours(self) -> list[Weight]:
        return [e.weight for e in self.edges]

    @property
    def mp_trace(self) -> list[Fraction]:
        return [tp / (j + 1) for j, tp in enumerate(self.tp_trace)]

    @property
    def final_tp(self) -> Fraction:
        return self.tp_trace[-1] if self.tp_trace else Fraction(0)

    def history(self) -> History:
        return History(self.origin, tuple(self.edges))

    def vertex_at(self, step: int) -> VertexId:
        if step == 0:
            return self.origin
        return self.edges[step - 1].dst

    def tp_at(self, step: int) -> Fraction:
        if step == 0:
            return Fraction(0)
        return self.tp_trace[step - 1]

    def to_csv(self) -> str:
        lines = ["step,from,to,weight,tp,mp,mem1,mem2"]
        for j, e in enumerate(self.edges):
            lines.append("%d,%s,%s,%s,%s,%s,%s,%s" % (
                j, e.src, e.dst, e.weight, self.tp_trace[j], self.tp_trace[j] / (j + 1),
                _fmt_mem(self.mem1_trace[j]), _fmt_mem(self.mem2_trace[j])))
        return "\n".join(lines) + "\n"


def _fmt_mem(state) -> str:
    if state is None:
        return "-"
    return str(state).replace(",", ";").replace(" ", "")


class _StrategyRunner:
    """Tracks one strategy's incremental state along a play."""

    def __init__(self, arena: Arena, origin: VertexId, strategy: Strategy):
        self.arena = arena
        self.strategy = strategy
        self.scripted = isinstance(strategy, Scripted)
        self.state = None if self.scripted else strategy.initial_state()
        self.origin = origin

    def decide(self, edges: list[Edge], vertex: VertexId, step: int) -> Edge:
        if self.scripted:
            return self.strategy.decide(self.arena, History(self.origin, tuple(edges)))
        return self.strategy.choose(self.arena, vertex, step, self.state)

    def advance(self, edge: Edge):
        if not self.scripted:
            self.state = self.strategy.step_state(self.state, edge)


def play(arena: Arena, v0: VertexId, sigma1: Strategy, sigma2: Strategy,
         horizon: int) -> PlayRecord:
    """The unique play consistent with both strategies, up to the horizon
    or until an absorbing weight-0 self-loop is reached."""
    runners = {1: _StrategyRunner(arena, v0, sigma1), 2: _StrategyRunner(arena, v0, sigma2)}
    if sigma1.player != 1 or sigma2.player != 2:
        raise ValueError("play expects a player-1 and a player-2 strategy in order")
    edges: list[Edge] = []
    tp_trace: list[Fraction] = []
    mem1: list[object] = []
    mem2: list[object] = []
    at = v0
    tp = Fraction(0)
    termination = "horizon"
    for step in range(horizon):
        if arena.is_sink(at):
            termination = "sink"
            break
        owner = arena.owner(at)
        edge = runners[owner].decide(edges, at, step)
        if edge.src != at or edge not in arena.edges(at):
            raise ValueError("strategy for player %d returned a non-edge %s at %s"
                             % (owner, edge, at))
        for r in runners.values():
            r.advance(edge)
        edges.append(edge)
        tp += edge.weight
        tp_trace.append(tp)
        mem1.append(runners[1].state)
        mem2.append(runners[2].state)
        at = edge.dst
    else:
        termination = "horizon"
    if termination != "sink" and arena.is_sink(at):
        termination = "sink"
    return PlayRecord(v0, edges, tp_trace, mem1, mem2, termination)


# ---------------------------------------------------------------------------
# Consistent-history exploration


@dataclass
class Node:
    vertex: VertexId
    depth: int
    tp: Fraction
    parent: Optional["Node"]
    edge: Optional[Edge]
    state: object = None  # strategy memory state (None for scripted)
    satisfied: bool = False

    def history(self, origin: VertexId) -> History:
        edges = []
        node = self
        while node.edge is not None:
            edges.append(node.edge)
            node = node.parent
        edges.reverse()
        return History(origin, tuple(edges))


@dataclass
class ExploreResult:
    origin: VertexId
    levels: list[list[Node]]
    complete: bool
    nodes: int

    @property
    def level_widths(self) -> list[int]:
        return [len(level) for level in self.levels]


def _node_decision(arena: Arena, origin: VertexId, strategy: Strategy, node: Node) -> Edge:
    if isinstance(strategy, Scripted):
        return strategy.decide(arena, node.history(origin))
    return strategy.choose(arena, node.vertex, node.depth, node.state)


def _child_state(strategy: Strategy, node: Node, edge: Edge):
    if isinstance(strategy, Scripted):
        return None
    return strategy.step_state(node.state, edge)


def _expand(arena: Arena, origin: VertexId, strategy: Strategy, node: Node) -> list[Edge]:
    """Outgoing edges of a node in the strategy-consistent tree."""
    if arena.owner(node.vertex) == strategy.player:
        return [_node_decision(arena, origin, strategy, node)]
    return list(arena.edges(node.vertex))


def explore_consistent(arena: Arena, v0: VertexId, sigma: Strategy, depth: int,
                       node_cap: Optional[int] = None) -> ExploreResult:
    """Level-indexed tree of all sigma-consistent histories from v0.

    Opponent vertices branch over all edges; owned vertices follow the
    strategy.  Exceeding the node cap yields a partial (incomplete)
    result.
    """
    if node_cap is None:
        node_cap = node_cap_from_env()
    root = Node(v0, 0, Fraction(0), None, None,
                None if isinstance(sigma, Scripted) else sigma.initial_state())
    levels = [[root]]
    total = 1
    complete = True
    for d in range(depth):
        nxt: list[Node] = []
        for node in levels[d]:
            for e in _expand(arena, v0, sigma, node):
                child = Node(e.dst, d + 1, node.tp + e.weight, node, e,
                             _child_state(sigma, node, e))
                nxt.append(child)
                total += 1
                if total > node_cap:
                    levels.append(nxt)
                    return ExploreResult(v0, levels, False, total)
        levels.append(nxt)
    return ExploreResult(v0, levels, complete, total)


# ---------------------------------------------------------------------------
# Koenig bound


@dataclass
class KoenigBound:
    level: int
    open_sub: OpenSub


@dataclass
class Inconclusive:
    reason: str
    depth: int = 0
    remaining: int = 0


@dataclass
class RefutedBranch:
    """A lasso along which the open predicate provably never fires."""

    prefix_len: int
    cycle_len: int
    vertex: VertexId
    cycle_tp: Fraction
    detail: str


def koenig_bound(arena: Arena, v0: VertexId, sigma: Strategy, open_sub: OpenSub,
                 max_depth: int, node_cap: Optional[int] = None
                 ) -> Union[KoenigBound, Inconclusive, RefutedBranch]:
    """Least level by which every sigma-consistent history satisfies the
    open sub-objective.

    Satisfied branches are pruned (the predicate is monotone).  Branches
    whose decisions depend only on (vertex, strategy signature) are
    merged, keeping the lowest running total, which is the hardest to
    satisfy.  A repeated (vertex, signature) along a branch with a
    non-positive cycle total refutes the bound for TP-style families.
    """
    if node_cap is None:
        node_cap = node_cap_from_env()
    root = Node(v0, 0, Fraction(0), None, None,
                None if isinstance(sigma, Scripted) else sigma.initial_state())
    frontier = [root]
    total = 1
    for d in range(max_depth):
        if not frontier:
            return KoenigBound(d, open_sub)
        merged: dict[tuple, Node] = {}
        nxt: list[Node] = []
        for node in frontier:
            for e in _expand(arena, v0, sigma, node):
                tp = node.tp + e.weight
                if open_sub.step_satisfies(d + 1, tp, e.weight):
                    continue
                state = _child_state(sigma, node, e)
                child = Node(e.dst, d + 1, tp, node, e, state)
                sig = sigma.signature(d + 1, state)
                if sig is None:
                    nxt.append(child)
                else:
                    key = (e.dst, sig)
                    kept = merged.get(key)
                    if kept is None or tp < kept.tp:
                        merged[key] = child
                total += 1
                if total > node_cap:
                    return Inconclusive("node cap exceeded", d + 1, len(nxt) + len(merged))
        frontier = nxt + list(merged.values())
        refuted = _detect_refuted(sigma, frontier, open_sub)
        if refuted is not None:
            return refuted
    if not frontier:
        return KoenigBound(max_depth, open_sub)
    return Inconclusive("depth exhausted with unsatisfied branches", max_depth, len(frontier))


def _detect_refuted(sigma: Strategy, frontier: list[Node], open_sub: OpenSub
                    ) -> Optional[RefutedBranch]:
    if open_sub.family not in ("tp-sup", "tp-inf"):
        return None
    # pumping a cycle is only consistent with strategies whose choices are
    # independent of the elapsed step count
    if not isinstance(sigma, (Memoryless, FiniteMemory)):
        return None
    bar = Fraction(-1, open_sub.m) if open_sub.family == "tp-sup" else Fraction(open_sub.m)
    for node in frontier:
        sig = sigma.signature(node.depth, node.state)
        if sig is None:
            continue
        anc = node.parent
        while anc is not None:
            if anc.vertex == node.vertex and sigma.signature(anc.depth, anc.state) == sig:
                delta = node.tp - anc.tp
                high = node.tp
                cur = node
                while cur is not anc:
                    high = max(high, cur.tp)
                    cur = cur.parent
                # the pumped branch stays unsatisfied only if every running
                # total along the cycle sits strictly below the firing bar
                if delta <= 0 and high < bar:
                    return RefutedBranch(
                        prefix_len=anc.depth,
                        cycle_len=node.depth - anc.depth,
                        vertex=node.vertex,
                        cycle_tp=delta,
                        detail="unsatisfied branch pumps a cycle with total %s" % delta)
            anc = anc.parent
    return None


# ---------------------------------------------------------------------------
# Certificates


@dataclass
class SinkPayoff:
    final_tp: Fraction
    sink: VertexId
    steps: int


@dataclass
class EarlyExitNegative:
    final_tp: Fraction
    threshold: Fraction
    steps: int


@dataclass
class LevelSatisfaction:
    levels: list[tuple[int, int]]  # (m, k_m)


@dataclass
class Divergence:
    """Finite evidence that the total payoff tends to minus infinity, or
    stays pinned below a negative ceiling, along the unique play.

    ``mode`` is ``decrease`` (every full round after the first boundary
    loses at least ``decrease``, with in-round spikes at most
    ``elevation`` above the round start, optionally TP capped by an
    absolute ``ceiling``, and the round map over memory states closes a
    cycle) or ``stagnation`` (round payoffs never positive and TP never
    above ``ceiling`` < 0 after the first boundary).
    """

    mode: str
    round_starts: list[int]
    horizon: int
    decrease: Optional[Fraction] = None
    elevation: Optional[Fraction] = None
    ceiling: Optional[Fraction] = None
    cycle_from: int = 0  # index into round_starts where the cycle closes
    round_states: list[str] = field(default_factory=list)


@dataclass
class ColourStarvation:
    """Beyond ``after_step``, the named colour never occurs in the play
    within the simulated horizon."""

    colour: Fraction
    after_step: int
    horizon: int


Certificate = Union[SinkPayoff, EarlyExitNegative, KoenigBound, LevelSatisfaction,
                    Divergence, ColourStarvation]


def certificate_to_json(cert: Certificate) -> str:
    def enc(value):
        if isinstance(value, Fraction):
            return str(value)
        if isinstance(value, VertexId):
            return str(value)
        if isinstance(value, OpenSub):
            return {"family": value.family, "m": value.m, "i": value.i,
                    "colour": None if value.colour is None else str(value.colour)}
        if isinstance(value, list):
            return [enc(x) for x in value]
        if isinstance(value, tuple):
            return [enc(x) for x in value]
        return value

    body = {k: enc(v) for k, v in vars(cert).items()}
    return json.dumps({"schema": CERT_SCHEMA, "variant": type(cert).__name__,
                       "body": body}, indent=2, sort_keys=True) + "\n"


def certificate_from_json(text: str) -> Certificate:
    data = json.loads(text)
    if data.get("schema") != CERT_SCHEMA:
        raise ValueError("unknown certificate schema %r" % data.get("schema"))
    variant = data.get("variant")
    body = data.get("body", {})
    if variant == "SinkPayoff":
        return SinkPayoff(Fraction(body["final_tp"]), VertexId.parse(body["sink"]),
                          int(body["steps"]))
    if variant == "EarlyExitNegative":
        return EarlyExitNegative(Fraction(body["final_tp"]), Fraction(body["threshold"]),
                                 int(body["steps"]))
    if variant == "KoenigBound":
        sub = body["open_sub"]
        colour = None if sub["colour"] is None else Fraction(sub["colour"])
        return KoenigBound(int(body["level"]),
                           OpenSub(sub["family"], m=sub["m"], i=sub["i"], colour=colour))
    if variant == "LevelSatisfaction":
        return LevelSatisfaction([(int(m), int(k)) for m, k in body["levels"]])
    if variant == "ColourStarvation":
        return ColourStarvation(Fraction(body["colour"]), int(body["after_step"]),
                                int(body["horizon"]))
    if variant == "Divergence":
        return Divergence(
            mode=body["mode"],
            round_starts=[int(x) for x in body["round_starts"]],
            horizon=int(body["horizon"]),
            decrease=None if body.get("decrease") is None else Fraction(body["decrease"]),
            elevation=None if body.get("elevation") is None else Fraction(body["elevation"]),
            ceiling=None if body.get("ceiling") is None else Fraction(body["ceiling"]),
            cycle_from=int(body.get("cycle_from", 0)),
            round_states=[str(s) for s in body.get("round_states", [])])
    raise ValueError("unknown certificate variant %r" % variant)


@dataclass
class CheckResult:
    ok: bool
    diagnostics: list[str] = field(default_factory=list)

    def fail(self, msg: str) -> "CheckResult":
        self.ok = False
        self.diagnostics.append(msg)
        return self


def check_certificate(cert: Certificate, context: dict) -> CheckResult:
    """Independently re-derive every claim in the certificate.

    ``context`` supplies the referenced objects: ``arena``, ``v0``, and
    either both strategies (play-based variants) or a strategy plus open
    sub-objectives (bound-based variants).
    """
    result = CheckResult(True)
    arena: Arena = context["arena"]
    v0: VertexId = context["v0"]

    if isinstance(cert, (SinkPayoff, EarlyExitNegative, Divergence, ColourStarvation)):
        horizon = cert.steps if isinstance(cert, (SinkPayoff, EarlyExitNegative)) \
            else cert.horizon
        record = play(arena, v0, context["sigma1"], context["sigma2"], horizon + 1)
        if isinstance(cert, SinkPayoff):
            return _check_sink(cert, arena, record, result)
        if isinstance(cert, EarlyExitNegative):
            return _check_early_exit(cert, arena, record, result)
        if isinstance(cert, ColourStarvation):
            tail = record.colours[cert.after_step:]
            if cert.colour in tail:
                return result.fail("colour %s occurs again at step %d"
                                   % (cert.colour, cert.after_step + tail.index(cert.colour)))
            result.diagnostics.append("colour %s absent after step %d over %d steps"
                                      % (cert.colour, cert.after_step, len(record.edges)))
            return result
        return _check_divergence(cert, arena, record, context, result)

    if isinstance(cert, KoenigBound):
        sigma = context["sigma1"]
        again = koenig_bound(arena, v0, sigma, cert.open_sub, cert.level,
                             node_cap=context.get("node_cap"))
        if not isinstance(again, KoenigBound):
            return result.fail("bound did not reproduce: %r" % (again,))
        if again.level > cert.level:
            return result.fail("recomputed level %d exceeds claimed %d"
                               % (again.level, cert.level))
        result.diagnostics.append("bound reproduced at level %d" % again.level)
        return result

    if isinstance(cert, LevelSatisfaction):
        sigma = context["sigma1"]
        subs = context["subs"]  # callable m -> OpenSub
        for m, k_m in cert.levels:
            again = koenig_bound(arena, v0, sigma, subs(m), k_m,
                                 node_cap=context.get("node_cap"))
            if not isinstance(again, KoenigBound) or again.level > k_m:
                return result.fail("level (m=%d, k=%d) failed: %r" % (m, k_m, again))
            result.diagnostics.append("m=%d certified at level %d <= %d" % (m, again.level, k_m))
        return result

    return result.fail("unknown certificate %r" % (cert,))


def _check_sink(cert: SinkPayoff, arena: Arena, record: PlayRecord,
                result: CheckResult) -> CheckResult:
    if record.termination != "sink":
        return result.fail("play does not reach a sink within %d steps" % cert.steps)
    final_vertex = record.vertex_at(len(record.edges))
    if not arena.is_sink(final_vertex):
        return result.fail("%s is not an absorbing weight-0 self-loop" % final_vertex)
    if final_vertex != cert.sink:
        return result.fail("sink mismatch: played %s, claimed %s" % (final_vertex, cert.sink))
    if record.final_tp != cert.final_tp:
        return result.fail("final TP %s differs from claimed %s"
                           % (record.final_tp, cert.final_tp))
    result.diagnostics.append("sink %s reached with TP %s" % (cert.sink, cert.final_tp))
    return result


def _check_early_exit(cert: EarlyExitNegative, arena: Arena, record: PlayRecord,
                      result: CheckResult) -> CheckResult:
    if record.termination != "sink":
        return result.fail("play does not reach a sink within %d steps" % cert.steps)
    if record.final_tp != cert.final_tp:
        return result.fail("final TP %s differs from claimed %s"
                           % (record.final_tp, cert.final_tp))
    if not record.final_tp < cert.threshold:
        return result.fail("final TP %s is not below the threshold %s"
                           % (record.final_tp, cert.threshold))
    result.diagnostics.append("absorbed with TP %s < %s" % (cert.final_tp, cert.threshold))
    return result


def _check_divergence(cert: Divergence, arena: Arena, record: PlayRecord,
                      context: dict, result: CheckResult) -> CheckResult:
    if record.termination == "sink":
        return result.fail("play reaches a sink; no divergence")
    starts = cert.round_starts
    if len(starts) < 2 or any(b <= a for a, b in zip(starts, starts[1:])):
        return result.fail("round boundaries must be strictly increasing, >= 2 of them")
    if starts[-1] > len(record.edges):
        return result.fail("round boundaries exceed the simulated horizon")

    if cert.mode == "decrease":
        if cert.decrease is None or cert.decrease < 1:
            return result.fail("decrease certificates need a per-round decrease >= 1")
        if cert.elevation is None or cert.elevation < 0:
            return result.fail("decrease certificates need an elevation bound >= 0")
        for a, b in zip(starts, starts[1:]):
            round_payoff = record.tp_at(b) - record.tp_at(a)
            if round_payoff > -cert.decrease:
                return result.fail("round at step %d has payoff %s > -%s"
                                   % (a, round_payoff, cert.decrease))
            spike = max(record.tp_at(s) for s in range(a, b + 1)) - record.tp_at(a)
            if spike > cert.elevation:
                return result.fail("in-round spike %s exceeds elevation bound %s"
                                   % (spike, cert.elevation))
        if cert.ceiling is not None:
            high = max(record.tp_at(s) for s in range(starts[0], len(record.edges) + 1))
            if high > cert.ceiling:
                return result.fail("TP reaches %s above the ceiling %s" % (high, cert.ceiling))
    elif cert.mode == "stagnation":
        if cert.ceiling is None or cert.ceiling >= 0:
            return result.fail("stagnation certificates need a negative ceiling")
        for a, b in zip(starts, starts[1:]):
            if record.tp_at(b) - record.tp_at(a) > 0:
                return result.fail("round at step %d gains payoff" % a)
        high = max(record.tp_at(s) for s in range(starts[0], len(record.edges) + 1))
        if high > cert.ceiling:
            return result.fail("TP reaches %s above the ceiling %s" % (high, cert.ceiling))
    else:
        return result.fail("unknown divergence mode %r" % cert.mode)

    # Cycle closure: the round map over (vertex, strategy memory) must
    # repeat so the certified rounds describe the whole infinite play.
    cf = cert.cycle_from
    if not (0 <= cf < len(starts) - 1):
        return result.fail("cycle_from out of range")
    sig_a = _round_signature(record, context, starts[cf])
    sig_b = _round_signature(record, context, starts[-1])
    if sig_a != sig_b:
        return result.fail("round-start states differ: %r vs %r" % (sig_a, sig_b))
    if cert.round_states:
        recomputed = [_round_signature(record, context, s) for s in starts]
        if [str(s) for s in recomputed] != cert.round_states:
            return result.fail("claimed round states do not match the replay")
    result.diagnostics.append("verified %d rounds, cycle closes from round %d"
                              % (len(starts) - 1, cf))
    return result


def _round_signature(record: PlayRecord, context: dict, step: int):
    """Vertex family plus both strategies' memory states at a position.

    Successive rounds of a diverging play visit different indexed
    vertices of the same family (t_i, t_{i+j}, ...), so the closure check
    compares the vertex name and the repeating memory states; the
    quantitative round bounds carry the payoff claim.
    """
    vertex = record.vertex_at(step)
    mems = []
    for trace in (record.mem1_trace, record.mem2_trace):
        mems.append(None if step == 0 else trace[step - 1])
    return (vertex.name, _fmt_mem(mems[0]), _fmt_mem(mems[1]))
