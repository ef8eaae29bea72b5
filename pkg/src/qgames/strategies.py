"""Strategy representations and evaluation.

A strategy for one player is a pure function from histories ending in
that player's vertices to outgoing edges.  Five representations are
supported: memoryless tables, finite-memory (Mealy) tables, step-counter
tables, step-counter-plus-K-states tables, and scripted callbacks for
closed-form strategies no finite table can hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from .arena import (Arena, Edge, History, MealyMemory, StepCounterTimesK,
                    VertexId, Weight)

FIRST_EDGE = "first"
ERROR = "error"


class HorizonExceeded(Exception):
    def __init__(self, vertex: VertexId, step: int):
        super().__init__("no table entry for %s at step %d and fallback is 'error'" % (vertex, step))
        self.vertex = vertex
        self.step = step


class Strategy:
    """Base class.  Subclasses implement ``decide`` and the incremental
    state API used by the exploration engine."""

    player: int = 1
    name: str = "strategy"

    # -- incremental API -------------------------------------------------
    def initial_state(self):
        return None

    def step_state(self, state, edge: Edge):
        return None

    def choose(self, arena: Arena, vertex: VertexId, step: int, state) -> Edge:
        raise NotImplementedError

    def signature(self, step: int, state) -> Optional[tuple]:
        """Dedupe key for exploration: histories of equal length ending at
        the same vertex with equal signatures get identical decisions
        forever.  ``None`` disables merging (history-dependent
        strategies)."""
        return None

    # -- history API -----------------------------------------------------
    def decide(self, arena: Arena, history: History) -> Edge:
        state = self.initial_state()
        for e in history.edges:
            state = self.step_state(state, e)
        return self.choose(arena, history.to_vertex, len(history), state)

    def _fallback_edge(self, arena: Arena, vertex: VertexId, step: int, rule: str) -> Edge:
        if rule == FIRST_EDGE:
            return arena.edges(vertex)[0]
        raise HorizonExceeded(vertex, step)


class Memoryless(Strategy):
    def __init__(self, table: Union[dict[VertexId, Edge], Callable[[Arena, VertexId], Edge]],
                 player: int = 1, name: str = "memoryless"):
        self.table = table
        self.player = player
        self.name = name

    def choose(self, arena, vertex, step, state):
        if callable(self.table):
            return self.table(arena, vertex)
        try:
            return self.table[vertex]
        except KeyError:
            raise KeyError("memoryless table has no entry for %s" % vertex)

    def signature(self, step, state):
        return ()


class FiniteMemory(Strategy):
    """A Mealy memory structure plus a (vertex, state) decision table."""

    def __init__(self, mealy: MealyMemory,
                 table: Union[dict[tuple[VertexId, object], Edge],
                              Callable[[Arena, VertexId, object], Edge]],
                 player: int = 1, name: str = "fm"):
        self.mealy = mealy
        self.table = table
        self.player = player
        self.name = name

    def initial_state(self):
        return self.mealy.initial()

    def step_state(self, state, edge):
        return self.mealy.update(state, edge)

    def choose(self, arena, vertex, step, state):
        if callable(self.table):
            return self.table(arena, vertex, state)
        try:
            return self.table[(vertex, state)]
        except KeyError:
            raise KeyError("fm table has no entry for (%s, %r)" % (vertex, state))

    def signature(self, step, state):
        return (state,)


class StepCounterTable(Strategy):
    """Decisions from (vertex, elapsed steps), fixed up to a horizon."""

    def __init__(self, table: dict[tuple[VertexId, int], Edge], horizon: int,
                 fallback: str = FIRST_EDGE, player: int = 1, name: str = "sc"):
        self.table = dict(table)
        self.horizon = horizon
        self.fallback = fallback
        self.player = player
        self.name = name

    def choose(self, arena, vertex, step, state):
        if step < self.horizon:
            hit = self.table.get((vertex, step))
            if hit is not None:
                return hit
        return self._fallback_edge(arena, vertex, step, self.fallback)

    def signature(self, step, state):
        return ()


class StepCounterPlusK(Strategy):
    """Decisions from (vertex, step, mode) with a finite mode update.

    ``bit_update`` maps ((step, mode), edge) to the next mode; missing
    entries keep the mode unchanged (dict form) so partial tables degrade
    gracefully past the horizon.
    """

    def __init__(self, k: int, table: dict[tuple[VertexId, int, int], Edge], horizon: int,
                 bit_update: Union[dict[tuple[int, int, Edge], int],
                                   Callable[[tuple[int, int], Edge], int]],
                 fallback: str = FIRST_EDGE, player: int = 1, name: str = "sc+k"):
        self.k = k
        self.table = dict(table)
        self.horizon = horizon
        self.bit_update = bit_update
        self.fallback = fallback
        self.player = player
        self.name = name

    def memory_structure(self) -> StepCounterTimesK:
        return StepCounterTimesK(self.k, self._update_mode)

    def _update_mode(self, sm: tuple[int, int], edge: Edge) -> int:
        if callable(self.bit_update):
            return self.bit_update(sm, edge)
        return self.bit_update.get((sm[0], sm[1], edge), sm[1])

    def initial_state(self):
        return (0, 0)

    def step_state(self, state, edge):
        s, m = state
        return (s + 1, self._update_mode((s, m), edge))

    def choose(self, arena, vertex, step, state):
        mode = state[1] if state is not None else 0
        if step < self.horizon:
            hit = self.table.get((vertex, step, mode))
            if hit is not None:
                return hit
        return self._fallback_edge(arena, vertex, step, self.fallback)

    def signature(self, step, state):
        return (state[1],)


class Scripted(Strategy):
    """Named deterministic callback over full histories."""

    def __init__(self, name: str, fn: Callable[[Arena, History], Edge], player: int = 1,
                 step_determined: bool = False):
        self.name = name
        self.fn = fn
        self.player = player
        # True when decisions provably depend on (vertex, step) only;
        # lets the engine merge exploration branches.
        self.step_determined = step_determined

    def initial_state(self):
        raise NotImplementedError("scripted strategies decide from full histories")

    def decide(self, arena, history):
        return self.fn(arena, history)

    def signature(self, step, state):
        return () if self.step_determined else None


# ---------------------------------------------------------------------------
# Consistency and collapse


def consistent(arena: Arena, strategy: Strategy, history: History) -> bool:
    """True iff the history follows the strategy at every owned vertex."""
    state = None
    incremental = not isinstance(strategy, Scripted)
    if incremental:
        state = strategy.initial_state()
    at = history.origin
    for idx, e in enumerate(history.edges):
        if arena.owner(at) == strategy.player:
            if incremental:
                move = strategy.choose(arena, at, idx, state)
            else:
                move = strategy.decide(arena, history.prefix(idx))
            if move != e:
                return False
        if incremental:
            state = strategy.step_state(state, e)
        at = e.dst
    return True


def collapse_sc_fm(arena: Arena, strategy: Strategy, n_map: dict[VertexId, int]
                   ) -> Strategy:
    """Collapse a step-counter(-plus-K) strategy on a step-count-encoding
    arena into a K-state finite-memory strategy (memoryless for K = 1).

    The new decision at (v, m) is the old decision at (v, n_v, m) and the
    new memory update on edge e is the old mode update at step
    n_{from(e)}.  Faithful whenever every history from the start to v has
    length exactly n_v.
    """

    def level(v: VertexId) -> int:
        try:
            return n_map[v]
        except KeyError:
            raise KeyError("vertex %s missing from the step-count map" % v)

    if isinstance(strategy, StepCounterTable):
        table = {}
        for v, n in n_map.items():
            if arena.owner(v) != strategy.player:
                continue
            table[v] = strategy.choose(arena, v, n, None)
        return Memoryless(table, player=strategy.player, name=strategy.name + "+collapsed")

    if isinstance(strategy, StepCounterPlusK):
        modes = tuple(range(strategy.k))

        def update(mode, edge: Edge):
            return strategy._update_mode((level(edge.src), mode), edge)

        mealy = MealyMemory(modes, 0, update)
        table = {}
        for v, n in n_map.items():
            if arena.owner(v) != strategy.player:
                continue
            for mode in modes:
                table[(v, mode)] = strategy.choose(arena, v, n, (n, mode))
        return FiniteMemory(mealy, table, player=strategy.player,
                            name=strategy.name + "+collapsed")

    raise TypeError("collapse applies to step-counter strategies, got %s"
                    % type(strategy).__name__)


# ---------------------------------------------------------------------------
# File format


def serialize_strategy(strategy: Strategy) -> str:
    """Strategy file text for table-based strategies."""
    lines = []
    if isinstance(strategy, Memoryless):
        if callable(strategy.table):
            raise ValueError("callable-backed strategy is not serializable")
        lines.append("strategy %s kind=memoryless player=%d" % (strategy.name, strategy.player))
        for v in sorted(strategy.table):
            e = strategy.table[v]
            lines.append("move %s -> %s weight=%s" % (v, e.dst, _fmt_w(e.weight)))
    elif isinstance(strategy, StepCounterTable):
        lines.append("strategy %s kind=sc horizon=%d fallback=%s player=%d"
                     % (strategy.name, strategy.horizon, strategy.fallback, strategy.player))
        for (v, s) in sorted(strategy.table, key=lambda key: (key[1], key[0])):
            e = strategy.table[(v, s)]
            lines.append("move %s step=%d -> %s weight=%s" % (v, s, e.dst, _fmt_w(e.weight)))
    elif isinstance(strategy, StepCounterPlusK):
        if callable(strategy.bit_update):
            raise ValueError("callable bit update is not serializable")
        lines.append("strategy %s kind=sc+k states=%d horizon=%d fallback=%s player=%d"
                     % (strategy.name, strategy.k, strategy.horizon, strategy.fallback,
                        strategy.player))
        for (v, s, m) in sorted(strategy.table, key=lambda key: (key[1], key[2], key[0])):
            e = strategy.table[(v, s, m)]
            lines.append("move %s state=%d step=%d -> %s weight=%s"
                         % (v, m, s, e.dst, _fmt_w(e.weight)))
        for (s, m, e) in sorted(strategy.bit_update,
                                key=lambda key: (key[0], key[1], key[2].src, key[2].dst, key[2].weight)):
            nm = strategy.bit_update[(s, m, e)]
            lines.append("bitupd state=%d step=%d edge=%s->%s weight=%s -> %d"
                         % (m, s, e.src, e.dst, _fmt_w(e.weight), nm))
    elif isinstance(strategy, FiniteMemory):
        if callable(strategy.table):
            raise ValueError("callable-backed strategy is not serializable")
        lines.append("strategy %s kind=fm states=%d player=%d"
                     % (strategy.name, len(strategy.mealy.states), strategy.player))
        for (v, m) in sorted(strategy.table, key=lambda key: (key[1], key[0])):
            e = strategy.table[(v, m)]
            lines.append("move %s state=%d -> %s weight=%s" % (v, m, e.dst, _fmt_w(e.weight)))
    else:
        raise ValueError("strategy kind %s is not serializable" % type(strategy).__name__)
    return "\n".join(lines) + "\n"


def _fmt_w(w: Weight) -> str:
    return str(w)


def parse_strategy(text: str) -> Strategy:
    """Parse the strategy file format; inverse of serialize_strategy."""
    header = None
    moves = []
    bitupds = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "strategy":
                header = _parse_header(parts)
            elif parts[0] == "move":
                moves.append(_parse_move(parts))
            elif parts[0] == "bitupd":
                bitupds.append(_parse_bitupd(parts))
            else:
                raise ValueError("unknown directive %r" % parts[0])
        except ValueError as exc:
            raise ValueError("line %d: %s" % (lineno, exc))
    if header is None:
        raise ValueError("missing 'strategy' header line")
    name, kind, attrs = header
    player = int(attrs.get("player", "1"))
    fallback = {"first": FIRST_EDGE, "error": ERROR}.get(attrs.get("fallback", "first"))
    if fallback is None:
        raise ValueError("unknown fallback rule %r" % attrs.get("fallback"))
    if kind == "memoryless":
        table = {}
        for v, state, step, edge in moves:
            table[v] = edge
        return Memoryless(table, player=player, name=name)
    if kind == "sc":
        horizon = int(attrs["horizon"])
        table = {}
        for v, state, step, edge in moves:
            if step is None:
                raise ValueError("sc move without step=")
            table[(v, step)] = edge
        return StepCounterTable(table, horizon, fallback, player=player, name=name)
    if kind == "sc+k":
        k = int(attrs["states"])
        horizon = int(attrs["horizon"])
        table = {}
        for v, state, step, edge in moves:
            if step is None or state is None:
                raise ValueError("sc+k move needs state= and step=")
            table[(v, step, state)] = edge
        upd = {(s, m, e): nm for (m, s, e, nm) in bitupds}
        return StepCounterPlusK(k, table, horizon, upd, fallback, player=player, name=name)
    if kind == "fm":
        raise ValueError("fm strategy files are not supported; use sc or sc+k")
    raise ValueError("unknown strategy kind %r" % kind)


def _parse_header(parts: list[str]):
    if len(parts) < 3:
        raise ValueError("strategy header needs a name and kind=")
    name = parts[1]
    attrs = {}
    for part in parts[2:]:
        if "=" not in part:
            raise ValueError("malformed attribute %r" % part)
        key, _, val = part.partition("=")
        attrs[key] = val
    if "kind" not in attrs:
        raise ValueError("strategy header needs kind=")
    return name, attrs.pop("kind"), attrs


def _parse_move(parts: list[str]):
    # move <vertex> [state=<m>] [step=<s>] -> <to> weight=<w>
    try:
        arrow = parts.index("->")
    except ValueError:
        raise ValueError("move line without ->")
    v = VertexId.parse(parts[1])
    state = step = None
    for part in parts[2:arrow]:
        key, _, val = part.partition("=")
        if key == "state":
            state = int(val)
        elif key == "step":
            step = int(val)
        else:
            raise ValueError("unknown move attribute %r" % key)
    rest = parts[arrow + 1:]
    if len(rest) != 2 or not rest[1].startswith("weight="):
        raise ValueError("move line needs '-> <to> weight=<w>'")
    dst = VertexId.parse(rest[0])
    weight = Fraction(rest[1][len("weight="):])
    return v, state, step, Edge(v, weight, dst)


def _parse_bitupd(parts: list[str]):
    # bitupd state=<m> step=<s> edge=<from>-><to> weight=<w> -> <m'>
    try:
        arrow = len(parts) - 1 - parts[::-1].index("->")
    except ValueError:
        raise ValueError("bitupd line without ->")
    state = step = None
    src = dst = None
    weight = None
    for part in parts[1:arrow]:
        key, _, val = part.partition("=")
        if key == "state":
            state = int(val)
        elif key == "step":
            step = int(val)
        elif key == "edge":
            s, _, d = val.partition("->")
            src, dst = VertexId.parse(s), VertexId.parse(d)
        elif key == "weight":
            weight = Fraction(val)
        else:
            raise ValueError("unknown bitupd attribute %r" % key)
    if None in (state, step, src, dst, weight):
        raise ValueError("bitupd needs state=, step=, edge= and weight=")
    nm = int(parts[arrow + 1])
    return state, step, Edge(src, weight, dst), nm
