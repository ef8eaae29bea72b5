"""Game arenas: explicit graphs, lazy generators, histories, memory structures.

An arena is a directed graph whose vertices are partitioned between two
players and whose edges carry exact rational weights.  Arenas are
non-blocking (every vertex has at least one outgoing edge) and finitely
branching.  Infinite arenas are represented by deterministic lazy
generators that expand one vertex at a time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional, Union

Weight = Fraction

P1 = 1
P2 = 2

DEFAULT_VERTEX_CAP = 10**6


@dataclass(frozen=True, order=True)
class VertexId:
    """Structured vertex identifier: a name plus integer parameters.

    Totally ordered (name first, then parameters) so that edge lists and
    all downstream tie-breaking are deterministic.
    """

    name: str
    params: tuple[int, ...] = ()

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return "%s(%s)" % (self.name, ",".join(str(p) for p in self.params))

    @staticmethod
    def parse(text: str) -> "VertexId":
        text = text.strip()
        if text.endswith(")") and "(" in text:
            name, _, rest = text.partition("(")
            body = rest[:-1]
            if not name:
                raise ValueError("vertex id with empty name: %r" % text)
            params = tuple(int(p) for p in body.split(",")) if body else ()
            return VertexId(name, params)
        if "(" in text or ")" in text:
            raise ValueError("malformed vertex id: %r" % text)
        return VertexId(text)


V = VertexId  # short alias used heavily by the zoo


@dataclass(frozen=True)
class Edge:
    src: VertexId
    weight: Weight
    dst: VertexId

    def __str__(self) -> str:
        return "%s -%s-> %s" % (self.src, self.weight, self.dst)


def _edge_sort_key(e: Edge):
    return (e.dst, e.weight)


def make_edge(src: VertexId, weight, dst: VertexId) -> Edge:
    return Edge(src, Fraction(weight), dst)


class Arena:
    """Common interface for explicit arenas and lazy generators."""

    name: str

    def owner(self, v: VertexId) -> int:
        raise NotImplementedError

    def edges(self, v: VertexId) -> tuple[Edge, ...]:
        raise NotImplementedError

    @property
    def start(self) -> Optional[VertexId]:
        raise NotImplementedError

    def is_sink(self, v: VertexId) -> bool:
        """A sink is a vertex whose only edge is a weight-0 self-loop."""
        es = self.edges(v)
        return len(es) == 1 and es[0].dst == v and es[0].weight == 0


class ArenaExplicit(Arena):
    """Finite arena given by explicit vertex and edge maps."""

    def __init__(
        self,
        owners: dict[VertexId, int],
        edges: Iterable[Edge],
        start: Optional[VertexId] = None,
        name: str = "arena",
        vertex_cap: int = DEFAULT_VERTEX_CAP,
    ):
        if len(owners) > vertex_cap:
            raise ValueError("arena exceeds vertex cap %d" % vertex_cap)
        self.name = name
        self._owners = dict(owners)
        self._adj: dict[VertexId, tuple[Edge, ...]] = {v: () for v in owners}
        buckets: dict[VertexId, list[Edge]] = {v: [] for v in owners}
        for e in edges:
            if e.src not in owners:
                raise ValueError("edge from undeclared vertex %s" % e.src)
            if e.dst not in owners:
                raise ValueError("edge to undeclared vertex %s" % e.dst)
            buckets[e.src].append(e)
        for v, bucket in buckets.items():
            self._adj[v] = tuple(sorted(bucket, key=_edge_sort_key))
        if start is not None and start not in owners:
            raise ValueError("start vertex %s not declared" % start)
        self._start = start

    @property
    def start(self) -> Optional[VertexId]:
        return self._start

    @property
    def vertices(self) -> tuple[VertexId, ...]:
        return tuple(sorted(self._owners))

    def owner(self, v: VertexId) -> int:
        return self._owners[v]

    def edges(self, v: VertexId) -> tuple[Edge, ...]:
        return self._adj[v]

    def with_start(self, start: VertexId) -> "ArenaExplicit":
        return ArenaExplicit(self._owners, [e for es in self._adj.values() for e in es],
                             start, self.name)


class ArenaGenerator(Arena):
    """Lazily expanded arena.

    ``expand`` maps a vertex to its owner and outgoing edge list; it must
    be pure.  Expansions are memoized, but semantics do not depend on the
    cache (``cache=False`` disables it).
    """

    def __init__(
        self,
        root: VertexId,
        expand: Callable[[VertexId], tuple[int, tuple[Edge, ...]]],
        name: str = "generator",
        branching_bound: Optional[int] = None,
        cache: bool = True,
    ):
        self.name = name
        self.root = root
        self._expand = expand
        self.branching_bound = branching_bound
        self._cache_enabled = cache
        self._cache: dict[VertexId, tuple[int, tuple[Edge, ...]]] = {}

    @property
    def start(self) -> Optional[VertexId]:
        return self.root

    def _lookup(self, v: VertexId) -> tuple[int, tuple[Edge, ...]]:
        if self._cache_enabled:
            hit = self._cache.get(v)
            if hit is not None:
                return hit
        owner, es = self._expand(v)
        es = tuple(sorted(es, key=_edge_sort_key))
        if not es:
            raise ValueError("generator produced blocking vertex %s" % v)
        result = (owner, es)
        if self._cache_enabled:
            self._cache[v] = result
        return result

    def owner(self, v: VertexId) -> int:
        return self._lookup(v)[0]

    def edges(self, v: VertexId) -> tuple[Edge, ...]:
        return self._lookup(v)[1]


@dataclass(frozen=True)
class History:
    """A finite contiguous edge sequence from an origin vertex.

    Length 0 is allowed (the empty history at ``origin``).
    """

    origin: VertexId
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        at = self.origin
        for e in self.edges:
            if e.src != at:
                raise ValueError("non-contiguous history at %s: %s" % (at, e))
            at = e.dst

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def to_vertex(self) -> VertexId:
        return self.edges[-1].dst if self.edges else self.origin

    @property
    def word(self) -> tuple[Weight, ...]:
        return tuple(e.weight for e in self.edges)

    def total(self) -> Weight:
        return sum((e.weight for e in self.edges), Fraction(0))

    def extend(self, e: Edge) -> "History":
        return History(self.origin, self.edges + (e,))

    def prefix(self, n: int) -> "History":
        return History(self.origin, self.edges[:n])

    def suffix_from(self, n: int) -> "History":
        return History(self.prefix(n).to_vertex, self.edges[n:])


# ---------------------------------------------------------------------------
# Memory structures


class MemoryStructure:
    """Base class: an initial state plus a total update function."""

    def initial(self):
        raise NotImplementedError

    def update(self, state, edge: Edge):
        raise NotImplementedError

    def run(self, history: History):
        """delta* over the whole history."""
        state = self.initial()
        for e in history.edges:
            state = self.update(state, e)
        return state


class MealyMemory(MemoryStructure):
    """Finite memory: explicit state set with an edge-driven update."""

    def __init__(self, states: Iterable, initial, update: Callable[[object, Edge], object]):
        self.states = tuple(states)
        self._initial = initial
        self._update = update

    def initial(self):
        return self._initial

    def update(self, state, edge: Edge):
        nxt = self._update(state, edge)
        if nxt not in self.states:
            raise ValueError("memory update left the state set: %r" % (nxt,))
        return nxt


class StepCounter(MemoryStructure):
    """Counts elapsed steps; the update ignores the edge."""

    def initial(self) -> int:
        return 0

    def update(self, state: int, edge: Edge) -> int:
        return state + 1


class StepCounterTimesK(MemoryStructure):
    """A step counter paired with K extra finite states.

    States are pairs (step, mode); the update is
    (s, m) -> (s + 1, delta'((s, m), e)).
    """

    def __init__(self, k: int, mode_update: Callable[[tuple[int, int], Edge], int], initial_mode: int = 0):
        if k < 1:
            raise ValueError("K must be >= 1")
        self.k = k
        self._mode_update = mode_update
        self._initial_mode = initial_mode

    def initial(self) -> tuple[int, int]:
        return (0, self._initial_mode)

    def update(self, state: tuple[int, int], edge: Edge) -> tuple[int, int]:
        s, m = state
        nm = self._mode_update((s, m), edge)
        if not (0 <= nm < self.k):
            raise ValueError("mode update out of range: %r" % (nm,))
        return (s + 1, nm)


def _encode_mem_state(state) -> tuple[int, ...]:
    if isinstance(state, bool):
        return (int(state),)
    if isinstance(state, int):
        return (state,)
    if isinstance(state, tuple):
        out: list[int] = []
        for part in state:
            out.extend(_encode_mem_state(part))
        return tuple(out)
    raise TypeError("cannot encode memory state %r into a product vertex" % (state,))


def product(arena: Arena, memory: MemoryStructure, start: Optional[VertexId] = None) -> Arena:
    """Product arena: vertices (v, m), updates threaded through the memory.

    Product vertices are encoded as VertexIds whose name is the base name
    suffixed with ``*`` and whose parameters append the encoded memory
    state.  Explicit x Mealy stays explicit; anything involving a step
    counter (or a generator input) becomes a generator.
    """

    if start is None:
        start = arena.start
    if start is None:
        raise ValueError("product needs a start vertex")

    base_param_len: dict[str, int] = {}

    def pack(v: VertexId, state) -> VertexId:
        base_param_len.setdefault(v.name, len(v.params))
        return VertexId(v.name + "*", v.params + _encode_mem_state(state))

    state_of: dict[VertexId, tuple[VertexId, object]] = {}

    def register(v: VertexId, state) -> VertexId:
        pv = pack(v, state)
        state_of[pv] = (v, state)
        return pv

    root = register(start, memory.initial())

    def expand(pv: VertexId) -> tuple[int, tuple[Edge, ...]]:
        try:
            v, state = state_of[pv]
        except KeyError:
            raise ValueError("unreachable product vertex %s" % pv)
        out = []
        for e in arena.edges(v):
            nxt = register(e.dst, memory.update(state, e))
            out.append(Edge(pv, e.weight, nxt))
        return arena.owner(v), tuple(out)

    gen = ArenaGenerator(root, expand, name=arena.name + "@mem")

    finite_mealy = isinstance(memory, MealyMemory)
    if isinstance(arena, ArenaExplicit) and finite_mealy:
        owners: dict[VertexId, int] = {}
        edges: list[Edge] = []
        for v in arena.vertices:
            for state in memory.states:
                pv = register(v, state)
                owners[pv] = arena.owner(v)
                for e in arena.edges(v):
                    edges.append(Edge(pv, e.weight, register(e.dst, memory.update(state, e))))
        return ArenaExplicit(owners, edges, start=root, name=arena.name + "@mem")
    return gen


# ---------------------------------------------------------------------------
# Validation and structural checks


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    explored: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(arena: Arena, start: Optional[VertexId] = None, depth: int = 50,
             vertex_cap: int = DEFAULT_VERTEX_CAP) -> ValidationReport:
    """Check non-blocking, endpoint declaration, and generator determinism.

    Explicit arenas are checked in full; generators are explored breadth
    first from the start vertex to ``depth``, probing each vertex twice to
    catch nondeterministic expansion.
    """

    report = ValidationReport()
    if isinstance(arena, ArenaExplicit):
        for v in arena.vertices:
            if not arena.edges(v):
                report.violations.append("blocking vertex %s" % v)
        report.explored = len(arena.vertices)
        return report

    if start is None:
        start = arena.start
    if start is None:
        report.violations.append("generator without a start vertex")
        return report

    assert isinstance(arena, ArenaGenerator)
    seen: set[VertexId] = {start}
    frontier = [start]
    for _ in range(depth + 1):
        nxt: list[VertexId] = []
        for v in frontier:
            try:
                first = arena._expand(v)
                second = arena._expand(v)
            except Exception as exc:  # expansion itself failed
                report.violations.append("expansion failed at %s: %s" % (v, exc))
                continue
            if first != second:
                report.violations.append("nondeterministic expansion at %s" % v)
            owner, es = first
            es = tuple(sorted(es, key=_edge_sort_key))
            if owner not in (P1, P2):
                report.violations.append("bad owner at %s: %r" % (v, owner))
            if not es:
                report.violations.append("blocking vertex %s" % v)
            if arena.branching_bound is not None and len(es) > arena.branching_bound:
                report.violations.append("branching bound exceeded at %s" % v)
            for e in es:
                if e.src != v:
                    report.violations.append("edge source mismatch at %s: %s" % (v, e))
                if e.dst not in seen:
                    seen.add(e.dst)
                    if len(seen) > vertex_cap:
                        report.violations.append("vertex cap exceeded during exploration")
                        report.explored = len(seen)
                        return report
                    nxt.append(e.dst)
        frontier = nxt
        if not frontier:
            break
    report.explored = len(seen)
    return report


@dataclass
class StepCountResult:
    """Result of the step-count encoding check.

    ``levels`` maps each fully explored vertex to the unique length of
    every history from the start reaching it.  ``counterexample`` holds two
    histories with the same endpoint and different lengths when the arena
    does not encode the step count.  ``frontier`` lists vertices first seen
    at the final level, whose uniqueness could not be confirmed.
    """

    levels: Optional[dict[VertexId, int]]
    counterexample: Optional[tuple[History, History]]
    frontier: tuple[VertexId, ...] = ()


def encodes_step_count(arena: Arena, v0: VertexId, depth: int) -> StepCountResult:
    """Decide whether every history from v0 to a vertex has a fixed length.

    Explores the reachable (vertex, level) graph breadth first to
    ``depth``.  Returns either a level map or a concrete counterexample.
    """

    first_level: dict[VertexId, int] = {v0: 0}
    # parent pointers over (vertex, level) pairs, for counterexample paths
    parent: dict[tuple[VertexId, int], tuple[tuple[VertexId, int], Edge]] = {}
    frontier: list[VertexId] = [v0]
    seen_pairs: set[tuple[VertexId, int]] = {(v0, 0)}

    def path_to(pair: tuple[VertexId, int]) -> History:
        edges: list[Edge] = []
        while pair in parent:
            pair, e = parent[pair]
            edges.append(e)
        edges.reverse()
        return History(v0, tuple(edges))

    for level in range(depth):
        nxt: list[VertexId] = []
        for v in frontier:
            for e in arena.edges(v):
                w = e.dst
                pair = (w, level + 1)
                if w in first_level and first_level[w] != level + 1:
                    # two histories, same endpoint, different lengths
                    if pair not in parent:
                        parent[pair] = ((v, level), e)
                    other = path_to((w, first_level[w]))
                    this = path_to(pair)
                    return StepCountResult(None, (other, this))
                if pair not in seen_pairs:
                    seen_pairs.add(pair)
                    parent[pair] = ((v, level), e)
                    if w not in first_level:
                        first_level[w] = level + 1
                        nxt.append(w)
        frontier = nxt
        if not frontier:
            return StepCountResult(dict(first_level), None)
    return StepCountResult(dict(first_level), None, frontier=tuple(sorted(frontier)))


# ---------------------------------------------------------------------------
# DOT export


def to_dot(arena: Arena, start: Optional[VertexId] = None, depth: int = 12) -> str:
    """DOT rendering of a bounded exploration from the start vertex."""

    if start is None:
        start = arena.start
    if start is None and isinstance(arena, ArenaExplicit):
        vertices = list(arena.vertices)
    else:
        if start is None:
            raise ValueError("DOT export of a generator needs a start vertex")
        vertices = []
        seen = {start}
        frontier = [start]
        for _ in range(depth):
            nxt = []
            for v in frontier:
                vertices.append(v)
                for e in arena.edges(v):
                    if e.dst not in seen:
                        seen.add(e.dst)
                        nxt.append(e.dst)
            frontier = nxt
        vertices.extend(frontier)
        vertices = sorted(set(vertices))
    lines = ["digraph %s {" % _dot_id(arena.name)]
    vset = set(vertices)
    for v in sorted(vset):
        shape = "box" if arena.owner(v) == P2 else "ellipse"
        lines.append('  %s [label="%s|P%d", shape=%s];' % (_dot_id(str(v)), v, arena.owner(v), shape))
    for v in sorted(vset):
        for e in arena.edges(v):
            if e.dst in vset:
                lines.append('  %s -> %s [label="%s"];' % (_dot_id(str(v)), _dot_id(str(e.dst)), e.weight))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_id(text: str) -> str:
    return '"%s"' % text.replace('"', '\\"')


def node_cap_from_env(default: int = 10**6) -> int:
    raw = os.environ.get("QG_NODE_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return default
