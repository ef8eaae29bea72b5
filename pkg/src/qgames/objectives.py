"""Payoff functions, quantitative objectives, open decompositions, lassos.

Objectives are sets of infinite weight words defined by a limit of total
payoff (TP) or mean payoff (MP).  The synthesizers work with countable
intersections of *open* sub-objectives: each open sub-objective is
witnessed by a finite prefix, has a monotone ``already_satisfies``
predicate, and carries a total preorder on equal-length prefixes that
ranks how good their continuations are.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .arena import Arena, ArenaGenerator, Edge, VertexId, Weight

POS_INF = float("inf")
NEG_INF = float("-inf")

ExtValue = Union[Fraction, float]  # floats only ever hold +-infinity

TP = "tp"
MP = "mp"
BUCHI_ALL = "buchi-all"

LE = "LE"
GE = "GE"
BOTH = "BOTH"


def payoff(kind: str, word: Sequence[Weight]) -> Fraction:
    """Total or mean payoff of a finite weight word."""
    if kind == TP:
        return sum(word, Fraction(0))
    if kind == MP:
        if not word:
            raise ValueError("mean payoff of the empty word is undefined")
        return sum(word, Fraction(0)) / len(word)
    raise ValueError("unknown payoff kind %r" % kind)


@dataclass(frozen=True)
class Objective:
    """A limit objective: kind, limit mode, relation, threshold.

    ``kind`` is ``tp``, ``mp``, or ``buchi-all``; for the latter
    ``colour_count`` gives the colour codes 0..k-1 and the numeric fields
    are ignored.
    """

    kind: str
    mode: str = "limsup"  # limsup | liminf
    relation: str = ">="  # > | >=
    threshold: ExtValue = Fraction(0)
    colour_count: int = 0

    def __post_init__(self):
        if self.kind not in (TP, MP, BUCHI_ALL):
            raise ValueError("unknown objective kind %r" % self.kind)
        if self.kind == BUCHI_ALL:
            if self.colour_count < 1:
                raise ValueError("buchi-all needs a positive colour count")
            return
        if self.mode not in ("limsup", "liminf"):
            raise ValueError("mode must be limsup or liminf")
        if self.relation not in (">", ">="):
            raise ValueError("relation must be > or >=")
        if self.kind == MP and isinstance(self.threshold, float):
            raise ValueError("mean-payoff thresholds must be finite")

    def __str__(self) -> str:
        if self.kind == BUCHI_ALL:
            return "buchi-all:%d" % self.colour_count
        return "%s:%s:%s:%s" % (self.kind, self.mode, self.relation, format_ext(self.threshold))

    @property
    def classification(self) -> str:
        return classify(self)


def format_ext(x: ExtValue) -> str:
    if x == POS_INF:
        return "+inf"
    if x == NEG_INF:
        return "-inf"
    return str(x)


def parse_ext(text: str) -> ExtValue:
    if text in ("+inf", "inf"):
        return POS_INF
    if text == "-inf":
        return NEG_INF
    return Fraction(text)


def parse_objective(text: str) -> Objective:
    """Parse CLI objective syntax, e.g. ``tp:limsup:>=:0`` or ``buchi-all:3``."""
    parts = text.strip().split(":")
    if parts[0] == BUCHI_ALL:
        if len(parts) != 2:
            raise ValueError("buchi-all syntax: buchi-all:<k>")
        return Objective(BUCHI_ALL, colour_count=int(parts[1]))
    if len(parts) != 4:
        raise ValueError("objective syntax: kind:mode:relation:threshold")
    kind, mode, rel, thr = parts
    return Objective(kind, mode, rel, parse_ext(thr))


def classify(obj: Objective) -> str:
    """Borel level and memory-sufficiency metadata for the variant."""
    if obj.kind == BUCHI_ALL:
        return "Pi02; step-counter sufficient, finite memory insufficient"
    key = (obj.kind, obj.mode, obj.relation, _threshold_class(obj.threshold))
    table = {
        (MP, "liminf", ">", "fin"): "Sigma02; memoryless sufficient (prior work)",
        (TP, "liminf", ">", "-inf"): "Sigma02; memoryless sufficient (prior work)",
        (MP, "limsup", ">=", "fin"): "Pi02; step counter sufficient, finite memory insufficient",
        (TP, "limsup", ">=", "+inf"): "Pi02; step counter sufficient, finite memory insufficient",
        (TP, "limsup", ">=", "fin"): "Pi02; step counter plus one bit sufficient, step counter alone insufficient",
        (TP, "limsup", ">", "fin"): "Sigma03 over Q; over Z rewrite as a >= threshold",
        (MP, "limsup", ">", "fin"): "Sigma03; sufficiency open",
        (MP, "liminf", ">=", "fin"): "Sigma03; sufficiency open",
        (TP, "liminf", ">=", "+inf"): "Sigma03; sufficiency open",
        (TP, "liminf", ">", "fin"): "step counter plus finite memory insufficient",
        (TP, "liminf", ">=", "fin"): "step counter plus finite memory insufficient",
    }
    return table.get(key, "unclassified variant")


def _threshold_class(thr: ExtValue) -> str:
    if thr == POS_INF:
        return "+inf"
    if thr == NEG_INF:
        return "-inf"
    return "fin"


# ---------------------------------------------------------------------------
# Open sub-objectives


@dataclass(frozen=True)
class OpenSub:
    """An open sub-objective with an ``already satisfies`` prefix witness.

    Families:
      - ``mp-sup``:   some j >= i with MP(w<=j) >= -1/m
      - ``tp-inf``:   some j >= i with TP(w<=j) >= m
      - ``tp-sup``:   some j >= m with TP(w<=j) >= -1/m
      - ``buchi``:    some j >= i with c_j = colour
    """

    family: str
    m: int = 1
    i: int = 1
    colour: Optional[Fraction] = None

    def __post_init__(self):
        if self.family not in ("mp-sup", "tp-inf", "tp-sup", "buchi"):
            raise ValueError("unknown open sub-objective family %r" % self.family)
        if self.family != "buchi" and self.m < 1:
            raise ValueError("index m must be >= 1")
        if self.i < 1:
            raise ValueError("step index must be >= 1")
        if self.family == "buchi" and self.colour is None:
            raise ValueError("buchi sub-objective needs a colour")

    def __str__(self) -> str:
        if self.family == "buchi":
            return "buchi(c=%s,i=%d)" % (self.colour, self.i)
        if self.family == "tp-sup":
            return "tp-sup(m=%d)" % self.m
        return "%s(m=%d,i=%d)" % (self.family, self.m, self.i)

    @property
    def step_index(self) -> int:
        """Least position at which the witness predicate may fire."""
        if self.family == "tp-sup":
            return self.m
        return self.i

    def step_satisfies(self, j: int, tp: Fraction, colour: Optional[Fraction] = None) -> bool:
        """Does position j (1-based), with running total ``tp`` and step
        colour ``colour``, witness the sub-objective?"""
        if j < self.step_index:
            return False
        if self.family == "mp-sup":
            return tp * self.m >= -j  # MP >= -1/m without division
        if self.family == "tp-inf":
            return tp >= self.m
        if self.family == "tp-sup":
            return tp >= Fraction(-1, self.m)
        return colour == self.colour

    def already_satisfies(self, word: Sequence[Weight]) -> bool:
        """True iff some prefix position within the word is a witness.

        Monotone: once true, true for every extension.
        """
        tp = Fraction(0)
        for j, c in enumerate(word, start=1):
            tp += c
            if self.step_satisfies(j, tp, c):
                return True
        return False

    def score(self, word: Sequence[Weight]) -> Fraction:
        """The quantity continuations of an unsatisfied word are ranked by."""
        if self.family == "buchi":
            raise ValueError("buchi prefixes are not ranked by a score")
        total = sum(word, Fraction(0))
        if self.family == "mp-sup" and word:
            return total / len(word)
        return total


def prefix_compare(open_sub: OpenSub, w1: Sequence[Weight], w2: Sequence[Weight]) -> str:
    """Total comparison of equal-length prefixes by continuation quality.

    ``LE`` means every continuation winning after w1 wins after w2 as
    well, ``GE`` the converse, ``BOTH`` both.  A word that already
    satisfies the sub-objective dominates everything of its length.
    """
    if len(w1) != len(w2):
        raise ValueError("prefix_compare needs equal-length words (%d vs %d)" % (len(w1), len(w2)))
    sat1 = open_sub.already_satisfies(w1)
    sat2 = open_sub.already_satisfies(w2)
    if open_sub.family == "buchi":
        le = sat2 or not sat1
        ge = sat1 or not sat2
    else:
        if sat1 and sat2:
            le = ge = True
        elif sat1:
            le, ge = False, True
        elif sat2:
            le, ge = True, False
        else:
            s1 = open_sub.score(w1) if w1 else Fraction(0)
            s2 = open_sub.score(w2) if w2 else Fraction(0)
            le = s1 <= s2
            ge = s2 <= s1
    if le and ge:
        return BOTH
    if le:
        return LE
    if ge:
        return GE
    raise AssertionError("prefix order failed totality on %r / %r" % (w1, w2))


# ---------------------------------------------------------------------------
# Lassos


@dataclass(frozen=True)
class Lasso:
    """An ultimately periodic weight word: prefix followed by a repeated cycle."""

    prefix: tuple[Weight, ...]
    cycle: tuple[Weight, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("lasso cycle must be non-empty")

    def unroll(self, steps: int) -> list[Weight]:
        out = list(self.prefix)
        while len(out) < steps:
            out.extend(self.cycle)
        return out[:steps]


def lasso_limit(kind: str, mode: str, lasso: Lasso) -> ExtValue:
    """Exact limit of the running TP or MP over the lasso's infinite word."""
    cycle_sum = sum(lasso.cycle, Fraction(0))
    if kind == MP:
        return cycle_sum / len(lasso.cycle)
    if kind != TP:
        raise ValueError("no numeric limit for kind %r" % kind)
    if cycle_sum > 0:
        return POS_INF
    if cycle_sum < 0:
        return NEG_INF
    base = sum(lasso.prefix, Fraction(0))
    partials = []
    run = base
    for c in lasso.cycle:
        run += c
        partials.append(run)
    return max(partials) if mode == "limsup" else min(partials)


def eval_on_lasso(objective: Objective, lasso: Lasso) -> bool:
    """Exact membership of prefix . cycle^omega in the objective."""
    if objective.kind == BUCHI_ALL:
        seen = set(lasso.cycle)
        return all(Fraction(c) in seen for c in range(objective.colour_count))
    value = lasso_limit(objective.kind, objective.mode, lasso)
    if objective.relation == ">":
        return value > objective.threshold
    return value >= objective.threshold


# ---------------------------------------------------------------------------
# Decompositions into open sub-objectives


@dataclass(frozen=True)
class Unsupported:
    reason: str


class Decomposition:
    """A countable decreasing-or-indexed family of open sub-objectives.

    ``sub(n)`` returns the n-th member (1-based) of the linear schedule.
    """

    def __init__(self, objective: Objective, label: str, gen: Callable[[int], OpenSub]):
        self.objective = objective
        self.label = label
        self._gen = gen

    def sub(self, n: int) -> OpenSub:
        if n < 1:
            raise ValueError("sub-objective index is 1-based")
        return self._gen(n)

    def prefix(self, n: int) -> list[OpenSub]:
        return [self.sub(k) for k in range(1, n + 1)]


def _diagonal_pair(n: int) -> tuple[int, int]:
    """n-th pair (m, i), m, i >= 1, ordered by (m + i, m) ascending."""
    total = 2
    k = n
    while True:
        count = total - 1  # pairs with this diagonal sum
        if k <= count:
            m = k
            return m, total - m
        k -= count
        total += 1


def decompose(objective: Objective) -> Union[Decomposition, Unsupported]:
    """Open decomposition of the objectives the synthesizers support."""
    if objective.kind == BUCHI_ALL:
        k = objective.colour_count

        def buchi_gen(n: int) -> OpenSub:
            q, r = divmod(n - 1, k)
            return OpenSub("buchi", i=q + 1, colour=Fraction(r))

        return Decomposition(objective, "buchi-all(%d)" % k, buchi_gen)

    if objective.kind == MP and (objective.mode, objective.relation) == ("limsup", ">=") \
            and objective.threshold == 0:
        def mp_gen(n: int) -> OpenSub:
            m, i = _diagonal_pair(n)
            return OpenSub("mp-sup", m=m, i=i)

        return Decomposition(objective, "mp-limsup>=0", mp_gen)

    if objective.kind == TP and (objective.mode, objective.relation) == ("limsup", ">="):
        if objective.threshold == POS_INF:
            def tpinf_gen(n: int) -> OpenSub:
                m, i = _diagonal_pair(n)
                return OpenSub("tp-inf", m=m, i=i)

            return Decomposition(objective, "tp-limsup=+inf", tpinf_gen)
        if objective.threshold == 0:
            def tpsup_gen(n: int) -> OpenSub:
                return OpenSub("tp-sup", m=n)

            return Decomposition(objective, "tp-limsup>=0", tpsup_gen)

    if objective.threshold not in (POS_INF, NEG_INF) and objective.threshold != 0:
        return Unsupported("shift the threshold to 0 first (see shift_to_zero_threshold)")
    return Unsupported(classify(objective))


# ---------------------------------------------------------------------------
# Threshold normalization


def shift_to_zero_threshold(arena: Arena, start: VertexId, objective: Objective
                            ) -> tuple[Arena, VertexId, Objective, str]:
    """Rewrite a finite nonzero threshold to 0 by transforming the arena.

    MP thresholds subtract r from every weight; TP thresholds prepend a
    single weight ``-r`` edge before the start vertex.  A strict TP
    relation over weights with common denominator D becomes ``>= r + 1/D``
    first.  Returns (arena, start, objective, note).
    """
    if objective.kind == BUCHI_ALL:
        return arena, start, objective, "unchanged"
    thr = objective.threshold
    if isinstance(thr, float):
        return arena, start, objective, "unchanged"

    obj = objective
    note_parts = []
    if obj.kind == TP and obj.relation == ">":
        d = _common_denominator(arena, start, thr)
        thr = thr + Fraction(1, d)
        obj = Objective(TP, obj.mode, ">=", thr)
        note_parts.append("strict TP relation rewritten as >= %s" % thr)
    if thr == 0:
        return arena, start, obj, "; ".join(note_parts) or "unchanged"

    if obj.kind == MP:
        shifted = _map_weights(arena, start, lambda w: w - thr)
        note_parts.append("subtracted %s from every weight" % thr)
        return shifted, start, Objective(MP, obj.mode, obj.relation, Fraction(0)), "; ".join(note_parts)

    pre = VertexId("pre^" + start.name, start.params)
    debt = -thr

    def expand(v: VertexId):
        if v == pre:
            return 2, (Edge(pre, debt, start),)
        return arena.owner(v), arena.edges(v)

    out = ArenaGenerator(pre, expand, name=arena.name + "+shift")
    note_parts.append("prepended a weight %s edge before %s" % (debt, start))
    return out, pre, Objective(TP, obj.mode, obj.relation, Fraction(0)), "; ".join(note_parts)


def _map_weights(arena: Arena, start: VertexId, fn: Callable[[Weight], Weight]) -> Arena:
    def expand(v: VertexId):
        return arena.owner(v), tuple(Edge(e.src, fn(e.weight), e.dst) for e in arena.edges(v))

    return ArenaGenerator(start, expand, name=arena.name + "+mapw")


def _common_denominator(arena: Arena, start: VertexId, thr: Fraction, depth: int = 40) -> int:
    import math

    d = thr.denominator
    seen = {start}
    frontier = [start]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            for e in arena.edges(v):
                d = d * e.weight.denominator // math.gcd(d, e.weight.denominator)
                if e.dst not in seen:
                    seen.add(e.dst)
                    nxt.append(e.dst)
        frontier = nxt
        if not frontier:
            break
    return d
