"""Command-line interface: validate, simulate, defeat, synthesize, verify,
zoo inspection, and a small benchmark grid.

Exit codes: 0 success / accepted certificate, 1 refuted or failed,
2 inconclusive (a cap or window was exhausted before a verdict).
All numeric output is exact rational text; artifacts are written
atomically.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from fractions import Fraction
from typing import Optional

from . import zoo
from .arena import Arena, ArenaExplicit, ArenaGenerator, Edge, VertexId, validate
from .engine import (Inconclusive, certificate_from_json, certificate_to_json,
                     check_certificate, explore_consistent, play)
from .objectives import Objective, decompose, parse_objective
from .strategies import Strategy, parse_strategy, serialize_strategy
from .synthesis import (SynthReport, WPrimeOracle, bubble_synthesize,
                        finite_mp_oracle, finite_wprime_oracle, sc1bit_synthesize)
from .adversaries import (DefeatResult, NoCliqueFound, defeat_fm_match,
                          defeat_sc_buchi, defeat_sc_on_A3, ramsey_adversary)

OK, FAILED, INCONCLUSIVE = 0, 1, 2


# ---------------------------------------------------------------------------
# Arena text format


def parse_arena(text: str, name_hint: str = "arena") -> ArenaExplicit:
    """Parse the line-based arena format into an explicit arena."""
    name = name_hint
    owners: dict[VertexId, int] = {}
    edges: list[Edge] = []
    start: Optional[VertexId] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "arena":
                if len(parts) != 2:
                    raise ValueError("arena line takes exactly one name")
                name = parts[1]
            elif parts[0] == "vertex":
                if len(parts) != 3 or not parts[2].startswith("owner="):
                    raise ValueError("vertex syntax: vertex <id> owner=<1|2>")
                v = VertexId.parse(parts[1])
                owner = int(parts[2][len("owner="):])
                if owner not in (1, 2):
                    raise ValueError("owner must be 1 or 2")
                if v in owners:
                    raise ValueError("vertex %s declared twice" % v)
                owners[v] = owner
            elif parts[0] == "edge":
                if len(parts) != 4 or not parts[3].startswith("weight="):
                    raise ValueError("edge syntax: edge <from> <to> weight=<w>")
                src = VertexId.parse(parts[1])
                dst = VertexId.parse(parts[2])
                weight = Fraction(parts[3][len("weight="):])
                edges.append(Edge(src, weight, dst))
            elif parts[0] == "start":
                if len(parts) != 2:
                    raise ValueError("start line takes exactly one vertex")
                start = VertexId.parse(parts[1])
            else:
                raise ValueError("unknown directive %r" % parts[0])
        except ValueError as exc:
            raise ValueError("line %d: %s" % (lineno, exc))
    if start is None:
        raise ValueError("no start vertex")
    for e in edges:
        if e.src not in owners:
            raise ValueError("edge from undeclared vertex %s" % e.src)
        if e.dst not in owners:
            raise ValueError("dangling edge target %s" % e.dst)
    out = {v: [] for v in owners}
    for e in edges:
        out[e.src].append(e)
    for v, es in out.items():
        if not es:
            raise ValueError("blocking vertex %s has no outgoing edge" % v)
    return ArenaExplicit(owners, edges, start, name=name)


def serialize_arena(arena: ArenaExplicit) -> str:
    """Canonical text form: sorted vertices, deterministically sorted edges."""
    lines = ["arena %s" % arena.name]
    for v in arena.vertices:
        lines.append("vertex %s owner=%d" % (v, arena.owner(v)))
    for v in arena.vertices:
        for e in arena.edges(v):
            lines.append("edge %s %s weight=%s" % (e.src, e.dst, e.weight))
    lines.append("start %s" % arena.start)
    return "\n".join(lines) + "\n"


def truncate_generator(arena: Arena, start: VertexId, depth: int,
                       name: Optional[str] = None) -> ArenaExplicit:
    """Explicit truncation of a generator: vertices within ``depth`` steps
    keep their edges; boundary vertices become absorbing weight-0 loops."""
    seen = {start: 0}
    frontier = [start]
    for d in range(depth):
        nxt = []
        for v in frontier:
            for e in arena.edges(v):
                if e.dst not in seen:
                    seen[e.dst] = d + 1
                    nxt.append(e.dst)
        frontier = nxt
    owners = {}
    edges = []
    for v, level in seen.items():
        owners[v] = arena.owner(v)
        if level >= depth:
            edges.append(Edge(v, Fraction(0), v))
            continue
        for e in arena.edges(v):
            edges.append(e)
    return ArenaExplicit(owners, edges, start, name=name or (arena.name + "_d%d" % depth))


# ---------------------------------------------------------------------------
# Helpers


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qg-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _load_arena(spec: str):
    """Returns (arena, start, zoo entry or None)."""
    if spec.startswith("zoo:"):
        entry = zoo.parse_uri(spec)
        return entry.arena, entry.start, entry
    with open(spec) as fh:
        arena = parse_arena(fh.read(), name_hint=os.path.splitext(os.path.basename(spec))[0])
    return arena, arena.start, None


def _load_strategy(spec: str, entry, player: int) -> Strategy:
    if os.path.exists(spec):
        with open(spec) as fh:
            strat = parse_strategy(fh.read())
        strat.player = player
        return strat
    if entry is not None:
        strat = entry.strategy(spec)
        if strat.player != player:
            raise ValueError("strategy %r is for player %d, requested player %d"
                             % (spec, strat.player, player))
        return strat
    raise ValueError("no such strategy file and no zoo entry to look up %r" % spec)


def _err(msg: str) -> int:
    print("error: %s" % msg, file=sys.stderr)
    return FAILED


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    arena, start, _ = _load_arena(args.arena)
    report = validate(arena, start, depth=args.depth)
    for line in report.violations:
        print("violation: %s" % line)
    print("validate: %s (%d vertices explored)" % ("ok" if report.ok else "failed",
                                                   report.explored))
    return OK if report.ok else FAILED


def cmd_simulate(args) -> int:
    arena, start, entry = _load_arena(args.arena)
    p1 = _load_strategy(args.p1, entry, 1)
    p2 = _load_strategy(args.p2, entry, 2)
    record = play(arena, start, p1, p2, args.horizon)
    _emit(record.to_csv(), args.out)
    return OK


def cmd_defeat(args) -> int:
    arena, start, entry = _load_arena(args.arena)
    if entry is None:
        return _err("defeat targets zoo entries; pass a zoo: URI")
    sigma = _load_strategy(args.strategy, entry, 1)
    try:
        if entry.name in ("a1prime", "a2"):
            result = defeat_fm_match(sigma, entry)
        elif entry.name == "a3":
            result = defeat_sc_on_A3(sigma, entry, horizon=args.horizon)
        elif entry.name in ("a4", "a4guarded"):
            plan, result = ramsey_adversary(sigma, entry, window=args.window,
                                            horizon=max(args.horizon, 2000))
            print("plan: enter %d, route %s" % (plan.entry, plan.routing))
        elif entry.name == "buchib":
            result = defeat_sc_buchi(sigma, entry, horizon=args.horizon)
        else:
            return _err("no adversary routine for zoo entry %r" % entry.name)
    except (TypeError, NoCliqueFound) as exc:
        return _err(str(exc))
    if isinstance(result, Inconclusive):
        print("inconclusive: %s" % result.reason)
        return INCONCLUSIVE
    for note in result.notes:
        print("note: %s" % note)
    if result.certificate is None:
        print("defeat: no certificate (partial)")
        return INCONCLUSIVE
    check = check_certificate(result.certificate,
                              {"arena": arena, "v0": start,
                               "sigma1": sigma, "sigma2": result.p2})
    if args.out:
        _atomic_write(args.out, certificate_to_json(result.certificate))
        print("certificate written to %s" % args.out)
    else:
        sys.stdout.write(certificate_to_json(result.certificate))
    if not check.ok:
        print("self-check failed: %s" % "; ".join(check.diagnostics))
        return FAILED
    print("defeat: certificate accepted%s" % (" (partial)" if result.partial else ""))
    return OK


def _synth_report_text(report: SynthReport) -> str:
    lines = ["schedule:"]
    for m, k in report.schedule:
        lines.append("  m=%d k=%d" % (m, k))
    for m, k, ok in report.level_certs:
        lines.append("level m=%d k=%d recertified=%s" % (m, k, "yes" if ok else "NO"))
    lines.append("region preserved: %s" % ("yes" if report.region_ok else "NO"))
    lines.append("certified: %s" % ("yes" if report.certified else "NO"))
    if report.failure:
        lines.append("failure: %s" % report.failure)
    return "\n".join(lines) + "\n"


def _shift_explicit(arena: ArenaExplicit, objective):
    """Zero-threshold normalization that keeps the arena explicit."""
    thr = objective.threshold
    if objective.kind == "mp":
        owners = {v: arena.owner(v) for v in arena.vertices}
        edges = [Edge(e.src, e.weight - thr, e.dst)
                 for v in arena.vertices for e in arena.edges(v)]
        shifted = ArenaExplicit(owners, edges, arena.start, name=arena.name + "+shift")
        return shifted, shifted.start, Objective("mp", objective.mode,
                                                 objective.relation, Fraction(0))
    pre = VertexId("pre^" + arena.start.name, arena.start.params)
    owners = {v: arena.owner(v) for v in arena.vertices}
    owners[pre] = 2
    edges = [e for v in arena.vertices for e in arena.edges(v)]
    edges.append(Edge(pre, -thr, arena.start))
    shifted = ArenaExplicit(owners, edges, pre, name=arena.name + "+shift")
    return shifted, pre, Objective("tp", objective.mode, objective.relation, Fraction(0))


def cmd_synthesize(args) -> int:
    arena, start, entry = _load_arena(args.arena)
    objective = parse_objective(args.objective)
    if objective.kind in ("tp", "mp") and not isinstance(objective.threshold, float):
        if objective.kind == "tp" and objective.relation == ">":
            return _err("rewrite a strict total-payoff threshold as >= first")
        if objective.threshold != 0:
            if not isinstance(arena, ArenaExplicit):
                return _err("threshold shifting on generators is a library operation")
            arena, start, objective = _shift_explicit(arena, objective)
            entry = None
            print("note: threshold shifted to 0 on a transformed arena")
    deco = decompose(objective)
    if not hasattr(deco, "sub"):
        return _err("objective %s: %s" % (objective, deco.reason))
    if objective.kind == "tp" and objective.threshold == 0:
        if entry is not None:
            if entry.wprime is None:
                return _err("zoo entry %r has no winnable-region predicate" % entry.name)
            oracle = WPrimeOracle(entry.wprime, entry.strategies["safe"],
                                  entry.extras["winning_from"])
        else:
            oracle = finite_wprime_oracle(arena)
        report = sc1bit_synthesize(arena, start, args.m_max, oracle,
                                   depth_cap=args.depth)
    elif objective.kind == "mp":
        if not isinstance(arena, ArenaExplicit):
            return _err("mean-payoff synthesis on generators needs a scripted "
                        "oracle; use the library API")
        oracle = finite_mp_oracle(arena)
        report = bubble_synthesize(arena, start, deco, args.m_max, oracle,
                                   depth_cap=args.depth)
    else:
        return _err("synthesis supports tp:limsup:>=:<finite> and "
                    "mp:limsup:>=:<finite> objectives")
    print(_synth_report_text(report), end="")
    if report.strategy is not None and args.out:
        _atomic_write(args.out, serialize_strategy(report.strategy))
        print("strategy written to %s" % args.out)
    if report.certified:
        return OK
    return INCONCLUSIVE if report.failure else FAILED


def cmd_verify(args) -> int:
    with open(args.cert) as fh:
        cert = certificate_from_json(fh.read())
    arena, start, entry = _load_arena(args.arena)
    context = {"arena": arena, "v0": start}
    if args.p1:
        context["sigma1"] = _load_strategy(args.p1, entry, 1)
    if args.p2:
        context["sigma2"] = _load_strategy(args.p2, entry, 2)
    if args.objective:
        deco = decompose(parse_objective(args.objective))
        if not hasattr(deco, "sub"):
            return _err("objective %s: %s" % (args.objective, deco.reason))
        context["subs"] = deco.sub
    result = check_certificate(cert, context)
    for line in result.diagnostics:
        print(line)
    print("verify: %s" % ("accepted" if result.ok else "refuted"))
    return OK if result.ok else FAILED


def cmd_zoo(args) -> int:
    if args.zoo_command == "list":
        for name in zoo.names():
            entry = zoo.make(name)
            strategies = sorted(entry.strategies)
            print("%s: %s" % (name, entry.note))
            if strategies:
                print("  strategies: %s" % ", ".join(strategies))
        return OK
    if args.zoo_command == "export":
        arena, start, entry = _load_arena(args.arena)
        if entry is None:
            return _err("zoo export takes a zoo: URI")
        explicit = truncate_generator(arena, start, args.depth, name=entry.name)
        _emit(serialize_arena(explicit), args.out)
        return OK
    return _err("unknown zoo subcommand")


_BENCH_GRID = [
    # (zoo URI, strategy, label for what the run demonstrates)
    ("zoo:a1prime?b=8", "match_plus_one", "unbounded replies win the repeated match game"),
    ("zoo:a2", "match_plus_one", "answering one more wins the finitely branching rounds"),
    ("zoo:a3", "delay_twice_exit", "two delays then exit bank at least 1"),
    ("zoo:a4", "adaptive", "adapting delays to the entry reaches exactly 0"),
    ("zoo:bitarena", "opposite", "one bit of memory tracks the opponent's round move"),
    ("zoo:buchia?k=3", "round_robin", "sweeping detours sees every colour"),
    ("zoo:buchib?b=6", "alternating", "loop-then-exit alternates both colours"),
]


def cmd_bench(args) -> int:
    rows = []
    for uri, strat_name, label in _BENCH_GRID:
        entry = zoo.parse_uri(uri)
        sigma = entry.strategy(strat_name)
        tree = explore_consistent(entry.arena, entry.start, sigma, min(args.horizon, 12))
        width = max(tree.level_widths)
        rows.append((uri, strat_name, sigma.__class__.__name__, width, label))
    name_w = max(len(r[0]) for r in rows)
    strat_w = max(len(r[1]) for r in rows)
    print("%-*s  %-*s  %-16s  %5s  %s" % (name_w, "arena", strat_w, "strategy",
                                          "class", "width", "demonstrates"))
    for uri, sn, cls, width, label in rows:
        print("%-*s  %-*s  %-16s  %5d  %s" % (name_w, uri, strat_w, sn, cls, width, label))
    return OK


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, arena=True):
        if arena:
            p.add_argument("--arena", required=True, help="arena file or zoo:<name>?k=v URI")
        p.add_argument("--horizon", type=int, default=200)
        p.add_argument("--depth", type=int, default=40)
        p.add_argument("--jobs", type=int, default=1, help="worker hint (runs are sequential)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)

    p = sub.add_parser("validate", help="check arena well-formedness")
    common(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("simulate", help="play two strategies, emit the play CSV")
    common(p)
    p.add_argument("--p1", required=True)
    p.add_argument("--p2", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("defeat", help="construct an opponent defeating the strategy")
    common(p)
    p.add_argument("--strategy", required=True)
    p.add_argument("--window", type=int, default=2000)
    p.set_defaults(fn=cmd_defeat)

    p = sub.add_parser("synthesize", help="synthesize a certified strategy")
    common(p)
    p.add_argument("--objective", required=True)
    p.add_argument("--m-max", type=int, default=3)
    p.set_defaults(fn=cmd_synthesize, depth=200)

    p = sub.add_parser("verify", help="re-check a certificate file")
    common(p)
    p.add_argument("--cert", required=True)
    p.add_argument("--p1", default=None)
    p.add_argument("--p2", default=None)
    p.add_argument("--objective", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("zoo", help="inspect or export zoo arenas")
    zsub = p.add_subparsers(dest="zoo_command", required=True)
    pl = zsub.add_parser("list")
    pl.set_defaults(fn=cmd_zoo, zoo_command="list")
    pe = zsub.add_parser("export")
    common(pe)
    pe.set_defaults(fn=cmd_zoo, zoo_command="export")

    p = sub.add_parser("bench", help="tournament grid over zoo arenas")
    common(p, arena=False)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if "QG_NODE_CAP" in os.environ:
        try:
            int(os.environ["QG_NODE_CAP"])
        except ValueError:
            return _err("QG_NODE_CAP must be an integer")
    try:
        return args.fn(args)
    except (OSError, ValueError, KeyError) as exc:
        return _err(str(exc))


if __name__ == "__main__":
    sys.exit(main())
