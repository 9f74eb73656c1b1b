"""Command-line interface and the insertion-expression parser.

    bundlegw compute --target P2 --degree 1 --insertions "H^2, H^2"
    bundlegw oracle --gkm F_2 --degree 1,1 --insertions "psi^1 H*[F]"
    bundlegw verify example --max-n 4
    bundlegw graphs dump --target P1 --degree 1 -n 1
    bundlegw cache show cache.jsonl

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import dataclass
from fractions import Fraction

from .exactring import Laurent, format_rational

# ---------------------------------------------------------------------------
# insertion expressions


class InsertionSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownBasisName(ValueError):
    pass


@dataclass(frozen=True)
class ClassMonomial:
    """H^h times a product of named base classes, each with a power."""

    h: int = 0
    named: tuple = ()          # sorted ((name, power), ...)

    def __str__(self):
        atoms = []
        if self.h == 1:
            atoms.append("H")
        elif self.h > 1:
            atoms.append(f"H^{self.h}")
        for name, p in self.named:
            atoms.append(f"[{name}]" if p == 1 else f"[{name}]^{p}")
        return "*".join(atoms) or "1"


def _tokenize(text):
    spec = [("PSI", r"psi\s*\^"), ("INT", r"\d+"), ("NAME", r"\[[^\[\]]*\]"), ("H", r"H"),
            ("CARET", r"\^"), ("STAR", r"\*"), ("COMMA", r","), ("WS", r"\s+")]
    regex = re.compile("|".join(f"(?P<{n}>{p})" for n, p in spec))
    pos = 0
    tokens = []
    while pos < len(text):
        m = regex.match(text, pos)
        if not m:
            raise InsertionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "WS":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("END", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            what = "end of input" if tok[0] == "END" else repr(tok[1])
            raise InsertionSyntaxError(f"expected {kind.lower()}, found {what}", tok[2])
        self.i += 1
        return tok

    def power(self):
        if self.peek()[0] == "CARET":
            self.i += 1
            return int(self.take("INT")[1])
        return 1

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "H":
            self.i += 1
            return ("H", self.power())
        if kind == "NAME":
            self.i += 1
            name = text[1:-1].strip()
            if not name:
                raise InsertionSyntaxError("empty basis name", pos)
            return (name, self.power())
        if kind == "INT" and text == "1":
            self.i += 1
            return None
        raise InsertionSyntaxError(f"expected a class atom, found {text!r}" if text else
                                   "expected a class atom, found end of input", pos)

    def term(self):
        a = 0
        if self.peek()[0] == "PSI":
            self.i += 1
            a = int(self.take("INT")[1])
        h = 0
        named = {}
        while True:
            at = self.atom()
            if at is not None:
                name, p = at
                if name == "H":
                    h += p
                elif p:
                    named[name] = named.get(name, 0) + p
            if self.peek()[0] != "STAR":
                break
            self.i += 1
        return a, ClassMonomial(h, tuple(sorted(named.items())))

    def expr(self):
        terms = [self.term()]
        while self.peek()[0] == "COMMA":
            self.i += 1
            terms.append(self.term())
        self.take("END")
        return terms


def parse_insertions(text: str):
    """Parse "psi^a class, ..." into [(a, ClassMonomial)].  An empty string means no insertions."""
    if not text.strip():
        return []
    return _Parser(text).expr()


def format_insertions(insertions) -> str:
    return ", ".join((f"psi^{a} " if a else "") + str(m) for a, m in insertions)


def resolve_class(target, mono: ClassMonomial):
    """The monomial as an element of the target's bundle ring."""
    ring = target.bundle
    out = ring.var(0) ** mono.h if mono.h else ring.one()
    names = target.base.names
    for name, p in mono.named:
        if name not in names:
            raise UnknownBasisName(f"unknown basis name [{name}]; {target.name} has {', '.join(names[1:]) or 'none'}")
        out = out * ring.base_elem(name) ** p
    return out


def resolve_gkm(space, a, mono: ClassMonomial):
    from . import gkm

    exps = [0] * len(space.generators)
    for name, p in (("H", mono.h),) + mono.named:
        if not p:
            continue
        if name not in space.generators:
            raise UnknownBasisName(f"unknown generator [{name}]; {space.name} has {', '.join(space.generators)}")
        exps[space.generators.index(name)] += p
    return gkm.monomial(tuple(exps), a)


def format_value(value) -> str:
    if isinstance(value, Laurent):
        return str(value) if not value.is_constant() else format_rational(value.coefficient(0))
    if isinstance(value, dict):
        return format_value(Laurent(value))
    return format_rational(Fraction(value))


# ---------------------------------------------------------------------------
# commands


class UsageError(Exception):
    pass


def cmd_compute(args):
    from .engine import Engine, cache_load, cache_store, make_record, record_key
    from .targets import CurveClass, load_target

    target = load_target(args.target)
    beta = CurveClass.parse(args.degree, target.nbase)
    parsed = parse_insertions(args.insertions)
    ins = [(a, resolve_class(target, m)) for a, m in parsed]
    records = {}
    if args.cache and os.path.exists(args.cache):
        records = cache_load(args.cache)
    rec = make_record(target.name, beta, ins, Fraction(0))
    key = record_key(rec)
    engine = Engine(target)
    if key in records and not args.explain:
        print(format_value(records[key]["value"]))
        return 0
    if args.explain:
        value, terms = engine.compute(beta, ins, explain=True)
        for graph, weight, contribution in terms:
            print(f"{graph.dump()}  weight: {format_rational(weight)}  value: {contribution}")
    else:
        value = engine.compute(beta, ins)
    print(format_value(value))
    if args.cache:
        rec["value"] = value
        if key in records and records[key]["value"] != value:
            from .engine import CacheConflict
            raise CacheConflict(f"cached value {records[key]['value']} differs from computed {value}")
        records[key] = rec
        cache_store(args.cache, records)
    return 0


def parse_twist(space, text):
    """"NAME:c" or "mNAME:c" summands (comma separated): the line bundle of m·NAME with character c."""
    from . import gkm

    summands = []
    for part in text.split(","):
        m = re.fullmatch(r"\s*(-?\d*)\s*([A-Za-z]\w*)\s*:\s*(-?\d+)\s*", part)
        if not m:
            raise UsageError(f"bad twist summand {part!r}; expected e.g. 'H:-1' or '2F:1'")
        mult = int(m.group(1)) if m.group(1) not in ("", "-") else (-1 if m.group(1) == "-" else 1)
        name = m.group(2)
        if name not in space.divisors:
            raise UsageError(f"unknown divisor {name!r}; {space.name} has {', '.join(space.divisors)}")
        weights = [tuple(mult * x for x in w) for w in space.divisors[name]]
        summands.append((weights, int(m.group(3))))
    return gkm.TwistSpec(summands)


def cmd_oracle(args):
    from . import gkm

    space = gkm.load_gkm(args.gkm)
    beta = tuple(int(x) for x in args.degree.strip("()[]").split(",") if x.strip())
    if len(beta) != len(space.orbits[0].cls):
        raise UsageError(f"degree needs {len(space.orbits[0].cls)} coordinates for {space.name}")
    ins = [resolve_gkm(space, a, m) for a, m in parse_insertions(args.insertions)]
    twist = parse_twist(space, args.twist) if args.twist else None
    print(format_value(gkm.oracle_invariant(space, beta, ins, twist)))
    return 0


def _report(report, verbose):
    for label, left, right, ok in report.rows:
        if verbose or not ok:
            print(f"{'OK  ' if ok else 'FAIL'} {label}: {format_value(left)} vs {format_value(right)}")
    print(report.summary())
    return 0 if report.ok else 1


def cmd_verify(args):
    from . import verify

    if args.what == "example":
        rows = verify.example_values(args.max_n)
        print(", ".join(f"n={n}: {format_value(v)} {'OK' if v == want else f'FAIL (expected {want})'}"
                        for n, v, want in rows))
        return 0 if all(v == want for _, v, want in rows) else 1
    if args.what == "theorem-a":
        if args.pair != "hirzebruch":
            raise UsageError(f"unknown pair {args.pair!r}; available: hirzebruch")
        classes = verify.theorem_a_classes(args.max_anticanonical)
        return _report(verify.verify_theorem_a(classes), args.verbose)
    if args.what == "lemma-tw":
        return _report(verify.verify_lemma_tw(args.max_degree), args.verbose)
    if args.what == "sweep":
        return _report(verify.projective_sweep(args.dim, args.max_degree, args.max_points), args.verbose)
    raise UsageError(f"unknown verification {args.what!r}")


def cmd_graphs(args):
    from .graphs import enumerate_graphs
    from .targets import CurveClass, load_target

    target = load_target(args.target)
    beta = CurveClass.parse(args.degree, target.nbase)
    for g in enumerate_graphs(target, beta, args.n):
        print(g.dump())
    return 0


def cmd_cache(args):
    from .engine import cache_load, cache_merge, cache_store

    if args.action == "show":
        for path in args.paths:
            for rec in cache_load(path).values():
                print(f"{rec['target']} {rec['beta']} {rec['insertions']} {rec.get('twist', 'untwisted')}: "
                      f"{format_value(rec['value'])}")
        return 0
    if not args.output:
        raise UsageError("cache merge needs --output")
    records = {}
    for path in args.paths:
        cache_merge(records, path)
    cache_store(args.output, records)
    print(f"{len(records)} records written to {args.output}")
    return 0


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _ArgParser(prog="bundlegw", description="Genus-0 Gromov-Witten invariants of projective bundles.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgParser)

    c = sub.add_parser("compute", help="solve an invariant with the master-space engine")
    c.add_argument("--target", required=True, help="builtin name (P1..P4, F0, F2, split:a,b) or JSON file")
    c.add_argument("--degree", required=True, help="curve class: k or k,b")
    c.add_argument("--insertions", default="", help='e.g. "psi^1 H, H*[F]"')
    c.add_argument("--cache", help="JSON-lines cache file to read and update")
    c.add_argument("--explain", action="store_true", help="print every graph contribution")
    c.set_defaults(func=cmd_compute)

    o = sub.add_parser("oracle", help="evaluate with the moment-graph oracle")
    o.add_argument("--gkm", required=True, help="P^n, F_a, split:a,b, P^1xP^1 or a JSON file")
    o.add_argument("--degree", required=True)
    o.add_argument("--insertions", default="")
    o.add_argument("--twist", help="line bundle summands 'NAME:char', e.g. 'H:-1' or '0F:1,2F:1'")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="run a verification")
    v.add_argument("what", choices=["example", "theorem-a", "lemma-tw", "sweep"])
    v.add_argument("--max-n", type=int, default=4)
    v.add_argument("--pair", default="hirzebruch")
    v.add_argument("--max-anticanonical", type=int, default=6)
    v.add_argument("--max-degree", type=int, default=3)
    v.add_argument("--dim", type=int, default=1)
    v.add_argument("--max-points", type=int, default=4)
    v.add_argument("--verbose", action="store_true")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("graphs", help="decorated graphs of the localization sum")
    g.add_argument("action", choices=["dump"])
    g.add_argument("--target", required=True)
    g.add_argument("--degree", required=True)
    g.add_argument("-n", type=int, default=0)
    g.set_defaults(func=cmd_graphs)

    k = sub.add_parser("cache", help="inspect or merge invariant caches")
    k.add_argument("action", choices=["show", "merge"])
    k.add_argument("paths", nargs="+")
    k.add_argument("--output", "-o")
    k.set_defaults(func=cmd_cache)
    return p


def main(argv=None) -> int:
    from .engine import ConsistencyFailure

    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConsistencyFailure as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, LookupError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
