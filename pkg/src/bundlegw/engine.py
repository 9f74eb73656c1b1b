"""Solve for untwisted invariants of P(V) from the localization relation on P(V ⊕ O).

For dimension-matched insertions the equivariant invariant of the master space
vanishes.  Localizing it gives

    0 = U / (-λ)^ρ + Σ_{Γ ≠ Γ0} Contribution(Γ),     ρ = 1 + (β, O(1)),

where U is the wanted invariant and every other graph involves only twisted
invariants of X_∞ = P(V) and X_0 = S in strictly smaller classes.  Degree-0
vertices are evaluated in closed form; positive-degree vertices come from a
twisted-invariant provider (the moment-graph oracle or a user table).
"""
from __future__ import annotations

import itertools
import json
from collections import Counter
from fractions import Fraction

from .contributions import assemble_insertions, degree_zero_vertex
from .exactring import Elem, Laurent, format_rational, parse_rational
from .graphs import INF, classify, enumerate_shapes, is_trivial_graph, marking_assignments
from .targets import CurveClass, DomainError, TargetModel, curve_less, virtual_dim
from .trees import canonical_form


class UnresolvedDependency(LookupError):
    def __init__(self, keys):
        super().__init__("missing twisted invariants: " + "; ".join(str(k) for k in keys))
        self.keys = keys


class ConsistencyFailure(ArithmeticError):
    def __init__(self, message, breakdown=None):
        super().__init__(message)
        self.breakdown = breakdown or []


class CacheConflict(ValueError):
    pass


# ---------------------------------------------------------------------------
# degrees and the leading term


def class_degree(alpha: Elem):
    """Complex degree of a homogeneous λ-free class (None if inhomogeneous or with λ)."""
    degs = set()
    cdeg = alpha.ring.base.cdeg
    for (e, j, l), c in alpha.terms.items():
        if l:
            return None
        degs.add(sum(e) + cdeg[j])
    if len(degs) > 1:
        return None
    return degs.pop() if degs else 0


def dimension_gate(target: TargetModel, beta: CurveClass, insertions, g: int = 0) -> bool:
    if g != 0:
        return False
    total = 0
    for a, alpha in insertions:
        d = class_degree(alpha)
        if d is None:
            return False
        total += a + d
    return total == virtual_dim(target, len(insertions), beta) and beta.k > -1


def leading_relation(target: TargetModel, beta: CurveClass, n: int = 0):
    """(ρ, (-λ)^{-ρ}): the twisted Γ0 term equals U times this coefficient."""
    rho = 1 + beta.k
    return rho, Laurent.monomial((-1) ** rho, -rho)


# ---------------------------------------------------------------------------
# twisted providers


class TableProvider:
    """Twisted vertex values looked up verbatim from a user-supplied table."""

    def __init__(self, table=None):
        self.table = dict(table or {})

    @staticmethod
    def key(side, beta, series):
        return (side, beta, frozenset(Counter(s.key() for s in series).items()))

    def __call__(self, target, side, beta, series):
        k = self.key(side, beta, series)
        if k not in self.table:
            raise UnresolvedDependency([describe_vertex(side, beta, series)])
        return self.table[k]


def describe_vertex(side, beta, series):
    tag = "tw-O(1) on X_inf" if side == INF else "tw-V on S"
    return f"<{len(series)} insertions>_{{0,{beta}}} {tag}"


class OracleProvider:
    """Twisted vertex values from the moment-graph oracle (split bundles over a point or P^1)."""

    def __init__(self):
        self._cache = {}
        self._spaces = {}

    def _data(self, target):
        from . import gkm

        key = id(target)
        if key in self._spaces and self._spaces[key][0] is target:
            return self._spaces[key][1]
        if target.split is None:
            raise UnresolvedDependency([f"no moment graph for {target.name}"])
        base = target.base.name
        if base == "pt":
            top = gkm.projective_gkm(target.rank - 1, gen="H")
            bottom = None
        elif base == "P1":
            top = gkm.split_bundle_gkm(target.split)
            bottom = gkm.projective_gkm(1, gen="F")
        else:
            raise UnresolvedDependency([f"no moment graph for base {base}"])
        twist_top = gkm.TwistSpec([(top.divisors["H"], -1)])
        twist_bottom = None
        if bottom is not None:
            summands = []
            for a in target.split:
                summands.append(([tuple(a * x for x in w) for w in bottom.divisors["F"]], 1))
            twist_bottom = gkm.TwistSpec(summands)
        data = (top, twist_top, bottom, twist_bottom)
        self._spaces[key] = (target, data)
        return data

    def _space(self, target, side, beta):
        top, twist_top, bottom, twist_bottom = self._data(target)
        if side == INF:
            return top, twist_top, (beta.vector() if target.nbase else (beta.k,))
        return bottom, twist_bottom, tuple(beta.b)

    def vertex_dim(self, target, side, beta, n):
        space, _, cls = self._space(target, side, beta)
        return int(space.dim + space.c1_pairing(cls) + n - 3)

    def basis_value(self, target, side, beta, basis):
        """Twisted value on monomial insertions ψ^a H^e T_j, given as sorted (a, e, j)."""
        from . import gkm

        key = (id(target), side, beta, basis)
        if key in self._cache:
            return self._cache[key]
        space, twist, cls = self._space(target, side, beta)
        cdeg = target.base.cdeg
        ins = []
        for a, e, j in basis:
            exps = ((e[0], cdeg[j]) if target.nbase else (e[0],)) if side == INF else (cdeg[j],)
            ins.append([{}] * a + [{(exps, 0): Fraction(1)}])
        result = Laurent(gkm.oracle_invariant(space, cls, ins, twist))
        self._cache[key] = result
        return result

    def __call__(self, target, side, beta, series):
        from . import gkm

        key = (id(target), side, beta, frozenset(Counter(s.key() for s in series).items()))
        if key in self._cache:
            return self._cache[key]
        top, twist_top, bottom, twist_bottom = self._data(target)
        cdeg = target.base.cdeg
        if side == INF:
            space, twist = top, twist_top
            cls = beta.vector() if target.nbase else (beta.k,)

            def exps(e, j):
                return (e[0], cdeg[j]) if target.nbase else (e[0],)
        else:
            space, twist = bottom, twist_bottom
            cls = tuple(beta.b)

            def exps(e, j):
                return (cdeg[j],)
        ins = []
        for s in series:
            out = []
            for c in s.coeffs:
                d = {}
                for (e, j, l), v in c.terms.items():
                    k = (exps(e, j), l)
                    d[k] = d.get(k, 0) + v
                out.append(d)
            ins.append(out)
        value = gkm.oracle_invariant(space, cls, ins, twist)
        result = Laurent(value)
        self._cache[key] = result
        return result


# ---------------------------------------------------------------------------
# the solver


_SHAPES = {}


def enumerate_shapes_cached(target, beta):
    key = (id(target), beta)
    hit = _SHAPES.get(key)
    if hit is None or hit[0] is not target:
        hit = (target, enumerate_shapes(target, beta))
        _SHAPES[key] = hit
    return hit[1]


class Engine:
    def __init__(self, target: TargetModel, provider=None):
        self.target = target
        self.provider = provider if provider is not None else OracleProvider()
        self._vertex_memo = {}
        self._group_memo = {}
        self.memo = {}
        self.solved = {}           # memo key -> the solved Laurent before taking its constant term
        self.dependencies = []

    def vertex_value(self, side, beta, series) -> Laurent:
        key = (side, beta, frozenset(Counter(series).items()))
        if key in self._vertex_memo:
            return self._vertex_memo[key]
        if beta.is_zero():
            value = degree_zero_vertex(self.target, side, series)
        else:
            self.dependencies.append((side, beta))
            if hasattr(self.provider, "basis_value"):
                value = self._multilinear(side, beta, series)
            else:
                value = self.provider(self.target, side, beta, series)
        self._vertex_memo[key] = value
        return value

    def _multilinear(self, side, beta, series) -> Laurent:
        """Expand each series in monomials ψ^a H^e T_j and sum cached basis values.

        The twisting class only adds nonnegative degree, so monomial lists whose
        degree exceeds the virtual dimension of the vertex space contribute nothing.
        """
        cdeg = self.target.base.cdeg
        vdim = self.provider.vertex_dim(self.target, side, beta, len(series))
        expanded = []
        for s in series:
            parts = {}
            for a, c in enumerate(s.coeffs):
                for (e, j, l), v in c.terms.items():
                    b = (a, e, j)
                    parts.setdefault(b, {})
                    parts[b][l] = parts[b].get(l, 0) + v
            expanded.append(sorted((a + sum(e) + cdeg[j], (a, e, j), Laurent(t))
                                   for (a, e, j), t in parts.items()))
        floor = [0] * (len(expanded) + 1)
        for i in range(len(expanded) - 1, -1, -1):
            floor[i] = floor[i + 1] + (expanded[i][0][0] if expanded[i] else 0)
        total = Laurent()

        def walk(i, deg, chosen, coef):
            nonlocal total
            if i == len(expanded):
                value = self.provider.basis_value(self.target, side, beta, tuple(sorted(chosen)))
                if value:
                    total = total + coef * value
                return
            for d, b, c in expanded[i]:
                if deg + d + floor[i + 1] > vdim:
                    break
                walk(i + 1, deg + d, chosen + [b], coef * c)

        if all(expanded):
            walk(0, 0, [], Laurent.constant(1))
        return total

    def graph_value(self, graph, markings) -> Laurent:
        """Localization contribution of a marked graph, without the 1/|Aut| weight."""
        cls = classify(graph)
        fixed, bonds, closed = assemble_insertions(self.target, graph, cls, markings)
        if closed is not None:
            total = closed
        else:
            total = Laurent()
            stable = list(fixed)
            choices = [pairs for _, _, pairs in bonds]
            for combo in itertools.product(*choices):
                ins = {v: list(fixed[v]) for v in stable}
                for (u, v, _), (x, z) in zip(bonds, combo):
                    ins[u].append(x)
                    ins[v].append(z)
                term = Laurent.constant(1)
                for v in stable:
                    vert = graph.vertices[v]
                    term = term * self.vertex_value(vert.side, vert.beta, ins[v])
                    if not term:
                        break
                total = total + term
        return total * Fraction(1, graph.edge_multiplicity())

    def localization_terms(self, beta: CurveClass, insertions):
        """[(graph, weight, value)] for every marked graph other than Γ0."""
        types = {}
        labels = []
        for a, alpha in insertions:
            key = (a, frozenset(alpha.terms.items()))
            labels.append(types.setdefault(key, len(types)))
        out = []
        for shape in enumerate_shapes_cached(self.target, beta):
            if is_trivial_graph(shape):
                continue
            aut = shape.graph_automorphisms()
            for graph, count in self._marked_groups(shape, tuple(labels)):
                value = self.graph_value(graph, insertions)
                out.append((graph, Fraction(count, aut), value))
        return out

    def _marked_groups(self, shape, labels):
        """Marked graphs over a shape up to isomorphism preserving insertion types, with counts."""
        key = (shape.key, labels)
        if key in self._group_memo:
            return self._group_memo[key]
        groups = {}
        for _, graph in marking_assignments(shape, len(labels)):
            tlabels = [tuple(sorted(labels[i] for i in graph.vertices[v].markings))
                       for v in range(len(graph.vertices))]
            vlabels = [(x.side, x.beta.vector(), t) for x, t in zip(graph.vertices, tlabels)]
            k, _ = canonical_form(vlabels, list(graph.edges))
            if k in groups:
                groups[k][1] += 1
            else:
                groups[k] = [graph, 1]
        result = [tuple(g) for g in groups.values()]
        self._group_memo[key] = result
        return result

    def compute(self, beta: CurveClass, insertions, explain=False):
        target = self.target
        insertions = [(int(a), alpha) for a, alpha in insertions]
        if not target.is_effective(beta):
            return (Fraction(0), []) if explain else Fraction(0)
        if not dimension_gate(target, beta, insertions):
            degs = [class_degree(al) for _, al in insertions]
            if None in degs:
                raise DomainError("insertions must be homogeneous λ-free classes")
            if beta.k < 0:
                raise DomainError(f"class {beta} pairs negatively with O(1); the master-space relation does not apply")
            return (Fraction(0), []) if explain else Fraction(0)
        if beta.is_zero() and len(insertions) < 3:
            raise DomainError("degree-0 invariants need at least three markings")
        key = (beta, tuple(sorted((a, tuple(sorted(al.terms.items()))) for a, al in insertions)))
        if key in self.memo and not explain:
            return self.memo[key]
        start = len(self.dependencies)
        terms = self.localization_terms(beta, insertions)
        # twisted invariants of S are input data; only X_inf lookups recurse
        for side, b in self.dependencies[start:]:
            if side == INF and not curve_less(b, beta, target):
                raise ConsistencyFailure(f"dependency {b} is not below {beta}")
        total = Laurent()
        for _, w, v in terms:
            total = total + v * w
        rho, coef = leading_relation(target, beta)
        solved = -total * coef.inverse()
        self.solved[key] = solved
        if not solved.is_constant():
            breakdown = [(g.dump(), str(v * w)) for g, w, v in terms]
            raise ConsistencyFailure(f"λ-dependent residue after solving: {solved}", breakdown)
        value = solved.coefficient(0)
        self.memo[key] = value
        if explain:
            return value, [(g, w, v) for g, w, v in terms]
        return value


def compute_invariant(target: TargetModel, beta: CurveClass, insertions, provider=None, engine=None):
    engine = engine or Engine(target, provider)
    return engine.compute(beta, insertions)


def twisted_lookup(target: TargetModel, side, beta, series, provider=None):
    """A twisted vertex value: closed form in degree 0, else the configured provider."""
    if beta.is_zero():
        return degree_zero_vertex(target, side, series)
    if provider is None:
        raise UnresolvedDependency([describe_vertex(side, beta, series)])
    return provider(target, side, beta, series)


# ---------------------------------------------------------------------------
# invariant cache (JSON lines)


def insertion_record(a, alpha: Elem):
    terms = sorted(((list(e), j, l), c) for (e, j, l), c in alpha.terms.items())
    return [a, [[e, j, l, format_rational(c)] for (e, j, l), c in terms]]


def record_key(rec):
    ins = sorted(json.dumps(x, sort_keys=True) for x in rec["insertions"])
    return (rec["target"], json.dumps(rec["beta"]), tuple(ins), rec.get("twist", "untwisted"))


def _value_to_json(value):
    if isinstance(value, Laurent):
        return value.to_json()
    return format_rational(value)


def _value_from_json(obj):
    if isinstance(obj, dict):
        return Laurent.from_json(obj)
    return parse_rational(obj)


def make_record(target_name, beta: CurveClass, insertions, value, twist="untwisted"):
    return {
        "target": target_name,
        "beta": beta.to_json(),
        "insertions": [insertion_record(a, al) for a, al in insertions],
        "twist": twist,
        "value": _value_to_json(value),
    }


def cache_store(path, records):
    with open(path, "w") as fh:
        for rec in records.values() if isinstance(records, dict) else records:
            out = dict(rec)
            out["value"] = _value_to_json(rec["value"]) if not isinstance(rec["value"], (str, dict)) else rec["value"]
            fh.write(json.dumps(out, sort_keys=True) + "\n")


def cache_load(path, into=None):
    """Read records into a dict keyed by record_key; differing duplicates are an error."""
    out = {} if into is None else into
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = record_key(rec)
                value = _value_from_json(rec["value"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed cache record ({exc})") from exc
            rec = dict(rec, value=value)
            if key in out and out[key]["value"] != value:
                raise CacheConflict(f"conflicting values for {key}: {out[key]['value']} vs {value}")
            out[key] = rec
    return out


def cache_merge(records, path):
    return cache_load(path, into=records)
