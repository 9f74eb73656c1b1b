"""Factors of the master-space localization sum.

Each edge class (a maximal chain of fiber covers through bivalent unstable
vertices) lies over a single base point.  Consecutive edges meeting at a
bivalent vertex on the infinity side share their line in V; edges meeting on
the zero side do not.  A chain with g line-groups is therefore evaluated on the
fiber product P(V) x_S ... x_S P(V) (g factors), one H variable per group.
"""
from __future__ import annotations

from fractions import Fraction

from .exactring import (Elem, PsiSeries, fiber_integrate, integrate_total, moduli_integral, push_to_var)
from .exactring import psi_integral as _psi_integral
from .graphs import INF, STABLE, V1, V11, ZERO, Classification, DecoratedGraph, EdgeClass
from .targets import TargetModel


def psi_integral(exponents) -> Fraction:
    """∫ over M̄_{0,n} of ψ_1^{a_1} ... ψ_n^{a_n}."""
    return _psi_integral(exponents)


def chern_poly_eval(target: TargetModel, x: Elem) -> Elem:
    """c_V(x) = x^r + c_1(V) x^{r-1} + ... + c_r(V)."""
    ring = x.ring
    total = x ** target.rank
    power = ring.one()
    for i in range(target.rank, 0, -1):
        ci = target.chern[i - 1]
        if ci:
            total = total + ring.base_elem(ci) * power
        power = power * x
    return total


def lift_insertion(target: TargetModel, alpha: Elem) -> Elem:
    """Σ H^e π*σ  ↦  Σ h^e π_X*σ in the equivariant ring of the master space."""
    master = target.master
    terms = {}
    for (e, j, l), c in alpha.terms.items():
        terms[(e, j, l)] = c
    return master.elem(terms)


def restrict(x: Elem, side: int, target: TargetModel, ring=None, var: int = 0) -> Elem:
    """Restrict a master-space class to X_0 (h ↦ λ) or X_∞ (h ↦ H_var).

    ``ring`` is the destination: the scalar ring for side 0 (default), or a
    fiber-product ring for side ∞ (default: the bundle ring).
    """
    if side == ZERO:
        ring = ring or target.scalar
        z = (0,) * ring.g
        out = {}
        for (e, j, l), c in x.terms.items():
            key = (z, j, l + sum(e))
            out[key] = out.get(key, 0) + c
        return ring.elem(out)
    ring = ring or target.bundle
    out = {}
    for (e, j, l), c in x.terms.items():
        ne = [0] * ring.g
        ne[var] = sum(e)
        key = (tuple(ne), j, l)
        out[key] = out.get(key, 0) + c
    return ring.elem(out)


def class_to_ring(alpha: Elem, ring, var: int) -> Elem:
    """Place a bundle-ring class on the line-group ``var`` of a fiber-product ring."""
    out = {}
    for (e, j, l), c in alpha.terms.items():
        ne = [0] * ring.g
        ne[var] = e[0] if e else 0
        out[(tuple(ne), j, l)] = c
    return ring.elem(out)


def marking_restriction(target, alpha: Elem, side: int, ring=None, var: int = 0) -> Elem:
    return restrict(lift_insertion(target, alpha), side, target, ring, var)


# ---------------------------------------------------------------------------
# chains


class ChainData:
    """The fixed-locus integrand of one edge class, in its fiber-product ring."""

    def __init__(self, target: TargetModel, graph: DecoratedGraph, ec: EdgeClass):
        self.target = target
        self.graph = graph
        self.ec = ec
        self.ngroups = ec.groups[-1] + 1
        self.ring = target.fiber_product(self.ngroups)
        self.lam = self.ring.lam()

    def H(self, group):
        return self.ring.var(group)

    def side(self, v):
        return self.graph.vertices[v].side

    def degree(self, pos):
        return self.graph.edges[self.ec.chain[pos]][2]

    def omega(self, pos, v):
        """Cotangent-dual weight δ_v (λ - H)/k_e of edge ``pos`` at vertex v."""
        H = self.H(self.ec.groups[pos])
        k = self.degree(pos)
        if self.side(v) == ZERO:
            return (self.lam - H) * Fraction(1, k)
        return (H - self.lam) * Fraction(1, k)

    def vert(self, v, group):
        if self.side(v) == ZERO:
            return chern_poly_eval(self.target, self.lam)
        return self.H(group) - self.lam

    def edge_factor(self, pos):
        H = self.H(self.ec.groups[pos])
        k = self.degree(pos)
        out = self.ring.one()
        for m in range(1, k + 1):
            t = Fraction(m, k)
            out = out * ((H - self.lam) * t) * chern_poly_eval(self.target, H + (self.lam - H) * t)
        return out

    def integrand(self) -> Elem:
        ec = self.ec
        num = self.ring.one()
        den = self.ring.one()
        m = len(ec.chain)
        num = num * self.vert(ec.path[0], ec.groups[0]) * self.vert(ec.path[-1], ec.groups[-1])
        for i, v in enumerate(ec.interior, start=1):
            num = num * self.vert(v, ec.groups[i - 1])
            den = den * (self.omega(i - 1, v) + self.omega(i, v))
        for pos in range(m):
            den = den * self.edge_factor(pos)
        return num * den.inverse()

    def end_pos(self, which):
        """(vertex, chain position of its edge, group) for end 0 or 1."""
        if which == 0:
            return self.ec.path[0], 0, self.ec.groups[0]
        return self.ec.path[-1], len(self.ec.chain) - 1, self.ec.groups[-1]

    def unstable_end_factor(self, which, kind, marking=None):
        """V^1: ω_F / Vert.  V^{1,1}: α|_{X_p} (-ω_F)^a / Vert."""
        v, pos, group = self.end_pos(which)
        inv_vert = self.vert(v, group).inverse()
        w = self.omega(pos, v)
        if kind == V1:
            return w * inv_vert
        a, alpha = marking
        res = marking_restriction(self.target, alpha, self.side(v), self.ring, group)
        return res * ((-w) ** a) * inv_vert

    def leg_series(self, which, bound):
        """1/(ω_F - ψ) at a stable end, as a ψ-series in the chain ring."""
        v, pos, _ = self.end_pos(which)
        return PsiSeries.leg(self.omega(pos, v), bound)


def push_series_to_end(series: PsiSeries, chain: ChainData, which) -> PsiSeries:
    """Push a ψ-series on the chain space forward to the fixed locus of an end vertex."""
    v, _, group = chain.end_pos(which)
    if chain.side(v) == ZERO:
        return series.map(lambda c: _push_all(c, chain.target))
    return series.map(lambda c: push_to_var(c, group))


def _push_all(x: Elem, target) -> Elem:
    cur = x
    for var in range(x.ring.g - 1, -1, -1):
        cur = fiber_integrate(cur, var, cur.ring.with_vars(cur.ring.g - 1))
    return cur


def push_to_end(x: Elem, chain: ChainData, which, bound) -> PsiSeries:
    """Insertion at a stable end v: push x forward, times the leg 1/(ω_F - ψ).

    On side ∞ the leg is pulled back from X_∞ and applied after pushing; on side
    0 it depends on the line of the edge, so it multiplies before pushing.
    """
    v, pos, group = chain.end_pos(which)
    target = chain.target
    if chain.side(v) == ZERO:
        series = chain.leg_series(which, bound) * x
        return series.map(lambda c: _push_all(c, target))
    pushed = push_to_var(x, group)
    k = chain.degree(pos)
    ring = pushed.ring
    w = (ring.var(0) - ring.lam()) * Fraction(1, k)
    return PsiSeries.leg(w, bound) * pushed


def bond_terms(chain: ChainData, which, bound):
    """Diagonal splitting at a stable end: pairs (vertex-side series, chain-side class)."""
    target = chain.target
    v, pos, group = chain.end_pos(which)
    k = chain.degree(pos)
    terms = []
    if chain.side(v) == INF:
        ring = target.bundle
        w = (ring.var(0) - ring.lam()) * Fraction(1, k)
        leg = PsiSeries.leg(w, bound)
        for T, Tdual in bundle_dual_pairs(target):
            terms.append((leg * T, class_to_ring(Tdual, chain.ring, group)))
        return terms
    ring = target.bundle
    w = (ring.lam() - ring.var(0)) * Fraction(1, k)
    leg = PsiSeries.leg(w, bound)
    scalar = target.scalar
    rcount = target.rank
    # split each coefficient by its power of H: leg = Σ_b H^b P_b(ψ)
    parts = {b: [scalar.zero() for _ in range(bound + 1)] for b in range(rcount)}
    for j, c in enumerate(leg.coeffs):
        for (e, jj, l), coef in c.terms.items():
            b = e[0]
            parts[b][j] = parts[b][j] + scalar.elem({((), jj, l): coef})
    base = target.base
    dual = base.dual_basis()
    for b in range(rcount):
        Pb = PsiSeries(parts[b], scalar)
        if Pb.is_zero():
            continue
        for i in range(base.size):
            Ti = scalar.base_elem({i: 1})
            Tidual = scalar.base_elem(dict(enumerate(dual[i])))
            chain_side = chain.ring.var(group, b) * class_to_ring_scalar(Tidual, chain.ring)
            terms.append((Pb * Ti, chain_side))
    return terms


def class_to_ring_scalar(x: Elem, ring) -> Elem:
    z = (0,) * ring.g
    return ring.elem({(z, j, l): c for (_, j, l), c in x.terms.items()})


_DUAL_CACHE = {}


def bundle_dual_pairs(target: TargetModel):
    """Basis H^a T_j of H*(P(V)) with its Poincaré-dual basis."""
    key = id(target)
    if key in _DUAL_CACHE and _DUAL_CACHE[key][0] is target:
        return _DUAL_CACHE[key][1]
    from .linalg import invert_matrix

    ring = target.bundle
    basis = [ring.elem({((a,), j, 0): Fraction(1)}) for a in range(target.rank) for j in range(target.base.size)]
    mat = [[integrate_total(x * y).coefficient(0) for y in basis] for x in basis]
    inv = invert_matrix(mat)
    pairs = []
    for s, T in enumerate(basis):
        dual = ring.zero()
        for t, Tt in enumerate(basis):
            if inv[t][s]:
                dual = dual + Tt * inv[t][s]
        pairs.append((T, dual))
    _DUAL_CACHE[key] = (target, pairs)
    return pairs


# ---------------------------------------------------------------------------
# vertices


def vertex_bound(target: TargetModel, side: int, beta, m: int) -> int:
    """Largest ψ-power that can survive at a vertex with m special points."""
    if beta.is_zero():
        return m - 3
    if side == INF:
        return target.dim + int(target.anticanonical_pairing(beta)) + m - 3
    return target.dim_base + int(target.base_anticanonical_pairing(beta.b)) + m - 3


def degree_zero_vertex(target: TargetModel, side: int, series) -> Elem:
    """Twisted degree-0 invariant: ∫_{M̄_{0,m} x X_p} Π series / e(N_{X_p})."""
    if side == INF:
        ring = target.bundle
        integrand = moduli_integral(series, ring) * (ring.var(0) - ring.lam()).inverse()
    else:
        ring = target.scalar
        integrand = moduli_integral(series, ring) * chern_poly_eval(target, ring.lam()).inverse()
    return integrate_total(integrand)


def point_vertex_value(r: int, insertions):
    """Degree-0 vertex over a point base twisted by C^r of weight 1: λ^{-r} ∫ Π insertions."""
    from .exactring import Laurent

    series = list(insertions)
    if len(series) < 3:
        raise AssertionError("point vertex needs at least three special points")
    value = moduli_integral(series, series[0].ring)
    return integrate_total(value) * Laurent.monomial(1, -r)


def edge_contribution(target: TargetModel, graph: DecoratedGraph, ec: EdgeClass) -> Elem:
    """Edge(Γ, [e]) on the fiber product of its line-groups."""
    return ChainData(target, graph, ec).integrand()


def _marking_series(target, alpha, a, side, bound):
    # keyed by identity; the stored reference keeps the id from being reused
    cache = target.__dict__.setdefault("_marking_cache", {})
    key = (id(alpha), a, side, bound)
    hit = cache.get(key)
    if hit is None or hit[0] is not alpha:
        res = marking_restriction(target, alpha, side)
        hit = (alpha, PsiSeries.monomial(res, a, bound))
        cache[key] = hit
    return hit[1]


def assemble_insertions(target: TargetModel, graph: DecoratedGraph, cls: Classification, markings):
    """Evaluate fixed insertions and node splittings for every stable vertex.

    ``markings[i] = (a_i, α_i)`` with α_i in the bundle ring.  Returns
    ``(fixed, bonds, closed)``: per-vertex lists of insertion series, a list of
    ``(u, v, [(series_u, series_v), ...])`` node-splitting sums, and the value of
    a chain whose two ends are both unstable (or None).
    """
    nv = len(graph.vertices)
    fixed = {v: [] for v in range(nv) if cls.kinds[v] == STABLE}
    bounds = {}
    for v in fixed:
        vert = graph.vertices[v]
        m = graph.valence(v) + len(vert.markings)
        bounds[v] = max(vertex_bound(target, vert.side, vert.beta, m), 0)
        for i in sorted(vert.markings):
            a, alpha = markings[i]
            fixed[v].append(_marking_series(target, alpha, a, vert.side, bounds[v]))
    bonds = []
    closed = None
    cache = target.__dict__.setdefault("_chain_cache", {})
    for ec in cls.edge_classes:
        kinds = (cls.kinds[ec.ends[0]], cls.kinds[ec.ends[1]])
        marks = []
        for w in (0, 1):
            if kinds[w] == V11:
                (i,) = graph.vertices[ec.ends[w]].markings
                a, alpha = markings[i]
                marks.append((a, frozenset(alpha.terms.items())))
            else:
                marks.append(None)
        sig = (tuple(graph.vertices[v].side for v in ec.path),
               tuple(graph.edges[e][2] for e in ec.chain), kinds, tuple(marks),
               tuple(bounds.get(v) for v in ec.ends))
        if sig not in cache:
            cache[sig] = _chain_result(target, graph, ec, kinds, markings, bounds)
        kind, payload = cache[sig]
        if kind == "closed":
            closed = payload
        elif kind == "tail":
            w, series = payload
            fixed[ec.ends[w]].append(series)
        else:
            bonds.append((ec.ends[0], ec.ends[1], payload))
    return fixed, bonds, closed


def _chain_result(target, graph, ec, kinds, markings, bounds):
    chain = ChainData(target, graph, ec)
    E = chain.integrand()
    unstable = [w for w in (0, 1) if kinds[w] != STABLE]
    for w in unstable:
        v = ec.ends[w]
        mk = None
        if kinds[w] == V11:
            (i,) = graph.vertices[v].markings
            mk = markings[i]
        E = E * chain.unstable_end_factor(w, kinds[w], mk)
    if len(unstable) == 2:
        return "closed", integrate_total(E)
    if len(unstable) == 1:
        w = 1 - unstable[0]
        return "tail", (w, push_to_end(E, chain, w, bounds[ec.ends[w]]))
    u, v = ec.ends
    pairs = []
    for x, y in bond_terms(chain, 0, bounds[u]):
        if x.is_zero():
            continue
        z = push_to_end(E * y, chain, 1, bounds[v])
        if not z.is_zero():
            pairs.append((x, z))
    return "bond", pairs
