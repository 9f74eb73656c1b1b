"""Decorated trees labelling the C*-fixed loci of genus-0 stable maps to P(V ⊕ O).

Sides: 0 is the zero section X_0 ≅ S, 1 is the divisor at infinity X_∞ ≅ P(V).
Every edge is a k-fold cover of a fiber line joining the two sides, so trees are
bipartite.  Edges are stored as (u, v, k) with u on side 0 and v on side ∞.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

from .targets import CurveClass, DomainError, TargetModel
from .trees import canonical_form

ZERO, INF = 0, 1
SIDE_NAMES = {ZERO: "0", INF: "inf"}

STABLE, V1, V11, V2 = "stable", "V1", "V11", "V2"


@dataclass(frozen=True)
class Vertex:
    side: int
    beta: CurveClass
    markings: frozenset = frozenset()


@dataclass(frozen=True)
class DecoratedGraph:
    vertices: tuple
    edges: tuple

    def valence(self, v: int) -> int:
        return sum(1 for a, b, _ in self.edges if v in (a, b))

    def incident(self, v: int):
        return [i for i, (a, b, _) in enumerate(self.edges) if v in (a, b)]

    def other_end(self, e: int, v: int) -> int:
        a, b, _ = self.edges[e]
        return b if a == v else a

    def total_class(self, target: TargetModel) -> CurveClass:
        total = target.zero_class()
        for vert in self.vertices:
            total = total + vert.beta
        for _, _, k in self.edges:
            total = total + target.fiber_class().scale(k)
        return total

    def markings(self):
        out = set()
        for vert in self.vertices:
            out |= vert.markings
        return out

    @cached_property
    def canonical(self):
        labels = [(v.side, v.beta.vector(), tuple(sorted(v.markings))) for v in self.vertices]
        return canonical_form(labels, [(a, b, k) for a, b, k in self.edges])

    @property
    def key(self):
        return self.canonical[0]

    def graph_automorphisms(self) -> int:
        return self.canonical[1]

    def edge_multiplicity(self) -> int:
        out = 1
        for _, _, k in self.edges:
            out *= k
        return out

    def with_markings(self, assignment) -> "DecoratedGraph":
        """Attach markings; ``assignment[i]`` is the vertex of marking i (0-based)."""
        marks = [set() for _ in self.vertices]
        for i, v in enumerate(assignment):
            marks[v].add(i)
        verts = tuple(Vertex(v.side, v.beta, frozenset(m)) for v, m in zip(self.vertices, marks))
        return DecoratedGraph(verts, self.edges)

    def dump(self) -> str:
        vs = " ".join(
            f"({SIDE_NAMES[v.side]},{v.beta},{{{','.join(str(m + 1) for m in sorted(v.markings))}}})"
            for v in self.vertices)
        es = " ".join(f"({a},{b},{k})" for a, b, k in self.edges)
        return f"V: {vs} E: {es} aut: {automorphism_order(self)}"


def automorphism_order(graph: DecoratedGraph) -> int:
    """|Aut(Γ)| times the covering factor ∏ k_e (the weight is its reciprocal)."""
    return graph.graph_automorphisms() * graph.edge_multiplicity()


# ---------------------------------------------------------------------------
# classification


@dataclass
class EdgeClass:
    chain: list            # edge indices e_1..e_m in order from start to stop
    path: list             # vertices v_0..v_m
    interior: list         # V^2 vertices v_1..v_{m-1}
    ends: tuple            # (v_0, v_m)
    groups: list           # group index of every edge in the chain (shared lines)
    tail: bool = False


@dataclass
class Classification:
    kinds: list
    edge_classes: list
    side0: list = field(default_factory=list)
    side_inf: list = field(default_factory=list)

    def stable(self):
        return [v for v, k in enumerate(self.kinds) if k == STABLE]


def vertex_kind(graph: DecoratedGraph, v: int) -> str:
    vert = graph.vertices[v]
    val = graph.valence(v)
    n = len(vert.markings)
    if not vert.beta.is_zero() or val + n >= 3:
        return STABLE
    if val == 1 and n == 0:
        return V1
    if val == 1 and n == 1:
        return V11
    if val == 2 and n == 0:
        return V2
    raise DomainError(f"vertex {v} is unstable with valence {val} and {n} markings")


def classify(graph: DecoratedGraph) -> Classification:
    kinds = [vertex_kind(graph, v) for v in range(len(graph.vertices))]
    seen = set()
    classes = []
    for start in range(len(graph.vertices)):
        if kinds[start] == V2:
            continue
        for e0 in graph.incident(start):
            if e0 in seen:
                continue
            chain, path = [e0], [start]
            cur = graph.other_end(e0, start)
            path.append(cur)
            while kinds[cur] == V2:
                nxt = next(e for e in graph.incident(cur) if e != chain[-1])
                chain.append(nxt)
                cur = graph.other_end(nxt, cur)
                path.append(cur)
            seen.update(chain)
            groups = []
            g = 0
            for i in range(len(chain)):
                if i > 0 and graph.vertices[path[i]].side == ZERO:
                    g += 1
                groups.append(g)
            ends = (path[0], path[-1])
            tail = kinds[ends[0]] in (V1, V11) or kinds[ends[1]] in (V1, V11)
            classes.append(EdgeClass(chain, path, path[1:-1], ends, groups, tail))
    side0 = [v for v, x in enumerate(graph.vertices) if x.side == ZERO]
    side_inf = [v for v, x in enumerate(graph.vertices) if x.side == INF]
    return Classification(kinds, classes, side0, side_inf)


# ---------------------------------------------------------------------------
# enumeration


def _lattice_points(target: TargetModel, rays, functional, bound, coords):
    """Integer points of cone(rays) with 0 < functional <= bound (plus zero)."""
    from .targets import in_cone

    rays = [r for r in rays if any(r)]
    if not rays:
        return [tuple([0] * coords)]
    box = [0] * coords
    for r in rays:
        phi = sum(a * b for a, b in zip(functional, r))
        for i in range(coords):
            box[i] += abs(r[i]) * bound // phi + 1
    pts = []
    for vec in itertools.product(*[range(-b, b + 1) for b in box]):
        phi = sum(a * b for a, b in zip(functional, vec))
        if phi > bound or phi < 0:
            continue
        if in_cone(vec, rays):
            pts.append(vec)
    return pts


class _ClassMenu:
    """Effective vertex classes on each side, with their master-space weights."""

    def __init__(self, target: TargetModel, beta0: CurveClass):
        self.target = target
        phi = target.master_functional
        W = target.weight(beta0)
        self.total = W
        nb = target.nbase
        inf_pts = _lattice_points(target, target.rays, phi, W, 1 + nb)
        base_fun = phi[1:]
        zero_pts = [(0,) + p for p in _lattice_points(target, target.base_rays, base_fun, W, nb)] if nb else [(0,)]
        self.options = {
            INF: sorted({CurveClass(p[0], tuple(p[1:])) for p in inf_pts}),
            ZERO: sorted({CurveClass(0, tuple(p[1:])) for p in zero_pts}),
        }
        self.fiber_w = target.weight(target.fiber_class())


def enumerate_shapes(target: TargetModel, beta0: CurveClass, include_trivial=True):
    """Unmarked decorated trees with total class β0 (duplicate-free)."""
    if not target.is_master_effective(beta0):
        raise DomainError(f"class {beta0} is not effective on the master space")
    menu = _ClassMenu(target, beta0)
    found = {}

    def remaining_ok(rem):
        return rem.is_zero() or target.is_master_effective(rem)

    frontier = {}
    for side in (ZERO, INF):
        for c in menu.options[side]:
            rem = beta0 - c
            if remaining_ok(rem):
                g = DecoratedGraph((Vertex(side, c),), ())
                frontier[g.key] = (g, rem)
    while frontier:
        nxt = {}
        for g, rem in frontier.values():
            if rem.is_zero():
                found[g.key] = g
            if target.weight(rem) < menu.fiber_w:
                continue
            for v, vert in enumerate(g.vertices):
                side = INF if vert.side == ZERO else ZERO
                for k in range(1, target.weight(rem) // menu.fiber_w + 1):
                    rem_e = rem - target.fiber_class().scale(k)
                    if not remaining_ok(rem_e):
                        continue
                    for c in menu.options[side]:
                        rem2 = rem_e - c
                        if not remaining_ok(rem2):
                            continue
                        verts = g.vertices + (Vertex(side, c),)
                        new = len(verts) - 1
                        edge = (v, new, k) if vert.side == ZERO else (new, v, k)
                        h = DecoratedGraph(verts, g.edges + (edge,))
                        if h.key not in nxt:
                            nxt[h.key] = (h, rem2)
        frontier = nxt
    shapes = list(found.values())
    if not include_trivial:
        shapes = [g for g in shapes if g.edges or g.vertices[0].side == ZERO]
    shapes.sort(key=lambda g: (len(g.edges), repr(g.key)))
    return shapes


def _valid(graph: DecoratedGraph) -> bool:
    try:
        for v in range(len(graph.vertices)):
            vertex_kind(graph, v)
    except DomainError:
        return False
    if len(graph.vertices) == 1:
        vert = graph.vertices[0]
        return not vert.beta.is_zero() or len(vert.markings) >= 3
    return True


def marking_assignments(shape: DecoratedGraph, n: int):
    """All placements of n labelled markings on the vertices of a shape that give valid graphs."""
    for assignment in itertools.product(range(len(shape.vertices)), repeat=n):
        g = shape.with_markings(assignment)
        if _valid(g):
            yield assignment, g


def enumerate_graphs(target: TargetModel, beta0: CurveClass, n: int):
    """Isomorphism classes of marked decorated trees with total class β0, including Γ0."""
    out = {}
    for shape in enumerate_shapes(target, beta0):
        for _, g in marking_assignments(shape, n):
            out.setdefault(g.key, g)
    return sorted(out.values(), key=lambda g: (len(g.edges), repr(g.key)))


def is_trivial_graph(graph: DecoratedGraph) -> bool:
    """Γ0: a single vertex on the infinity side."""
    return not graph.edges and graph.vertices[0].side == INF
