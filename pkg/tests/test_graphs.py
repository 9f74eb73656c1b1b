from itertools import permutations, product

import pytest

from bundlegw.graphs import (
    INF, STABLE, V1, V11, V2, ZERO, DecoratedGraph, Vertex, automorphism_order, classify, enumerate_graphs,
    enumerate_shapes, is_trivial_graph,
)
from bundlegw.targets import CurveClass, DomainError, projective_space, split_over_p1
from bundlegw.trees import canonical_form, is_tree

P1 = projective_space(1)


def C(k, *b):
    return CurveClass(k, tuple(b))


def test_spec_counts_on_p1():
    assert len(enumerate_graphs(P1, C(1), 0)) == 2
    assert len(enumerate_graphs(P1, C(1), 1)) == 3
    assert len(enumerate_graphs(P1, C(2), 0)) == 5


def test_contains_trivial_graph_once():
    graphs = enumerate_graphs(P1, C(2), 1)
    assert sum(is_trivial_graph(g) for g in graphs) == 1


# -- independent count -----------------------------------------------------


def _prufer_trees(m):
    if m == 1:
        yield []
        return
    if m == 2:
        yield [(0, 1)]
        return
    for seq in product(range(m), repeat=m - 2):
        degree = [1] * m
        for x in seq:
            degree[x] += 1
        edges = []
        seq = list(seq)
        for x in seq:
            leaf = min(i for i in range(m) if degree[i] == 1)
            edges.append((leaf, x))
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = [i for i in range(m) if degree[i] == 1]
        edges.append((u, v))
        yield edges


def _sides(m, edges, root_side):
    sides = [None] * m
    sides[0] = root_side
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            for x, y in ((a, b), (b, a)):
                if sides[x] is not None and sides[y] is None:
                    sides[y] = 1 - sides[x]
                    changed = True
    return sides


def _stable(val, n, deg):
    return deg > 0 or val + n >= 3 or (val, n) in ((1, 0), (1, 1), (2, 0))


def _brute_key(sides, degs, marks, edges):
    m = len(sides)
    best = None
    for perm in permutations(range(m)):
        labels = tuple((sides[perm.index(i)], degs[perm.index(i)], marks[perm.index(i)]) for i in range(m))
        es = tuple(sorted(tuple(sorted((perm[a], perm[b]))) + (k,) for a, b, k in edges))
        key = (labels, es)
        if best is None or key < best:
            best = key
    return best


def _brute_count(d, n):
    """Point base: ZERO vertices carry degree 0, INF vertices any degree."""
    found = set()
    for m in range(1, d + 2):
        for tree in _prufer_trees(m):
            for root_side in (ZERO, INF):
                sides = _sides(m, tree, root_side)
                for ks in product(range(1, d + 1), repeat=len(tree)):
                    rest = d - sum(ks)
                    if rest < 0:
                        continue
                    inf = [i for i in range(m) if sides[i] == INF]
                    for split in product(range(rest + 1), repeat=len(inf)):
                        if sum(split) != rest:
                            continue
                        degs = [0] * m
                        for i, x in zip(inf, split):
                            degs[i] = x
                        for place in product(range(m), repeat=n):
                            marks = [tuple(j for j in range(n) if place[j] == i) for i in range(m)]
                            val = [sum(i in (a, b) for a, b in tree) for i in range(m)]
                            if not all(_stable(val[i], len(marks[i]), degs[i]) for i in range(m)):
                                continue
                            if m == 1 and degs[0] == 0 and n < 3:
                                continue
                            edges = [(a, b, k) for (a, b), k in zip(tree, ks)]
                            found.add(_brute_key(sides, degs, marks, edges))
    return len(found)


@pytest.mark.parametrize("d,n", [(d, n) for d in (1, 2, 3) for n in (0, 1, 2)])
def test_enumeration_matches_prufer_count(d, n):
    assert len(enumerate_graphs(P1, C(d), n)) == _brute_count(d, n)


# -- classification and automorphisms --------------------------------------


def _graph(vertices, edges):
    return DecoratedGraph(tuple(Vertex(s, b, frozenset(m)) for s, b, m in vertices), tuple(edges))


def test_classify_examples():
    g = _graph([(ZERO, C(0), ()), (INF, C(0), ())], [(0, 1, 1)])
    cls = classify(g)
    assert cls.kinds == [V1, V1]
    assert len(cls.edge_classes) == 1 and cls.edge_classes[0].tail

    g = _graph([(ZERO, C(0), {0}), (INF, C(0), ()), (ZERO, C(0), ()), (INF, C(1), ())],
               [(0, 1, 1), (2, 1, 1), (2, 3, 2)])
    cls = classify(g)
    assert cls.kinds == [V11, V2, V2, STABLE]
    (ec,) = cls.edge_classes
    assert sorted(ec.ends) == [0, 3] and len(ec.interior) == 2 and len(ec.chain) == 3
    assert ec.tail

    g = _graph([(ZERO, C(0), {0, 1}), (INF, C(0), ()), (ZERO, C(0), {2, 3})], [(0, 1, 1), (2, 1, 1)])
    cls = classify(g)
    assert cls.kinds == [STABLE, V2, STABLE]
    assert len(cls.edge_classes) == 1 and not cls.edge_classes[0].tail
    assert cls.side0 == [0, 2] and cls.side_inf == [1]

    bad = _graph([(ZERO, C(0), ()), (INF, C(0), ()), (ZERO, C(0), ())], [(0, 1, 1), (2, 1, 1)])
    bad_leaf = _graph([(INF, C(0), {0, 1}), (ZERO, C(0), {2})], [(1, 0, 1)])
    assert classify(bad).kinds == [V1, V2, V1]
    with pytest.raises(DomainError):
        classify(_graph([(ZERO, C(0), {0})], []))
    assert classify(bad_leaf).kinds == [STABLE, V11]


def test_automorphism_examples():
    assert automorphism_order(_graph([(INF, C(2), ())], [])) == 1
    assert automorphism_order(_graph([(ZERO, C(0), ()), (INF, C(0), ())], [(0, 1, 2)])) == 2
    sym = _graph([(ZERO, C(0), ()), (INF, C(0), ()), (ZERO, C(0), ())], [(0, 1, 1), (2, 1, 1)])
    assert automorphism_order(sym) == 2
    assert automorphism_order(sym.with_markings([0])) == 1
    star = _graph([(INF, C(1), ())] + [(ZERO, C(0), ())] * 3, [(1, 0, 1), (2, 0, 1), (3, 0, 1)])
    assert automorphism_order(star) == 6
    mixed = _graph([(INF, C(1), ())] + [(ZERO, C(0), ())] * 3, [(1, 0, 1), (2, 0, 1), (3, 0, 2)])
    assert automorphism_order(mixed) == 2 * 2


def _brute_aut(labels, edges):
    n = len(labels)
    es = sorted(tuple(sorted((a, b))) + (k,) for a, b, k in edges)
    count = 0
    for perm in permutations(range(n)):
        if any(labels[perm[i]] != labels[i] for i in range(n)):
            continue
        if sorted(tuple(sorted((perm[a], perm[b]))) + (k,) for a, b, k in edges) == es:
            count += 1
    return count


def test_canonical_form_against_brute_force():
    trees = [t for m in range(1, 6) for t in _prufer_trees(m)]
    seen = {}
    for edges in trees:
        m = len(edges) + 1
        for labels in product("ab", repeat=m):
            es = [(a, b, 1 + (a + b) % 2) for a, b in edges]
            key, aut = canonical_form(list(labels), es)
            assert aut == _brute_aut(labels, es)
            brute = _brute_key(list(labels), [0] * m, [()] * m, es)
            if key in seen:
                assert seen[key] == brute
            seen[key] = brute
    assert len(set(seen.values())) == len(seen)
    assert is_tree(3, [(0, 1, 1), (1, 2, 1)]) and not is_tree(3, [(0, 1, 1), (1, 0, 1)])


def test_hirzebruch_shapes_cover_total_class():
    F2 = split_over_p1((0, 2))
    beta = C(1, 1)
    shapes = enumerate_shapes(F2, beta)
    assert shapes
    for g in shapes:
        assert g.total_class(F2) == beta
    assert len({g.key for g in shapes}) == len(shapes)
    with pytest.raises(DomainError):
        enumerate_shapes(F2, C(-3, 1))
