from fractions import Fraction
from itertools import product
from math import comb, factorial

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundlegw.contributions import ChainData, _chain_result, edge_contribution, point_vertex_value, psi_integral
from bundlegw.exactring import Laurent, PsiSeries, integrate_total
from bundlegw.graphs import INF, ZERO, DecoratedGraph, EdgeClass, Vertex, classify, enumerate_graphs
from bundlegw.targets import CurveClass, projective_space


# -- ψ integrals -----------------------------------------------------------


def test_psi_integral_examples():
    assert psi_integral((0, 0, 0)) == 1
    assert psi_integral((1, 0, 0, 0)) == 1
    assert psi_integral((1, 1, 0, 0, 0)) == 2
    assert psi_integral((2, 0, 0, 0)) == 0
    assert psi_integral((2, 1, 0, 0, 0, 0)) == 3


def _exponent_vectors(n, total):
    return [a for a in product(range(total + 1), repeat=n) if sum(a) == total]


@pytest.mark.parametrize("n", range(4, 9))
def test_psi_integral_string_and_dilaton(n):
    for a in _exponent_vectors(n - 1, n - 4):
        # string: a marking without ψ lowers one other exponent
        lowered = sum(psi_integral(a[:i] + (a[i] - 1,) + a[i + 1:]) for i in range(n - 1) if a[i])
        assert psi_integral(a + (0,)) == lowered
    for a in _exponent_vectors(n - 1, n - 4):
        # dilaton: a marking with ψ^1 multiplies by n - 3 (the count of the smaller space plus 2g - 2 = -2)
        assert psi_integral(a + (1,)) == (n - 1 - 2) * psi_integral(a)


@pytest.mark.parametrize("n", range(3, 9))
def test_psi_integral_closed_form(n):
    for a in _exponent_vectors(n, n - 3):
        expect = Fraction(factorial(n - 3))
        for x in a:
            expect /= factorial(x)
        assert psi_integral(a) == expect


def test_psi_integral_rejects_unstable():
    with pytest.raises(ValueError):
        psi_integral((0, 0))


# -- point vertices --------------------------------------------------------

R = projective_space(1).scalar


def _series(coeffs, bound=3):
    coeffs = [R.scalar(c) for c in coeffs]
    return PsiSeries(coeffs + [R.zero()] * (bound + 1 - len(coeffs)), R)


def test_point_vertex_examples():
    r = 3
    one = _series([1], 1)
    assert point_vertex_value(r, [one] * 3) == Laurent.monomial(1, -r)
    c, c2 = Fraction(5, 2), Fraction(7)
    assert point_vertex_value(r, [one, one, _series([c, c2], 1)]) == Laurent.monomial(c, -r)
    leg = PsiSeries([R.lam(-j - 1) for j in range(3)], R)
    # one leg supplies ψ^1 (λ^-2) and the other three their constant term (λ^-1 each)
    assert point_vertex_value(r, [leg] * 4) == Laurent.monomial(4, -r - 5)
    with pytest.raises(AssertionError):
        point_vertex_value(r, [one, one])


small = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=3), min_size=1, max_size=3)


@settings(max_examples=40, deadline=None)
@given(small, small, small, small, st.fractions(min_value=-3, max_value=3, max_denominator=5), st.integers(0, 3))
def test_point_vertex_multilinear(a, b, c, d, t, slot):
    base = [_series(a), _series(b), _series(c), _series(d)]
    other = _series(d[::-1])
    mixed = list(base)
    mixed[slot] = base[slot] + other.map(lambda x: x * t)
    swapped = list(base)
    swapped[slot] = other
    lhs = point_vertex_value(2, mixed)
    rhs = point_vertex_value(2, base) + point_vertex_value(2, swapped) * t
    assert lhs == rhs


# -- edges -----------------------------------------------------------------


def _edge_graph(k, n):
    g = DecoratedGraph((Vertex(ZERO, CurveClass(0)), Vertex(INF, CurveClass(0))), ((0, 1, k),))
    return projective_space(n), g, classify(g).edge_classes[0]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_edge_factor_single_edge(n):
    T, g, ec = _edge_graph(1, n)
    chain = ChainData(T, g, ec)
    H, lam = chain.H(0), chain.lam
    assert chain.edge_factor(0) == (H - lam) * lam ** (n + 1)


@pytest.mark.parametrize("n", [1, 2])
def test_edge_factor_double_cover(n):
    T, g, ec = _edge_graph(2, n)
    chain = ChainData(T, g, ec)
    H, lam = chain.H(0), chain.lam
    half = Fraction(1, 2)
    expect = (H - lam) * half * ((H + lam) * half) ** (n + 1) * (H - lam) * lam ** (n + 1)
    assert chain.edge_factor(0) == expect


def test_chain_through_infinity_vertex():
    n = 2
    T = projective_space(n)
    g = DecoratedGraph((Vertex(ZERO, CurveClass(0)), Vertex(INF, CurveClass(0)), Vertex(ZERO, CurveClass(0))),
                       ((0, 1, 1), (2, 1, 1)))
    (ec,) = classify(g).edge_classes
    chain = ChainData(T, g, ec)
    H, lam = chain.H(0), chain.lam
    ef = (H - lam) * lam ** (n + 1)
    num = lam ** (n + 1) * lam ** (n + 1) * (H - lam)
    den = (lam - H) * -2 * ef * ef
    assert edge_contribution(T, g, ec) == num * den.inverse()


def _reversed(ec, graph):
    path = ec.path[::-1]
    chain = ec.chain[::-1]
    groups, g = [], 0
    for i in range(len(chain)):
        if i > 0 and graph.vertices[path[i]].side == ZERO:
            g += 1
        groups.append(g)
    return EdgeClass(chain, path, path[1:-1], (path[0], path[-1]), groups, ec.tail)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_end_labelling_is_irrelevant(n):
    T = projective_space(n)
    B = T.bundle
    markings = [(2 * n - 1, B.one())]
    shapes = [g for g in enumerate_graphs(T, CurveClass(2), 1) + enumerate_graphs(T, CurveClass(1), 1) if g.edges]
    checked = 0
    for g in shapes:
        cls = classify(g)
        if len(cls.edge_classes) != 1 or cls.stable():
            continue
        ec = cls.edge_classes[0]
        kinds = (cls.kinds[ec.ends[0]], cls.kinds[ec.ends[1]])
        fwd = _chain_result(T, g, ec, kinds, markings, {})
        back = _chain_result(T, g, _reversed(ec, g), kinds[::-1], markings, {})
        assert fwd == back
        checked += 1
    assert checked >= 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_example_integrands_per_graph(n):
    T = projective_space(n)
    B = T.bundle
    H, lam = B.var(0), B.lam()
    markings = [(2 * n - 1, B.one())]
    integrand = (lam - H) ** (2 * n - 1) * (lam - H) * (lam ** (n + 1) * (H - lam)).inverse()
    ref = integrate_total(integrand)
    graphs = [g for g in enumerate_graphs(T, CurveClass(1), 1) if g.edges]
    assert len(graphs) == 2
    total = Laurent()
    for g in graphs:
        cls = classify(g)
        (ec,) = cls.edge_classes
        kind, value = _chain_result(T, g, ec, (cls.kinds[ec.ends[0]], cls.kinds[ec.ends[1]]), markings, {})
        assert kind == "closed" and value == ref
        total = total + value
    assert total == Laurent.monomial(-2 * (-1) ** n * comb(2 * n - 1, n), -2)
