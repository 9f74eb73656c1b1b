import json
from dataclasses import asdict
from fractions import Fraction

import pytest

from bundlegw.gkm import (
    OracleError, TwistSpec, audit, builtin_gkm, load_gkm, monomial, oracle_invariant, projective_gkm,
    split_bundle_gkm, wdvv_plane_numbers,
)

P2 = projective_gkm(2)
pt2 = monomial((2,))


def test_wdvv_closed_form():
    assert [wdvv_plane_numbers(d) for d in range(1, 6)] == [1, 1, 12, 620, 87304]
    with pytest.raises(ValueError):
        wdvv_plane_numbers(0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_oracle_plane_curves(d):
    assert oracle_invariant(P2, (d,), [pt2] * (3 * d - 1)) == wdvv_plane_numbers(d)


def test_report_lists_agreeing_specializations():
    res = oracle_invariant(P2, (2,), [pt2] * 5, report=True)
    assert res.value == 1
    (vals,) = res.specializations
    assert len(vals) >= 2 and len(set(map(repr, vals))) == 1


def test_audit_records_seeds():
    with audit() as log:
        oracle_invariant(P2, (1,), [pt2] * 2)
    assert log
    name, beta, value, runs = log[0]
    assert name == "P2" and beta == (1,)
    assert len({seed for seed, _ in runs}) >= 2 and all(v == value for _, v in runs)


def test_dimension_mismatch_and_degree_zero():
    assert oracle_invariant(P2, (1,), [pt2]) == 0
    assert oracle_invariant(P2, (0,), [monomial((1,)), monomial((1,)), monomial((0,))]) == 1
    with pytest.raises(OracleError):
        oracle_invariant(P2, (0,), [pt2])


def test_descendants_on_projective_line():
    P1 = projective_gkm(1)
    assert oracle_invariant(P1, (1,), [monomial((0,), 1)]) == -2
    assert oracle_invariant(P1, (1,), [monomial((1,))] * 2) == 1
    assert oracle_invariant(P1, (2,), [monomial((1,))] * 4) == 0
    # a dimension-matched sum of two components
    mixed = [{((1,), 0): Fraction(1)}, {((0,), 0): Fraction(3)}]
    assert oracle_invariant(P1, (1,), [mixed]) == 3 * -2 + 1


def test_product_of_lines():
    Q = builtin_gkm("P1xP1")
    assert Q.generators == ["H1", "H2"]
    point = monomial((1, 1))
    assert oracle_invariant(Q, (1, 0), [point]) == 1
    assert oracle_invariant(Q, (1, 1), [point] * 3) == 1
    assert oracle_invariant(Q, (2, 1), [point] * 5) == 1


def test_hirzebruch_lines():
    F0 = split_bundle_gkm((1, 1))
    F2 = builtin_gkm("F2")
    assert F2.dim == 2 and F0.dim == 2
    HF = monomial((1, 1))
    assert oracle_invariant(F0, (1, 0), [HF]) == 1
    # the minimal section of F_2 has self-intersection -2 and (-K, C) = 0
    assert F2.c1_pairing((-2, 1)) == 0
    assert F2.divisor_pairing(F2.divisors["H"], (-2, 1)) == -2
    assert F2.divisor_pairing(F2.divisors["F"], (-2, 1)) == 1


def test_line_twist_is_laurent():
    P1 = projective_gkm(1)
    twist = TwistSpec([(P1.divisors["H"], -1)])
    value = oracle_invariant(P1, (1,), [monomial((1,))], twist)
    assert isinstance(value, dict)
    assert all(isinstance(k, int) for k in value)


def test_validate_catches_bad_data():
    bad = projective_gkm(2)
    bad.tangent[0] = bad.tangent[0][:1]
    with pytest.raises(OracleError):
        bad.validate()
    bad = projective_gkm(1)
    bad.divisors["H"] = [(1, 0), (1, 0)]
    bad.divisors["H"][1] = (0, 5)
    with pytest.raises(OracleError):
        bad.validate()


def test_load_gkm_json(tmp_path):
    data = asdict(projective_gkm(2))
    for o in data["orbits"]:
        o["class"] = o.pop("cls")
    path = tmp_path / "p2.json"
    path.write_text(json.dumps(data))
    again = load_gkm(str(path))
    assert oracle_invariant(again, (1,), [pt2] * 2) == 1
    assert load_gkm("P^3").dim == 3
    with pytest.raises(OracleError):
        builtin_gkm("Q3")
