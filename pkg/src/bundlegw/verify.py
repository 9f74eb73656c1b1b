"""Verification drivers: engine vs oracle sweeps, the equal-Chern comparisons, axiom checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

from . import gkm
from .engine import Engine
from .targets import CurveClass, EqualChernPair, divisor_pairing, projective_space, split_over_p1, virtual_dim


@dataclass
class Report:
    name: str
    rows: list = field(default_factory=list)   # (label, left, right, ok)

    @property
    def ok(self):
        return all(r[3] for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r[3]]

    def add(self, label, left, right):
        self.rows.append((label, left, right, left == right))

    def summary(self):
        bad = self.failures()
        return f"{self.name}: {len(self.rows) - len(bad)}/{len(self.rows)} agree"


def descendant_lists(labels, n, total, degree_of):
    """Multisets of n insertions ψ^a·T (T from ``labels``) with Σ(a + deg T) = total."""
    items = []
    for lab in labels:
        for a in range(total - degree_of(lab) + 1):
            items.append((a, lab))
    for combo in itertools.combinations_with_replacement(items, n):
        if sum(a + degree_of(lab) for a, lab in combo) == total:
            yield list(combo)


# ---------------------------------------------------------------------------
# engine vs oracle on projective spaces


def projective_sweep(n_dim: int, max_degree: int, max_points: int, engine=None):
    """Every dimension-matched descendant invariant ⟨ψ^{a_i} H^{e_i}⟩_{0,n,d} of P^n."""
    target = projective_space(n_dim)
    engine = engine or Engine(target)
    space = gkm.projective_gkm(n_dim)
    H = target.bundle.var(0)
    report = Report(f"P{n_dim} engine vs oracle")
    for d in range(1, max_degree + 1):
        beta = CurveClass(d)
        for n in range(0, max_points + 1):
            total = virtual_dim(target, n, beta)
            for combo in descendant_lists(range(n_dim + 1), n, total, lambda e: e):
                ins = [(a, H ** e) for a, e in combo]
                value = engine.compute(beta, ins)
                oracle = gkm.oracle_invariant(space, (d,), [gkm.monomial((e,), a) for a, e in combo])
                report.add((d, tuple(combo)), value, oracle)
    return report


# ---------------------------------------------------------------------------
# equal-Chern pair over P^1


HIRZEBRUCH_CLASSES = {"1": (0, 0), "H": (1, 0), "F": (0, 1), "HF": (1, 1)}


def hirzebruch_pair():
    return EqualChernPair(split_over_p1((0, 2)), split_over_p1((1, 1)))


def theorem_a_classes(max_anticanonical=6, max_base=2):
    """Classes effective on F_2 or F_0 with 0 <= (-K, β) <= bound and base degree <= max_base."""
    out = []
    for b in range(0, max_base + 1):
        for k in range(-2 * b, max_anticanonical + 1):
            if 0 <= 2 * k + 4 * b <= max_anticanonical:
                out.append((k, b))
    return out


def theorem_a_insertions(beta, max_points=3, max_points_primary=5):
    """Dimension-matched lists of ψ^a T with T in 1, H, F, HF."""
    k, b = beta
    anti = 2 * k + 4 * b
    deg = lambda lab: sum(HIRZEBRUCH_CLASSES[lab])
    for n in range(0, max(max_points, max_points_primary) + 1):
        total = 2 + anti + n - 3
        if total < 0:
            continue
        if (k, b) == (0, 0) and n < 3:
            continue
        for combo in descendant_lists(list(HIRZEBRUCH_CLASSES), n, total, deg):
            primary_points = all(a == 0 and lab == "HF" for a, lab in combo)
            if n > max_points and not primary_points:
                continue
            yield combo


def verify_theorem_a(classes=None, max_points=3, max_points_primary=5):
    """⟨…⟩^{F_2}_β = ⟨f(…)⟩^{F_0}_{Ψβ} on the sweep box, both sides by the oracle."""
    pair = hirzebruch_pair()
    left = gkm.split_bundle_gkm(pair.first.split)
    right = gkm.split_bundle_gkm(pair.second.split)
    report = Report("F2 vs F0 under (f, Psi)")
    for beta in classes or theorem_a_classes():
        image = pair.psi_map(CurveClass(beta[0], (beta[1],))).vector()
        for combo in theorem_a_insertions(beta, max_points, max_points_primary):
            ins = [gkm.monomial(HIRZEBRUCH_CLASSES[lab], a) for a, lab in combo]
            lv = gkm.oracle_invariant(left, beta, ins) if pair.first.is_effective(CurveClass(beta[0], (beta[1],))) else Fraction(0)
            rv = gkm.oracle_invariant(right, image, ins) if pair.second.is_effective(CurveClass(*image[:1], image[1:])) else Fraction(0)
            report.add((beta, tuple(combo)), lv, rv)
    return report


def verify_pairing(box=5, pair=None):
    """(D, β) on the first target equals (f(D), Ψ(β)) on the second, for D in {H, F} and β in the box.

    Both sides are also recomputed from the moment graphs, whose orbit classes
    and divisor weights are an independent description of the same surfaces.
    """
    pair = pair or hirzebruch_pair()
    spaces = [gkm.split_bundle_gkm(t.split) for t in (pair.first, pair.second)]
    report = Report("divisor pairing under (f, Psi)")
    ring = pair.first.bundle
    divisors = {"H": ring.var(0), "F": ring.base_elem("F")}
    for k in range(-box, box + 1):
        for b in range(-box, box + 1):
            beta = CurveClass(k, (b,))
            image = pair.psi_map(beta)
            for name, D in divisors.items():
                left = divisor_pairing(pair.first, D, beta)
                right = divisor_pairing(pair.second, pair.f_map(D), image)
                report.add((name, k, b), left, right)
                moment = [sp.divisor_pairing(sp.divisors[name], cls)
                          for sp, cls in zip(spaces, (beta.vector(), image.vector()))]
                report.add((name, k, b, "moment graph"), left, moment[0])
                report.add((name, k, b, "moment graph image"), right, moment[1])
    return report


def base_twist(twists):
    base = gkm.projective_gkm(1, gen="F")
    summands = [([tuple(a * x for x in w) for w in base.divisors["F"]], 1) for a in twists]
    return base, gkm.TwistSpec(summands)


def verify_lemma_tw(max_degree=3, max_points=3, max_psi=2, pair=((0, 2), (1, 1))):
    """Twisted invariants of P^1 by V_1 and V_2 (scaling weight +1) agree as Laurent scalars."""
    base, tw1 = base_twist(pair[0])
    _, tw2 = base_twist(pair[1])
    report = Report("twisted P1 invariants, V1 vs V2")
    labels = [(a, f) for a in range(max_psi + 1) for f in (0, 1)]
    for d in range(0, max_degree + 1):
        for n in range(0, max_points + 1):
            if d == 0 and n < 3:
                continue
            for combo in itertools.combinations_with_replacement(labels, n):
                ins = [gkm.monomial((f,), a) for a, f in combo]
                v1 = gkm.oracle_invariant(base, (d,), ins, tw1)
                v2 = gkm.oracle_invariant(base, (d,), ins, tw2)
                report.add((d, combo), v1, v2)
    return report


def example_values(max_n=4):
    """⟨ψ^{2n-1}⟩^{P^n}_{0,1,1} from the engine, paired with (-1)^n C(2n, n)."""
    out = []
    for n in range(1, max_n + 1):
        target = projective_space(n)
        value = Engine(target).compute(CurveClass(1), [(2 * n - 1, target.bundle.one())])
        out.append((n, value, (-1) ** n * comb(2 * n, n)))
    return out


# ---------------------------------------------------------------------------
# axioms on computed tables


class _Missing(LookupError):
    pass


class AxiomTable:
    """Genus-0 descendant values keyed by (β, sorted insertions (a, label)).

    ``degree(label)`` and ``vdim(beta, n)`` decide which entries vanish by
    dimension; ``multiply(label, D)`` returns the product as {label: coef} and
    ``pairing(D, beta)`` the intersection number.
    """

    def __init__(self, values, unit, divisors, degree, vdim, multiply, pairing):
        self.values = {(b, tuple(sorted(ins))): v for (b, ins), v in values.items()}
        self.unit = unit
        self.divisors = divisors
        self.degree = degree
        self.vdim = vdim
        self.multiply = multiply
        self.pairing = pairing

    def get(self, beta, ins):
        ins = tuple(sorted(ins))
        if sum(a + self.degree(lab) for a, lab in ins) != self.vdim(beta, len(ins)):
            return Fraction(0)
        if ins and any(a < 0 for a, _ in ins):
            return Fraction(0)
        try:
            return self.values[(beta, ins)]
        except KeyError:
            raise _Missing from None

    def _stable(self, beta, n):
        return any(beta) or n >= 3

    def _lowered(self, rest, i, label=None):
        a, lab = rest[i]
        return rest[:i] + ((a - 1, lab if label is None else label),) + rest[i + 1:]

    def check(self, name="axioms"):
        """A Report with one row per applicable string, dilaton or divisor instance."""
        report = Report(name)
        for (beta, ins), value in sorted(self.values.items(), key=repr):
            for pos, (a, lab) in enumerate(ins):
                if pos and ins[pos - 1] == (a, lab):
                    continue
                rest = ins[:pos] + ins[pos + 1:]
                if not self._stable(beta, len(rest)):
                    continue
                try:
                    if a == 0 and lab == self.unit:
                        rhs = sum((self.get(beta, self._lowered(rest, i)) for i in range(len(rest)) if rest[i][0]),
                                  Fraction(0))
                        report.add(("string", beta, ins), value, rhs)
                    elif a == 1 and lab == self.unit:
                        report.add(("dilaton", beta, ins), value, (len(rest) - 2) * self.get(beta, rest))
                    elif a == 0 and lab in self.divisors:
                        rhs = self.pairing(lab, beta) * self.get(beta, rest)
                        for i in range(len(rest)):
                            if not rest[i][0]:
                                continue
                            for lab2, c in self.multiply(rest[i][1], lab).items():
                                rhs += c * self.get(beta, self._lowered(rest, i, lab2))
                        report.add(("divisor", beta, ins), value, rhs)
                except _Missing:
                    continue
        return report


def projective_axiom_table(n_dim, rows):
    """Rows (d, [(a, e), ...], value) for P^n with labels e meaning H^e."""
    values = {((d,), tuple(ins)): v for d, ins, v in rows}
    return AxiomTable(
        values, unit=0, divisors=(1,), degree=lambda e: e,
        vdim=lambda beta, n: n_dim + (n_dim + 1) * beta[0] + n - 3,
        multiply=lambda e, D: {e + D: 1} if e + D <= n_dim else {},
        pairing=lambda D, beta: beta[0])


def hirzebruch_axiom_table(twists, rows):
    """Rows ((k, b), [(a, name), ...], value) on P(O(a1) ⊕ O(a2)) over P^1, names in 1, H, F, HF."""
    c1 = sum(twists)
    products = {
        ("1", "H"): {"H": 1}, ("1", "F"): {"F": 1},
        ("H", "H"): {"HF": -c1}, ("H", "F"): {"HF": 1},
        ("F", "H"): {"HF": 1}, ("F", "F"): {},
        ("HF", "H"): {}, ("HF", "F"): {},
    }
    deg = lambda lab: sum(HIRZEBRUCH_CLASSES[lab])
    values = {(tuple(beta), tuple(ins)): v for beta, ins, v in rows}
    return AxiomTable(
        values, unit="1", divisors=("H", "F"), degree=deg,
        vdim=lambda beta, n: 2 + 2 * beta[0] + (c1 + 2) * beta[1] + n - 3,
        multiply=lambda lab, D: products[(lab, D)],
        pairing=lambda D, beta: beta[0] if D == "H" else beta[1])
