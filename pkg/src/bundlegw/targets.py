"""Projective bundles P(V) -> S, their master spaces P(V ⊕ O), and curve classes.

Conventions: P(V) parametrizes lines, H = c1(O_{P(V)}(1)), so that
H^r + c1(V) H^{r-1} + ... + c_r(V) = 0.  A curve class is recorded as
``CurveClass(k, b)`` with k = (β, H) and b the tuple of pairings of β with
the degree-2 basis elements of the base.  The same coordinates label classes
on X_∞ = P(V) and on the master space X = P(V ⊕ O) (where k = (β, O_X(1))).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .exactring import (BaseRing, StructureError, bundle_ring, load_base, master_ring,
                        parse_rational)
from .linalg import rank as matrix_rank
from .linalg import solve


class ConfigurationError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class CurveClass:
    k: int
    b: tuple = ()

    def __add__(self, other):
        return CurveClass(self.k + other.k, tuple(x + y for x, y in zip(self.b, other.b)))

    def __sub__(self, other):
        return CurveClass(self.k - other.k, tuple(x - y for x, y in zip(self.b, other.b)))

    def scale(self, m: int) -> "CurveClass":
        return CurveClass(m * self.k, tuple(m * x for x in self.b))

    def is_zero(self) -> bool:
        return self.k == 0 and not any(self.b)

    def vector(self):
        return (self.k,) + tuple(self.b)

    def __str__(self):
        if not self.b:
            return str(self.k)
        return "(" + ",".join(str(x) for x in self.vector()) + ")"

    def to_json(self):
        return list(self.vector())

    @classmethod
    def parse(cls, text, nbase: int) -> "CurveClass":
        if isinstance(text, CurveClass):
            return text
        if isinstance(text, int):
            vals = [text]
        elif isinstance(text, (list, tuple)):
            vals = [int(x) for x in text]
        else:
            t = str(text).strip().strip("()[]")
            vals = [int(x) for x in t.split(",") if x.strip()]
        if len(vals) == 1 and nbase:
            vals = vals + [0] * nbase
        if len(vals) != 1 + nbase:
            raise DomainError(f"curve class {text!r} needs {1 + nbase} coordinates")
        return cls(vals[0], tuple(vals[1:]))


def in_cone(vec, rays) -> bool:
    """Whether ``vec`` lies in the closed rational cone spanned by ``rays``."""
    vec = [Fraction(x) for x in vec]
    if not any(vec):
        return True
    rays = [list(r) for r in rays if any(r)]
    dim = len(vec)
    for size in range(1, min(len(rays), dim) + 1):
        for subset in itertools.combinations(rays, size):
            if matrix_rank(subset) < size:
                continue
            # least-squares free: pick `size` independent coordinates
            for coords in itertools.combinations(range(dim), size):
                sub = [[r[c] for r in subset] for c in coords]
                if matrix_rank(sub) < size:
                    continue
                x = solve(sub, [vec[c] for c in coords])
                recon = [sum(x[i] * subset[i][c] for i in range(size)) for c in range(dim)]
                if recon == vec and all(xi >= 0 for xi in x):
                    return True
                break
    return False


def positive_functional(rays):
    """A small integer vector pairing strictly positively with every ray."""
    rays = [r for r in rays if any(r)]
    if not rays:
        return None
    dim = len(rays[0])
    for bound in range(1, 12):
        for vec in itertools.product(range(-bound, bound + 1), repeat=dim):
            if all(sum(a * b for a, b in zip(vec, r)) > 0 for r in rays):
                return vec
    raise ConfigurationError("cone is not strictly convex")


class TargetModel:
    """A projective bundle P(V) over a base S with the data needed by the engine.

    ``chern[i]`` is c_{i+1}(V) as a dict {basis index: coefficient}.  ``base_rays``
    generate NE(S) in pairing coordinates; ``rays`` generate NE(P(V)) in (k, b).
    """

    def __init__(self, name, base: BaseRing, rank: int, chern, rays, base_rays=(),
                 canonical=None, ample=False, gkm=None, split=None):
        self.name = name
        self.base = base
        self.rank = int(rank)
        self.chern = [dict({int(j): Fraction(c) for j, c in ci.items() if c}) for ci in chern]
        self.split = None if split is None else tuple(split)
        if len(self.chern) != self.rank:
            raise ConfigurationError(f"need {self.rank} Chern classes, got {len(self.chern)}")
        for i, ci in enumerate(self.chern, start=1):
            for j in ci:
                if base.cdeg[j] != i:
                    raise ConfigurationError(f"c_{i}(V) has a component of the wrong degree")
        self.canonical = base.canonical if canonical is None else [Fraction(c) for c in canonical]
        self.divisors = base.divisor_indices()
        self.rays = [tuple(r) for r in rays]
        self.base_rays = [tuple(r) for r in base_rays]
        for r in self.rays:
            if len(r) != 1 + len(self.divisors):
                raise ConfigurationError("cone ray has the wrong number of coordinates")
        self.ample = bool(ample)
        self.gkm = gkm  # optional hook: object exposing total_space() / base_space()

    def __repr__(self):
        return f"TargetModel({self.name})"

    # -- rings --------------------------------------------------------------
    @cached_property
    def scalar(self):
        return self.bundle.with_vars(0)

    @cached_property
    def bundle(self):
        return bundle_ring(self.base, self.chern, self.rank, 1, tag=self.name)

    def fiber_product(self, g: int):
        return self.bundle.with_vars(g)

    @cached_property
    def master(self):
        return master_ring(self.base, self.chern, self.rank, tag=self.name)

    # -- numerics -------------------------------------------------------------
    @property
    def dim_base(self) -> int:
        return self.base.dim

    @property
    def dim(self) -> int:
        return self.base.dim + self.rank - 1

    @property
    def nbase(self) -> int:
        return len(self.divisors)

    def zero_class(self) -> CurveClass:
        return CurveClass(0, (0,) * self.nbase)

    def fiber_class(self) -> CurveClass:
        return CurveClass(1, (0,) * self.nbase)

    def _divisor_coords(self, vec):
        """Coefficients of a degree-2 base class on the divisor basis."""
        return [Fraction(vec.get(j, 0)) for j in self.divisors]

    def anticanonical_pairing(self, beta: CurveClass) -> Fraction:
        """(-K_{P(V)}, β) = r k + ((c1(V) - K_S), b̄)."""
        if self.canonical is None:
            raise ConfigurationError("base presentation carries no canonical class")
        c1 = self.chern[0] if self.rank else {}
        ks = {j: c for j, c in enumerate(self.canonical) if c}
        total = Fraction(self.rank * beta.k)
        for pos, j in enumerate(self.divisors):
            total += (c1.get(j, 0) - ks.get(j, 0)) * beta.b[pos]
        return total

    def base_anticanonical_pairing(self, bbar) -> Fraction:
        if self.canonical is None:
            raise ConfigurationError("base presentation carries no canonical class")
        return -sum((self.canonical[j] * bbar[pos] for pos, j in enumerate(self.divisors)), Fraction(0))

    def base_c1_pairing(self, bbar) -> Fraction:
        c1 = self.chern[0] if self.rank else {}
        return sum((c1.get(j, 0) * bbar[pos] for pos, j in enumerate(self.divisors)), Fraction(0))

    def is_effective(self, beta: CurveClass) -> bool:
        if beta.is_zero():
            return True
        return in_cone(beta.vector(), self.rays)

    def is_base_effective(self, bbar) -> bool:
        if not any(bbar):
            return True
        return in_cone(bbar, self.base_rays)

    @cached_property
    def master_rays(self):
        return list(self.rays) + [(0,) + tuple(r) for r in self.base_rays]

    def is_master_effective(self, beta: CurveClass) -> bool:
        if beta.is_zero():
            return True
        return in_cone(beta.vector(), self.master_rays)

    @cached_property
    def master_functional(self):
        return positive_functional(self.master_rays) or (1,)

    def weight(self, beta: CurveClass) -> int:
        return sum(a * b for a, b in zip(self.master_functional, beta.vector()))

    def to_json(self):
        return {
            "name": self.name,
            "base": self.base.to_json(),
            "rank": self.rank,
            "chern": [self._vec_list(ci) for ci in self.chern],
            "cone_rays": [list(r) for r in self.rays],
            "base_rays": [list(r) for r in self.base_rays],
        }

    def _vec_list(self, ci):
        return [str(ci.get(j, 0)) for j in range(self.base.size)]


def canonical_divisor(target: TargetModel):
    """K_{P(V)} = -r H - π*c1(V) + π*K_S as an element of the bundle ring."""
    if target.canonical is None:
        raise ConfigurationError("base presentation carries no canonical class")
    ring = target.bundle
    c1 = target.chern[0] if target.rank else {}
    base_part = {j: -c1.get(j, 0) + target.canonical[j] for j in range(target.base.size)}
    return ring.var(0) * (-target.rank) + ring.base_elem(base_part)


def virtual_dim(target: TargetModel, n: int, beta: CurveClass, g: int = 0) -> int:
    if g != 0:
        raise DomainError("only genus 0 is supported")
    value = target.dim + target.anticanonical_pairing(beta) + n - 3
    return int(value)


def divisor_pairing(target: TargetModel, D, beta: CurveClass) -> Fraction:
    """(D, β) for a degree-2 class D = x H + π*(Σ y_j D_j) in the bundle ring."""
    total = Fraction(0)
    for (e, j, l), c in D.terms.items():
        if l or sum(e) + target.base.cdeg[j] != 1:
            raise DomainError("pairing needs a λ-free class of degree 2")
        if sum(e) == 1:
            total += c * beta.k
        else:
            total += c * beta.b[target.divisors.index(j)]
    return total


def curve_less(beta: CurveClass, beta2: CurveClass, target: TargetModel) -> bool:
    """Strict order driving the recursion: base part drops, or the difference is effective in X."""
    if beta == beta2:
        return False
    db = tuple(y - x for x, y in zip(beta.b, beta2.b))
    if any(db) and target.is_base_effective(db):
        return True
    return target.is_master_effective(beta2 - beta)


# ---------------------------------------------------------------------------
# equal-Chern pairs


class EqualChernPair:
    def __init__(self, first: TargetModel, second: TargetModel):
        if first.base is not second.base and first.base.to_json() != second.base.to_json():
            raise DomainError("targets live over different base presentations")
        if first.rank != second.rank:
            raise DomainError("bundles have different ranks")
        if first.chern != second.chern:
            raise DomainError("bundles have different Chern classes")
        self.first = first
        self.second = second

    def f_map(self, x):
        """Send a class on P(V1) to the class on P(V2) with the same H/base expansion."""
        from .exactring import Elem

        if isinstance(x, Elem):
            return Elem(self.second.bundle, dict(x.terms))
        return x

    def psi_map(self, beta: CurveClass) -> CurveClass:
        # f_map identifies the divisor bases (H and π*D), and both sides record
        # curve classes by those pairings, so the dual map is the identity on coordinates.
        return CurveClass(beta.k, tuple(beta.b))


def psi_map(pair: EqualChernPair, beta: CurveClass) -> CurveClass:
    return pair.psi_map(beta)


def f_map(pair: EqualChernPair, x):
    return pair.f_map(x)


# ---------------------------------------------------------------------------
# builtin targets


def projective_space(n: int) -> TargetModel:
    """P^n as P(C^{n+1}) over a point."""
    base = load_base("pt")
    return TargetModel(f"P{n}", base, n + 1, [{} for _ in range(n + 1)], rays=[(1,)], ample=True,
                       split=(0,) * (n + 1))


def split_over_p1(twists) -> TargetModel:
    """P(O(a_1) ⊕ ... ⊕ O(a_r)) over P^1."""
    twists = tuple(int(a) for a in twists)
    base = load_base("P1")
    r = len(twists)
    # elementary symmetric functions of the a_i times powers of the point class
    chern = []
    for i in range(1, r + 1):
        e = sum(_prod(c) for c in itertools.combinations(twists, i))
        chern.append({1: e} if i == 1 and e else {})
    rays = [(1, 0)] + [(-a, 1) for a in twists]
    # keep only extremal ones
    rays = _extremal_2d(rays)
    name = "P(" + "+".join(f"O({a})" for a in twists) + ")/P1"
    return TargetModel(name, base, r, chern, rays=rays, base_rays=[(1,)], ample=all(a <= -1 for a in twists),
                       split=twists)


def trivial_over(base_name: str, rank: int, name=None) -> TargetModel:
    base = load_base(base_name)
    nb = len(base.divisor_indices())
    rays = [(1,) + (0,) * nb]
    base_rays = []
    for pos in range(nb):
        ray = [0] * nb
        ray[pos] = 1
        base_rays.append(tuple(ray))
        rays.append((0,) + tuple(ray))
    return TargetModel(name or f"{base_name}xP{rank - 1}", base, rank, [{} for _ in range(rank)], rays=rays,
                       base_rays=base_rays, split=(0,) * rank)


def _prod(c):
    out = 1
    for x in c:
        out *= x
    return out


def _extremal_2d(rays):
    """Drop rays that are nonnegative combinations of the others (planar cones)."""
    uniq = []
    for r in rays:
        if r not in uniq:
            uniq.append(r)
    out = []
    for r in uniq:
        others = [s for s in uniq if s != r]
        if not in_cone(r, others):
            out.append(r)
    return out


BUILTIN_TARGETS = {
    "P1": lambda: projective_space(1),
    "P2": lambda: projective_space(2),
    "P3": lambda: projective_space(3),
    "P4": lambda: projective_space(4),
    "F0": lambda: split_over_p1((1, 1)),
    "F2": lambda: split_over_p1((0, 2)),
}


def load_target(spec) -> TargetModel:
    """Accepts a TargetModel, a builtin name ("P3", "split:0,2"), a JSON path or a dict."""
    if isinstance(spec, TargetModel):
        return spec
    if isinstance(spec, str):
        if spec in BUILTIN_TARGETS:
            return BUILTIN_TARGETS[spec]()
        if spec.startswith("P") and spec[1:].isdigit():
            return projective_space(int(spec[1:]))
        if spec.startswith("split:"):
            return split_over_p1(int(x) for x in spec[6:].split(","))
        with open(spec) as fh:
            spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ConfigurationError(f"cannot load target from {spec!r}")
    try:
        base = load_base(spec["base"])
        if "K_S" in spec:
            base.canonical = [parse_rational(c) for c in spec["K_S"]]
        rank = int(spec["rank"])
        chern = []
        for vec in spec["chern"]:
            if isinstance(vec, dict):
                chern.append({base.index(k) if not str(k).isdigit() else int(k): parse_rational(v)
                              for k, v in vec.items()})
            else:
                chern.append({j: parse_rational(c) for j, c in enumerate(vec) if parse_rational(c)})
        rays = [tuple(int(x) for x in r) for r in spec["cone_rays"]]
        base_rays = [tuple(int(x) for x in r) for r in spec.get("base_rays", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (StructureError, ConfigurationError)):
            raise
        raise ConfigurationError(f"malformed target description: {exc}") from exc
    return TargetModel(spec.get("name", "custom"), base, rank, chern, rays, base_rays,
                       ample=bool(spec.get("ample", False)))
