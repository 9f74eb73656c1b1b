"""Exact arithmetic in truncated graded rings with an inverted equivariant parameter.

Every value in the package lives in one of these rings:

* ``Laurent`` -- finitely supported Laurent polynomials in λ over Q.
* ``BaseRing`` -- a finite presentation of H*(S) by a multiplication table.
* ``Ring`` -- H*(S)[λ, λ^-1][H_1, ..., H_g] modulo a monic relation in each H_i.
  With the relation c_V(H) this is H*(P(V)) (g = 1) or a g-fold fiber product
  of P(V) over S; with c_V(h)(h - λ) it is the equivariant cohomology of the
  master space P(V ⊕ O).
* ``PsiSeries`` -- truncated power series in a formal ψ with ring coefficients.
"""
from __future__ import annotations

import json
from collections import defaultdict
from fractions import Fraction
from math import factorial


class StructureError(ValueError):
    """Operands live in different rings, or a presentation is malformed."""


class NotInvertible(ArithmeticError):
    pass


def parse_rational(text) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    return Fraction(str(text).strip())


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Laurent polynomials in λ


class Laurent:
    """A Laurent polynomial in λ with rational coefficients (immutable)."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for k, c in terms.items():
                if c:
                    clean[int(k)] = Fraction(c)
        self.terms = clean
        self._hash = None

    @classmethod
    def constant(cls, c) -> "Laurent":
        return cls({0: c})

    @classmethod
    def monomial(cls, c, k: int) -> "Laurent":
        return cls({k: c})

    def __repr__(self):
        return f"Laurent({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms):
            c = format_rational(self.terms[k])
            if k == 0:
                parts.append(c)
            elif k == 1:
                parts.append(f"{c}*λ")
            else:
                parts.append(f"{c}*λ^{k}")
        return " + ".join(parts)

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Laurent.constant(other)
        if not isinstance(other, Laurent):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def _coerce(self, other):
        if isinstance(other, Laurent):
            return other
        if isinstance(other, (int, Fraction)):
            return Laurent.constant(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return Laurent(out)

    __radd__ = __add__

    def __neg__(self):
        return Laurent({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Laurent({k: c * other for k, c in self.terms.items()})
        if not isinstance(other, Laurent):
            return NotImplemented
        out = defaultdict(Fraction)
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                out[k1 + k2] += c1 * c2
        return Laurent(out)

    __rmul__ = __mul__

    def coefficient(self, k: int) -> Fraction:
        return self.terms.get(k, Fraction(0))

    def is_constant(self) -> bool:
        return all(k == 0 for k in self.terms)

    def inverse(self) -> "Laurent":
        if len(self.terms) != 1:
            raise NotInvertible(f"{self} is not a unit in Q[λ, 1/λ]")
        (k, c), = self.terms.items()
        return Laurent({-k: 1 / c})

    def to_json(self):
        return {"laurent": {str(k): format_rational(c) for k, c in sorted(self.terms.items())}}

    @classmethod
    def from_json(cls, obj) -> "Laurent":
        if isinstance(obj, dict):
            return cls({int(k): parse_rational(v) for k, v in obj["laurent"].items()})
        return cls.constant(parse_rational(obj))


LAMBDA = Laurent.monomial(1, 1)


# ---------------------------------------------------------------------------
# Base ring presentations


class BaseRing:
    """H*(S) presented by a basis, a multiplication table and an integral.

    ``cdeg[i]`` is the complex degree of basis element ``i``; the JSON format
    uses real degrees (twice that).  Basis element 0 must be the unit.
    """

    def __init__(self, names, cdeg, mult, integral, canonical=None, name=None):
        self.names = list(names)
        self.cdeg = [int(d) for d in cdeg]
        self.size = len(self.names)
        self.mult = {}
        for (i, j), vec in mult.items():
            self.mult[(i, j)] = {int(k): Fraction(c) for k, c in vec.items() if c}
        self.integral = [Fraction(c) for c in integral]
        self.dim = max(self.cdeg)
        self.canonical = None if canonical is None else [Fraction(c) for c in canonical]
        self.name = name
        self._validate()
        self._dual = None

    def _validate(self):
        n = self.size
        if self.cdeg[0] != 0:
            raise StructureError("basis element 0 must be the unit")
        if len(self.integral) != n:
            raise StructureError("integral functional has the wrong length")
        for i in range(n):
            for j in range(n):
                vec = self.mult.setdefault((i, j), {})
                for k in vec:
                    if self.cdeg[k] != self.cdeg[i] + self.cdeg[j]:
                        raise StructureError(f"product {self.names[i]}*{self.names[j]} breaks degree additivity")
        for i in range(n):
            if self.mult[(0, i)] != {i: 1} or self.mult[(i, 0)] != {i: 1}:
                raise StructureError("basis element 0 does not act as the unit")
            for j in range(n):
                if self.mult[(i, j)] != self.mult[(j, i)]:
                    raise StructureError("multiplication table is not commutative")
        for i, c in enumerate(self.integral):
            if c and self.cdeg[i] != self.dim:
                raise StructureError("integral is nonzero outside the top degree")
        if self.canonical is not None and len(self.canonical) != n:
            raise StructureError("canonical class has the wrong length")
        # associativity on basis triples
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if self._triple(i, j, k, left=True) != self._triple(i, j, k, left=False):
                        raise StructureError("multiplication table is not associative")
        from .linalg import invert_matrix

        try:
            invert_matrix(self.pairing_matrix())
        except ZeroDivisionError as exc:
            raise StructureError("Poincaré pairing is degenerate") from exc

    def _triple(self, i, j, k, left):
        out = defaultdict(Fraction)
        if left:
            for a, c in self.mult[(i, j)].items():
                for b, d in self.mult[(a, k)].items():
                    out[b] += c * d
        else:
            for a, c in self.mult[(j, k)].items():
                for b, d in self.mult[(i, a)].items():
                    out[b] += c * d
        return {b: c for b, c in out.items() if c}

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown basis element {name!r}") from None

    def divisor_indices(self):
        return [i for i, d in enumerate(self.cdeg) if d == 1]

    def pairing_matrix(self):
        n = self.size
        mat = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                mat[i][j] = sum((c * self.integral[k] for k, c in self.mult[(i, j)].items()), Fraction(0))
        return mat

    def dual_basis(self):
        """Vectors T^i with ∫ T_i T^j = δ_ij."""
        if self._dual is None:
            from .linalg import invert_matrix

            inv = invert_matrix(self.pairing_matrix())
            # T^j = Σ_k inv[k][j] T_k  (pairing matrix is symmetric)
            self._dual = [[inv[k][j] for k in range(self.size)] for j in range(self.size)]
        return self._dual

    def to_json(self):
        mult = []
        for (i, j), vec in sorted(self.mult.items()):
            if vec:
                mult.append([[i, j], [{"k": k, "coef": format_rational(c)} for k, c in sorted(vec.items())]])
        out = {
            "basis": [{"name": n, "deg": 2 * d} for n, d in zip(self.names, self.cdeg)],
            "mult": mult,
            "integral": [format_rational(c) for c in self.integral],
        }
        if self.canonical is not None:
            out["K_S"] = [format_rational(c) for c in self.canonical]
        return out

    @classmethod
    def from_json(cls, obj) -> "BaseRing":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            names = [b["name"] for b in obj["basis"]]
            degs = [int(b["deg"]) for b in obj["basis"]]
            if any(d % 2 for d in degs):
                raise StructureError("odd-degree cohomology is not supported")
            mult = {}
            for (i, j), entries in obj["mult"]:
                mult[(int(i), int(j))] = {int(e["k"]): parse_rational(e["coef"]) for e in entries}
            n = len(names)
            for i in range(n):
                mult.setdefault((0, i), {i: 1})
                mult.setdefault((i, 0), {i: 1})
            integral = [parse_rational(c) for c in obj["integral"]]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, StructureError):
                raise
            raise StructureError(f"malformed base presentation: {exc}") from exc
        canonical = obj.get("K_S")
        if canonical is not None:
            canonical = [parse_rational(c) for c in canonical]
        return cls(names, [d // 2 for d in degs], mult, integral, canonical, name=obj.get("name"))


def point_ring() -> BaseRing:
    return BaseRing(["1"], [0], {(0, 0): {0: 1}}, [1], canonical=[0], name="pt")


def projective_ring(m: int, gen: str = "F") -> BaseRing:
    names = ["1"] + [gen if i == 1 else f"{gen}^{i}" for i in range(1, m + 1)]
    mult = {(i, j): ({i + j: 1} if i + j <= m else {}) for i in range(m + 1) for j in range(m + 1)}
    integral = [0] * m + [1]
    canonical = [0] * (m + 1)
    if m >= 1:
        canonical[1] = -(m + 1)
    return BaseRing(names, list(range(m + 1)), mult, integral, canonical, name=f"P{m}")


def p1xp1_ring() -> BaseRing:
    names = ["1", "A", "B", "AB"]
    exps = [(0, 0), (1, 0), (0, 1), (1, 1)]
    mult = {}
    for i, (a1, b1) in enumerate(exps):
        for j, (a2, b2) in enumerate(exps):
            e = (a1 + a2, b1 + b2)
            mult[(i, j)] = {exps.index(e): 1} if e in exps else {}
    return BaseRing(names, [0, 1, 1, 2], mult, [0, 0, 0, 1], canonical=[0, -2, -2, 0], name="P1xP1")


BUILTIN_BASES = {
    "pt": point_ring,
    "P1": lambda: projective_ring(1),
    "P2": lambda: projective_ring(2),
    "P1xP1": p1xp1_ring,
}


def load_base(spec) -> BaseRing:
    if isinstance(spec, BaseRing):
        return spec
    if isinstance(spec, str) and spec in BUILTIN_BASES:
        return BUILTIN_BASES[spec]()
    return BaseRing.from_json(spec)


# ---------------------------------------------------------------------------
# Quotient rings over the base


class Ring:
    """B[λ, 1/λ][H_1..H_g] / (rel(H_1), ..., rel(H_g)).

    ``relation`` lists the coefficients of a monic polynomial of degree R in H,
    lowest first, each given as a dict ``{(j, l): coef}`` meaning coef·T_j·λ^l.
    ``nilpotent`` records whether every H_i is nilpotent (true for c_V(H), false
    for the master-space relation); inversion needs it.
    """

    def __init__(self, base: BaseRing, relation, g: int, nilpotent: bool, tag: str,
               chern=None):
        self.base = base
        self.relation = [dict(c) for c in relation]
        self.R = len(self.relation)
        self.g = g
        self.nilpotent = nilpotent
        self.tag = tag
        self.chern = chern
        self._pow = {}
        self._segre = None

    def __repr__(self):
        return f"Ring({self.tag}, g={self.g})"

    def same(self, other: "Ring") -> bool:
        if self is other:
            return True
        if self.base is not other.base or self.g != other.g:
            return False
        return self.g == 0 or self.tag == other.tag

    def with_vars(self, g: int) -> "Ring":
        """The same presentation with ``g`` generator copies (shares power caches)."""
        if g == self.g:
            return self
        cache = self.__dict__.setdefault("_family", {self.g: self})
        if g not in cache:
            ring = Ring(self.base, self.relation, g, self.nilpotent, self.tag, chern=self.chern)
            ring._pow = self._pow
            ring._segre = self._segre
            ring._family = cache
            cache[g] = ring
        return cache[g]

    # -- construction ----------------------------------------------------
    def elem(self, terms) -> "Elem":
        return Elem(self, self._reduce(terms))

    def zero(self) -> "Elem":
        return Elem(self, {})

    def one(self) -> "Elem":
        return Elem(self, {((0,) * self.g, 0, 0): Fraction(1)})

    def scalar(self, c) -> "Elem":
        if isinstance(c, Laurent):
            return Elem(self, {((0,) * self.g, 0, k): v for k, v in c.terms.items()})
        c = Fraction(c)
        return Elem(self, {((0,) * self.g, 0, 0): c} if c else {})

    def lam(self, power: int = 1) -> "Elem":
        return Elem(self, {((0,) * self.g, 0, power): Fraction(1)})

    def var(self, i: int = 0, power: int = 1) -> "Elem":
        e = [0] * self.g
        e[i] = power
        return self.elem({(tuple(e), 0, 0): Fraction(1)})

    def base_elem(self, vec) -> "Elem":
        """Pull back a base class given as a coefficient vector (or a basis name)."""
        if isinstance(vec, str):
            vec = {self.base.index(vec): 1}
        if isinstance(vec, (list, tuple)):
            vec = dict(enumerate(vec))
        z = (0,) * self.g
        return Elem(self, {(z, j, 0): Fraction(c) for j, c in vec.items() if c})

    # -- reduction -------------------------------------------------------
    def _power(self, e: int):
        """H^e reduced, as {(k, j, l): coef} with k < R."""
        if e < self.R:
            return {(e, 0, 0): Fraction(1)}
        if e in self._pow:
            return self._pow[e]
        prev = self._power(e - 1)
        out = defaultdict(Fraction)
        for (k, j, l), c in prev.items():
            if k + 1 < self.R:
                out[(k + 1, j, l)] += c
            else:
                # H^R = -Σ rel_k H^k
                for kk, coeffs in enumerate(self.relation):
                    for (jj, ll), cc in coeffs.items():
                        for jo, m in self.base.mult[(j, jj)].items():
                            out[(kk, jo, l + ll)] -= c * cc * m
        res = {key: c for key, c in out.items() if c}
        self._pow[e] = res
        return res

    def _reduce(self, terms):
        out = defaultdict(Fraction)
        pending = list(terms.items())
        while pending:
            (exps, j, l), c = pending.pop()
            if not c:
                continue
            over = next((i for i, e in enumerate(exps) if e >= self.R), None)
            if over is None:
                out[(exps, j, l)] += c
                continue
            for (k, jj, ll), cc in self._power(exps[over]).items():
                ne = exps[:over] + (k,) + exps[over + 1:]
                for jo, m in self.base.mult[(j, jj)].items():
                    pending.append(((ne, jo, l + ll), c * cc * m))
        return {key: c for key, c in out.items() if c}

    # -- Segre classes ---------------------------------------------------
    def segre(self):
        """s_i(V) as base vectors with s(V)·c(V) = 1 (bundle rings only)."""
        if self.chern is None:
            raise StructureError(f"{self.tag} is not a bundle ring")
        if self._segre is None:
            base = self.base
            top = base.dim
            s = [{0: Fraction(1)}]
            for i in range(1, top + 1):
                acc = defaultdict(Fraction)
                for k in range(1, min(i, len(self.chern)) + 1):
                    for a, ca in self.chern[k - 1].items():
                        for b, cb in s[i - k].items():
                            for o, m in base.mult[(a, b)].items():
                                acc[o] -= ca * cb * m
                s.append({o: c for o, c in acc.items() if c})
            self._segre = s
        return self._segre


def _base_mul(base: BaseRing, a: dict, b: dict) -> dict:
    out = defaultdict(Fraction)
    for i, ci in a.items():
        for j, cj in b.items():
            for k, m in base.mult[(i, j)].items():
                out[k] += ci * cj * m
    return {k: c for k, c in out.items() if c}


class Elem:
    """An element of a ``Ring``; terms map (H-exponents, base index, λ-power) to Q."""

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: Ring, terms):
        self.ring = ring
        self.terms = terms
        self._hash = None

    def _check(self, other):
        if isinstance(other, Elem):
            if not self.ring.same(other.ring):
                raise StructureError(f"cannot combine elements of {self.ring} and {other.ring}")
            return other
        if isinstance(other, (int, Fraction, Laurent)):
            return self.ring.scalar(other)
        return None

    def __add__(self, other):
        other = self._check(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for k, c in other.terms.items():
            v = out.get(k, 0) + c
            if v:
                out[k] = v
            else:
                out.pop(k, None)
        return Elem(self.ring, out)

    __radd__ = __add__

    def __neg__(self):
        return Elem(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._check(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return self.ring.zero()
            return Elem(self.ring, {k: c * other for k, c in self.terms.items()})
        other = self._check(other)
        if other is None:
            return NotImplemented
        mult = self.ring.base.mult
        out = defaultdict(Fraction)
        for (e1, j1, l1), c1 in self.terms.items():
            for (e2, j2, l2), c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                for j, m in mult[(j1, j2)].items():
                    out[(e, j, l1 + l2)] += c * m
        return self.ring.elem(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = self.ring.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        other = self._check(other)
        return self * other.inverse()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, Laurent)):
            other = self.ring.scalar(other)
        if not isinstance(other, Elem):
            return NotImplemented
        return self.ring.same(other.ring) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring.g, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        return f"Elem({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        names = self.ring.base.names
        parts = []
        for (e, j, l), c in sorted(self.terms.items()):
            mono = []
            hn = "h" if not self.ring.nilpotent else "H"
            for i, a in enumerate(e):
                if a:
                    v = hn if self.ring.g == 1 else f"{hn}{i + 1}"
                    mono.append(v if a == 1 else f"{v}^{a}")
            if j:
                mono.append(f"[{names[j]}]")
            if l:
                mono.append("λ" if l == 1 else f"λ^{l}")
            parts.append(format_rational(c) + ("*" + "*".join(mono) if mono else ""))
        return " + ".join(parts)

    def degree_parts(self):
        """Split into homogeneous pieces keyed by total (H, base, λ) degree."""
        cdeg = self.ring.base.cdeg
        parts = defaultdict(dict)
        for (e, j, l), c in self.terms.items():
            parts[sum(e) + cdeg[j] + l][(e, j, l)] = c
        return {d: Elem(self.ring, t) for d, t in parts.items()}

    def is_homogeneous(self) -> bool:
        return len(self.degree_parts()) <= 1

    def scalar_part(self) -> Laurent:
        """The Laurent coefficient of the unit monomial."""
        z = (0,) * self.ring.g
        return Laurent({l: c for (e, j, l), c in self.terms.items() if e == z and j == 0})

    def inverse(self) -> "Elem":
        if not self.ring.nilpotent:
            raise NotInvertible(f"inversion needs nilpotent generators; {self.ring} has none")
        lead = self.scalar_part()
        if not lead:
            raise NotInvertible(f"{self} has zero leading part")
        lead_inv = lead.inverse()
        rest = self - self.ring.scalar(lead)
        eps = rest * self.ring.scalar(-lead_inv)
        total = self.ring.one()
        term = self.ring.one()
        bound = self.ring.base.dim + self.ring.g * self.ring.R + 2
        for _ in range(bound):
            term = term * eps
            if term.is_zero():
                break
            total = total + term
        else:
            if not term.is_zero():
                raise NotInvertible("remainder is not nilpotent")
        return total * self.ring.scalar(lead_inv)

    def map_lambda(self) -> dict:
        """Group terms by (H-exponents, base index) with Laurent coefficients."""
        out = defaultdict(dict)
        for (e, j, l), c in self.terms.items():
            out[(e, j)][l] = c
        return {k: Laurent(v) for k, v in out.items()}


# -- ring builders -------------------------------------------------------


def scalar_ring(base: BaseRing) -> Ring:
    """H*(S)[λ, 1/λ]."""
    return Ring(base, [], 0, True, tag="S")


def chern_relation(chern, rank):
    """Coefficients of c_V(H) = H^r + c_1 H^{r-1} + ... + c_r, lowest first."""
    rel = []
    for k in range(rank):
        ci = chern[rank - k - 1]
        rel.append({(j, 0): Fraction(c) for j, c in ci.items() if c})
    return rel


def bundle_ring(base: BaseRing, chern, rank: int, g: int = 1, tag: str = "") -> Ring:
    rel = chern_relation(chern, rank)
    return Ring(base, rel, g, True, tag=f"PV:{tag}", chern=chern)


def master_ring(base: BaseRing, chern, rank: int, tag: str = "") -> Ring:
    """H*_{C*}(P(V ⊕ O)) = H*(S)[λ, h] / (c_V(h)(h - λ))."""
    cv = chern_relation(chern, rank) + [{(0, 0): Fraction(1)}]  # monic, degree r
    # multiply by (h - λ): coefficient k gets cv[k-1] - λ·cv[k]
    prod = []
    for k in range(rank + 2):
        acc = defaultdict(Fraction)
        if k >= 1:
            for key, c in cv[k - 1].items():
                acc[key] += c
        if k <= rank:
            for (j, l), c in cv[k].items():
                acc[(j, l + 1)] -= c
        prod.append({key: c for key, c in acc.items() if c})
    assert prod[-1] == {(0, 0): 1}
    return Ring(base, prod[:-1], 1, False, tag=f"X:{tag}", chern=chern)


def embed(x: Elem, target: Ring, var_map) -> Elem:
    """Send H_i of ``x.ring`` to H_{var_map[i]} of ``target`` (same base and relation)."""
    out = {}
    for (e, j, l), c in x.terms.items():
        ne = [0] * target.g
        for i, a in enumerate(e):
            ne[var_map[i]] += a
        key = (tuple(ne), j, l)
        out[key] = out.get(key, 0) + c
    return target.elem(out)


def fiber_integrate(x: Elem, var: int, target: Ring) -> Elem:
    """Push forward along the P(V)-factor carrying H_var (Segre-class formula).

    ``target`` is the ring with that variable removed.
    """
    ring = x.ring
    r = ring.R
    s = ring.segre()
    base = ring.base
    out = defaultdict(Fraction)
    for (e, j, l), c in x.terms.items():
        i = e[var] - r + 1
        if i < 0 or i >= len(s):
            continue
        ne = e[:var] + e[var + 1:]
        for b, sc in s[i].items():
            for o, m in base.mult[(j, b)].items():
                out[(ne, o, l)] += c * sc * m
    return target.elem(out)


def base_integral(x: Elem) -> Laurent:
    """∫_S of an element with no H variables."""
    if x.ring.g:
        raise StructureError("base_integral needs an element of H*(S)[λ]")
    integral = x.ring.base.integral
    out = defaultdict(Fraction)
    for (e, j, l), c in x.terms.items():
        if integral[j]:
            out[l] += c * integral[j]
    return Laurent(out)


def integrate_total(x: Elem, scalar: Ring | None = None) -> Laurent:
    """∫ over S or over the fiber product of copies of P(V) over S."""
    ring = x.ring
    if ring.g == 0:
        return base_integral(x)
    if not ring.nilpotent:
        raise StructureError("cannot integrate over the non-compact presentation")
    cur = x
    for g in range(ring.g, 0, -1):
        cur = fiber_integrate(cur, g - 1, ring.with_vars(g - 1))
    return base_integral(cur)


def push_to_var(x: Elem, keep: int) -> Elem:
    """Integrate out every H variable except H_keep, landing in the one-variable ring."""
    ring = x.ring
    cur = x
    idx = keep
    for var in range(ring.g - 1, -1, -1):
        if var == keep:
            continue
        cur = fiber_integrate(cur, var, cur.ring.with_vars(cur.ring.g - 1))
        if var < idx:
            idx -= 1
    return cur


# ---------------------------------------------------------------------------
# ψ-series


class PsiSeries:
    """Σ_{j=0}^{D} ψ^j c_j with ring coefficients; D is the truncation bound."""

    __slots__ = ("coeffs", "ring", "_hash", "_key")

    def __init__(self, coeffs, ring: Ring):
        self.coeffs = list(coeffs)
        self.ring = ring
        self._hash = None
        self._key = None

    @property
    def bound(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, c: Elem, bound: int) -> "PsiSeries":
        return cls([c] + [c.ring.zero()] * bound, c.ring)

    @classmethod
    def monomial(cls, c: Elem, power: int, bound: int) -> "PsiSeries":
        coeffs = [c.ring.zero()] * (bound + 1)
        if power <= bound:
            coeffs[power] = c
        return cls(coeffs, c.ring)

    @classmethod
    def leg(cls, w: Elem, bound: int) -> "PsiSeries":
        """1/(w - ψ) = Σ_j ψ^j w^{-j-1}."""
        winv = w.inverse()
        coeffs = []
        cur = winv
        for _ in range(bound + 1):
            coeffs.append(cur)
            cur = cur * winv
        return cls(coeffs, w.ring)

    def truncate(self, bound: int) -> "PsiSeries":
        if bound <= self.bound:
            return PsiSeries(self.coeffs[: bound + 1], self.ring)
        return PsiSeries(self.coeffs + [self.ring.zero()] * (bound - self.bound), self.ring)

    def __add__(self, other: "PsiSeries"):
        d = min(self.bound, other.bound)
        return PsiSeries([a + b for a, b in zip(self.coeffs[: d + 1], other.coeffs[: d + 1])], self.ring)

    def __mul__(self, other):
        if isinstance(other, PsiSeries):
            d = min(self.bound, other.bound)
            out = [self.ring.zero() for _ in range(d + 1)]
            for i, a in enumerate(self.coeffs[: d + 1]):
                if a.is_zero():
                    continue
                for j in range(d + 1 - i):
                    b = other.coeffs[j]
                    if not b.is_zero():
                        out[i + j] = out[i + j] + a * b
            return PsiSeries(out, self.ring)
        return PsiSeries([c * other for c in self.coeffs], self.ring)

    __rmul__ = __mul__

    def map(self, fn) -> "PsiSeries":
        coeffs = [fn(c) for c in self.coeffs]
        ring = coeffs[0].ring if coeffs else self.ring
        return PsiSeries(coeffs, ring)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def key(self):
        if self._key is None:
            self._key = tuple(frozenset(c.terms.items()) for c in self.coeffs)
        return self._key

    def __eq__(self, other):
        return isinstance(other, PsiSeries) and self.key() == other.key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self):
        return "PsiSeries(" + ", ".join(f"ψ^{j}:({c})" for j, c in enumerate(self.coeffs) if c) + ")"


def psi_integral(exponents) -> Fraction:
    """∫_{M̄_{0,n}} ψ_1^{a_1} ... ψ_n^{a_n} = (n-3)! / ∏ a_i! when Σ a_i = n - 3."""
    n = len(exponents)
    if n < 3:
        raise ValueError(f"M̄_(0,{n}) is unstable")
    if any(a < 0 for a in exponents) or sum(exponents) != n - 3:
        return Fraction(0)
    den = 1
    for a in exponents:
        den *= factorial(a)
    return Fraction(factorial(n - 3), den)


def moduli_integral(series, ring: Ring) -> Elem:
    """∫_{M̄_{0,m}} of a product of ψ-series, one per marked point.

    Uses ∫ ∏ ψ_i^{a_i} = (m-3)!/∏ a_i!: the answer is (m-3)! times the
    x^{m-3} coefficient of ∏_i Σ_a c_{i,a} x^a / a!.
    """
    m = len(series)
    if m < 3:
        raise ValueError(f"M̄_(0,{m}) is unstable")
    top = m - 3
    acc = [ring.one()] + [ring.zero()] * top
    for s in series:
        new = [ring.zero() for _ in range(top + 1)]
        for a in range(min(top, s.bound) + 1):
            ca = s.coeffs[a]
            if ca.is_zero():
                continue
            ca = ca * Fraction(1, factorial(a))
            for b in range(top + 1 - a):
                if not acc[b].is_zero():
                    new[a + b] = new[a + b] + acc[b] * ca
        acc = new
    return acc[top] * factorial(top)
