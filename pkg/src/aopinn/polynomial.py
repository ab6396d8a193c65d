"""Sparse multivariate polynomials under lex order, with coefficients in a
field of rational functions of the parameters (Q(b, e, g) for the SEIR ring).

Monomials are exponent tuples in variable order, so Python tuple comparison
*is* the lex order with the first variable largest.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from sympy import QQ
from sympy.polys.fields import field

Monomial = Tuple[int, ...]


class Ring:
    """Polynomial ring ``Q(params)[variables]`` with lex order."""

    def __init__(self, variables: Sequence[str], params: Sequence[str] = ()):
        self.variables = tuple(variables)
        self.params = tuple(params)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        built = field(",".join(self.params), QQ)
        self.K = built[0]
        self.param_gens = dict(zip(self.params, built[1:]))
        self.nvars = len(self.variables)
        self._index = {v: k for k, v in enumerate(self.variables)}

    def __repr__(self):
        return f"Ring(vars={self.variables}, params={self.params})"

    def index(self, name: str) -> int:
        return self._index[name]

    def coef(self, value):
        return self.K(value)

    def zero(self) -> "Poly":
        return Poly(self, {})

    def one(self) -> "Poly":
        return self.const(1)

    def const(self, c) -> "Poly":
        return Poly(self, {(0,) * self.nvars: self.K(c)})

    def var(self, name: str) -> "Poly":
        exp = [0] * self.nvars
        exp[self.index(name)] = 1
        return Poly(self, {tuple(exp): self.K.one})

    def param(self, name: str) -> "Poly":
        return Poly(self, {(0,) * self.nvars: self.param_gens[name]})

    def gens(self):
        return [self.var(v) for v in self.variables]


def mono_divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def mono_lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def mono_div(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x - y for x, y in zip(a, b))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def coprime(a: Monomial, b: Monomial) -> bool:
    return all(x == 0 or y == 0 for x, y in zip(a, b))


class Poly:
    """Immutable-by-convention polynomial: ``terms`` maps monomials to nonzero
    coefficients."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: Ring, terms: Mapping[Monomial, object]):
        self.ring = ring
        self.terms: Dict[Monomial, object] = {m: c for m, c in terms.items() if c}

    # -- structure -------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def leading_monomial(self) -> Monomial:
        return max(self.terms)

    def leading_coefficient(self):
        return self.terms[max(self.terms)]

    def support(self) -> set:
        """Names of the variables that occur."""
        names = set()
        for m in self.terms:
            names.update(v for v, k in zip(self.ring.variables, m) if k)
        return names

    def degree(self, name: str) -> int:
        j = self.ring.index(name)
        return max((m[j] for m in self.terms), default=0)

    def sorted_terms(self):
        return sorted(self.terms.items(), reverse=True)

    # -- arithmetic ------------------------------------------------------------

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return self.ring.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, self.ring.K.zero) + c
        return Poly(self.ring, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: Dict[Monomial, object] = {}
        zero = self.ring.K.zero
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                out[m] = out.get(m, zero) + c1 * c2
        return Poly(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return reduce(lambda a, b: a * b, [self] * k, self.ring.one())

    def mul_term(self, mono: Monomial, coef) -> "Poly":
        return Poly(self.ring, {mono_mul(m, mono): c * coef for m, c in self.terms.items()})

    def scale(self, coef) -> "Poly":
        return Poly(self.ring, {m: c * coef for m, c in self.terms.items()})

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        return self.scale(1 / self.leading_coefficient())

    def __eq__(self, other):
        if not isinstance(other, Poly):
            other = self._coerce(other)
        return (self - other).is_zero()

    def __hash__(self):
        return hash(frozenset(self.terms))

    # -- evaluation and printing ----------------------------------------------

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        """Exact value at a point giving every variable and parameter."""
        ring = self.ring
        total = Fraction(0)
        for m, c in self.terms.items():
            term = eval_coef(c, ring, point)
            for name, k in zip(ring.variables, m):
                if k:
                    term *= Fraction(point[name]) ** k
            total += term
        return total

    def cleared(self) -> "Poly":
        """Scalar multiple with polynomial, content-free coefficients and a
        positive leading coefficient (the form computer algebra systems print)."""
        if self.is_zero():
            return self
        R = self.ring.K.ring
        den = reduce(lambda a, b: a.lcm(b), (c.denom for c in self.terms.values()), R.one)
        nums = [(c * self.ring.K(den)).numer for c in self.terms.values()]
        content = reduce(lambda a, b: a.gcd(b), nums)
        factor = self.ring.K(den) / self.ring.K(content)
        p = self.scale(factor)
        # make the numeric content a unit too
        rationals = [q / c.denom.LC for c in p.terms.values() for _, q in c.numer.terms()]
        den_q = reduce(math.lcm, (int(q.denominator) for q in rationals), 1)
        num_q = reduce(math.gcd, (int(q.numerator * den_q / q.denominator) for q in rationals), 0)
        p = p.scale(self.ring.K(QQ(den_q, num_q)))
        lead = p.leading_coefficient().numer
        if lead.LC < 0:
            p = -p
        return p

    def to_singular(self) -> str:
        p = self.cleared()
        if p.is_zero():
            return "0"
        parts = []
        for m, c in p.sorted_terms():
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(p.ring.variables, m) if k
            )
            parts.append(_format_term(c, mono, first=not parts))
        return "".join(parts)

    def __repr__(self):
        return self.to_singular() if self.terms else "0"

    __str__ = __repr__


def eval_coef(c, ring: Ring, point: Mapping[str, Fraction]) -> Fraction:
    def ev(poly):
        total = Fraction(0)
        for mon, q in poly.terms():
            t = Fraction(int(q.numerator), int(q.denominator))
            for name, k in zip(ring.params, mon):
                if k:
                    t *= Fraction(point[name]) ** k
            total += t
        return total

    return ev(c.numer) / ev(c.denom)


def _format_rational(q) -> str:
    num, den = int(q.numerator), int(q.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def _format_param_poly(p) -> str:
    names = [str(g) for g in p.ring.gens]
    parts = []
    for mon, q in p.terms():
        mono = "*".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, mon) if k)
        if mono:
            if q == 1:
                s = mono
            elif q == -1:
                s = "-" + mono
            else:
                s = f"{_format_rational(q)}*{mono}"
        else:
            s = _format_rational(q)
        if parts and not s.startswith("-"):
            s = "+" + s
        parts.append(s)
    return "".join(parts) or "0"


def _format_term(c, mono: str, first: bool) -> str:
    numer, denom = c.numer, c.denom
    constant = numer.is_ground and denom.is_ground
    if constant:
        q = numer.LC / denom.LC
        if mono and q == 1:
            s = mono
        elif mono and q == -1:
            s = "-" + mono
        else:
            s = _format_rational(q) + (f"*{mono}" if mono else "")
    else:
        text = _format_param_poly(numer)
        if not denom.is_ground or denom.LC != 1:
            text = f"{text})/({_format_param_poly(denom)}"
        s = f"({text})" + (f"*{mono}" if mono else "")
    if not first and not s.startswith("-"):
        s = "+" + s
    return s


def parse_poly(ring: Ring, text: str) -> Poly:
    """Parse ``+ - * ^`` expressions over ring variables, parameters and
    integers (the syntax of the ideal listings)."""
    from sympy import Symbol, sympify

    names = {n: Symbol(n) for n in ring.variables + ring.params}
    expr = sympify(text.replace("^", "**"), locals=names).expand()
    out = ring.zero()
    for term in expr.as_ordered_terms():
        coeff, factors = term.as_coeff_mul()
        p = ring.const(QQ(int(coeff.p), int(coeff.q)))
        for f in factors:
            base, k = f.as_base_exp()
            name = str(base)
            g = ring.var(name) if name in ring.variables else ring.param(name)
            p = p * g ** int(k)
        out = out + p
    return out


def poly_sum(ring: Ring, polys: Iterable[Poly]) -> Poly:
    return reduce(lambda a, b: a + b, polys, ring.zero())

