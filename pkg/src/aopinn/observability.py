"""Algebraic observability of the SEIR model with I observed.

Builds the derivative-prolonged ideal (derivatives up to order 3 treated as
independent variables), computes its reduced lex Gröbner basis over
Q(b, e, g) with Buchberger's algorithm, and pulls out the basis elements that
express an unobserved state through Y = I and its derivatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from .errors import CappedComputation
from .polynomial import Poly, Ring, coprime, mono_div, mono_divides, mono_lcm, parse_poly

log = logging.getLogger(__name__)

SEIR_VARIABLES = (
    "d3I", "d3E", "d3S", "d2I", "d2E", "d2S", "d1I", "d1E", "d1S",
    "I", "E", "S", "d3Y", "d2Y", "d1Y", "Y",
)
SEIR_PARAMS = ("b", "e", "g")
OBSERVED = ("Y", "d1Y", "d2Y", "d3Y")
PAIR_BUDGET = 100_000

SEIR_GENERATORS = (
    "d1S + I*S*b",
    "d2S + I*d1S*b + S*d1I*b",
    "d3S + I*d2S*b + 2*d1S*d1I*b + S*d2I*b",
    "d1E + E*e - I*S*b",
    "d2E + d1E*e - I*d1S*b - S*d1I*b",
    "d3E + d2E*e - I*d2S*b - 2*d1S*d1I*b - S*d2I*b",
    "d1I - E*e + I*g",
    "d2I - d1E*e + d1I*g",
    "d3I - d2E*e + d2I*g",
    "Y - I",
    "d1Y - d1I",
    "d2Y - d2I",
    "d3Y - d3I",
)


@dataclass
class Ideal:
    ring: Ring
    generators: List[Poly]

    def __post_init__(self):
        if any(g.is_zero() for g in self.generators):
            raise ValueError("ideal generators must be nonzero")

    def __len__(self):
        return len(self.generators)


def seir_ring() -> Ring:
    return Ring(SEIR_VARIABLES, SEIR_PARAMS)


def build_seir_ideal(ring: Optional[Ring] = None) -> Ideal:
    """The prolonged SEIR dynamics (S, E, I up to third derivatives) plus the
    output identifications Y^(k) = I^(k)."""
    ring = ring or seir_ring()
    return Ideal(ring, [parse_poly(ring, text) for text in SEIR_GENERATORS])


def normal_form(p: Poly, basis: Sequence[Poly]) -> Poly:
    """Remainder of full multivariate division of ``p`` by ``basis``."""
    basis = [g for g in basis if not g.is_zero()]
    leads = [(g.leading_monomial(), g.leading_coefficient(), g) for g in basis]
    rest = dict(p.terms)
    remainder = {}
    zero = p.ring.K.zero
    while rest:
        m = max(rest)
        c = rest[m]
        for lm, lc, g in leads:
            if mono_divides(lm, m):
                q_mono, q_coef = mono_div(m, lm), c / lc
                for gm, gc in g.terms.items():
                    t = tuple(a + b for a, b in zip(gm, q_mono))
                    v = rest.get(t, zero) - q_coef * gc
                    if v:
                        rest[t] = v
                    else:
                        rest.pop(t, None)
                break
        else:
            remainder[m] = c
            del rest[m]
    return Poly(p.ring, remainder)


def s_polynomial(f: Poly, g: Poly) -> Poly:
    lf, lg = f.leading_monomial(), g.leading_monomial()
    lcm = mono_lcm(lf, lg)
    return f.mul_term(mono_div(lcm, lf), 1 / f.leading_coefficient()) - g.mul_term(
        mono_div(lcm, lg), 1 / g.leading_coefficient()
    )


def _reduce_basis(G: List[Poly]) -> List[Poly]:
    """Minimal, monic, inter-reduced basis, sorted by leading monomial."""
    G = [g.monic() for g in G if not g.is_zero()]
    minimal = []
    for k, g in enumerate(G):
        lm = g.leading_monomial()
        dominated = False
        for j, h in enumerate(G):
            if j == k:
                continue
            hl = h.leading_monomial()
            # ties on equal leading monomials keep the first occurrence
            if mono_divides(hl, lm) and (hl != lm or j < k):
                dominated = True
                break
        if not dominated:
            minimal.append(g)
    reduced = []
    for k, g in enumerate(minimal):
        others = minimal[:k] + minimal[k + 1 :]
        lead = Poly(g.ring, {g.leading_monomial(): g.leading_coefficient()})
        tail = normal_form(g - lead, others)
        reduced.append((lead + tail).monic())
    return sorted(reduced, key=lambda p: p.leading_monomial(), reverse=True)


def buchberger(ideal: Ideal, pair_budget: int = PAIR_BUDGET) -> List[Poly]:
    """Reduced lex Gröbner basis.

    Pairs are taken smallest-lcm first (normal strategy); pairs with coprime
    leading monomials and pairs caught by the chain criterion are skipped.
    Raises :class:`CappedComputation` after ``pair_budget`` reductions.
    """
    G: List[Poly] = []
    pairs: set = set()

    def add(p: Poly):
        G.append(p.monic())
        n = len(G) - 1
        pairs.update((i, n) for i in range(n))

    for g in ideal.generators:
        add(g)

    processed = 0
    while pairs:
        i, j = min(pairs, key=lambda ij: (mono_lcm(G[ij[0]].leading_monomial(), G[ij[1]].leading_monomial()), ij))
        pairs.discard((i, j))
        li, lj = G[i].leading_monomial(), G[j].leading_monomial()
        if coprime(li, lj):
            continue
        lcm = mono_lcm(li, lj)
        if _chain_criterion(G, pairs, i, j, lcm):
            continue
        processed += 1
        if processed > pair_budget:
            raise CappedComputation(f"S-pair budget of {pair_budget} exhausted with {len(G)} basis elements")
        r = normal_form(s_polynomial(G[i], G[j]), G)
        if not r.is_zero():
            add(r)
    log.debug("buchberger: %d reductions, %d elements before reduction", processed, len(G))
    return _reduce_basis(G)


def _chain_criterion(G, pairs, i, j, lcm) -> bool:
    for k in range(len(G)):
        if k in (i, j):
            continue
        if not mono_divides(G[k].leading_monomial(), lcm):
            continue
        if (min(i, k), max(i, k)) not in pairs and (min(j, k), max(j, k)) not in pairs:
            return True
    return False


def is_groebner(G: Sequence[Poly]) -> bool:
    """Every S-polynomial reduces to zero."""
    return all(
        normal_form(s_polynomial(G[i], G[j]), G).is_zero()
        for i in range(len(G))
        for j in range(i + 1, len(G))
    )


@dataclass
class Recovery:
    variable: str
    polynomial: Optional[Poly]
    trivial: bool = False

    @property
    def found(self) -> bool:
        return self.trivial or self.polynomial is not None


def check_observable(var: str, basis: Sequence[Poly], observed: Sequence[str] = OBSERVED) -> Recovery:
    """Find a basis element relating ``var`` only to the observed outputs and
    their derivatives, linear in ``var``."""
    if var in observed:
        return Recovery(var, None, trivial=True)
    allowed = set(observed) | {var}
    best = None
    for g in basis:
        supp = g.support()
        if var in supp and supp <= allowed and g.degree(var) == 1:
            if best is None or len(g.terms) < len(best.terms):
                best = g
    return Recovery(var, best)


def random_consistent_point(rng) -> dict:
    """Exact-rational point on the prolonged SEIR variety: random S, E, I and
    rates, every derivative defined from the model equations."""

    def q():
        return Fraction(int(rng.integers(1, 200)), int(rng.integers(1, 200)))

    b, e, g = q(), q(), q()
    S, E, I = q(), q(), q()
    d1S = -b * S * I
    d1E = b * S * I - e * E
    d1I = e * E - g * I
    d2S = -b * (d1S * I + S * d1I)
    d2E = -d2S - e * d1E
    d2I = e * d1E - g * d1I
    d3S = -b * (d2S * I + 2 * d1S * d1I + S * d2I)
    d3E = -d3S - e * d2E
    d3I = e * d2E - g * d2I
    return dict(
        b=b, e=e, g=g, S=S, E=E, I=I,
        d1S=d1S, d1E=d1E, d1I=d1I, d2S=d2S, d2E=d2E, d2I=d2I, d3S=d3S, d3E=d3E, d3I=d3I,
        Y=I, d1Y=d1I, d2Y=d2I, d3Y=d3I,
    )


def vanishes_on_samples(polys: Sequence[Poly], rng, samples: int = 100) -> bool:
    for _ in range(samples):
        pt = random_consistent_point(rng)
        if any(p.evaluate(pt) != 0 for p in polys):
            return False
    return True


def expected_s_relation(ring: Ring) -> Poly:
    """S-recovery relation with denominators cleared:
    b e Y S - d2Y - (e + g) d1Y - e g Y."""
    return parse_poly(ring, "b*e*Y*S - d2Y - (e + g)*d1Y - e*g*Y")


def expected_e_relation(ring: Ring) -> Poly:
    return parse_poly(ring, "e*E - d1Y - g*Y")


def proportional(p: Poly, q: Poly) -> bool:
    """``p`` is a nonzero scalar multiple of ``q`` over the coefficient field."""
    if p.is_zero() or q.is_zero() or set(p.terms) != set(q.terms):
        return False
    return (p.monic() - q.monic()).is_zero()
