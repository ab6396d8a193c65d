from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aopinn.errors import CappedComputation
from aopinn.observability import (
    Ideal,
    build_seir_ideal,
    buchberger,
    check_observable,
    expected_e_relation,
    expected_s_relation,
    is_groebner,
    normal_form,
    proportional,
)
from aopinn.polynomial import Ring, mono_divides, parse_poly

from .oracles import consistent_assignment


@pytest.fixture(scope="module")
def seir():
    ideal = build_seir_ideal()
    return ideal, buchberger(ideal)


@pytest.fixture
def xy():
    return Ring(("x", "y"))


def test_normal_form_toys(xy):
    x, y = xy.gens()
    g = x * y - 1
    assert normal_form(g, [g]).is_zero()
    assert normal_form(x * x, [x]).is_zero()
    assert normal_form(x * x * y + y, [g]) == x + y


def test_buchberger_toys(xy):
    x, y = xy.gens()
    G = buchberger(Ideal(xy, [x - y, y * y - 1]))
    assert len(G) == 2 and G[0] == x - y and G[1] == y * y - 1
    G = buchberger(Ideal(xy, [x]))
    assert len(G) == 1 and G[0] == x


def test_buchberger_nontrivial_toy(xy):
    x, y = xy.gens()
    # <x^2 - y, x y - 1> in lex x > y: reduced basis {x - y^2, y^3 - 1}
    G = buchberger(Ideal(xy, [x * x - y, x * y - 1]))
    assert [str(g) for g in G] == ["x-y^2", "y^3-1"]


def test_seir_ideal_generators(seir):
    ideal, _ = seir
    assert len(ideal) == 13
    target = parse_poly(ideal.ring, "d1I - E*e + I*g")
    assert any(g == target for g in ideal.generators)


def test_generators_vanish_on_consistent_points(seir):
    ideal, _ = seir
    rng = np.random.default_rng(0)
    for _ in range(20):
        pt = consistent_assignment(rng)
        assert all(g.evaluate(pt) == 0 for g in ideal.generators)


def test_basis_contains_e_relation(seir):
    ideal, G = seir
    rendered = [g.to_singular() for g in G]
    assert "(e)*E-d1Y+(-g)*Y" in rendered
    hits = [g for g in G if g.support() == {"E", "d1Y", "Y"}]
    assert len(hits) == 1 and proportional(hits[0], expected_e_relation(ideal.ring))


def test_check_observable(seir):
    ideal, G = seir
    e = check_observable("E", G)
    assert e.polynomial.to_singular() == "(e)*E-d1Y+(-g)*Y"
    s = check_observable("S", G)
    assert proportional(s.polynomial, expected_s_relation(ideal.ring))
    assert check_observable("Y", G).trivial
    i = check_observable("I", G)
    assert i.polynomial.support() == {"I", "Y"}
    # the reduced element led by d3S still contains S
    assert not check_observable("d3S", G).found


def test_not_observable_when_only_nonlinear():
    ring = Ring(("x", "Y"))
    x, Y = ring.gens()
    assert not check_observable("x", [x * x - Y]).found


def test_basis_sound_on_samples(seir):
    _, G = seir
    rng = np.random.default_rng(1)
    for _ in range(100):
        pt = consistent_assignment(rng)
        for g in G:
            assert g.evaluate(pt) == 0


def test_generators_reduce_to_zero(seir):
    ideal, G = seir
    for g in ideal.generators:
        assert normal_form(g, G).is_zero()


def test_reduced_basis_property(seir):
    _, G = seir
    for k, g in enumerate(G):
        assert g.leading_coefficient() == g.ring.K.one
        for j, h in enumerate(G):
            if j != k:
                assert not any(mono_divides(h.leading_monomial(), m) for m in g.terms)


def test_is_groebner(seir):
    assert is_groebner(seir[1])


def test_division_invariant_by_sampling(seir):
    ideal, G = seir
    ring = ideal.ring
    p = parse_poly(ring, "S^2*d1Y*b + E*I*e - d3I*g + S*E - 7")
    diff = p - normal_form(p, G)
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert diff.evaluate(consistent_assignment(rng)) == 0


def test_pair_budget():
    with pytest.raises(CappedComputation):
        buchberger(build_seir_ideal(), pair_budget=1)


def test_deterministic_output(seir):
    ideal, G = seir
    again = buchberger(build_seir_ideal())
    assert [g.to_singular() for g in again] == [g.to_singular() for g in G]


def test_rational_content_cleared(xy):
    x, y = xy.gens()
    assert (x * Fraction(2, 3) + y * 4).to_singular() == "x+6*y"


_small = st.integers(-3, 3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(_small, _small, _small, _small), min_size=1, max_size=3))
def test_random_ideals_give_groebner_bases(coeffs):
    ring = Ring(("x", "y"))
    x, y = ring.gens()
    gens = [a * x * x + b * x * y + c * y + d for a, b, c, d in coeffs]
    gens = [g for g in gens if not g.is_zero()]
    if not gens:
        return
    G = buchberger(Ideal(ring, gens))
    assert is_groebner(G)
    for g in gens:
        assert normal_form(g, G).is_zero()
