import random
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from circlemaps import BlaschkePower, TrigLift
from circlemaps.errors import (ChainMismatch, DegreeTooHigh, EvenLeadingOrder, HypothesisViolated,
                               NotInvertible)
from circlemaps.jets import (Jet, average_cycle_jets, extract_parabolic_form, germ_from_blocks, identity_jet,
                             jet_at, jet_compose, jet_cycle_iterate, jet_from_json, jet_invert, jet_to_json,
                             p_is_zero, pofh_residual, q_from_p, s_from_r, sumpoly, synthetic_cycle, verify_claim1,
                             verify_claim2)
from circlemaps.suites import random_claim1_instance, random_claim2_instance

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


def jet0(*coeffs):
    return Jet(F(0), F(0), tuple(F(c) for c in coeffs))


def test_jet_at_doubling():
    j = jet_at(TrigLift(2), 0, order=3)
    assert j.image == 0
    assert [float(c) for c in j.coeffs] == [2, 0, 0]


def test_jet_at_blaschke_parabolic_point():
    j = jet_at(BlaschkePower(2), 0, order=3)
    c1, c2, c3 = j.coeffs
    assert abs(c1 - 1) < 1e-25 and abs(c2) < 1e-25 and c3 > 0
    # arg M_{1/3}(e^{it}) = t/2 + t^3/32 + O(t^5), so H(x) = x + (pi^2/4) x^3 + ...
    with mpmath.workprec(96):
        assert abs(c3 - mpmath.pi**2 / 4) < 1e-20


def test_jet_at_matches_high_precision_differences():
    H = TrigLift(2, (0.1,), (0.05,))
    j = jet_at(H, 0.3, order=4)
    with mpmath.workprec(200):
        for k in (1, 2, 3):
            fd = mpmath.diff(lambda t: H(t), mpmath.mpf(0.3), k) / mpmath.factorial(k)
            assert abs(j.coeffs[k - 1] - fd) < 1e-20


def test_compose_examples():
    f = jet0(1, 1, 0, 0)
    assert jet_compose(f, f).coeffs == (1, 2, 2, 1)
    ident = identity_jet(F(0), 4)
    assert jet_compose(ident, f).coeffs == f.coeffs


def test_compose_tracks_integer_shift():
    f = Jet(F(0), F(2), (F(2), F(0)))
    g = Jet(F(1, 2), F(1), (F(2), F(0)))
    assert jet_compose(f, g).image == 3


def test_invert_examples():
    assert jet_invert(jet0(2)).coeffs == (F(1, 2),)
    assert jet_invert(jet0(1, 1, 0)).coeffs == (1, -1, 2)
    with pytest.raises(NotInvertible):
        jet_invert(jet0(0, 1))


def test_cycle_iterate_examples():
    c = F(5, 3)
    j = jet0(1, 0, c, 0, 0)
    assert jet_cycle_iterate([j], 0).coeffs == identity_jet(F(0), 5).coeffs
    assert jet_cycle_iterate([j], 3).coeffs[2] == 3 * c
    P = (F(2), F(-1))
    two = jet_cycle_iterate([Jet(F(0), F(0), germ_from_blocks(1, [P], 4))], 2)
    assert two.coeffs[2:4] == (2 * P[0], 2 * P[1])


def test_cycle_iterate_rejects_broken_chain():
    bad = [Jet(F(0), F(1, 3), (F(1),)), Jet(F(1, 2), F(1), (F(1),))]
    with pytest.raises(ChainMismatch):
        jet_cycle_iterate(bad, 2)


def test_extract_examples():
    f = extract_parabolic_form(jet0(1, 0, 1, 0, 0, 0))
    assert (f.n, f.P, f.R) == (1, (1, 0), (0, 0))
    g = extract_parabolic_form(jet0(1, 0, 1, 1))
    assert (g.n, g.P) == (1, (1, 1))
    with pytest.raises(EvenLeadingOrder):
        extract_parabolic_form(jet0(1, 1, 0))


def test_q_and_s_examples():
    a, b = F(2), F(7, 3)
    assert q_from_p((a,), 1) == (3 * a,)
    assert q_from_p((a, b), 1) == (3 * a, 4 * b)
    assert p_is_zero(s_from_r((), 1))
    with pytest.raises(DegreeTooHigh):
        q_from_p((1, 1, 1), 1)


def test_pofh_example():
    assert all(v == 0 for v in pofh_residual((F(1), F(1)), 1, order=3))


def test_claim1_examples():
    r = verify_claim1([(F(7, 2),)], 1, L=3, N=1)
    assert r.P_hat == (F(9) * F(7, 2),)
    assert p_is_zero(r.residual)
    r2 = verify_claim1([(F(1),), (F(3),)], 1, L=3)
    assert r2.P_hat == (18,)
    assert r2.L == 3 and r2.N == 2
    with pytest.raises(HypothesisViolated):
        verify_claim1([(F(-1),), (F(0),)], 1)


def test_claim1_effective_scale_on_random_instances():
    rng = random.Random(3)
    for _ in range(20):
        r = verify_claim1(*random_claim1_instance(rng))
        assert p_is_zero(r.residual_at_effective_scale)
        assert all(p_is_zero(c) for c in r.cross_index)


def test_claim1_literal_scale_disagrees_for_two_cycles():
    # one averaging step rescales by phi'(p) = N/L, not 1/L
    r = verify_claim1([(F(1),), (F(3),)], 1)
    assert r.extracted[0] == (F(9, 4) * 2,)
    assert not p_is_zero(r.residual)


def test_claim2_examples():
    r = verify_claim2((F(1),), [(F(0), F(1))], 1)
    assert r.k_independent and p_is_zero(r.P_residual)
    assert r.P_hat[0] > 0
    rz = verify_claim2((F(2), F(1)), [()], 1, L=5, N=1)
    assert rz.k_independent
    assert rz.P_hat[0] == 25 * 2


def test_claim2_k_independence_on_random_instances():
    rng = random.Random(5)
    for _ in range(10):
        r = verify_claim2(*random_claim2_instance(rng))
        assert r.k_independent
        assert p_is_zero(r.P_residual_at_effective_scale)


def test_sumpoly():
    assert sumpoly([(F(1),), (F(3),)], 3, 1) == (18,)
    assert sumpoly([(F(1), F(1))], 2, 1) == (4, 8)


def test_jet_json_round_trip():
    j = Jet(F(1, 3), F(2, 3), (F(2), F(-5, 7)))
    assert jet_from_json(jet_to_json(j)) == j


@settings(max_examples=30, deadline=None)
@given(st.lists(rationals, min_size=1, max_size=8), st.integers(min_value=1, max_value=3))
def test_pofh_identity_property(P, n):
    P = tuple(P[: 4 * n])
    assert all(v == 0 for v in pofh_residual(P, n))


@settings(max_examples=30, deadline=None)
@given(st.lists(rationals, min_size=3, max_size=3), st.lists(rationals, min_size=3, max_size=3))
def test_compose_is_associative_with_inverse(a, b):
    f = jet0(1 if a[0] == 0 else a[0], *a[1:])
    g = jet0(1 if b[0] == 0 else b[0], *b[1:])
    assert jet_compose(jet_invert(f), jet_compose(f, g)).coeffs == g.coeffs


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(rationals, rationals), min_size=1, max_size=3))
def test_averaging_recursion_equalises_first_block(blocks):
    P_list = [(abs(a) + 1, b) for a, b in blocks]
    jets = synthetic_cycle([germ_from_blocks(1, [P], 4) for P in P_list])
    _, hats = average_cycle_jets(jets, len(jets), 2 ** len(jets) - 1)
    forms = [extract_parabolic_form(h) for h in hats]
    assert all(f.P == forms[0].P for f in forms)
