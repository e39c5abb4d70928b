import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circlemaps import BlaschkePower, TrigLift
from circlemaps.errors import NoEntry, PointOnBoundary
from circlemaps.geometry import (NiceInterval, arc_contains, arcs_pairwise_disjoint, build_nice_interval,
                                 check_derivative_floor, check_entry_consistency, distortion, first_entry,
                                 iterates_disjoint, return_branches, sample_disjoint_pairs, search_return_expansion,
                                 total_variation_log_deriv, verify_nice)
from circlemaps.orbits import PeriodicOrbit, find_periodic_orbits

ZERO = PeriodicOrbit((0.0,), 1, 2.0, "Repelling")


def test_arc_predicates_wrap_around():
    assert arc_contains(0.9, 0.2, 0.05)
    assert not arc_contains(0.9, 0.2, 0.5)
    assert arcs_pairwise_disjoint([0.9, 0.2], [0.2, 0.3])
    assert not arcs_pairwise_disjoint([0.9, 0.05], [0.2, 0.3])


def test_distortion_examples():
    assert distortion(TrigLift(3), (0.1, 0.2), 4) == pytest.approx(0, abs=1e-12)
    H = BlaschkePower(2)
    v = distortion(H, (0.2, 0.3), 1)
    assert 0 < v <= total_variation_log_deriv(H)


def test_total_variation_examples():
    assert total_variation_log_deriv(TrigLift(2)) == pytest.approx(0, abs=1e-12)
    tv = total_variation_log_deriv(TrigLift(2, (0.1,)))
    # log(2 - 0.2 pi sin 2 pi x) has one max and one min per period
    exact = 2 * (np.log(2 + 0.2 * np.pi) - np.log(2 - 0.2 * np.pi))
    assert tv == pytest.approx(exact, rel=1e-3)
    assert total_variation_log_deriv(BlaschkePower(2)) == pytest.approx(2 * np.log(4), rel=1e-3)


def test_total_variation_is_rotation_invariant():
    H = TrigLift(2, (0.1,), (0.03,))
    shifted = TrigLift(2, (0.1 * np.cos(0.6) - 0.03 * np.sin(0.6),), (0.1 * np.sin(0.6) + 0.03 * np.cos(0.6),))
    assert total_variation_log_deriv(shifted) == pytest.approx(total_variation_log_deriv(H), rel=0.01)


def test_nice_interval_examples():
    A = build_nice_interval(TrigLift(2), 0.25, ZERO, 1)
    assert (A.start, A.length) == (pytest.approx(0.0), pytest.approx(0.5))
    A2 = build_nice_interval(TrigLift(2), 0.3, ZERO, 2)
    assert (A2.start, A2.length) == (pytest.approx(0.25), pytest.approx(0.25))
    with pytest.raises(PointOnBoundary):
        build_nice_interval(TrigLift(2), 0.5, ZERO, 1)


def test_nice_interval_blaschke():
    H = BlaschkePower(2)
    O = [o for o in find_periodic_orbits(H, 2) if o.classification == "Repelling"][0]
    A = build_nice_interval(H, 0.05, O, 3)
    assert A.contains(0.05)
    assert verify_nice(H, A, 10)


def test_first_entry_examples():
    A = NiceInterval(-1 / 8 % 1.0, 0.25)
    assert first_entry(TrigLift(2), A, 0.25)[0] == 2
    assert first_entry(TrigLift(2), A, 0.01)[0] == 1
    tiny = NiceInterval(0.123, 1e-9)
    with pytest.raises(NoEntry):
        first_entry(TrigLift(2, (0.05,)), tiny, 0.7, max_steps=3)


def test_return_branches_doubling():
    A = NiceInterval(0.0, 0.5)
    table = return_branches(TrigLift(2), A, time_cap=1)
    assert len(table) == 2
    assert sorted(table.start) == pytest.approx([0.0, 0.5])
    assert np.all(table.time == 1)
    assert np.allclose(table.dmin, 2)


def test_return_branches_blaschke_expand():
    H = BlaschkePower(2)
    (p2,) = find_periodic_orbits(H, 2)
    O = find_periodic_orbits(H, 3)[0]
    A = build_nice_interval(H, p2.points[0], O, 3)
    table = return_branches(H, A, time_cap=12)
    rets = table.returns()
    assert rets and min(b.dmin for b in rets) > 1
    for i in np.nonzero(table.inside)[0][:5]:
        assert check_entry_consistency(H, table, i)


def test_search_return_expansion():
    H = BlaschkePower(2)
    (p2,) = find_periodic_orbits(H, 2)
    O = find_periodic_orbits(H, 3)[0]
    res = search_return_expansion(H, p2.points[0], O, depths=range(2, 5), time_cap=12)
    assert res.ok
    assert res.inf_central > 1 and res.inf_others >= 2


def test_derivative_floor():
    assert check_derivative_floor(TrigLift(3), k_max=4) == pytest.approx(3)
    H = BlaschkePower(2)
    floors = [check_derivative_floor(H, k_max=k) for k in (1, 3, 6)]
    assert 0 < floors[-1] <= 1
    assert floors[0] >= floors[1] >= floors[2]
    min_dh = float(np.min(H.deriv(np.arange(4096) / 4096)))
    assert floors[-1] >= min_dh**6 * (1 - 1e-12)


def test_sampled_pairs_are_disjoint():
    rng = np.random.default_rng(2)
    H = TrigLift(2, (0.1,))
    for (a, b), n in sample_disjoint_pairs(H, rng, 20):
        assert iterates_disjoint(H, a, b, n)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0, max_value=1), st.floats(min_value=1e-4, max_value=0.1), st.integers(1, 5))
def test_distortion_bounded_by_total_variation(a, length, n):
    H = BlaschkePower(2)
    b = a + length / 2 ** (n - 1)
    if iterates_disjoint(H, a, b, n):
        assert distortion(H, (a, b), n) <= total_variation_log_deriv(H) * 1.02
