"""Randomised invariant suites shared by the ``verify`` subcommand and the test-suite."""

from fractions import Fraction
import random

import numpy as np

from .jets import (germ_from_blocks, p_is_zero, pofh_residual, synthetic_cycle, verify_claim1, verify_claim2)
from .maps import AdjustmentDiffeo, AverageLift, BlaschkePower, HdMap, MobiusLift, TrigLift


def random_rational(rng, num=6, den=5):
    return Fraction(rng.randint(-num, num), rng.randint(1, den))


def random_poly(rng, degree, positive_constant=False):
    p = [random_rational(rng) for _ in range(degree + 1)]
    if positive_constant:
        p[0] = Fraction(rng.randint(1, 6), rng.randint(1, 5))
    return tuple(p)


def random_claim1_instance(rng, s_max=3, m_max=2):
    """``(P_list, m)`` with ``deg P_k <= 2m - 1`` and at least one ``P_k(0) > 0``."""
    s = rng.randint(1, s_max)
    m = rng.randint(1, m_max)
    P = [random_poly(rng, rng.randint(0, 2 * m - 1)) for _ in range(s)]
    k = rng.randrange(s)
    P[k] = (Fraction(rng.randint(1, 6), rng.randint(1, 5)),) + tuple(P[k][1:])
    return P, m


def random_claim2_instance(rng, s_max=2, n_max=2):
    """``(P, R_list, n)`` with ``P(0) > 0``."""
    s = rng.randint(1, s_max)
    n = rng.randint(1, n_max)
    P = random_poly(rng, rng.randint(0, 2 * n - 1), positive_constant=True)
    R = [random_poly(rng, rng.randint(0, 2 * n - 1)) for _ in range(s)]
    return P, R, n


def random_two_step_cycle(rng, s_max=3, n_max=2):
    """Exact cycle jets with independent ``P_k`` and ``R_k`` blocks (``P_k(0) > 0``)."""
    s = rng.randint(2, s_max)
    n = rng.randint(1, n_max)
    germs = [germ_from_blocks(n, [random_poly(rng, 2 * n - 1, True), random_poly(rng, 2 * n - 1)], 6 * n)
             for _ in range(s)]
    return synthetic_cycle(germs), n


def _check(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def claims_suite(seed=0, count1=50, count2=20, count3=50):
    from .normalization import two_step_jets, uniform_form_report
    from .maps import average_normaliser

    rng = random.Random(seed)
    r1 = [verify_claim1(*random_claim1_instance(rng)) for _ in range(count1)]
    r2 = [verify_claim2(*random_claim2_instance(rng)) for _ in range(count2)]
    zero1 = sum(p_is_zero(r.residual) for r in r1)
    zero1_eff = sum(p_is_zero(r.residual_at_effective_scale) for r in r1)
    cross1 = all(all(p_is_zero(c) for c in r.cross_index) for r in r1)
    zero2 = sum(p_is_zero(r.P_residual) for r in r2)
    zero2_eff = sum(p_is_zero(r.P_residual_at_effective_scale) for r in r2)
    indep2 = sum(r.k_independent for r in r2)
    pofh = []
    for _ in range(count3):
        n = rng.randint(1, 3)
        pofh.append(all(v == 0 for v in pofh_residual(random_poly(rng, rng.randint(0, 4 * n - 1)), n)))
    uniform = []
    for _ in range(10):
        jets, n = random_two_step_cycle(rng)
        s = len(jets)
        _, step2 = two_step_jets(jets, s, average_normaliser(2, s))
        uniform.append(uniform_form_report(step2)["uniform"])
    return [
        _check("P-hat equals (L^2m/s) sum P_k(Lx)", zero1 == count1, f"{zero1}/{count1} zero residuals"),
        _check("P-hat equals the same sum at scale L/N", zero1_eff == count1, f"{zero1_eff}/{count1} zero residuals"),
        _check("P-hat independent of the cycle point", cross1, "exact comparison"),
        _check("P-hat equals L^2n P(Lx) (second block)", zero2 == count2, f"{zero2}/{count2} zero residuals"),
        _check("P-hat equals (L/N)^2n P(Lx/N)", zero2_eff == count2, f"{zero2_eff}/{count2} zero residuals"),
        _check("R-hat independent of the cycle point", indep2 == count2, f"{indep2}/{count2}"),
        _check("P(x(1+x^2n P)) identity to order 4n", all(pofh), f"{sum(pofh)}/{count3}"),
        _check("two averaging steps give identical blocks", all(uniform), f"{sum(uniform)}/{len(uniform)}"),
    ]


def sample_maps():
    return [TrigLift(2), TrigLift(2, (0.1,), (0.05,)), TrigLift(3, (0.05, 0.02)), BlaschkePower(2), BlaschkePower(3),
            HdMap(2), HdMap(3)]


def core_suite(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random(200)
    h = 1e-6
    out = []
    worst_fd, worst_per = 0.0, 0.0
    for H in sample_maps():
        fd = (np.asarray(H(x + h)) - np.asarray(H(x - h))) / (2 * h)
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - np.asarray(H.deriv(x))))))
        worst_per = max(worst_per, float(np.max(np.abs(np.asarray(H(x + 1)) - np.asarray(H(x)) - H.degree))))
    out.append(_check("derivative matches central differences", worst_fd < 1e-6, f"max error {worst_fd:.2e}"))
    out.append(_check("H(x+1) = H(x) + d", worst_per < 1e-12, f"max error {worst_per:.2e}"))
    worst_inv = 0.0
    for phi in (AverageLift(BlaschkePower(2), 2), AverageLift(TrigLift(2, (0.1,)), 3), MobiusLift(0.4),
                AdjustmentDiffeo((0.1, 0.5), (0.1005, 0.4997))):
        y = np.asarray(phi(x))
        worst_inv = max(worst_inv, float(np.max(np.abs(phi.invert(y) - x))))
    out.append(_check("inverse round trip", worst_inv < 1e-10, f"max error {worst_inv:.2e}"))
    return out


def geometry_suite(seed=0, count=40):
    from .geometry import distortion, sample_disjoint_pairs, total_variation_log_deriv

    rng = np.random.default_rng(seed)
    out = []
    for H in (BlaschkePower(2), TrigLift(2, (0.1,))):
        tv = total_variation_log_deriv(H)
        worst = 0.0
        for J, n in sample_disjoint_pairs(H, rng, count):
            worst = max(worst, distortion(H, J, n) / tv)
        out.append(_check(f"distortion <= TV(log DH) for {type(H).__name__}", worst <= 1.02,
                          f"max ratio {worst:.4f} over {count} samples, TV={tv:.4f}"))
    return out


SUITES = {"claims": claims_suite, "core": core_suite, "geometry": geometry_suite}


def run(name, seed=0):
    return SUITES[name](seed=seed)
