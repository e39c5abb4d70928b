"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` / ``[FAIL]`` line with the measured
quantity, the tolerance it is held to and the runtime, then asserts.  Run
with ``pytest -s`` to see the lines inline; they also appear in failure
reports.
"""

import random
import time

import numpy as np

from circlemaps import AdjustmentDiffeo, AverageLift, BlaschkePower, HdMap, TrigLift, conjugate
from circlemaps.cli import RunConfig, cmd_metrize
from circlemaps.geometry import distortion, sample_disjoint_pairs, search_return_expansion, total_variation_log_deriv
from circlemaps.jets import jet_at, p_is_zero, pofh_residual, verify_claim1, verify_claim2
from circlemaps.metrization import adjustment_delta, adjustment_diffeo, metrize
from circlemaps.normalization import verify_whHinMd
from circlemaps.orbits import certify_Tdstar, circle_dist, find_periodic_orbits
from circlemaps.suites import random_claim1_instance, random_claim2_instance, random_poly

SEED = 20240


def verdict(number, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}; runtime {elapsed:.1f}s (< {budget}s)")
    return ok


def test_criterion_01_sum_formula_exact():
    t0 = time.perf_counter()
    rng = random.Random(SEED)
    results = [verify_claim1(*random_claim1_instance(rng)) for _ in range(50)]
    zero = sum(p_is_zero(r.residual) for r in results)
    zero_eff = sum(p_is_zero(r.residual_at_effective_scale) for r in results)
    by_s = {s: sum(1 for r in results if r.s == s) for s in (1, 2, 3)}
    zero_by_s = {s: sum(1 for r in results if r.s == s and p_is_zero(r.residual)) for s in (1, 2, 3)}
    detail = (f"{zero}/50 exact zero residuals against (L^2m/s) sum P_k(Lx), tolerance 0 "
              f"[by s: {zero_by_s} of {by_s}; at scale L/N: {zero_eff}/50]")
    assert verdict(1, zero == 50, detail, time.perf_counter() - t0, 10)


def test_criterion_02_second_block_structure():
    t0 = time.perf_counter()
    rng = random.Random(SEED + 1)
    results = [verify_claim2(*random_claim2_instance(rng)) for _ in range(20)]
    indep = sum(r.k_independent for r in results)
    p_ok = sum(p_is_zero(r.P_residual) for r in results)
    p_eff = sum(p_is_zero(r.P_residual_at_effective_scale) for r in results)
    positive = all(r.P_hat[0] > 0 for r in results)
    detail = (f"P-hat = L^2n P(Lx) exactly in {p_ok}/20, k-independent R-hat and P-hat in {indep}/20, "
              f"P-hat(0) > 0: {positive} [P-hat at scale L/N: {p_eff}/20]")
    assert verdict(2, p_ok == 20 and indep == 20 and positive, detail, time.perf_counter() - t0, 30)


def test_criterion_03_pofh_identity():
    t0 = time.perf_counter()
    rng = random.Random(SEED + 2)
    ok = 0
    for _ in range(50):
        n = rng.randint(1, 3)
        P = random_poly(rng, rng.randint(0, 4 * n - 1))
        ok += all(v == 0 for v in pofh_residual(P, n, order=4 * n))
    assert verdict(3, ok == 50, f"{ok}/50 exact identities through order 4n", time.perf_counter() - t0, 5)


def test_criterion_04_derivative_identity():
    t0 = time.perf_counter()
    lines, ok = [], True
    for d in (2, 3):
        H = BlaschkePower(d)
        phi = AverageLift(H, 2)
        rep = verify_whHinMd(H, phi, conjugate(phi, H), grid=10**4, par_pts=[0.0], eps_par=1e-3, eq_tol=1e-9)
        good = rep["max_residual"] <= 1e-9 and rep["ge_one"] and rep["locus_near_par"]
        ok &= good
        lines.append(f"d={d}: max residual {rep['max_residual']:.2e} (<= 1e-9), min H-hat' {rep['min_deriv']:.12f} "
                     f"(>= 1 - 1e-9), equality locus {rep['equality_locus_size']} pts within "
                     f"{rep['equality_locus_max_dist']:.1e} of Par (<= 1e-3)")
    assert verdict(4, ok, "; ".join(lines), time.perf_counter() - t0, 30)


def test_criterion_05_parabolic_detection():
    t0 = time.perf_counter()
    lines, ok = [], True
    for H in (BlaschkePower(2), HdMap(2)):
        par = [o for o in find_periodic_orbits(H, 1) if o.is_parabolic]
        jet = jet_at(H, 0, order=4, precision_bits=96)
        oracle_ok = abs(float(jet.coeffs[0]) - 1) < 1e-20 and abs(float(jet.coeffs[1])) < 1e-20 and jet.coeffs[2] > 0
        good = (len(par) == 1 and circle_dist(par[0].points[0], 0) < 1e-12
                and abs(par[0].multiplier - 1) <= 1e-9 and par[0].multiplicity == 2 and oracle_ok)
        ok &= good
        lines.append(f"{type(H).__name__}: {len(par)} parabolic fixed point at "
                     f"{float(par[0].points[0]) if par else None}, |lambda-1| = "
                     f"{abs(par[0].multiplier - 1) if par else float('nan'):.1e} (<= 1e-9), 2n = "
                     f"{par[0].multiplicity if par else None}, 96-bit jet x + {float(jet.coeffs[2]):.6f} x^3")
    assert verdict(5, ok, "; ".join(lines), time.perf_counter() - t0, 5)


def test_criterion_06_metrization_certificate():
    t0 = time.perf_counter()
    report, _, _ = cmd_metrize({"kind": "hd", "degree": 2}, RunConfig())
    r = report["result"]
    ok = r["min_dg_off_par"] > 1 and r["min_dg"] >= 1 - 1e-6 and r["residual"] <= 1e-7 and r["check_points"] == 10**4
    detail = (f"HdMap(2), N={r['N']}: min Dg off 1e-3-nbhd {r['min_dg_off_par']:.10f} (> 1), min Dg {r['min_dg']:.10f} "
              f"(>= 1 - 1e-6), identity residual {r['residual']:.2e} on {r['check_points']} pts (<= 1e-7)")
    assert verdict(6, ok, detail, time.perf_counter() - t0, 120)


def test_criterion_07_no_parabolic_regime():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    mins, skipped = [], 0
    while len(mins) < 10:
        a, b = rng.uniform(-0.2, 0.2, 2)
        H = TrigLift(2, (a,), (b,))
        cert = certify_Tdstar(H, 6)
        if not cert.certified or cert.parabolic:
            skipped += 1
            continue
        _, _, rep = metrize(H, par=[])
        mins.append(rep.min_dg)
    detail = (f"min Dg over 10 maps = {min(mins):.6f} (> 1 strictly, full grid), per map "
              f"{[round(m, 4) for m in mins]}, {skipped} candidates not certified")
    assert verdict(7, min(mins) > 1, detail, time.perf_counter() - t0, 120)


def test_criterion_08_adjustment_bounds():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    grid = np.arange(2**12) / 2**12
    fails = {"interp": 0, "c0": 0, "c1": 0, "period": 0}
    worst = 0.0
    count = 0
    while count < 100:
        n = int(rng.integers(1, 6))
        xs = np.sort(rng.random(n))
        if n > 1 and np.min(np.diff(np.append(xs, xs[0] + 1))) < 1e-3:
            continue
        eps = float(10 ** rng.uniform(-3, -0.5))
        delta = adjustment_delta(xs, eps)
        ys = xs + rng.uniform(-1, 1, n) * delta * 0.999
        phi = adjustment_diffeo(xs, ys, eps)
        v, dv = phi.value_and_deriv(grid)
        fails["interp"] += not np.allclose(phi(xs), ys, atol=1e-12, rtol=0)
        fails["c0"] += not np.max(np.abs(v - grid)) < eps
        fails["c1"] += not np.max(np.abs(dv - 1)) < eps
        fails["period"] += not np.allclose(phi(grid + 1) - v, 1, atol=1e-12, rtol=0)
        worst = max(worst, float(np.max(np.abs(dv - 1))) / eps)
        count += 1
    ok = not any(fails.values())
    detail = (f"violations over 100 instances with delta = m eps / n^2: {fails}; "
              f"worst sup|phi'-1| / eps = {worst:.3g} (< 1)")
    assert verdict(8, ok, detail, time.perf_counter() - t0, 10)


def test_criterion_09_distortion_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    lines, ok = [], True
    for H in (BlaschkePower(2), TrigLift(2, (0.1,), (0.05,))):
        tv = total_variation_log_deriv(H)
        ratios = [distortion(H, J, n) / tv for J, n in sample_disjoint_pairs(H, rng, 50)]
        ok &= max(ratios) <= 1.02
        lines.append(f"{type(H).__name__}: max Dist/TV = {max(ratios):.4f} over 50 pairs (<= 1.02), TV = {tv:.4f}")
    assert verdict(9, ok, "; ".join(lines), time.perf_counter() - t0, 60)


def test_criterion_10_return_expansion():
    t0 = time.perf_counter()
    H = BlaschkePower(2)
    # the only fixed point is parabolic, so A is centred on the repelling period-2 orbit
    (p2,) = [o for o in find_periodic_orbits(H, 2) if o.classification == "Repelling"]
    O = find_periodic_orbits(H, 3)[0]
    res = search_return_expansion(H, p2.points[0], O, depths=range(2, 8), time_cap=20)
    detail = (f"A = ({res.A.start:.6f}, {res.A.end:.6f}) at depth {res.A.depth}, nice: {res.nice}, "
              f"{int(res.table.inside.sum())} return branches with time <= 20, inf DR_A = {res.inf_all:.4f} (> 1), "
              f"off-centre inf DR_A = {res.inf_others:.4f} (>= 2)")
    assert verdict(10, res.ok, detail, time.perf_counter() - t0, 60)


def _match(orbits_a, orbits_b, phi):
    """Pair orbits of ``H`` with orbits of ``phi H phi^-1`` through ``phi``; returns worst errors."""
    dl, dm = 0.0, 0
    for o in orbits_a:
        q = float(phi(o.points[0])) % 1.0
        hits = [b for b in orbits_b if b.period == o.period and np.min(circle_dist(np.array(b.points), q)) < 1e-8]
        if len(hits) != 1:
            return np.inf, 1
        dl = max(dl, abs(hits[0].multiplier - o.multiplier))
        dm += hits[0].multiplicity != o.multiplicity
    return dl, dm


def test_criterion_11_conjugacy_invariants():
    t0 = time.perf_counter()
    matrix = [(TrigLift(2, (0.1,), (0.05,)), 3), (BlaschkePower(2), 3), (HdMap(2), 3), (BlaschkePower(3), 2)]
    worst, mism, rows = 0.0, 0, 0
    for H, smax in matrix:
        for phi in (AverageLift(H, 2), AdjustmentDiffeo((0.1, 0.6), (0.1003, 0.5998))):
            G = conjugate(phi, H)
            for s in range(1, smax + 1):
                a, b = find_periodic_orbits(H, s), find_periodic_orbits(G, s)
                dl, dm = _match(a, b, phi)
                worst, mism = max(worst, dl), mism + dm + (len(a) != len(b))
                rows += 1
    detail = f"{rows} (map, conjugator, period) cases: max |multiplier change| = {worst:.2e} (<= 1e-8), " \
             f"{mism} multiplicity or orbit-count mismatches"
    assert verdict(11, worst <= 1e-8 and mism == 0, detail, time.perf_counter() - t0, 30)
