"""
Averaging conjugacies that make the jets of a parabolic cycle uniform.

``phi = (1/L) sum_{k<N} H^k`` with ``N`` the lcm of the parabolic periods.
One step equalises the leading block ``P`` along every parabolic cycle, the
second step equalises the next block ``R``; after two steps each single-step
germ along a cycle reads ``x (1 + x^{2n} P(x) + O(x^{6n}))`` with the same
polynomial ``P`` of degree ``<= 4n - 1`` at every point.
"""

from dataclasses import dataclass, field
import math

import mpmath
import numpy as np

from .errors import NotParabolic
from .jets import average_cycle_jets, extract_parabolic_form, form_to_json, jet_at, p_sub, p_trim, poly_to_json
from .maps import AverageLift, conjugate
from .orbits import circle_dist, par_set

PRECISION_BITS = 96
JET_TOL = 1e-20


def lcm_parabolic_periods(orbits):
    out = 1
    for o in orbits:
        if getattr(o, "is_parabolic", True):
            out = out * o.period // math.gcd(out, o.period)
    return out


def averaging_conjugacy(H, N):
    if N < 1:
        raise ValueError("N must be >= 1")
    return AverageLift(H, N)


def derivative_ratio(H, x, N):
    """``sum_{k=1}^{N} (H^k)'(x) / sum_{k=0}^{N-1} (H^k)'(x)``."""
    x = np.asarray(x, dtype=float)
    d = np.ones_like(x)
    den = np.zeros_like(x)
    for _ in range(N):
        den = den + d
        x, dx = H.value_and_deriv(x)
        d = d * dx
    return (den - 1 + d) / den


def verify_whHinMd(H, phi, Hhat, grid=10**4, par_pts=(), eps_par=1e-3, eq_tol=1e-9):
    """Compare ``Hhat'(phi(x))`` with the derivative ratio and locate where it equals 1."""
    x = np.arange(grid) / grid
    lhs = np.asarray(Hhat.deriv(np.asarray(phi(x), dtype=float)), dtype=float)
    rhs = derivative_ratio(H, x, phi.n)
    locus = x[lhs <= 1 + eq_tol]
    dist = float(max((min(float(circle_dist(p, q)) for p in par_pts) if par_pts else 0.5) for q in locus)) \
        if locus.size else 0.0
    return {"grid": grid, "N": phi.n, "max_residual": float(np.max(np.abs(lhs - rhs))),
            "min_deriv": float(lhs.min()), "ge_one": bool(lhs.min() >= 1 - eq_tol),
            "equality_locus_size": int(locus.size), "equality_locus_max_dist": dist,
            "locus_near_par": bool(dist <= eps_par), "eq_tol": eq_tol}


def two_step_jets(jets, N, L):
    """Run the averaging recursion twice on cycle jets; returns the jets after each step."""
    _, step1 = average_cycle_jets(jets, N, L)
    _, step2 = average_cycle_jets(step1, N, L)
    return step1, step2


def uniform_form_report(jets, tol=0):
    """Extract the normal form at every cycle point and compare the combined blocks."""
    forms = [extract_parabolic_form(j) for j in jets]
    combined = [p_trim(f.combined()) for f in forms]
    disc = [max((abs(v) for v in p_sub(c, combined[0])), default=0) for c in combined]
    n = forms[0].n
    return {
        "n": n, "forms": forms, "combined": combined, "discrepancies": disc,
        "uniform": all(d <= tol for d in disc) and all(f.n == n for f in forms),
        "degree_ok": all(len(c) <= 4 * n for c in combined),
        "P0": combined[0][0] if combined[0] else 0,
    }


@dataclass
class NormalizationResult:
    N: int
    L: int
    phi0: object
    phi1: object
    H1: object
    H2: object
    cycles: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c["uniform"] and c["degree_ok"] and c["P0_nonzero"] for c in self.cycles)

    def to_json(self):
        return {"N": self.N, "L": self.L, "ok": self.ok,
                "phi0": self.phi0.to_spec(), "phi1": self.phi1.to_spec(),
                "cycles": [{k: v for k, v in c.items() if k != "forms"} for c in self.cycles],
                "whHinMd": self.residuals}


def _cycle_jets(H, points, order, bits):
    """Single-step jets of ``H`` along a cycle given by its (high-precision) points."""
    jets = []
    for p in points:
        jets.append(jet_at(H, p, order=order, precision_bits=bits))
    return jets


def _mp_cycle(H, p, s, bits):
    with mpmath.workprec(bits):
        pts = [mpmath.mpf(p)]
        for _ in range(s - 1):
            pts.append(H(pts[-1]))
        return pts


def normalize(H, N=None, par=None, max_period=6, precision_bits=PRECISION_BITS, tol=JET_TOL, grid=10**4,
              eps_par=1e-3):
    """Two averaging steps, then jet-level verification of the uniform normal form on each parabolic cycle."""
    if par is None:
        par = par_set(H, max_period)
    N = lcm_parabolic_periods(par) if N is None else N
    if any(N % o.period for o in par):
        raise ValueError(f"N={N} must be a multiple of every parabolic period")
    phi0 = averaging_conjugacy(H, N)
    H1 = conjugate(phi0, H)
    phi1 = averaging_conjugacy(H1, N)
    H2 = conjugate(phi1, H1)
    pp = sorted({float(p) % 1.0 for o in par for p in o.points})
    res = [verify_whHinMd(H, phi0, H1, grid, pp, eps_par)]
    pp1 = [float(phi0(p)) % 1.0 for p in pp]
    res.append(verify_whHinMd(H1, phi1, H2, grid, pp1, eps_par))
    result = NormalizationResult(N, phi0.L, phi0, phi1, H1, H2, residuals=res)
    for o in par:
        n = (o.multiplicity or 2) // 2
        order = 6 * n
        with mpmath.workprec(precision_bits):
            pts = [phi1(phi0(q)) for q in _mp_cycle(H, o.points[0], o.period, precision_bits)]
        jets = _cycle_jets(H2, pts, order, precision_bits)
        with mpmath.workprec(precision_bits):
            rep = uniform_form_report(jets, tol)
        if rep["n"] != n:
            raise NotParabolic(f"multiplicity changed under averaging: {2 * n} -> {2 * rep['n']}")
        result.cycles.append({
            "points": [float(q) for q in pts], "period": o.period, "n": n,
            "P_check": poly_to_json(rep["combined"][0]), "discrepancies": [float(v) for v in rep["discrepancies"]],
            "uniform": rep["uniform"], "degree_ok": rep["degree_ok"],
            "P0": float(rep["P0"]), "P0_nonzero": abs(rep["P0"]) > tol,
            "forms": [form_to_json(f) for f in rep["forms"]],
        })
    return result
