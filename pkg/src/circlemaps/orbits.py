"""
Periodic orbits, parabolic points and their preimage strata.

Period-``s`` points are the solutions of ``H^s(x) - x = m`` for integers
``m``.  They are bracketed on a uniform grid, polished by bisection, and
points whose multiplier is close to 1 are re-solved in high precision so
the multiplier and the local jet can be read off reliably.
"""

from dataclasses import dataclass, field
import math

import mpmath
import numpy as np

from .errors import NonConvergence, ResolutionTooCoarse
from .jets import jet_at
from .maps import Compose, iterate_with_deriv, _newton_polish

CLASS_TOL = 1e-8
DEFAULT_MAX_PERIOD = 6
SAME_POINT = 1e-9
NEAR_PARABOLIC = 1e-3
JET_ORDER = 8
PRECISION_BITS = 96
ROOT_BITS = 3 * PRECISION_BITS
JET_RADIUS = 1e-4


@dataclass
class PeriodicOrbit:
    points: tuple
    period: int
    multiplier: float
    classification: str
    multiplicity: int = None
    leading_coefficient: float = None
    residual: float = 0.0

    @property
    def is_parabolic(self):
        return self.classification == "Parabolic"

    def to_json(self):
        return {"points": [float(p) for p in self.points], "period": self.period,
                "multiplier": float(self.multiplier), "class": self.classification,
                "multiplicity": self.multiplicity,
                "leading_coefficient": None if self.leading_coefficient is None else float(self.leading_coefficient)}


@dataclass
class PreimageStratum:
    level: int
    points: tuple

    def to_json(self):
        return {"level": self.level, "points": [float(p) for p in self.points]}


def circle_dist(a, b):
    """Distance on R/Z, vectorised."""
    return np.abs((np.asarray(a) - np.asarray(b) + 0.5) % 1.0 - 0.5)


MAX_GRID = 2**23


def default_grid(H, s):
    """Grid fine enough that ``H^s(x) - x`` moves by well under 1 per cell."""
    d = H.degree
    slope = float(np.max(H.deriv(np.arange(1024) / 1024)))
    return int(min(MAX_GRID, max(4096, 8 * d**s, 4 * math.ceil(slope**s))))


def _iterate(H, x, s):
    return iterate_with_deriv(H, x, s)


def _classify(lam, class_tol):
    if abs(lam - 1) <= class_tol:
        return "Parabolic"
    return "Repelling" if lam > 1 else "Attracting"


def _bisect_roots(H, s, lo, hi, targets, iters=64):
    """Vectorised bisection for ``H^s(x) - x = m`` on brackets with a sign change."""
    g_lo = _iterate(H, lo, s)[0] - lo - targets
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = _iterate(H, mid, s)[0] - mid - targets
        same = np.sign(g) == np.sign(g_lo)
        lo = np.where(same, mid, lo)
        g_lo = np.where(same, g, g_lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _mp(v):
    return mpmath.mpf(float(v)) if not isinstance(v, mpmath.mpf) else v


def _refine_mp(H, s, lo, hi, m, bits=ROOT_BITS):
    """High-precision bisection of ``H^s(x) - x - m`` on ``[lo, hi]``."""
    with mpmath.workprec(bits):
        lo, hi, m = _mp(lo), _mp(hi), mpmath.mpf(int(m))
        g_lo = _iterate(H, lo, s)[0] - lo - m
        g_hi = _iterate(H, hi, s)[0] - hi - m
        if g_lo == 0:
            return lo
        if g_hi == 0:
            return hi
        if mpmath.sign(g_lo) == mpmath.sign(g_hi):
            # a root sitting on a bracket end can show up as roundoff of either sign
            noise = mpmath.mpf(2) ** (-bits // 2)
            if min(abs(g_lo), abs(g_hi)) < noise:
                return lo if abs(g_lo) < abs(g_hi) else hi
            raise NonConvergence("lost the sign change during high-precision refinement")
        tol = mpmath.mpf(2) ** (-bits + 8)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            g = _iterate(H, mid, s)[0] - mid - m
            if g == 0:
                return mid
            if mpmath.sign(g) == mpmath.sign(g_lo):
                lo, g_lo = mid, g
            else:
                hi = mid
        return (lo + hi) / 2


def leading_term(coeffs, radius=JET_RADIUS):
    """Index and value of the dominant non-linear Taylor term at scale ``radius``.

    ``coeffs[k]`` is the coefficient of ``x**k``.  A root known only to finite
    precision produces tiny spurious low-order terms; weighting by ``radius**k``
    suppresses them.
    """
    best, best_k = -1, None
    for k in range(2, len(coeffs)):
        w = abs(coeffs[k]) * mpmath.mpf(radius) ** k
        if w > best:
            best, best_k = w, k
    if best_k is None or best == 0:
        return None, 0
    # prefer the lowest order within a tiny factor of the maximum
    for k in range(2, best_k):
        if abs(coeffs[k]) * mpmath.mpf(radius) ** k > 1e-3 * best:
            return k, coeffs[k]
    return best_k, coeffs[best_k]


def _power(H, s):
    return H if s == 1 else Compose((H,) * s)


def parabolic_data(H, s, p, order=JET_ORDER, bits=PRECISION_BITS):
    """Multiplicity ``2n`` and leading coefficient of ``H^s`` at a parabolic point ``p``."""
    with mpmath.workprec(bits):
        j = jet_at(_power(H, s), p, order=order, precision_bits=bits, check=False)
        coeffs = [j.image - j.base, j.coeffs[0], *j.coeffs[1:]]
        k, c = leading_term(coeffs)
    if k is None:
        return None, None
    return k - 1, float(c)


def _orbit_from_point(H, p, s):
    pts = [p]
    x = p
    for _ in range(s - 1):
        x = H(x)
        pts.append(x % 1)
    return pts


def find_periodic_orbits(H, s, grid=None, class_tol=CLASS_TOL, jet_order=JET_ORDER):
    """All orbits of least period ``s``; see the module docstring for the method."""
    d = H.degree
    grid = default_grid(H, s) if grid is None else grid
    if grid < 4 * d**s:
        raise ResolutionTooCoarse(f"grid={grid} is below 4*d^s = {4 * d**s}")
    x = np.arange(grid) / grid
    g0 = _iterate(H, x, s)[0] - x
    shift = d**s - 1
    band = 1e-9 * max(1, d**s)

    def gext(i):
        q, r = np.divmod(i, grid)
        return g0[r] + q * shift

    # start the circular scan where H^s(x) - x is far from every integer
    first = int(np.argmax(np.abs(g0 - np.round(g0))))
    idx = np.arange(first, first + grid + 1)
    g = gext(idx)
    fl = np.floor(g)
    jumps = fl[1:] - fl[:-1]
    if np.any(np.abs(jumps) > 1):
        i = idx[int(np.argmax(np.abs(jumps) > 1))] % grid
        raise ResolutionTooCoarse(f"several roots of H^{s}(x)-x in cell [{i / grid:.6g}, {(i + 1) / grid:.6g}]")
    cells = np.nonzero(jumps)[0]
    # crossings produced by roundoff near a flat root come in runs inside the band; keep the net count
    brackets = []
    k = 0
    while k < cells.size:
        c0 = cells[k]
        m = max(fl[c0], fl[c0 + 1])
        net = jumps[c0]
        last = c0
        while k + 1 < cells.size:
            c1 = cells[k + 1]
            if max(fl[c1], fl[c1 + 1]) != m or np.max(np.abs(g[last + 1 : c1 + 1] - m)) >= band:
                break
            net += jumps[c1]
            last = c1
            k += 1
        k += 1
        if net == 0:
            continue
        if abs(net) > 1:
            raise ResolutionTooCoarse(f"several roots of H^{s}(x)-x near x={idx[c0] % grid / grid:.6g}")
        a, b = idx[c0], idx[last] + 1
        for _ in range(4096):
            if abs(gext(a) - m) >= band:
                break
            a -= 1
        for _ in range(4096):
            if abs(gext(b) - m) >= band:
                break
            b += 1
        brackets.append((a, b, m))
    if not brackets:
        return []
    lo = np.array([b[0] for b in brackets], dtype=float) / grid
    hi = np.array([b[1] for b in brackets], dtype=float) / grid
    targets = np.array([b[2] for b in brackets], dtype=float)
    roots = _bisect_roots(H, s, lo, hi, targets)
    lam = _iterate(H, roots, s)[1]

    candidates = []
    for r, lm, a, b, m in zip(roots, lam, lo, hi, targets):
        point, mult, lead, lam_val = float(r) % 1.0, None, None, float(lm)
        if abs(lm - 1) <= NEAR_PARABOLIC:
            rm = _refine_mp(H, s, a, b, m)
            with mpmath.workprec(PRECISION_BITS):
                lam_mp = _iterate(H, +rm, s)[1]
            lam_val = float(lam_mp)
            point = float(rm) % 1.0
            if _classify(lam_val, class_tol) == "Parabolic":
                mult, lead = parabolic_data(H, s, rm, order=jet_order)
                lam_val = float(lam_mp)
        candidates.append((point, lam_val, mult, lead))

    # drop points of smaller period
    divisors = [k for k in range(1, s) if s % k == 0]
    kept = []
    for c in candidates:
        p = c[0]
        if any(circle_dist(_iterate(H, p, k)[0], p) <= SAME_POINT for k in divisors):
            continue
        kept.append(c)

    orbits = []
    used = np.zeros(len(kept), dtype=bool)
    pts_arr = np.array([c[0] for c in kept])
    for i, (p, lam_val, mult, lead) in enumerate(kept):
        if used[i]:
            continue
        pts = _orbit_from_point(H, p, s)
        for q in pts:
            used |= circle_dist(pts_arr, q) <= 1e-7
        start = int(np.argmin(pts))
        pts = pts[start:] + pts[:start]
        resid = abs(((_iterate(H, pts[0], s)[0] - pts[0]) + 0.5) % 1.0 - 0.5)
        cls = _classify(lam_val, class_tol)
        orbits.append(PeriodicOrbit(tuple(pts), s, lam_val, cls, mult if cls == "Parabolic" else None,
                                    lead if cls == "Parabolic" else None, float(resid)))
    return orbits


def all_periodic_orbits(H, max_period=DEFAULT_MAX_PERIOD, grid=None, class_tol=CLASS_TOL):
    out = []
    for s in range(1, max_period + 1):
        out.extend(find_periodic_orbits(H, s, max(grid or 0, default_grid(H, s)), class_tol))
    return out


def par_set(H, max_period=DEFAULT_MAX_PERIOD, grid=None, class_tol=CLASS_TOL):
    """Parabolic orbits of period ``<= max_period``; longer periods are not examined."""
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    return [o for o in all_periodic_orbits(H, max_period, grid, class_tol) if o.is_parabolic]


def par_points(par):
    pts = []
    for item in par:
        pts.extend(item.points if isinstance(item, PeriodicOrbit) else [item])
    return sorted(float(p) % 1.0 for p in pts)


def lift_inverse(H, y, iters=20):
    """Solve ``H(x) = y`` for real ``y`` (``H`` is an increasing bijection of the line)."""
    y = np.asarray(y, dtype=float)
    h0 = float(H(0.0))
    n = np.floor((y - h0) / H.degree)
    lo, hi = n.copy(), n + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = H(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return _newton_polish(H, y, 0.5 * (lo + hi), lo, hi)


def preimage_targets(H, targets):
    """The ``d`` lifted values ``t + m`` with ``H(0) <= t + m < H(0) + d`` for each target."""
    d = H.degree
    h0 = float(H(0.0))
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    m0 = np.ceil(h0 - t)
    y = (t + m0)[:, None] + np.arange(d)[None, :]
    return np.where(y >= h0 + d, y - d, y)


def preimages(H, targets):
    """All ``x in [0, 1)`` with ``H(x) = t (mod 1)``; ``d`` per target, target-major."""
    y = preimage_targets(H, targets).ravel()
    if y.size == 0:
        return np.array([])
    return np.mod(lift_inverse(H, y), 1.0)


def preimage_strata(H, par, k_max):
    """``X_0 = Par`` and ``X_k = H^{-k}(Par) minus H^{-k+1}(Par)`` for ``k <= k_max``."""
    base = par_points(par)
    if not base:
        raise ValueError("par must be non-empty")
    strata = [PreimageStratum(0, tuple(base))]
    seen = np.array(base)
    for k in range(1, k_max + 1):
        cand = np.sort(preimages(H, strata[-1].points))
        if cand.size:
            keep = np.ones(cand.size, dtype=bool)
            keep[1:] = np.diff(cand) > SAME_POINT
            cand = cand[keep]
            srt = np.sort(seen)
            pos = np.searchsorted(srt, cand)
            nb = np.stack([srt[np.clip(pos - 1, 0, srt.size - 1)], srt[np.clip(pos, 0, srt.size - 1)],
                           np.full_like(cand, srt[0]), np.full_like(cand, srt[-1])])
            cand = cand[np.all(circle_dist(nb, cand[None, :]) > SAME_POINT, axis=0)]
        strata.append(PreimageStratum(k, tuple(float(v) for v in cand)))
        seen = np.concatenate([seen, cand])
    return strata


@dataclass
class CertificateReport:
    certified: bool
    orbits: list
    parabolic: list
    max_period: int
    witness: dict = None
    reason: str = ""
    checks: list = field(default_factory=list)

    @property
    def caveat(self):
        return f"periodic orbits of period > {self.max_period} were not examined"

    def to_json(self):
        return {"certified": self.certified, "max_period": self.max_period, "caveat": self.caveat,
                "reason": self.reason, "witness": self.witness,
                "orbits": [o.to_json() for o in self.orbits],
                "parabolic": [o.to_json() for o in self.parabolic], "checks": self.checks}


def _parabolic_side_check(H, orbit, neighborhood, samples):
    """Sample ``DH^s - 1`` on both punctured sides of each orbit point."""
    n2 = orbit.multiplicity
    c = abs(orbit.leading_coefficient)
    # smallest offset at which the expected excess is well above roundoff
    h_min = min(neighborhood / 10, (1e-9 / ((n2 + 1) * c)) ** (1.0 / n2))
    h = np.geomspace(h_min, neighborhood, samples)
    worst = np.inf
    where = None
    for p in orbit.points:
        xs = np.concatenate([p - h, p + h])
        dv = _iterate(H, xs, orbit.period)[1] - 1.0
        i = int(np.argmin(dv))
        if dv[i] < worst:
            worst, where = float(dv[i]), float(xs[i])
    return worst, where


def certify_Tdstar(H, max_period=DEFAULT_MAX_PERIOD, grid=None, neighborhood=1e-3, samples=64,
                   class_tol=CLASS_TOL):
    """Check the weak expansion property for all orbits of period ``<= max_period``.

    Failure is reported, never raised; the report carries a witness.
    """
    orbits = all_periodic_orbits(H, max_period, grid, class_tol)
    par = [o for o in orbits if o.is_parabolic]
    report = CertificateReport(True, orbits, par, max_period)
    for o in orbits:
        if o.classification == "Attracting":
            report.certified = False
            report.reason = "attracting periodic orbit"
            report.witness = o.to_json()
            return report
    for o in par:
        if o.multiplicity is None:
            report.certified, report.reason, report.witness = False, "no non-linear term found in jet", o.to_json()
            return report
        if o.multiplicity % 2 or o.leading_coefficient <= 0:
            report.certified = False
            report.reason = "parabolic point not repelling on both sides"
            report.witness = o.to_json()
            return report
        worst, where = _parabolic_side_check(H, o, neighborhood, samples)
        report.checks.append({"orbit": o.to_json(), "min_excess": worst, "at": where})
        if worst <= 0:
            report.certified = False
            report.reason = "derivative of return map <= 1 near parabolic point"
            report.witness = {"orbit": o.to_json(), "x": where, "excess": worst}
            return report
    return report


def certify_Md(H, par_pts, grid=2**14, eps_par=1e-3):
    """``DH > 1`` on the grid outside ``eps_par``-neighbourhoods of ``par_pts``."""
    x = np.arange(grid) / grid
    dh = np.asarray(H.deriv(x), dtype=float)
    mask = np.ones(grid, dtype=bool)
    for p in par_pts:
        mask &= circle_dist(x, p) > eps_par
    off = float(dh[mask].min()) if mask.any() else np.inf
    i = int(np.argmin(np.where(mask, dh, np.inf)))
    return {"certified": off > 1 and float(dh.min()) >= 1 - 1e-9, "min_off": off, "min": float(dh.min()),
            "witness": float(x[i])}
