"""
Distortion, total variation of ``log DH``, nice intervals and first-entry maps.

Arcs of the circle are stored as ``(start, length)`` with ``start`` in
``[0, 1)`` and ``0 < length < 1``; every predicate handles wrap-around.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NoEntry, NotConverged, PointOnBoundary
from .maps import iterate_with_deriv
from .orbits import PeriodicOrbit, lift_inverse, preimage_targets, preimages


# -- arcs -------------------------------------------------------------------------------


def arc_contains(start, length, x, tol=0.0):
    """Open-arc membership, vectorised; points within ``tol`` of an end count as outside."""
    u = np.mod(np.asarray(x, dtype=float) - start, 1.0)
    return (u > tol) & (u < length - tol)


def arcs_pairwise_disjoint(starts, lengths, tol=0.0):
    """True when the open arcs ``(s_i, s_i + l_i)`` are pairwise disjoint on the circle."""
    s = np.mod(np.asarray(starts, dtype=float), 1.0)
    ln = np.asarray(lengths, dtype=float)
    if s.size <= 1:
        return bool(s.size == 0 or ln[0] < 1)
    if ln.sum() > 1 + tol:
        return False
    order = np.argsort(s)
    s, ln = s[order], ln[order]
    ends = s + ln
    nxt = np.append(s[1:], s[0] + 1)
    return bool(np.all(ends <= nxt + tol))


def _arc_image(H, a, b, k):
    """Image of the lifted interval ``[a, b]`` under ``H^k`` as ``(start, length)``."""
    ya = iterate_with_deriv(H, a, k)[0]
    yb = iterate_with_deriv(H, b, k)[0]
    return np.mod(ya, 1.0), yb - ya


def iterates_disjoint(H, a, b, n):
    """Are ``J, H(J), ..., H^{n-1}(J)`` pairwise disjoint, ``J = (a, b)``?"""
    starts, lengths = [], []
    for k in range(n):
        s, ln = _arc_image(H, a, b, k)
        if ln >= 1:
            return False
        starts.append(s)
        lengths.append(ln)
    return arcs_pairwise_disjoint(starts, lengths)


# -- distortion and total variation ------------------------------------------------------


def distortion(H, J, n, grid=1025):
    """``max - min`` of ``log DH^n`` on a uniform grid of ``J = (a, b)`` (lifted, ``a < b``).

    With ``grid = 2^k + 1`` successive refinements are nested, so the estimate
    never decreases when the grid is refined this way.
    """
    a, b = J
    x = np.linspace(a, b, grid)
    ld = np.log(iterate_with_deriv(H, x, n)[1])
    return float(ld.max() - ld.min())


def sample_disjoint_pairs(H, rng, count, n_max=6, tries=200):
    """Random ``((a, b), n)`` with ``J, ..., H^{n-1}(J)`` pairwise disjoint."""
    out = []
    while len(out) < count:
        n = int(rng.integers(1, n_max + 1))
        a = float(rng.random())
        for _ in range(tries):
            b = a + 0.5 * float(10 ** rng.uniform(-4, 0)) / H.degree ** (n - 1)
            if iterates_disjoint(H, a, b, n):
                out.append(((a, b), n))
                break
    return out


def _tv_on_grid(H, m):
    x = np.arange(m + 1) / m
    ld = np.log(np.asarray(H.deriv(x), dtype=float))
    return float(np.sum(np.abs(np.diff(ld))))


def total_variation_log_deriv(H, grid=1024, max_grid=2**22, rtol=0.01, info=False):
    """Total variation of ``log DH`` over one period by grid doubling.

    Stops once doubling changes the value by less than ``rtol`` (relative).
    """
    m = grid
    prev = _tv_on_grid(H, m)
    while True:
        m2 = 2 * m
        if m2 > max_grid:
            raise NotConverged(f"total variation not stable to {rtol:.0%} at grid {max_grid}")
        cur = _tv_on_grid(H, m2)
        change = abs(cur - prev)
        if change <= rtol * abs(cur) or change <= 1e-14:
            return (cur, {"grid": m2, "change": change}) if info else cur
        m, prev = m2, cur


# -- nice intervals ----------------------------------------------------------------------


@dataclass
class NiceInterval:
    start: float
    length: float
    orbit: tuple = ()
    depth: int = 0

    @property
    def end(self):
        return self.start + self.length

    def contains(self, x, tol=0.0):
        return arc_contains(self.start, self.length, x, tol)

    def to_json(self):
        return {"start": self.start, "end": self.end, "length": self.length,
                "orbit": [float(p) for p in self.orbit], "depth": self.depth}


def backward_orbit(H, points, n):
    """``H^{-n}(points)`` as a sorted array in ``[0, 1)``."""
    cur = np.mod(np.asarray(points, dtype=float), 1.0)
    for _ in range(n):
        cur = preimages(H, cur)
    return np.sort(np.mod(cur, 1.0))


def build_nice_interval(H, z0, O, n, tol=1e-14):
    """Component of the circle minus ``H^{-n}(O)`` that contains ``z0``."""
    pts = O.points if isinstance(O, PeriodicOrbit) else tuple(O)
    cuts = backward_orbit(H, pts, n)
    z = float(z0) % 1.0
    if np.min(np.abs((cuts - z + 0.5) % 1.0 - 0.5)) <= tol:
        raise PointOnBoundary(f"z0={z0} lies on a preimage of the generating orbit")
    i = np.searchsorted(cuts, z)
    lo = cuts[i - 1] if i > 0 else cuts[-1] - 1.0
    hi = cuts[i] if i < cuts.size else cuts[0] + 1.0
    return NiceInterval(float(lo % 1.0), float(hi - lo), tuple(float(p) for p in pts), n)


def verify_nice(H, A, steps):
    """Forward orbits of both endpoints stay out of ``A`` for ``steps`` iterates."""
    y = np.array([A.start, A.end])
    for _ in range(steps):
        y = H(y)
        if np.any(A.contains(np.mod(y, 1.0), tol=1e-9)):
            return False
    return True


def first_entry(H, A, x, max_steps=1000):
    """Smallest ``k >= 1`` with ``H^k(x) in A`` and the entry point."""
    y = float(x)
    for k in range(1, max_steps + 1):
        y = float(H(y)) % 1.0
        if A.contains(y):
            return k, y
    raise NoEntry(f"no entry into A within {max_steps} steps")


# -- entry and return branches -----------------------------------------------------------


@dataclass
class ReturnBranch:
    start: float
    length: float
    time: int
    dmin: float
    dmax: float
    inside: bool

    def to_json(self):
        return {"start": self.start, "end": self.start + self.length, "time": self.time,
                "dmin": self.dmin, "dmax": self.dmax, "inside": self.inside}


@dataclass
class BranchTable:
    """All first-entry branches up to a time cap, stored column-wise.

    ``inside`` marks branches contained in ``A`` (the first-return branches).
    ``dmin``/``dmax`` bound ``DH^time`` on the branch: endpoint values for every
    branch, refined by interior sampling for return branches.
    """

    A: NiceInterval
    start: np.ndarray
    length: np.ndarray
    time: np.ndarray
    dmin: np.ndarray
    dmax: np.ndarray
    inside: np.ndarray
    time_cap: int
    pruned: int = 0
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.start.size

    def __getitem__(self, i):
        return ReturnBranch(float(self.start[i]), float(self.length[i]), int(self.time[i]), float(self.dmin[i]),
                            float(self.dmax[i]), bool(self.inside[i]))

    def returns(self):
        return [self[i] for i in np.nonzero(self.inside)[0]]


def _pullback(H, a, length, da, db):
    """Preimage arcs of ``(a, a + length)`` with derivative products at their ends."""
    d = H.degree
    y = preimage_targets(H, a)
    lo = lift_inverse(H, y.ravel())
    hi = lift_inverse(H, (y + length[:, None]).ravel())
    dlo = np.asarray(H.deriv(lo), dtype=float) * np.repeat(da, d)
    dhi = np.asarray(H.deriv(hi), dtype=float) * np.repeat(db, d)
    return np.mod(lo, 1.0), hi - lo, dlo, dhi


def return_branches(H, A, time_cap=20, prune=1e-14, samples=9):
    """Enumerate first-entry branches of ``A`` with entry time ``<= time_cap``.

    Breadth-first pullback: arcs disjoint from ``A`` are pulled back again,
    arcs inside ``A`` are return branches and stop.  Since ``A`` is nice, every
    pullback is either inside ``A`` or disjoint from it.
    """
    a = np.array([A.start])
    ln = np.array([A.length])
    da = np.ones(1)
    db = np.ones(1)
    cols = {k: [] for k in ("start", "length", "time", "dlo", "dhi", "inside")}
    pruned = 0
    for k in range(1, time_cap + 1):
        if a.size == 0:
            break
        a, ln, da, db = _pullback(H, a, ln, da, db)
        keep = ln >= prune
        pruned += int((~keep).sum())
        a, ln, da, db = a[keep], ln[keep], da[keep], db[keep]
        mid = np.mod(a + 0.5 * ln, 1.0)
        inside = A.contains(mid)
        for key, val in (("start", a), ("length", ln), ("time", np.full(a.size, k)), ("dlo", da), ("dhi", db),
                         ("inside", inside)):
            cols[key].append(val)
        a, ln, da, db = a[~inside], ln[~inside], da[~inside], db[~inside]
    cat = {key: np.concatenate(v) if v else np.array([]) for key, v in cols.items()}
    dmin = np.minimum(cat["dlo"], cat["dhi"])
    dmax = np.maximum(cat["dlo"], cat["dhi"])
    table = BranchTable(A, cat["start"], cat["length"], cat["time"].astype(int), dmin, dmax,
                        cat["inside"].astype(bool), time_cap, pruned)
    _refine_returns(H, table, samples)
    return table


def _refine_returns(H, table, samples):
    """Sample ``DH^k`` inside each return branch to tighten its bounds."""
    idx = np.nonzero(table.inside)[0]
    if idx.size == 0:
        return
    t = np.linspace(0.0, 1.0, samples)
    for k in np.unique(table.time[idx]):
        sel = idx[table.time[idx] == k]
        x = table.start[sel, None] + table.length[sel, None] * t[None, :]
        dv = iterate_with_deriv(H, x.ravel(), int(k))[1].reshape(x.shape)
        table.dmin[sel] = np.minimum(table.dmin[sel], dv.min(axis=1))
        table.dmax[sel] = np.maximum(table.dmax[sel], dv.max(axis=1))


def check_entry_consistency(H, table, i, samples=10, max_steps=None):
    """Every interior sample of branch ``i`` has the branch's entry time."""
    br = table[i]
    t = (np.arange(samples) + 0.5) / samples
    steps = max_steps or br.time + 1
    return all(first_entry(H, table.A, br.start + br.length * s, steps)[0] == br.time for s in t)


def check_derivative_floor(H, grid=2**12, k_max=10):
    """``min DH^k(x)`` over grid points and ``1 <= k <= k_max``."""
    x = np.arange(grid) / grid
    d = np.ones_like(x)
    floor = np.inf
    for _ in range(k_max):
        x, dx = H.value_and_deriv(x)
        d = d * dx
        floor = min(floor, float(d.min()))
    return floor


@dataclass
class ReturnExpansion:
    """Outcome of :func:`search_return_expansion` at the depth where it stopped."""

    A: NiceInterval
    table: BranchTable
    inf_all: float
    inf_central: float
    inf_others: float
    nice: bool
    tried: list = field(default_factory=list)

    @property
    def ok(self):
        return self.nice and self.inf_all > 1 and self.inf_others >= 2

    def to_json(self):
        return {"A": self.A.to_json(), "nice_verified": self.nice, "inf_DR_A": self.inf_all,
                "inf_DR_A_central": self.inf_central, "inf_DR_A_others": self.inf_others,
                "branches": len(self.table), "return_branches": int(self.table.inside.sum()),
                "pruned": self.table.pruned, "time_cap": self.table.time_cap, "ok": self.ok, "tried": self.tried}


def search_return_expansion(H, z0, O, depths=range(2, 8), time_cap=20):
    """Shrink ``A`` around ``z0`` until every return branch expands and non-central ones expand by 2.

    The central branch is the return branch containing ``z0``.
    """
    res = None
    tried = []
    for n in depths:
        A = build_nice_interval(H, z0, O, n)
        table = return_branches(H, A, time_cap)
        idx = np.nonzero(table.inside)[0]
        central = arc_contains(table.start[idx], table.length[idx], float(z0) % 1.0)
        dmin = table.dmin[idx]
        inf_c = float(dmin[central].min()) if central.any() else np.inf
        inf_o = float(dmin[~central].min()) if (~central).any() else np.inf
        res = ReturnExpansion(A, table, float(min(inf_c, inf_o)), inf_c, inf_o, verify_nice(H, A, 3 * n), tried)
        tried.append({"depth": n, "length": A.length, "inf_DR_A": res.inf_all, "inf_DR_A_others": inf_o,
                      "ok": res.ok})
        if res.ok:
            break
    return res
