"""
Lifts of circle maps as immutable expression trees.

Every map ``H`` here is a lift ``R -> R`` of a circle covering of degree ``d``,
so ``H(x + 1) = H(x) + d``.  Each node knows how to act on a truncated power
series (:class:`~circlemaps.series.Series`); plain values, exact derivatives
and high-order jets all come out of that one method.

Variants
--------
:class:`TrigLift`          ``d*x + sum a_k cos 2pi k x + b_k sin 2pi k x``
:class:`BlaschkePower`     lift of ``z -> M_r(z)**d``
:class:`HdMap`             lift of ``h_d(z) = M_r(z**d)``, ``r = (d-1)/(d+1)``
:class:`MobiusLift`        lift of ``M_r`` itself (degree 1)
:class:`Compose`           composition, applied right to left
:class:`InverseDiffeo`     inverse of a degree-1 diffeomorphism
:class:`AverageLift`       ``(1/L) sum_{k<N} H^k``, ``L = (d^N - 1)/(d - 1)``
:class:`QuadratureDiffeo`  ``C * int_0^x rho``, with ``1/C = int_0^1 rho``
:class:`AdjustmentDiffeo`  sin^2-product interpolating diffeomorphism
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
import math

import mpmath
import numpy as np

from .errors import NonConvergence, NotADiffeo, QuadratureFailure, SpecError
from .series import Series, convert, is_mp, pi_like

_BISECT_WIDTH = 1e-3
_NEWTON_TOL = 1e-13
_BUDGET = 200


class MapExpr:
    """Base class of all lifts."""

    degree = 1

    def apply(self, t):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(Series([x])).c[0]

    def deriv(self, x):
        return self.value_and_deriv(x)[1]

    def value_and_deriv(self, x):
        s = self.apply(Series([x, 1]))
        v, d = s.c[0], s.c[1]
        if isinstance(x, np.ndarray):
            # constant coefficients (e.g. linear lifts) come back as scalars
            if np.shape(v) != x.shape:
                v = np.full(x.shape, v)
            if np.shape(d) != x.shape:
                d = np.full(x.shape, d)
        return v, d

    def invert(self, y):
        if self.degree != 1:
            raise NotADiffeo("only degree-1 lifts can be inverted")
        if is_mp(y):
            return _invert_mp(self, y)
        return _invert_array(self, y)

    def to_spec(self):
        raise NotImplementedError


# -- root finding for monotone degree-1 lifts ----------------------------------


def _initial_bracket(phi, y):
    v = phi(y) - y
    lo = np.where(v >= 0, y - np.ceil(v), y)
    hi = np.where(v >= 0, y, y + np.ceil(-v))
    return lo, hi


def _newton_polish(phi, y, x, lo, hi, tol=_NEWTON_TOL, budget=_BUDGET):
    for _ in range(budget):
        val, dval = phi.value_and_deriv(x)
        f = val - y
        lo = np.where(f < 0, np.maximum(lo, x), lo)
        hi = np.where(f > 0, np.minimum(hi, x), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / dval
        bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        # a residual at rounding level is final even where phi' is tiny
        at_ulp = np.abs(f) <= 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(y))
        done = (np.abs(xn - x) <= tol * np.maximum(1.0, np.abs(x))) | at_ulp
        x = np.where(at_ulp, x, xn)
        if done.all():
            return x
    raise NonConvergence("Newton iteration budget exhausted while inverting a diffeomorphism")


def _invert_array(phi, y, lo=None, hi=None):
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if lo is None:
        lo, hi = _initial_bracket(phi, y)
    for _ in range(_BUDGET):
        active = (hi - lo) > _BISECT_WIDTH
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        below = phi(mid) < y
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    else:
        raise NonConvergence("bisection budget exhausted")
    x = _newton_polish(phi, y, 0.5 * (lo + hi), lo, hi)
    return x[0] if scalar else x


def _invert_mp(phi, y):
    tol = mpmath.mpf(2) ** (-mpmath.mp.prec + 6)
    v = phi(y) - y
    if v >= 0:
        lo, hi = y - mpmath.ceil(v), y
    else:
        lo, hi = y, y + mpmath.ceil(-v)
    while hi - lo > _BISECT_WIDTH:
        mid = (lo + hi) / 2
        if phi(mid) < y:
            lo = mid
        else:
            hi = mid
    x = (lo + hi) / 2
    for _ in range(_BUDGET):
        val, dval = phi.value_and_deriv(x)
        f = val - y
        if f == 0:
            return x
        if f < 0:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        xn = x - f / dval
        if not lo <= xn <= hi:
            xn = (lo + hi) / 2
        if abs(xn - x) <= tol * max(1, abs(x)):
            return xn
        x = xn
    raise NonConvergence("Newton iteration budget exhausted (high precision)")


# -- concrete families ---------------------------------------------------------


def _parse_real(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (int, Fraction)):
        return Fraction(v)
    return float(v)


def _dump_real(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    return v


@dataclass(frozen=True, eq=False)
class TrigLift(MapExpr):
    degree: int = 2
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cos", tuple(self.cos))
        object.__setattr__(self, "sin", tuple(self.sin))
        if self.degree < 1:
            raise ValueError("degree must be >= 1")

    def apply(self, t):
        out = t * self.degree
        nmodes = max(len(self.cos), len(self.sin))
        if nmodes == 0:
            return out
        like = t.c[0]
        s1, c1 = (t * (2 * pi_like(like))).sincos()
        ck, sk = c1, s1
        for k in range(nmodes):
            a = self.cos[k] if k < len(self.cos) else 0.0
            b = self.sin[k] if k < len(self.sin) else 0.0
            if a:
                out = out + ck * convert(a, like)
            if b:
                out = out + sk * convert(b, like)
            if k + 1 < nmodes:
                ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        return out

    def to_spec(self):
        return {"kind": "trig_lift", "degree": self.degree,
                "cos": [_dump_real(a) for a in self.cos], "sin": [_dump_real(b) for b in self.sin]}


def _mobius_angle(t, r):
    """Lift of ``M_r`` on the unit circle, normalised so that 0 maps to 0."""
    like = t.c[0]
    pi = pi_like(like)
    rr = convert(r, like)
    s, c = (t * (2 * pi)).sincos()
    return t - (s * rr / (c * rr + 1)).atan() / pi


def _check_r(r, lo=0.0):
    if not lo < float(r) < 1.0:
        raise ValueError(f"Moebius parameter r={r} out of range")


@dataclass(frozen=True, eq=False)
class MobiusLift(MapExpr):
    r: object = Fraction(1, 3)

    def __post_init__(self):
        object.__setattr__(self, "r", _parse_real(self.r))
        _check_r(self.r, lo=-1.0)

    def apply(self, t):
        return _mobius_angle(t, self.r)

    def to_spec(self):
        return {"kind": "mobius", "r": _dump_real(self.r)}


@dataclass(frozen=True, eq=False)
class BlaschkePower(MapExpr):
    """Lift of ``z -> M_r(z)**d``; ``r`` defaults to the parabolic value ``(d-1)/(d+1)``."""

    degree: int = 2
    r: object = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        r = Fraction(self.degree - 1, self.degree + 1) if self.r is None else _parse_real(self.r)
        object.__setattr__(self, "r", r)
        _check_r(r)

    def apply(self, t):
        return _mobius_angle(t, self.r) * self.degree

    def to_spec(self):
        return {"kind": "blaschke_power", "degree": self.degree, "r": _dump_real(self.r)}


@dataclass(frozen=True, eq=False)
class HdMap(MapExpr):
    degree: int = 2

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("h_d needs degree >= 2")

    @property
    def r(self):
        return Fraction(self.degree - 1, self.degree + 1)

    def apply(self, t):
        return _mobius_angle(t * self.degree, self.r)

    def to_spec(self):
        return {"kind": "hd", "degree": self.degree}


# -- combinators ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Compose(MapExpr):
    parts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("Compose needs at least one part")

    @property
    def degree(self):
        return math.prod(p.degree for p in self.parts)

    def apply(self, t):
        for p in reversed(self.parts):
            t = p.apply(t)
        return t

    def to_spec(self):
        return {"kind": "compose", "parts": [p.to_spec() for p in self.parts]}


@dataclass(frozen=True, eq=False)
class InverseDiffeo(MapExpr):
    of: MapExpr = None

    def __post_init__(self):
        if self.of is None or self.of.degree != 1:
            raise NotADiffeo("InverseDiffeo requires a degree-1 lift")

    def apply(self, t):
        y0 = t.c[0]
        x0 = self.of.invert(y0)
        if t.order == 0:
            return Series([x0])
        f = self.of.apply(Series.variable(x0, t.order))
        g = Series([0 * f.c[0]] + f.c[1:]).revert()
        return g.compose(t - f.c[0]) + x0

    def invert(self, y):
        return self.of(y)

    def to_spec(self):
        return {"kind": "inverse", "of": self.of.to_spec()}


def average_normaliser(d, n):
    """``L = (d^N - 1)/(d - 1)`` (``= N`` when ``d = 1``)."""
    return n if d == 1 else (d**n - 1) // (d - 1)


@dataclass(frozen=True, eq=False)
class AverageLift(MapExpr):
    base: MapExpr = None
    n: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("N must be >= 1")

    @property
    def L(self):
        return average_normaliser(self.base.degree, self.n)

    def apply(self, t):
        acc = t
        cur = t
        for _ in range(self.n - 1):
            cur = self.base.apply(cur)
            acc = acc + cur
        if self.n == 1:
            return acc
        return acc / convert(self.L, t.c[0]) if is_mp(t.c[0]) else acc / self.L

    def to_spec(self):
        return {"kind": "average", "of": self.base.to_spec(), "N": self.n}


@dataclass(frozen=True, eq=False)
class AdjustmentDiffeo(MapExpr):
    """``x + sum_j (y_j - x_j) G_j(x) / G_j(x_j)`` with ``G_j = prod_{i != j} sin^2(pi (x - x_i))``."""

    xs: tuple = ()
    ys: tuple = ()

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or not xs:
            raise ValueError("xs and ys must be non-empty and of equal length")
        if any(b <= a for a, b in zip(xs, xs[1:])) or xs[-1] >= xs[0] + 1:
            raise ValueError("anchors must satisfy x_1 < ... < x_n < x_1 + 1")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @cached_property
    def weights(self):
        w = []
        for j, xj in enumerate(self.xs):
            gj = math.prod(math.sin(math.pi * (xj - xi)) ** 2 for i, xi in enumerate(self.xs) if i != j)
            w.append((self.ys[j] - xj) / gj)
        return tuple(w)

    def apply(self, t):
        like = t.c[0]
        pi = pi_like(like)
        n = len(self.xs)
        out = t + convert(self.weights[0], like) if n == 1 else t
        if n == 1:
            return out
        gs = [(t - convert(xi, like)) * pi for xi in self.xs]
        gs = [s * s for s in (g.sin() for g in gs)]
        for j, wj in enumerate(self.weights):
            if wj == 0:
                continue
            prod = None
            for i, g in enumerate(gs):
                if i != j:
                    prod = g if prod is None else prod * g
            out = out + prod * convert(wj, like)
        return out

    def to_spec(self):
        return {"kind": "adjustment", "xs": list(self.xs), "ys": list(self.ys)}


@dataclass(frozen=True, eq=False)
class QuadratureDiffeo(MapExpr):
    """``phi(x) = C * int_0^x rho``, normalised so that ``phi(1) = 1``.

    The primitive of the base density is tabulated once on a uniform panel
    partition with Gauss-Legendre nodes; the panel count doubles until the
    table is stable to ``quad_tol``.  Evaluation adds one more Gauss-Legendre
    panel from the nearest node.

    For a push-forward ``rho*(x) = sum_{j<N} rho(H^j x) DH^j(x)`` the change of
    variables ``y = H^j(s)`` gives ``int_0^x rho* = sum_j R(H^j x) - R(H^j 0)``
    with ``R`` the lifted primitive of ``rho``, so only ``rho`` itself is
    integrated numerically; ``rho*`` oscillates on scale ``d^{-N}``.
    """

    density: object = None
    quad_tol: float = 1e-11
    nodes: int = 10
    max_panels: int = 2**20
    start_panels: int = 256

    @property
    def _pushforward(self):
        return all(hasattr(self.density, a) for a in ("H", "rho", "n"))

    @property
    def _base(self):
        return self.density.rho if self._pushforward else self.density

    @cached_property
    def _gl(self):
        xi, w = np.polynomial.legendre.leggauss(self.nodes)
        return 0.5 * (xi + 1.0), 0.5 * w

    def _panel_integrals(self, k):
        xi, w = self._gl
        a = np.arange(k) / k
        pts = (a[:, None] + xi[None, :] / k).ravel()
        vals = np.asarray(self._base(pts), dtype=float).reshape(k, -1)
        return vals @ w / k

    @cached_property
    def _base_table(self):
        k = self.start_panels
        prev = np.concatenate([[0.0], np.cumsum(self._panel_integrals(k))])
        while True:
            k2 = 2 * k
            if k2 > self.max_panels:
                raise QuadratureFailure(f"quadrature did not reach tolerance {self.quad_tol} "
                                        f"within {self.max_panels} panels")
            cur = np.concatenate([[0.0], np.cumsum(self._panel_integrals(k2))])
            err = np.max(np.abs(cur[::2] - prev))
            if err <= self.quad_tol * max(1.0, cur[-1]):
                if not np.isfinite(cur[-1]) or cur[-1] <= 0:
                    raise QuadratureFailure("density integral is not positive")
                return k2, cur, err / cur[-1]
            k, prev = k2, cur

    def _base_primitive(self, x):
        """Lifted ``int_0^x rho`` for the base density, vectorised."""
        k, cum, _ = self._base_table
        xi, w = self._gl
        x = np.asarray(x, dtype=float)
        n = np.floor(x)
        frac = x - n
        idx = np.minimum((frac * k).astype(int), k - 1)
        h = frac - idx / k
        pts = (idx / k)[..., None] + h[..., None] * xi
        vals = np.asarray(self._base(pts.ravel()), dtype=float).reshape(pts.shape)
        return n * cum[-1] + cum[idx] + h * (vals @ w)

    def _primitive(self, x):
        if not self._pushforward:
            return self._base_primitive(x)
        H = self.density.H
        y = np.asarray(x, dtype=float)
        y0 = np.zeros(1)
        total = np.zeros_like(y)
        for _ in range(self.density.n):
            total = total + (self._base_primitive(y) - self._base_primitive(y0)[0])
            y, y0 = H(y), H(y0)
        return total

    @cached_property
    def table(self):
        k, cum, err = self._base_table
        scale = sum(self.density.H.degree**j for j in range(self.density.n)) if self._pushforward else 1
        total = cum[-1] * scale
        edges = self._primitive(np.arange(k + 1) / k) / total
        return {"panels": k, "cum": edges, "C": 1.0 / total, "error": err}

    @property
    def C(self):
        return self.table["C"]

    def _value(self, x):
        return np.floor(x) + self.C * self._primitive(np.asarray(x, dtype=float) - np.floor(x))

    def _value_mp(self, x):
        base = self._base
        n = mpmath.floor(x)
        if not self._pushforward:
            c = 1 / mpmath.quad(lambda s: base(s), [0, 1])
            return n + c * mpmath.quad(lambda s: base(s), [0, x - n])
        H = self.density.H
        y, y0 = x - n, mpmath.mpf(0)
        total = 0
        for _ in range(self.density.n):
            total += mpmath.quad(lambda s: base(s), [y0, y])
            y, y0 = H(y), H(y0)
        scale = sum(H.degree**j for j in range(self.density.n))
        return n + total / (scale * mpmath.quad(lambda s: base(s), [0, 1]))

    def apply(self, t):
        x0 = t.c[0]
        if is_mp(x0):
            v0 = self._value_mp(x0)
            scale = sum(self.density.H.degree**j for j in range(self.density.n)) if self._pushforward else 1
            cc = 1 / (scale * mpmath.quad(lambda s: self._base(s), [0, 1]))
        else:
            v0 = self._value(x0)
            cc = self.C
        if t.order == 0:
            return Series([v0])
        dens = self.density.apply(Series.variable(x0, t.order - 1))
        local = (dens * cc).integral(0 * v0)
        return local.compose(t - x0) + v0

    def invert(self, y):
        if is_mp(y):
            return _invert_mp(self, y)
        tab = self.table
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        n = np.floor(y)
        frac = y - n
        k = tab["panels"]
        idx = np.clip(np.searchsorted(tab["cum"], frac, side="right") - 1, 0, k - 1)
        lo = n + idx / k
        hi = n + (idx + 1) / k
        # the tabulated panel already brackets the root
        x = _newton_polish(self, y, 0.5 * (lo + hi), lo, hi)
        return x[0] if scalar else x

    def to_spec(self):
        return {"kind": "quadrature", "density": self.density.to_spec(),
                "quad_tol": self.quad_tol, "nodes": self.nodes, "max_panels": self.max_panels}


IDENTITY = TrigLift(1)


# -- operations ----------------------------------------------------------------


def eval_map(H, x):
    return H(x)


def deriv(H, x):
    return H.deriv(x)


def iterate_with_deriv(H, x, n):
    """``(H^n(x), DH^n(x))``; ``n = 0`` gives ``(x, 1)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    d = 1.0 if not is_mp(x) else mpmath.mpf(1)
    if isinstance(x, np.ndarray):
        d = np.ones_like(x, dtype=float)
    for _ in range(n):
        x, dx = H.value_and_deriv(x)
        d = d * dx
    return x, d


def verification_grid(n):
    return np.arange(n) / n


def conjugate(phi, H, grid=1024):
    """``phi o H o phi^{-1}`` as a :class:`Compose` node."""
    if phi.degree != 1:
        raise NotADiffeo("conjugator must have degree 1")
    dphi = np.asarray(phi.deriv(verification_grid(grid)))
    if not np.all(dphi > 0):
        bad = verification_grid(grid)[np.argmin(dphi)]
        raise NotADiffeo(f"derivative of conjugator is not positive (x={bad:.6g})")
    return Compose((phi, H, InverseDiffeo(phi)))


def invert_at(phi, y):
    return phi.invert(y)


def fourier_project(H, modes, grid=4096):
    """Export utility: closest :class:`TrigLift` with ``modes`` harmonics."""
    x = verification_grid(grid)
    resid = np.asarray(H(x)) - H.degree * x - float(H(0.0))
    spec = np.fft.rfft(resid) / grid
    cos = tuple(2 * spec[1 : modes + 1].real)
    sin = tuple(-2 * spec[1 : modes + 1].imag)
    offset = float(H(0.0)) + spec[0].real
    return TrigLift(H.degree, cos, sin), offset


# -- JSON specs ----------------------------------------------------------------


def from_spec(spec):
    """Build a :class:`MapExpr` from its JSON dictionary."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise SpecError("map spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "trig_lift":
            return TrigLift(int(spec.get("degree", 2)), tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))
        if kind == "blaschke_power":
            return BlaschkePower(int(spec.get("degree", 2)), spec.get("r"))
        if kind == "hd":
            return HdMap(int(spec.get("degree", 2)))
        if kind == "mobius":
            return MobiusLift(spec["r"])
        if kind == "compose":
            return Compose(tuple(from_spec(p) for p in spec["parts"]))
        if kind == "inverse":
            return InverseDiffeo(from_spec(spec["of"]))
        if kind == "average":
            return AverageLift(from_spec(spec["of"]), int(spec["N"]))
        if kind == "adjustment":
            return AdjustmentDiffeo(tuple(spec["xs"]), tuple(spec["ys"]))
        if kind == "quadrature":
            from .density import density_from_spec

            return QuadratureDiffeo(density_from_spec(spec["density"]), float(spec.get("quad_tol", 1e-11)),
                                    int(spec.get("nodes", 10)), int(spec.get("max_panels", 2**20)))
    except KeyError as exc:
        raise SpecError(f"map spec of kind '{kind}' is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise SpecError(f"invalid map spec of kind '{kind}': {exc}") from None
    raise SpecError(f"unknown map kind '{kind}'")


def to_spec(H):
    return H.to_spec()
