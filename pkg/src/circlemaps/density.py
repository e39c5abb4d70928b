"""Strictly positive 1-periodic weights used for weighted derivatives."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import SpecError
from .maps import MapExpr, from_spec as map_from_spec
from .series import Series, convert, is_mp, pi_like

_WELL_CUTOFF = 92.0  # exp(-92) ~ 1e-40: tail of a well treated as zero


def _centered(x):
    """Reduce mod 1 into ``[-1/2, 1/2]`` (keeps full relative precision near 0)."""
    return x - np.round(x)


class DensityFunction:
    """Base class: a positive, 1-periodic function ``rho``."""

    def apply(self, t):
        raise NotImplementedError

    def __call__(self, x):
        return self.apply(Series([x])).c[0]

    def bounds(self, grid=2**14):
        v = np.asarray(self(np.arange(grid) / grid), dtype=float)
        return float(v.min()), float(v.max())

    @cached_property
    def rho_min(self):
        return self.bounds()[0]

    @cached_property
    def rho_max(self):
        return self.bounds()[1]

    @property
    def eta(self):
        """``inf rho / sup rho``."""
        return self.rho_min / self.rho_max

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantDensity(DensityFunction):
    value: float = 1.0

    def apply(self, t):
        return Series.constant(convert(self.value, t.c[0]), t.order) + 0 * t

    def __call__(self, x):
        if is_mp(x):
            return convert(self.value, x)
        return np.full(np.shape(x), float(self.value)) if np.ndim(x) else float(self.value)

    def to_spec(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True, eq=False)
class TrigDensity(DensityFunction):
    """``a0 + sum a_k cos 2pi k x + b_k sin 2pi k x``."""

    a0: float = 1.0
    cos: tuple = ()
    sin: tuple = ()

    def apply(self, t):
        like = t.c[0]
        out = Series.constant(convert(self.a0, like), t.order) + 0 * t
        s1, c1 = (t * (2 * pi_like(like))).sincos()
        ck, sk = c1, s1
        for k in range(max(len(self.cos), len(self.sin))):
            if k < len(self.cos) and self.cos[k]:
                out = out + ck * convert(self.cos[k], like)
            if k < len(self.sin) and self.sin[k]:
                out = out + sk * convert(self.sin[k], like)
            ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
        return out

    def to_spec(self):
        return {"kind": "trig", "a0": self.a0, "cos": list(self.cos), "sin": list(self.sin)}


@dataclass(frozen=True, eq=False)
class AdmissibleDensity(DensityFunction):
    """``rho = exp(Z(x) * (alpha - sum_q c_q cos^{2K}(pi (x - q))))``.

    ``Z(x) = prod_p sin^2(pi (x - p))`` over the parabolic points, so that
    ``rho(p) = 1`` with a non-degenerate minimum there, while each well at a
    preimage point ``q`` pushes ``rho(q)`` below its target.
    """

    par_points: tuple = ()
    alpha: float = 0.5
    centers: tuple = ()
    depths: tuple = ()
    K: int = 1
    info: dict = field(default_factory=dict)

    @cached_property
    def _sorted_wells(self):
        c = np.mod(np.asarray(self.centers, dtype=float), 1.0)
        dep = np.asarray(self.depths, dtype=float)
        order = np.argsort(c)
        c, dep = c[order], dep[order]
        ext_c = np.concatenate([c - 1.0, c, c + 1.0])
        ext_d = np.concatenate([dep, dep, dep])
        return ext_c, ext_d

    @property
    def window(self):
        return min(0.5, np.sqrt(_WELL_CUTOFF / self.K) / np.pi)

    def _well_sum(self, x):
        ext_c, ext_d = self._sorted_wells
        if ext_c.size == 0:
            return np.zeros_like(x)
        w = self.window
        if w >= 0.5:
            ext_c, ext_d = ext_c[len(ext_c) // 3 : 2 * len(ext_c) // 3], ext_d[len(ext_d) // 3 : 2 * len(ext_d) // 3]
            diff = x[:, None] - ext_c[None, :]
            return (np.cos(np.pi * diff) ** (2 * self.K)) @ ext_d
        lo = np.searchsorted(ext_c, x - w)
        hi = np.searchsorted(ext_c, x + w)
        counts = hi - lo
        total = int(counts.sum())
        out = np.zeros_like(x)
        if total == 0:
            return out
        rows = np.repeat(np.arange(x.size), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        idx = lo[rows] + (np.arange(total) - starts)
        vals = ext_d[idx] * np.cos(np.pi * (x[rows] - ext_c[idx])) ** (2 * self.K)
        return np.bincount(rows, weights=vals, minlength=x.size)

    def _z(self, x):
        z = np.ones_like(x)
        for p in self.par_points:
            z = z * np.sin(np.pi * (x - p)) ** 2
        return z

    def __call__(self, x):
        if is_mp(x):
            return self.apply(Series([x])).c[0]
        arr = np.asarray(x, dtype=float)
        flat = _centered(arr.ravel())
        u = self._z(flat) * (self.alpha - self._well_sum(flat))
        out = np.exp(u).reshape(arr.shape)
        return out if arr.ndim else float(out)

    def log_density(self, x):
        flat = _centered(np.asarray(x, dtype=float).ravel())
        return (self._z(flat) * (self.alpha - self._well_sum(flat))).reshape(np.shape(x))

    def apply(self, t):
        like = t.c[0]
        pi = pi_like(like)
        z = Series.constant(convert(1, like), t.order) + 0 * t
        for p in self.par_points:
            s = ((t - convert(p, like)) * pi).sin()
            z = z * s * s
        wells = Series.constant(convert(self.alpha, like), t.order) + 0 * t
        x0 = float(like) if not isinstance(like, np.ndarray) else None
        for q, c in zip(self.centers, self.depths):
            if x0 is not None:
                dist = abs((x0 - q + 0.5) % 1.0 - 0.5)
                if dist > self.window:
                    continue
            b = ((t - convert(q, like)) * pi).cos()
            wells = wells - (b * b) ** self.K * convert(c, like)
        return (z * wells).exp()

    def to_spec(self):
        return {"kind": "admissible", "par_points": list(self.par_points), "alpha": self.alpha,
                "centers": list(self.centers), "depths": list(self.depths), "K": self.K}


@dataclass(frozen=True, eq=False)
class PushforwardDensity(DensityFunction):
    """``rho*(x) = sum_{j<N} rho(H^j x) DH^j(x)``."""

    H: MapExpr = None
    rho: DensityFunction = None
    n: int = 1

    def __call__(self, x):
        if is_mp(x):
            return self.apply(Series([x])).c[0]
        x = np.asarray(x, dtype=float)
        d = np.ones_like(x)
        total = np.asarray(self.rho(x), dtype=float) * d
        for _ in range(self.n - 1):
            x, dx = self.H.value_and_deriv(x)
            d = d * dx
            total = total + np.asarray(self.rho(x), dtype=float) * d
        return total if total.ndim else float(total)

    def apply(self, t):
        u = t
        dj = Series.constant(1, t.order) + 0 * t
        total = self.rho.apply(u) * dj
        for _ in range(self.n - 1):
            dj = dj * deriv_series(self.H, u)
            u = self.H.apply(u)
            total = total + self.rho.apply(u) * dj
        return total

    def to_spec(self):
        return {"kind": "pushforward", "map": self.H.to_spec(), "rho": self.rho.to_spec(), "N": self.n}


def deriv_series(H, t):
    """Series of ``DH(t)`` (same order as ``t``)."""
    x0 = t.c[0]
    f = H.apply(Series.variable(x0, t.order + 1)).derivative()
    return f.compose(t - x0)


def density_from_spec(spec):
    kind = spec.get("kind") if isinstance(spec, dict) else None
    try:
        if kind == "constant":
            return ConstantDensity(float(spec.get("value", 1.0)))
        if kind == "trig":
            return TrigDensity(float(spec.get("a0", 1.0)), tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))
        if kind == "admissible":
            return AdmissibleDensity(tuple(spec["par_points"]), float(spec["alpha"]), tuple(spec["centers"]),
                                     tuple(spec["depths"]), int(spec["K"]))
        if kind == "pushforward":
            return PushforwardDensity(map_from_spec(spec["map"]), density_from_spec(spec["rho"]), int(spec["N"]))
    except KeyError as exc:
        raise SpecError(f"density spec of kind '{kind}' is missing field {exc}") from None
    raise SpecError(f"unknown density kind '{kind}'")
