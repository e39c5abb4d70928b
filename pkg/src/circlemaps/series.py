"""
Truncated power series over generic scalars.

A :class:`Series` ``[c0, c1, ..., cM]`` stands for ``c0 + c1*e + ... + cM*e**M``
with everything of order ``> M`` unknown.  Coefficients may be

* Python floats or numpy arrays (vectorised evaluation over a grid),
* :class:`mpmath.mpf` (high-precision jets),
* :class:`fractions.Fraction` (exact arithmetic; polynomial operations only).

Evaluating a map on ``Series.variable(x0, M)`` yields its Taylor coefficients
at ``x0`` up to order ``M``; order 1 gives value and derivative, so this one
type serves as forward-mode automatic differentiation for every map variant.
"""

from fractions import Fraction

import mpmath
import numpy as np


def is_mp(x):
    return isinstance(x, (mpmath.mpf, mpmath.mpc))


def pi_like(x):
    """pi in the scalar type of ``x``."""
    if is_mp(x):
        return +mpmath.mp.pi
    if isinstance(x, Fraction):
        raise TypeError("transcendental constant requested in exact mode")
    return np.pi


def convert(value, like):
    """Cast a parameter (float, int or Fraction) to the scalar type of ``like``."""
    if is_mp(like):
        if isinstance(value, Fraction):
            return mpmath.mpf(value.numerator) / value.denominator
        return mpmath.mpf(value)
    if isinstance(like, Fraction):
        return Fraction(value)
    return float(value)


def _fn(name, x):
    if is_mp(x):
        return getattr(mpmath, name)(x)
    if isinstance(x, Fraction):
        raise TypeError(f"{name} is not available in exact mode")
    return getattr(np, {"atan": "arctan"}.get(name, name))(x)


class Series:
    """Truncated power series; see the module docstring."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = list(coeffs)
        if not self.c:
            raise ValueError("a series needs at least one coefficient")

    @classmethod
    def variable(cls, x0, order):
        return cls([x0] + [1] + [0] * (order - 1)) if order >= 1 else cls([x0])

    @classmethod
    def constant(cls, value, order):
        return cls([value] + [0] * order)

    @property
    def order(self):
        return len(self.c) - 1

    def __getitem__(self, k):
        return self.c[k]

    def __len__(self):
        return len(self.c)

    def __repr__(self):
        return f"Series({self.c!r})"

    def truncate(self, order):
        return Series(self.c[: order + 1])

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Series):
            return other
        return Series([other] + [0] * self.order)

    def __add__(self, other):
        other = self._coerce(other)
        m = min(self.order, other.order)
        return Series([self.c[k] + other.c[k] for k in range(m + 1)])

    __radd__ = __add__

    def __neg__(self):
        return Series([-a for a in self.c])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series([a * other for a in self.c])
        m = min(self.order, other.order)
        a, b = self.c, other.c
        out = []
        for k in range(m + 1):
            acc = a[0] * b[k]
            for i in range(1, k + 1):
                acc = acc + a[i] * b[k - i]
            out.append(acc)
        return Series(out)

    __rmul__ = __mul__

    def reciprocal(self):
        a = self.c
        inv0 = 1 / a[0]
        out = [inv0]
        for n in range(1, len(a)):
            acc = a[1] * out[n - 1]
            for k in range(2, n + 1):
                acc = acc + a[k] * out[n - k]
            out.append(-acc * inv0)
        return Series(out)

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series([a / other for a in self.c])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Series.constant(1, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- calculus -------------------------------------------------------------

    def derivative(self):
        if self.order == 0:
            return Series([0 * self.c[0]])
        return Series([k * self.c[k] for k in range(1, len(self.c))])

    def integral(self, const=0):
        exact = any(isinstance(a, Fraction) for a in self.c) or isinstance(const, Fraction)
        out = [const]
        for k, a in enumerate(self.c):
            out.append(Fraction(a) / (k + 1) if exact else a / (k + 1))
        return Series(out)

    def compose(self, inner):
        """Evaluate this series as a polynomial at ``inner`` (Horner).

        Exact to the truncation order when ``inner[0] == 0``; with a small
        non-zero constant it is the Taylor polynomial evaluated there.
        """
        m = min(self.order, inner.order)
        inner = inner.truncate(m)
        result = Series.constant(self.c[m], m)
        for k in range(m - 1, -1, -1):
            result = result * inner + self.c[k]
        return result

    def revert(self):
        """Compositional inverse of a series with zero constant term."""
        a = self.c
        if len(a) < 2:
            raise ValueError("reversion needs order >= 1")
        a1 = a[1]
        g = [0 * a1, 1 / a1]
        for n in range(2, len(a)):
            trial = Series(g + [0])
            comp = Series([0] + a[1 : n + 1]).compose(trial)
            g.append(-comp.c[n] / a1)
        return Series(g)

    # -- elementary functions -------------------------------------------------

    def sincos(self):
        u0 = self.c[0]
        s = [_fn("sin", u0)]
        c = [_fn("cos", u0)]
        for n in range(1, len(self.c)):
            ss = 0
            cc = 0
            for k in range(1, n + 1):
                ku = k * self.c[k]
                ss = ss + ku * c[n - k]
                cc = cc - ku * s[n - k]
            s.append(ss / n)
            c.append(cc / n)
        return Series(s), Series(c)

    def sin(self):
        return self.sincos()[0]

    def cos(self):
        return self.sincos()[1]

    def exp(self):
        e = [_fn("exp", self.c[0])]
        for n in range(1, len(self.c)):
            acc = 0
            for k in range(1, n + 1):
                acc = acc + k * self.c[k] * e[n - k]
            e.append(acc / n)
        return Series(e)

    def log(self):
        d = self.derivative() / self.truncate(self.order - 1) if self.order else None
        base = _fn("log", self.c[0])
        return Series([base]) if d is None else d.integral(base)

    def atan(self):
        base = _fn("atan", self.c[0])
        if self.order == 0:
            return Series([base])
        du = self.derivative()
        lower = self.truncate(self.order - 1)
        return (du / (1 + lower * lower)).integral(base)
