"""
Jets of circle-map germs, parabolic normal forms, and exact checks of the
averaging identities for parabolic cycles.

A :class:`Jet` stores ``x -> q + sum_{i=1}^M c_i (x - p)^i``.  Coefficients are
either :class:`fractions.Fraction` (exact mode) or :class:`mpmath.mpf`
(float mode with a configurable mantissa).  Polynomials are tuples of
coefficients, lowest degree first.
"""

from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .errors import (BasePointMismatch, ChainMismatch, DegreeTooHigh, EvenLeadingOrder, HypothesisViolated,
                     InsufficientOrder, NotInvertible, NotParabolic, PrecisionLoss)
from .maps import average_normaliser
from .series import Series

DEFAULT_ORDER = 8
DEFAULT_PRECISION = 96
FLOAT_ZERO_TOL = 1e-20


# -- polynomials ----------------------------------------------------------------


def p_trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return tuple(p)


def p_degree(p):
    return len(p_trim(p)) - 1


def p_add(a, b):
    n = max(len(a), len(b))
    return tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n))


def p_sub(a, b):
    return p_add(a, tuple(-v for v in b))


def p_scale(a, c):
    return tuple(v * c for v in a)


def p_deriv(a):
    return tuple(i * a[i] for i in range(1, len(a)))


def p_rescale(a, lam):
    """Coefficients of ``x -> a(lam * x)``."""
    return tuple(v * lam**i for i, v in enumerate(a))


def p_shift(a, k):
    """Coefficients of ``x**k * a(x)``."""
    return (0,) * k + tuple(a)


def p_eval(a, x):
    acc = 0
    for v in reversed(a):
        acc = acc * x + v
    return acc


def p_is_zero(a, tol=0):
    return all(abs(v) <= tol for v in a)


def q_from_p(P, n):
    """``Q = (2n+1) P + x P'``, the polynomial with ``x^{2n} Q = d/dx (x^{2n+1} P)``."""
    if p_degree(P) > 2 * n - 1:
        raise DegreeTooHigh(f"deg P = {p_degree(P)} exceeds 2n-1 = {2 * n - 1}")
    return tuple((2 * n + 1 + i) * v for i, v in enumerate(P))


def s_from_r(R, n):
    """``S = (4n+1) R + x R'``."""
    if p_degree(R) > 2 * n - 1:
        raise DegreeTooHigh(f"deg R = {p_degree(R)} exceeds 2n-1 = {2 * n - 1}")
    return tuple((4 * n + 1 + i) * v for i, v in enumerate(R))


# -- jets -------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet:
    base: object
    image: object
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise ValueError("a jet needs at least the linear coefficient")

    @property
    def order(self):
        return len(self.coeffs)

    @property
    def exact(self):
        return all(isinstance(c, (Fraction, int)) for c in (self.base, self.image, *self.coeffs))

    @property
    def mode(self):
        return "exact-rational" if self.exact else "float"

    def germ(self):
        """Series of ``x -> H(p + x) - q``."""
        return Series([0 * self.coeffs[0]] + list(self.coeffs))

    @classmethod
    def from_germ(cls, base, image, germ):
        return cls(base, image, tuple(germ.c[1:]))

    def __call__(self, x):
        u = x - self.base
        return self.image + p_eval((0,) + self.coeffs, u)


def identity_jet(p, order):
    one = Fraction(1) if isinstance(p, (Fraction, int)) else mpmath.mpf(1)
    return Jet(p, p, (one,) + (0 * one,) * (order - 1))


def _mismatch(a, b, modulo):
    diff = a - b
    if modulo:
        shift = round(diff)
        return diff - shift, shift
    return diff, 0


def _check_chain(image, base, tol, modulo, err=BasePointMismatch):
    resid, shift = _mismatch(image, base, modulo)
    if isinstance(resid, Fraction) or isinstance(resid, int):
        ok = resid == 0
    else:
        ok = abs(resid) <= tol
    if not ok:
        raise err(f"image {image} does not match base point {base}")
    return shift


def jet_compose(f, g, tol=1e-12, modulo=True):
    """Jet of ``f o g``; ``g.image`` must match ``f.base`` (mod 1 if ``modulo``)."""
    shift = _check_chain(g.image, f.base, tol, modulo)
    m = min(f.order, g.order)
    h = f.germ().truncate(m).compose(g.germ().truncate(m))
    return Jet.from_germ(g.base, f.image + shift, h)


def jet_invert(f):
    if f.coeffs[0] == 0:
        raise NotInvertible("linear coefficient vanishes")
    return Jet.from_germ(f.image, f.base, f.germ().revert())


def jet_cycle_iterate(jets, j, start=0, tol=1e-12):
    """Jet of the ``j``-fold composition along a cycle, starting at ``jets[start]``."""
    s = len(jets)
    for i in range(s):
        _check_chain(jets[i].image, jets[(i + 1) % s].base, tol, True, ChainMismatch)
    out = identity_jet(jets[start].base, jets[start].order)
    for i in range(j):
        out = jet_compose(jets[(start + i) % s], out, tol=tol)
    return out


def jet_at(H, p, order=DEFAULT_ORDER, precision_bits=DEFAULT_PRECISION, check=True):
    """Taylor jet of the lift ``H`` at ``p``, computed in ``precision_bits`` of mantissa."""
    if order < 1:
        raise ValueError("order must be >= 1")

    def compute(bits):
        with mpmath.workprec(bits):
            x0 = mpmath.mpf(p) if not isinstance(p, Fraction) else mpmath.mpf(p.numerator) / p.denominator
            s = H.apply(Series.variable(x0, order))
            return [+v for v in s.c]

    c = compute(precision_bits)
    if check:
        c2 = compute(2 * precision_bits)
        scale = max(abs(v) for v in c2[1:])
        floor = scale * mpmath.mpf(2) ** (-precision_bits // 2)
        for k, (a, b) in enumerate(zip(c, c2)):
            if abs(a - b) > 1e-6 * (abs(b) + floor) and k > 0:
                raise PrecisionLoss(f"coefficient {k} unstable at {precision_bits} bits; raise precision")
    return Jet(_base_mp(p, precision_bits), c[0], tuple(c[1:]))


def _base_mp(p, bits):
    with mpmath.workprec(bits):
        if isinstance(p, Fraction):
            return mpmath.mpf(p.numerator) / p.denominator
        return mpmath.mpf(p)


# -- parabolic normal form ------------------------------------------------------------


@dataclass(frozen=True)
class ParabolicForm:
    """``x (1 + x^{2n} P(x) + x^{4n} R(x) + O(x^{6n}))``."""

    n: int
    P: tuple
    R: tuple = None
    truncated: bool = False

    def combined(self):
        """``P + x^{2n} R``, the degree ``<= 4n-1`` polynomial of the uniform form."""
        P = tuple(self.P) + (0,) * (2 * self.n - len(self.P))
        return P + tuple(self.R) if self.R is not None else P

    def to_jet(self, base=Fraction(0), image=Fraction(0), order=None):
        n = self.n
        order = order or (6 * n if self.R is not None else 4 * n)
        one = Fraction(1) if isinstance(base, (Fraction, int)) else mpmath.mpf(1)
        coeffs = [0 * one] * order
        coeffs[0] = one
        for i, v in enumerate(self.P):
            if 2 * n + 1 + i <= order:
                coeffs[2 * n + i] = coeffs[2 * n + i] + v
        for i, v in enumerate(self.R or ()):
            if 4 * n + 1 + i <= order:
                coeffs[4 * n + i] = coeffs[4 * n + i] + v
        return Jet(base, image, tuple(coeffs))


def leading_nonlinear_index(f, zero_tol=None):
    tol = 0 if f.exact else (FLOAT_ZERO_TOL if zero_tol is None else zero_tol)
    for k in range(2, f.order + 1):
        if abs(f.coeffs[k - 1]) > tol:
            return k
    return None


def extract_parabolic_form(f, one_tol=1e-8, zero_tol=None, n=None):
    """Read off ``n``, ``P`` and (if the order allows) ``R`` from a multiplier-1 jet.

    With ``n`` given the blocks are read at that order even if ``P(0) = 0``;
    only the vanishing of the lower coefficients is checked.
    """
    c1 = f.coeffs[0]
    if (f.exact and c1 != 1) or (not f.exact and abs(c1 - 1) > one_tol):
        raise NotParabolic(f"linear coefficient {c1} is not 1")
    k = leading_nonlinear_index(f, zero_tol)
    if n is not None:
        if k is not None and k < 2 * n + 1:
            raise NotParabolic(f"non-linear term of order {k} below 2n+1 = {2 * n + 1}")
    else:
        if k is None:
            raise InsufficientOrder(f"no non-linear term up to order {f.order}")
        if k % 2 == 0:
            raise EvenLeadingOrder(f"leading non-linear term has even order {k}")
        n = (k - 1) // 2
    top = min(f.order, 4 * n)
    P = tuple(f.coeffs[2 * n : top])
    R = tuple(f.coeffs[4 * n : 6 * n]) if f.order >= 6 * n else None
    return ParabolicForm(n, P, R, truncated=f.order < 4 * n)


def pofh_residual(P, n, order=None):
    """Coefficients of ``P(x(1+x^{2n}P)) - P - x^{2n+1} P' P`` through ``order`` (default ``4n-1``)."""
    order = 4 * n - 1 if order is None else order
    one = Fraction(1)
    pad = lambda a: Series([one * v for v in a][: order + 1] + [0 * one] * max(0, order + 1 - len(a)))
    Ps = pad(P)
    inner = Series([0 * one, one] + [0 * one] * (order - 1)) + Series(
        [0 * one] * (2 * n + 1) + [one * v for v in P] + [0 * one] * order).truncate(order)
    lhs = Ps.compose(inner)
    rhs = Ps + pad(p_shift(_p_mul(p_deriv(P), P), 2 * n + 1))
    return tuple((lhs - rhs).c)


def _p_mul(a, b):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return tuple(out)


# -- the averaging construction at jet level --------------------------------------------


def synthetic_cycle(germ_coeffs, base_points=None):
    """Exact cycle jets from per-point coefficient lists; points default to ``k/s``."""
    s = len(germ_coeffs)
    pts = base_points or [Fraction(k, s) for k in range(s)]
    jets = []
    for k, c in enumerate(germ_coeffs):
        image = pts[k + 1] if k + 1 < s else pts[0] + 1
        jets.append(Jet(pts[k], image, tuple(c)))
    return jets


def germ_from_blocks(n, blocks, order):
    """Coefficients of ``x (1 + sum_b x^{2n b} B_b(x))`` up to ``order``."""
    coeffs = [Fraction(0)] * order
    coeffs[0] = Fraction(1)
    for b, poly in enumerate(blocks, start=1):
        for i, v in enumerate(poly):
            idx = 2 * n * b + i
            if idx < order:
                coeffs[idx] += Fraction(v)
    return coeffs


def average_cycle_jets(jets, N, L):
    """Jets of ``phi = (1/L) sum_{j<N} H^j`` at each cycle point and of ``phi o H o phi^{-1}``.

    Returns ``(phi_jets, hat_jets)``; ``hat_jets[k]`` is based at ``phi(p_k)``.
    """
    s = len(jets)
    if N % s:
        raise ValueError(f"N={N} must be a multiple of the period {s}")
    phis = []
    for k in range(s):
        germ = None
        img = 0
        for j in range(N):
            it = jet_cycle_iterate(jets, j, start=k)
            germ = it.germ() if germ is None else germ + it.germ()
            img = img + it.image
        phis.append(Jet.from_germ(jets[k].base, img / L, germ / L))
    hats = []
    for k in range(s):
        nxt = phis[(k + 1) % s]
        step = jet_compose(jets[k], jet_invert(phis[k]))
        hats.append(jet_compose(nxt, step))
    return phis, hats


@dataclass
class Claim1Result:
    P_hat: tuple
    residual: tuple
    extracted: list
    cross_index: list
    formula_scale: object
    effective_scale: object
    residual_at_effective_scale: tuple
    L: object
    N: int
    s: int
    m: int

    @property
    def exact_zero(self):
        return p_is_zero(self.residual) and all(p_is_zero(c) for c in self.cross_index)


def sumpoly(P_list, lam, m):
    """``(lam^{2m}/s) sum_k P_k(lam x)``."""
    s = len(P_list)
    total = ()
    for P in P_list:
        total = p_add(total, p_rescale(P, lam))
    return p_trim(p_scale(total, Fraction(lam) ** (2 * m) / s))


def _claim_defaults(s, L, N, d):
    N = s if N is None else N
    L = Fraction(average_normaliser(d, N)) if L is None else Fraction(L)
    return L, N


def verify_claim1(P_list, m, L=None, N=None, d=2):
    """Run one averaging step on exact synthetic jets and compare with the sum formula.

    ``residual`` is the difference between the ``P`` block extracted from the
    averaged map and ``(L^{2m}/s) sum P_k(L x)``.  The construction's actual
    slope at the cycle is ``N/L``, so ``residual_at_effective_scale`` compares
    against the same formula with ``L`` replaced by ``L/N``.
    """
    s = len(P_list)
    for P in P_list:
        if p_degree(P) > 2 * m - 1:
            raise DegreeTooHigh(f"deg P_k must be <= {2 * m - 1}")
    if all(p_eval(P, 0) <= 0 for P in P_list):
        raise HypothesisViolated("at least one P_k(0) must be positive")
    L, N = _claim_defaults(s, L, N, d)
    order = 4 * m
    jets = synthetic_cycle([germ_from_blocks(m, [P], order) for P in P_list])
    _, hats = average_cycle_jets(jets, N, L)
    forms = [extract_parabolic_form(h, n=m) for h in hats]
    if any(f.n != m for f in forms):
        raise HypothesisViolated("leading order changed under averaging")
    extracted = [p_trim(f.P) for f in forms]
    formula = sumpoly(P_list, L, m)
    eff = L / N
    return Claim1Result(
        P_hat=formula,
        residual=p_trim(p_sub(extracted[0], formula)),
        extracted=extracted,
        cross_index=[p_trim(p_sub(e, extracted[0])) for e in extracted],
        formula_scale=L,
        effective_scale=eff,
        residual_at_effective_scale=p_trim(p_sub(extracted[0], sumpoly(P_list, eff, m))),
        L=L, N=N, s=s, m=m,
    )


@dataclass
class Claim2Result:
    P_hat: tuple
    R_hat: tuple
    P_residual: tuple
    P_residual_at_effective_scale: tuple
    P_cross_index: list
    R_cross_index: list
    L: object
    N: int
    s: int
    n: int

    @property
    def k_independent(self):
        return all(p_is_zero(c) for c in self.P_cross_index + self.R_cross_index)

    @property
    def exact_zero(self):
        return self.k_independent and p_is_zero(self.P_residual)


def verify_claim2(P, R_list, n, L=None, N=None, d=2):
    """One averaging step on jets sharing ``P`` with per-point ``R_k``, to order ``6n``."""
    s = len(R_list)
    if p_eval(P, 0) <= 0:
        raise HypothesisViolated("P(0) must be positive")
    for poly in (P, *R_list):
        if p_degree(poly) > 2 * n - 1:
            raise DegreeTooHigh(f"degrees must be <= {2 * n - 1}")
    L, N = _claim_defaults(s, L, N, d)
    order = 6 * n
    jets = synthetic_cycle([germ_from_blocks(n, [P, R], order) for R in R_list])
    _, hats = average_cycle_jets(jets, N, L)
    forms = [extract_parabolic_form(h, n=n) for h in hats]
    Ps = [p_trim(f.P) for f in forms]
    Rs = [p_trim(f.R) for f in forms]
    formula = p_trim(p_scale(p_rescale(P, L), L ** (2 * n)))
    eff = L / N
    formula_eff = p_trim(p_scale(p_rescale(P, eff), eff ** (2 * n)))
    return Claim2Result(
        P_hat=Ps[0], R_hat=Rs[0],
        P_residual=p_trim(p_sub(Ps[0], formula)),
        P_residual_at_effective_scale=p_trim(p_sub(Ps[0], formula_eff)),
        P_cross_index=[p_trim(p_sub(p, Ps[0])) for p in Ps],
        R_cross_index=[p_trim(p_sub(r, Rs[0])) for r in Rs],
        L=L, N=N, s=s, n=n,
    )


# -- serialisation --------------------------------------------------------------------


def scalar_to_json(v):
    if isinstance(v, (Fraction, int)):
        v = Fraction(v)
        return [str(v.numerator), str(v.denominator)]
    return mpmath.nstr(v, 30) if isinstance(v, mpmath.mpf) else repr(float(v))


def scalar_from_json(v):
    if isinstance(v, list):
        return Fraction(int(v[0]), int(v[1]))
    return mpmath.mpf(v)


def poly_to_json(p):
    return [scalar_to_json(v) for v in p]


def poly_from_json(data):
    return tuple(scalar_from_json(v) for v in data)


def jet_to_json(j):
    return {"base": scalar_to_json(j.base), "image": scalar_to_json(j.image),
            "coeffs": poly_to_json(j.coeffs), "mode": j.mode}


def jet_from_json(data):
    return Jet(scalar_from_json(data["base"]), scalar_from_json(data["image"]), poly_from_json(data["coeffs"]))


def form_to_json(f):
    return {"n": f.n, "P": poly_to_json(f.P), "R": None if f.R is None else poly_to_json(f.R),
            "truncated": f.truncated}
