"""
Conjugating a weakly expanding covering to a metrically expanding one.

Pipeline: parabolic orbits -> admissible density ``rho`` -> horizon ``N``
with ``|DH^N|_rho > 1`` -> aggregated density ``rho*`` -> integral
conjugator ``phi`` -> ``g = phi o H o phi^{-1}`` with ``Dg > 1`` away from
the parabolic points.
"""

from dataclasses import asdict, dataclass, field
import csv
import math
import time

import numpy as np

from .density import AdmissibleDensity, ConstantDensity, PushforwardDensity
from .errors import CircleMapError, ConstructionFailed, HorizonNotFound, StageError, TargetsTooFar
from .maps import AdjustmentDiffeo, QuadratureDiffeo, conjugate, iterate_with_deriv
from .orbits import circle_dist, par_set, preimage_strata


@dataclass
class MetrizeConfig:
    grid: int = 2**14
    check_points: int = 10**4
    eps_par: float = 1e-3
    max_period: int = 6
    n0: int = 8
    k_strata: int = 8
    n_max: int = 64
    quad_tol: float = 1e-11
    alpha: float = 0.5
    retries: int = 4
    tol: float = 1e-9


def weighted_deriv(H, rho, x, k):
    """``rho(H^k x) / rho(x) * DH^k(x)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    y, d = iterate_with_deriv(H, x, k)
    return np.asarray(rho(y)) / np.asarray(rho(x)) * d if isinstance(x, np.ndarray) else rho(y) / rho(x) * d


# -- admissible density --------------------------------------------------------------


def _lcm_periods(par):
    out = 1
    for o in par:
        out = out * o.period // math.gcd(out, o.period)
    return out


def _strata_derivs(H, strata):
    """``DH^k(x)`` for every point of ``X_k``, ``k >= 1``."""
    out = []
    for st in strata[1:]:
        if st.points:
            out.append(iterate_with_deriv(H, np.array(st.points), st.level)[1])
    return np.concatenate(out) if out else np.array([])


def _check_A1(H, rho, par, delta0, samples=48):
    """``rho(G x) > rho(x)`` on punctured ``delta0``-neighbourhoods, ``G`` the cycle return map."""
    worst = np.inf
    for o in par:
        c = abs(o.leading_coefficient or 1.0)
        n2 = o.multiplicity or 2
        h_min = min(delta0 / 10, (1e-12 / c) ** (1.0 / n2))
        h = np.geomspace(h_min, delta0, samples)
        for p in o.points:
            xs = np.concatenate([p - h, p + h])
            gx = iterate_with_deriv(H, xs, o.period)[0]
            diff = rho.log_density(gx) - rho.log_density(xs)
            worst = min(worst, float(diff.min()))
    return worst


def _check_A2(H, rho, strata):
    worst = np.inf
    for st in strata[1:]:
        if not st.points:
            continue
        x = np.array(st.points)
        worst = min(worst, float(np.min(weighted_deriv(H, rho, x, st.level))))
    return worst


def _baseline_A2(H, strata, pp, alpha):
    """Per level, ``min DH^k(x) / exp(alpha Z(x))`` over ``X_k``: (A2) margin without any well."""
    out = {}
    for st in strata[1:]:
        if st.points:
            x = np.array(st.points)
            z = np.prod([np.sin(np.pi * (x - p)) ** 2 for p in pp], axis=0)
            out[st.level] = float(np.min(iterate_with_deriv(H, x, st.level)[1] * np.exp(-alpha * z)))
    return out


def _min_spacing(points):
    if len(points) < 2:
        return 0.5
    x = np.sort(np.mod(points, 1.0))
    return float(np.diff(np.append(x, x[0] + 1)).min())


def build_admissible_density(H, par, n0=8, k_strata=8, alpha=0.5, retries=4):
    """Density equal to 1 at parabolic points, with wells on the preimage strata ``X_1..X_n``.

    See :class:`~circlemaps.density.AdmissibleDensity` for the formula.  ``n``
    is the smallest level (at most ``n0``) beyond which the expansion along
    the strata already gives (A2) without a well.  Wells are made sharp
    enough not to interact with each other or with the parabolic points; the
    sharpness is doubled on each failed admissibility check.
    """
    if not par:
        return ConstantDensity(1.0)
    pp = sorted({float(p) % 1.0 for o in par for p in o.points})
    k_strata = max(k_strata, n0)
    strata = preimage_strata(H, par, k_strata)
    margins = _baseline_A2(H, strata, pp, alpha)
    n_used = next((n for n in range(0, n0 + 1) if all(v >= 2 for k, v in margins.items() if k > n)), None)
    if n_used is None:
        raise ConstructionFailed(f"expansion along strata {n0 + 1}..{k_strata} is too weak; raise n0")
    last = None
    for attempt in range(retries + 1):
        wells = [x for st in strata[1 : n_used + 1] for x in st.points]
        derivs = _strata_derivs(H, strata[: n_used + 1])
        rho0 = float(derivs.min()) if derivs.size else 1.0
        target = min(0.45 * rho0, 0.5)
        z = [math.prod(math.sin(math.pi * (q - p)) ** 2 for p in pp) for q in wells]
        depths = [alpha + (-math.log(target)) / zq for zq in z]
        gap = min(float(circle_dist(np.array(pp), q).min()) for q in wells) if wells else 0.5
        spacing = _min_spacing(wells)
        k_gap = 60.0 / (math.pi**2 * gap**2)
        k_sep = math.log(20 * max(depths, default=1.0)) / (math.pi**2 * spacing**2)
        K = int(math.ceil(max(k_gap, k_sep, 1.0))) * 2**attempt
        info = {"n0": n_used, "k_strata": k_strata, "rho0": rho0, "target": target, "gap": gap,
                "spacing": spacing, "attempt": attempt}
        rho = AdmissibleDensity(tuple(pp), alpha, tuple(wells), tuple(depths), K, info)
        # (A1) only asks for some neighbourhood: shrink it until the check holds
        delta0 = gap / 2
        a1 = _check_A1(H, rho, par, delta0)
        while a1 <= 0 and delta0 > 1e-4:
            delta0 /= 2
            a1 = _check_A1(H, rho, par, delta0)
        info["delta0"] = delta0
        a2 = _check_A2(H, rho, strata)
        info.update({"A1_min_log_increase": a1, "A2_min": a2})
        if a1 > 0 and a2 >= 2:
            return rho
        last = info
    raise ConstructionFailed(f"admissible density not found after {retries + 1} attempts: {last}")


# -- adjustment diffeomorphisms ------------------------------------------------------


def adjustment_delta(xs, eps, rule="standard"):
    """Admissible target distance for :func:`adjustment_diffeo`.

    ``rule="standard"`` gives ``m * eps / n^2`` with ``m`` the smallest circular
    gap.  It does not account for ``1 / G_j(x_j)``, which can be as large as
    ``sin(pi m)^{-2(n-1)}``.  ``rule="safe"`` uses ``K eps / (n max(1, pi (n-1)))``
    with ``K = min_j G_j(x_j)``, which bounds both ``|phi - id|`` and ``|phi' - 1|``
    by ``eps``.  Both give ``eps`` when ``n = 1``.
    """
    n = len(xs)
    if n == 1:
        return eps
    if rule == "standard":
        gaps = np.diff(np.append(xs, xs[0] + 1))
        return float(gaps.min()) * eps / n**2
    if rule == "safe":
        xs = np.asarray(xs, dtype=float)
        g = np.sin(np.pi * (xs[:, None] - xs[None, :])) ** 2
        np.fill_diagonal(g, 1.0)
        K = float(np.prod(g, axis=1).min())
        return K * eps / (n * max(1.0, np.pi * (n - 1)))
    raise ValueError(f"unknown rule {rule!r}")


def adjustment_diffeo(xs, ys, eps, rule="standard"):
    """Circle diffeomorphism with ``phi(x_j) = y_j``, meant to be ``eps``-close to the identity in C^1."""
    xs = tuple(float(v) for v in xs)
    delta = adjustment_delta(xs, eps, rule)
    far = [abs(y - x) for x, y in zip(xs, ys)]
    if max(far) >= delta:
        raise TargetsTooFar(f"max |y_j - x_j| = {max(far):.3g} is not below delta = {delta:.3g}")
    return AdjustmentDiffeo(xs, tuple(float(v) for v in ys))


# -- horizon, rho*, conjugator -------------------------------------------------------


def _par_mask(x, par_pts, eps):
    mask = np.zeros(x.shape, dtype=bool)
    for p in par_pts:
        mask |= circle_dist(x, p) <= eps
    return mask


def find_horizon(H, rho, grid=2**14, eps_par=1e-3, par_pts=(), n_max=64, step=1, tol=1e-9):
    """Smallest ``N`` (a multiple of ``step``) with ``|DH^N|_rho > 1`` off the parabolic neighbourhoods."""
    x = np.arange(grid) / grid
    near = _par_mask(x, par_pts, eps_par)
    r0 = np.asarray(rho(x), dtype=float)
    y, d = x.copy(), np.ones_like(x)
    for n in range(1, n_max + 1):
        y, dy = H.value_and_deriv(y)
        d = d * dy
        if n % step:
            continue
        w = np.asarray(rho(y), dtype=float) / r0 * d
        if np.all(w[~near] > 1) and np.all(w[near] >= 1 - tol):
            return n
    raise HorizonNotFound(f"no horizon N <= {n_max} found")


def rho_star(H, rho, N):
    if N < 1:
        raise ValueError("N must be >= 1")
    return rho if N == 1 else PushforwardDensity(H, rho, N)


def metrizing_conjugacy(rho_star_fn, quad_tol=1e-11):
    phi = QuadratureDiffeo(rho_star_fn, quad_tol)
    phi.table  # noqa: B018  (build now so quadrature errors surface here)
    return phi


# -- pipeline ------------------------------------------------------------------------


@dataclass
class MetrizationReport:
    N: int
    eta: float
    min_dg: float
    max_dg: float
    min_dg_off_par: float
    local_minima: list
    residual: float
    grid: int
    check_points: int
    eps_par: float
    tolerances: dict
    density: dict
    quadrature: dict
    parabolic: list
    timings: dict = field(default_factory=dict)
    caveat: str = ""

    @property
    def certified(self):
        return self.min_dg_off_par > 1 and self.min_dg >= 1 - 1e-6 and self.residual <= self.tolerances["residual"]

    def to_json(self):
        out = asdict(self)
        out["certified"] = self.certified
        return out


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except CircleMapError as exc:
        raise StageError(name, exc) from exc


def metrize(H, config=None, par=None, csv_path=None):
    """Run the full pipeline; returns ``(g, phi, report)``."""
    cfg = config or MetrizeConfig()
    t0 = time.perf_counter()
    timings = {}
    if par is None:
        par = _stage("par_set", par_set, H, cfg.max_period)
    timings["par_set"] = time.perf_counter() - t0
    pp = sorted({float(p) % 1.0 for o in par for p in o.points})
    rho = _stage("density", build_admissible_density, H, par, cfg.n0, cfg.k_strata, cfg.alpha, cfg.retries)
    timings["density"] = time.perf_counter() - t0
    N = _stage("horizon", find_horizon, H, rho, cfg.grid, cfg.eps_par, pp, cfg.n_max, _lcm_periods(par), cfg.tol)
    timings["horizon"] = time.perf_counter() - t0
    rs = rho_star(H, rho, N)
    phi = _stage("conjugator", metrizing_conjugacy, rs, cfg.quad_tol)
    timings["conjugator"] = time.perf_counter() - t0
    g = _stage("conjugate", conjugate, phi, H)

    # certificate on a uniform grid in the target coordinate
    y = np.arange(cfg.grid) / cfg.grid
    dg = np.asarray(_stage("certificate", g.deriv, y), dtype=float)
    par_img = [float(phi(p)) % 1.0 for p in pp]
    near = _par_mask(y, par_img, cfg.eps_par)
    min_off = float(dg[~near].min()) if (~near).any() else math.inf
    local = []
    for p, q in zip(pp, par_img):
        m = circle_dist(y, q) <= cfg.eps_par
        local.append({"p": p, "phi_p": q, "min_dg": float(dg[m].min()) if m.any() else None})

    # conjugator identity on check points
    x = (np.arange(cfg.check_points) + 0.5) / cfg.check_points
    hx, dh = H.value_and_deriv(x)
    expected = np.asarray(rs(hx), dtype=float) / np.asarray(rs(x), dtype=float) * dh
    dgx = np.asarray(g.deriv(np.asarray(phi(x), dtype=float)), dtype=float)
    resid = float(np.max(np.abs(dgx - expected)))
    timings["certificate"] = time.perf_counter() - t0

    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "Dh", "Dg_phi_x"])
            w.writerows(zip(x.tolist(), np.asarray(dh).tolist(), dgx.tolist()))

    dens_info = {"kind": type(rho).__name__, **getattr(rho, "info", {})}
    if isinstance(rho, AdmissibleDensity):
        dens_info.update({"K": rho.K, "alpha": rho.alpha, "wells": len(rho.centers)})
    report = MetrizationReport(
        N=N, eta=float(rho.eta), min_dg=float(dg.min()), max_dg=float(dg.max()), min_dg_off_par=min_off,
        local_minima=local, residual=resid, grid=cfg.grid, check_points=cfg.check_points, eps_par=cfg.eps_par,
        tolerances={"residual": 1e-7, "near_par": 1e-6, "quad_tol": cfg.quad_tol},
        density=dens_info, quadrature={"panels": phi.table["panels"], "error": float(phi.table["error"])},
        parabolic=[o.to_json() for o in par], timings=timings,
        caveat=f"periodic orbits of period > {cfg.max_period} were not examined",
    )
    return g, phi, report
