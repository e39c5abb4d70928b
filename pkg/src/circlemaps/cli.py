"""
Command-line front end.

    circlemaps analyze   SPEC   periodic orbits and weak-expansion certificate
    circlemaps metrize   SPEC   metrizing conjugacy and its certificate
    circlemaps normalize SPEC   averaging conjugacies and uniform parabolic jets
    circlemaps geometry  SPEC   nice interval and first-return branches
    circlemaps verify    SUITE  invariant suites: claims, core, geometry

``SPEC`` is a path to a map-spec JSON file, ``-`` for stdin, or the JSON
text itself.  Settings are taken from flags, then ``CIRCLEMAPS_*``
environment variables, then defaults.  Exit status: 0 success, 1 error,
2 certificate or verification failure.
"""

import argparse
from dataclasses import asdict, dataclass, fields
import csv
import hashlib
import json
import os
import sys

import numpy as np

from .errors import CircleMapError, SpecError

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
ENV_PREFIX = "CIRCLEMAPS_"


@dataclass
class RunConfig:
    grid: int = 2**14
    check_points: int = 10**4
    class_tol: float = 1e-8
    eps_par: float = 1e-3
    quad_tol: float = 1e-11
    max_period: int = 6
    order: int = 8
    precision_bits: int = 96
    seed: int = 0
    threads: int = 1
    out: str = None
    csv: str = None

    def validate(self):
        for name in ("class_tol", "eps_par", "quad_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid < 2 or self.grid & (self.grid - 1):
            raise ValueError(f"grid must be a power of two, got {self.grid}")
        for name in ("check_points", "max_period", "order", "precision_bits", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        return self

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known}).validate()


# flag name -> config field
_FLAGS = {"grid": "grid", "tol": "class_tol", "max_period": "max_period", "order": "order",
          "precision_bits": "precision_bits", "eps_par": "eps_par", "quad_tol": "quad_tol",
          "check_points": "check_points", "seed": "seed", "threads": "threads", "out": "out", "csv": "csv"}


def resolve_config(args, env=None):
    """Flags override ``CIRCLEMAPS_<FIELD>`` environment variables, which override defaults."""
    env = os.environ if env is None else env
    cfg = RunConfig()
    for f in fields(RunConfig):
        raw = env.get(ENV_PREFIX + f.name.upper())
        if raw is not None:
            setattr(cfg, f.name, f.type(raw) if f.type in (int, float) else raw)
    for flag, name in _FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, name, val)
    return cfg.validate()


def load_spec(text_or_path):
    """Read a map spec; JSON errors are reported with line and column."""
    if text_or_path == "-":
        text, origin = sys.stdin.read(), "<stdin>"
    elif text_or_path.lstrip().startswith("{"):
        text, origin = text_or_path, "<argument>"
    else:
        with open(text_or_path) as fh:
            text, origin = fh.read(), text_or_path
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{origin}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def spec_hash(spec):
    canon = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    return obj if isinstance(obj, (str, int, float, bool, type(None))) else str(obj)


def make_report(command, cfg, spec, result, status):
    return _jsonable({"command": command, "status": status, "config": cfg.to_json(),
                      "map": spec, "map_sha256": spec_hash(spec) if spec is not None else None,
                      "result": result})


def _emit(report, cfg, summary):
    print(summary)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")


# -- subcommands ------------------------------------------------------------------------------


def cmd_analyze(spec, cfg):
    from .maps import from_spec
    from .orbits import certify_Tdstar

    H = from_spec(spec)
    rep = certify_Tdstar(H, cfg.max_period, class_tol=cfg.class_tol)
    status = "certified" if rep.certified else "failed"
    report = make_report("analyze", cfg, spec, rep.to_json(), status)
    summary = (f"analyze: {status}; {len(rep.orbits)} orbits up to period {cfg.max_period}, "
               f"{len(rep.parabolic)} parabolic" + (f"; {rep.reason}" if rep.reason else ""))
    return report, summary, EXIT_OK if rep.certified else EXIT_FAIL


def cmd_metrize(spec, cfg):
    from .maps import from_spec
    from .metrization import MetrizeConfig, metrize

    H = from_spec(spec)
    mcfg = MetrizeConfig(grid=cfg.grid, check_points=cfg.check_points, eps_par=cfg.eps_par,
                         max_period=cfg.max_period, quad_tol=cfg.quad_tol)
    _, _, rep = metrize(H, mcfg, csv_path=cfg.csv)
    status = "certified" if rep.certified else "failed"
    report = make_report("metrize", cfg, spec, rep.to_json(), status)
    summary = (f"metrize: {status}; N={rep.N}, min Dg={rep.min_dg:.12g}, "
               f"min Dg off parabolic={rep.min_dg_off_par:.12g}, residual={rep.residual:.3g}")
    return report, summary, EXIT_OK if rep.certified else EXIT_FAIL


def cmd_normalize(spec, cfg, N=None):
    from .maps import from_spec
    from .normalization import normalize

    H = from_spec(spec)
    res = normalize(H, N=N, max_period=cfg.max_period, precision_bits=cfg.precision_bits,
                    grid=cfg.check_points, eps_par=cfg.eps_par)
    ok = res.ok and all(r["ge_one"] and r["locus_near_par"] for r in res.residuals)
    status = "verified" if ok else "failed"
    report = make_report("normalize", cfg, spec, res.to_json(), status)
    summary = (f"normalize: {status}; N={res.N}, L={res.L}, {len(res.cycles)} parabolic cycles, "
               f"max derivative-identity residual {max(r['max_residual'] for r in res.residuals):.3g}")
    return report, summary, EXIT_OK if ok else EXIT_FAIL


def cmd_geometry(spec, cfg, z0=None, depth=None, time_cap=20):
    from .geometry import search_return_expansion
    from .maps import from_spec, iterate_with_deriv
    from .orbits import all_periodic_orbits

    H = from_spec(spec)
    orbits = all_periodic_orbits(H, min(cfg.max_period, 3), class_tol=cfg.class_tol)
    repelling = [o for o in orbits if o.classification == "Repelling"]
    centre = None
    if z0 is None:
        if not repelling:
            raise CircleMapError("no repelling periodic orbit found to centre the nice interval on")
        centre = repelling[0]
        z0 = float(centre.points[0])
    generators = [o for o in repelling
                  if o is not centre and (centre is None or o.period != centre.period)
                  and all(abs(p - z0) > 1e-9 for p in o.points)]
    if not generators:
        raise CircleMapError("no generating periodic orbit available")
    depths = [depth] if depth else range(2, 8)
    res = search_return_expansion(H, z0, generators[0], depths, time_cap)
    table = res.table
    if cfg.csv:
        t = np.array([0.25, 0.5, 0.75])
        idx = np.nonzero(table.inside)[0]
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "DR_A", "time"])
            for k in np.unique(table.time[idx]):
                sel = idx[table.time[idx] == k]
                x = (table.start[sel, None] + table.length[sel, None] * t[None, :]).ravel()
                dr = iterate_with_deriv(H, x, int(k))[1]
                w.writerows(zip(np.mod(x, 1.0).tolist(), dr.tolist(), [int(k)] * x.size))
    result = res.to_json()
    result["z0"] = z0
    result["generating_orbit"] = generators[0].to_json()
    report = make_report("geometry", cfg, spec, result, "verified" if res.ok else "failed")
    summary = (f"geometry: A=({res.A.start:.9g}, {res.A.end:.9g}) at depth {res.A.depth}, {len(table)} entry branches, "
               f"{result['return_branches']} return branches, inf DR_A={res.inf_all:.6g}, "
               f"off-centre inf DR_A={res.inf_others:.6g}")
    return report, summary, EXIT_OK if res.ok else EXIT_FAIL


def cmd_verify(suite, cfg):
    from . import suites

    checks = suites.run(suite, seed=cfg.seed)
    ok = all(c["passed"] for c in checks)
    report = make_report("verify", cfg, None, {"suite": suite, "checks": checks}, "passed" if ok else "failed")
    lines = [f"verify {suite}: {'passed' if ok else 'FAILED'}"]
    lines += [f"  [{'ok' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}" for c in checks]
    return report, "\n".join(lines), EXIT_OK if ok else EXIT_FAIL


# -- argument parsing ----------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, help="grid size (power of two)")
    common.add_argument("--tol", type=float, help="multiplier band for calling an orbit parabolic")
    common.add_argument("--max-period", dest="max_period", type=int, help="largest period examined")
    common.add_argument("--order", type=int, help="jet order")
    common.add_argument("--precision-bits", dest="precision_bits", type=int, help="mantissa bits for jets")
    common.add_argument("--eps-par", dest="eps_par", type=float, help="radius of parabolic neighbourhoods")
    common.add_argument("--quad-tol", dest="quad_tol", type=float, help="quadrature tolerance")
    common.add_argument("--check-points", dest="check_points", type=int, help="points for identity checks")
    common.add_argument("--out", help="write the JSON report here")
    common.add_argument("--csv", help="write sample data as CSV here")
    common.add_argument("--seed", type=int, help="seed for randomised sweeps")
    common.add_argument("--threads", type=int, help="worker count (recorded; grid work is vectorised)")

    parser = argparse.ArgumentParser(prog="circlemaps", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("analyze", "periodic orbits and weak-expansion certificate"),
                           ("metrize", "metrizing conjugacy"),
                           ("normalize", "averaging conjugacies and parabolic normal forms"),
                           ("geometry", "nice interval and return branches")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("spec", help="map-spec JSON: file path, '-' for stdin, or inline JSON")
        if name == "normalize":
            p.add_argument("--N", dest="N", type=int, help="override the averaging length")
        if name == "geometry":
            p.add_argument("--z0", type=float, help="point the nice interval must contain")
            p.add_argument("--depth", type=int, help="preimage depth of the generating orbit (searched if omitted)")
            p.add_argument("--time-cap", dest="time_cap", type=int, default=20, help="largest entry time")
    p = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    p.add_argument("suite", choices=["claims", "core", "geometry"])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.command == "verify":
            report, summary, code = cmd_verify(args.suite, cfg)
        else:
            spec = load_spec(args.spec)
            if args.command == "analyze":
                report, summary, code = cmd_analyze(spec, cfg)
            elif args.command == "metrize":
                report, summary, code = cmd_metrize(spec, cfg)
            elif args.command == "normalize":
                report, summary, code = cmd_normalize(spec, cfg, args.N)
            else:
                report, summary, code = cmd_geometry(spec, cfg, args.z0, args.depth, args.time_cap)
    except (CircleMapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(report, cfg, summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
