"""Command-line front end.

Every subcommand writes one JSON report (and CSV tables where listed in
``csv_schema.json``) into the output directory and exits 0 only if all of
its in-run checks pass.  Reports embed the resolved configuration and its
hash and contain no timestamps, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .asymmetry import default_t_grid, is_asymmetric
from .config import SCHEMA_VERSION, ConfigError, RunConfig, load_config
from .exterior import selftest
from .forms import (
    ExpFourierProfile,
    FormField,
    alpha_field,
    atom_field,
    evaluate,
    gluing_check,
    ixomega_field,
    parse_atom,
    random_field,
    volume_field,
)
from .l2 import (
    adjoint_residual,
    decomposition_consistency,
    l2_inner,
    orbit_obstruction,
    orthogonality_check,
    star_alpha_identity,
    weak_closedness,
)
from .livsic import REFUSAL, convergence_profile, solve
from .model import (
    HyperbolicAutomorphism,
    Point,
    SuspensionFlow,
    TangentVector,
    _int_det,
    _int_power,
    flow_checks,
    measure_constants,
    periodic_points,
    splitting,
)
from .quadrature import QuadratureSpec

THREADS_ENV = "ANOSOVFORMS_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Infeasible(Exception):
    """A request the theory does not support (reported, exit code 2)."""


# -- output helpers ----------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def schema() -> dict:
    return json.loads((Path(__file__).with_name("csv_schema.json")).read_text(encoding="utf-8"))


class Run:
    def __init__(self, cfg: RunConfig, out: Path, quiet: bool):
        self.cfg = cfg
        self.out = out
        self.quiet = quiet
        self.model = SuspensionFlow(HyperbolicAutomorphism(np.array(cfg.matrix)), roof=cfg["model"]["roof"])
        self.threads = max(1, int(os.environ.get(THREADS_ENV, "1") or 1))
        self._schema = schema()

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    def quad(self, seed_offset: int = 0) -> QuadratureSpec:
        q = self.cfg["quadrature"]
        return QuadratureSpec(q["rule"], q["n"], self.cfg.seed + seed_offset, q["shifts"])

    def map(self, func, items):
        """Ordered map, threaded when the environment asks for it."""
        items = list(items)
        if self.threads == 1:
            return [func(i) for i in items]
        with ThreadPoolExecutor(self.threads) as pool:
            return list(pool.map(func, items))

    def write_csv(self, name: str, rows):
        header = self._schema[name]["columns"]
        with open(self.out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                if len(row) != len(header):
                    raise AssertionError(f"{name}.csv row has {len(row)} fields, schema has {len(header)}")
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])

    def write_json(self, command: str, results: dict, passed: bool) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "command": command,
            "config": self.cfg.resolved(),
            "config_hash": self.cfg.content_hash,
            "pass": bool(passed),
            "results": results,
        }
        text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"
        (self.out / f"{command}.json").write_text(text, encoding="utf-8")
        self.say(f"{command}: {'PASS' if passed else 'FAIL'}")
        return doc


# -- subcommands -------------------------------------------------------------


def cmd_algebra_selftest(run: Run, args) -> bool:
    rep = selftest(trials=1000, seed=run.cfg.seed, max_n=6)
    run.write_json("algebra-selftest", rep, rep["passed"])
    return rep["passed"]


def cmd_model(run: Run, args) -> bool:
    f = run.model
    aut = f.automorphism
    blocks = [{"kind": b.kind, "modulus": b.modulus, "log_modulus": b.log_modulus, "angle": b.angle,
               "unstable": b.unstable} for b in aut.blocks]
    sp = splitting(f)
    t_grid = np.linspace(1.0, run.cfg["rates"]["t_max"], 40)
    consts = measure_constants(f, t_grid, samples=100, seed=run.cfg.seed)
    lam_pred = float(max(f.log_moduli))
    nu_pred = float(-max(l for l in f.log_moduli[:-1] if l < 0))
    counts = []
    ok = True
    for p in range(1, run.cfg["obstruction"]["max_period"] + 1):
        Ap = _int_power(f.A.tolist(), p)
        expected = abs(_int_det([[Ap[i][j] - (i == j) for j in range(f.m)] for i in range(f.m)]))
        found = len(periodic_points(f, p))
        counts.append({"period": p, "count": found, "abs_det": expected})
        ok &= found == expected
    checks = flow_checks(f, seed=run.cfg.seed)
    checks["tol"] = 1e-10
    ok &= max(checks["group_law"], checks["tangent_chain_rule"], checks["volume_det"]) <= checks["tol"]
    rel = 0.05
    lam_ok = abs(consts.lam - lam_pred) <= rel * lam_pred
    nu_ok = abs(consts.nu - nu_pred) <= rel * nu_pred
    results = {
        "matrix": f.A.tolist(),
        "characteristic_polynomial": aut.characteristic_polynomial(),
        "det": aut.det,
        "m": f.m,
        "n": f.n,
        "rho": f.rho,
        "log_rho": math.log(f.rho),
        "blocks": blocks,
        "splitting_dims": sp.dims,
        "frame": f.frame.tolist(),
        "constants": {"c": consts.c, "nu": consts.nu, "lambda": consts.lam, "fit_residual": consts.max_residual,
                      "nu_eigen": nu_pred, "lambda_eigen": lam_pred, "relative_tolerance": rel,
                      "nu_ok": nu_ok, "lambda_ok": lam_ok},
        "periodic_point_counts": counts,
        "flow_checks": checks,
    }
    passed = bool(ok and lam_ok and nu_ok)
    run.write_json("model", results, passed)
    return passed


def cmd_rates(run: Run, args) -> bool:
    f = run.model
    rc = run.cfg["rates"]
    samples = args.samples if getattr(args, "samples", None) is not None else rc["samples"]
    t_grid = np.linspace(0.0, rc["t_max"], rc["t_points"])
    tol = 1e-3
    verdict = is_asymmetric(f, samples=samples, tol=tol, seed=run.cfg.seed, t_grid=t_grid)
    series_rows, fit_rows = [], []
    for s, fit in zip(verdict.series, verdict.fits):
        point, config = s.label.split(":")
        for t, lv in zip(s.t, s.log_volume):
            series_rows.append([int(point), config, float(t), float(lv)])
        fit_rows.append([int(point), config, fit.C_hat, fit.nu_hat, fit.r2])
    run.write_csv("rates", series_rows)
    run.write_csv("rates_fits", fit_rows)
    results = {
        "asymmetric": verdict.asymmetric,
        "samples": samples,
        "tol": tol,
        "min_nu": verdict.min_nu,
        "worst": {"C_hat": verdict.worst.C_hat, "nu_hat": verdict.worst.nu_hat, "r2": verdict.worst.r2,
                  "t_range": list(verdict.worst.t_range)},
        "bound_violations": verdict.bound_violations,
        "configurations": len(verdict.fits),
    }
    run.write_json("rates", results, verdict.asymmetric)
    return verdict.asymmetric


def _read_form(spec: str, f: SuspensionFlow, degree: int) -> FormField | None:
    """Atoms separated by '|', or '@path' to a file with one atom per line."""
    if not spec:
        return None
    if spec.startswith("@"):
        lines = Path(spec[1:]).read_text(encoding="utf-8").splitlines()
        texts = [ln for ln in (x.split("#", 1)[0].strip() for x in lines) if ln]
    else:
        texts = [t for t in spec.split("|") if t.strip()]
    atoms = [parse_atom(t, f) for t in texts]
    if any(len(a.index) != degree for a in atoms):
        raise ValueError(f"form atoms must have degree {degree}")
    return FormField(f, degree, atoms)


def _read_points(spec: str, f: SuspensionFlow, default: int, rng) -> list[Point]:
    if spec and not spec.isdigit():
        rows = np.loadtxt(spec, delimiter=",", ndmin=2)
        if rows.shape[1] != f.n:
            raise ValueError(f"points file needs {f.n} columns (x_1..x_{f.m}, s)")
        return [Point(tuple(r[:-1]), float(r[-1])) for r in rows]
    count = int(spec) if spec else default
    return [Point(tuple(rng.random(f.m)), float(rng.random())) for _ in range(count)]


def cmd_solve(run: Run, args) -> bool:
    f = run.model
    sc = run.cfg["solve"]
    degree = args.degree if args.degree is not None else sc["degree"]
    if not 2 <= degree <= f.n - 2:
        raise Infeasible(f"solve at degree {degree}: {REFUSAL} (intermediate degrees are 2..{f.n - 2})")
    tol = run.cfg.tol
    cap = args.horizon_cap if args.horizon_cap is not None else (sc["horizon_cap"] or None)
    form = _read_form(args.form if args.form is not None else sc["form"], f, degree)
    rng = np.random.default_rng(run.cfg.seed)
    points = _read_points(args.points or "", f, sc["sites"], rng)
    rates = is_asymmetric(f, samples=run.cfg["rates"]["samples"], seed=run.cfg.seed).worst
    oracle_mode = bool(args.oracle)
    if form is None:
        # oracle: a random mix of smooth and bump atoms; otherwise the unstable-time plane
        form = random_field(f, degree, rng) if oracle_mode else atom_field(f, (1, f.n))
    if oracle_mode:
        eta0 = form
        xi = form.lie_derivative_field()
    else:
        eta0, xi = None, form
    gl = gluing_check(xi)
    sup = xi.sup_norm()
    vecs = [[TangentVector.from_components(p, rng.normal(size=f.n)) for _ in range(degree)] for p in points]

    def one(i):
        p, vs = points[i], vecs[i]
        r = solve(xi, p, vs, tol, rates, horizon_cap=cap, sup_norm=sup)
        site = {"site": i, "x": list(p.x), "s": p.s, **{k: v for k, v in r.to_dict().items() if k != "case_breakdown"},
                "terms": len(r.case_breakdown)}
        if eta0 is not None:
            exact = evaluate(eta0, p, vs)
            site["oracle"] = exact
            site["error"] = abs(r.value - exact)
            site["pass"] = bool(site["error"] <= tol and r.converged)
        else:
            site["pass"] = bool(r.converged)
        return site

    sites = run.map(one, range(len(points)))
    times = [float(t) for t in sc["convergence_times"].split()]
    conv_rows, slopes = [], []
    for i in range(min(3, len(points))):
        cp = convergence_profile(xi, points[i], vecs[i], times, rates)
        slopes.append(cp.slope)
        conv_rows.extend([i, t, v, e] for t, v, e in cp.rows)
    run.write_csv("solve_convergence", conv_rows)
    run.write_csv("solve_sites", [[s["site"], s["value"], s["T"], s["tail_bound"], s["quad_error"],
                                   s.get("error", "")] for s in sites])
    passed = gl.passed and all(s["pass"] for s in sites)
    results = {
        "degree": degree,
        "tol": tol,
        "oracle": oracle_mode,
        "form": xi.to_dict() if not oracle_mode else {"eta0": form.to_dict()},
        "gluing_residual": gl.residual,
        "rates": {"C_hat": rates.C_hat, "nu_hat": rates.nu_hat},
        "convergence_slopes": slopes,
        "max_error": max((s.get("error", 0.0) for s in sites), default=0.0),
        "sites": sites,
    }
    run.write_json("solve", results, passed)
    return passed


def _pair_indices(f: SuspensionFlow, k: int, rng, atoms: int = 3):
    sets = list(itertools.combinations(range(1, f.n + 1), k))
    return [sets[j] for j in rng.integers(len(sets), size=atoms)]


def cmd_adjoint(run: Run, args) -> bool:
    f = run.model
    rng = np.random.default_rng(run.cfg.seed)
    pairs = run.cfg["l2"]["pairs"]
    rows, replica_rows = [], []
    for k in range(1, f.n):
        for i in range(pairs):
            ix = _pair_indices(f, k, rng)
            xi, eta = random_field(f, k, rng, indices=ix), random_field(f, k, rng, indices=ix)
            r = adjoint_residual(xi, eta, run.quad(i))
            rows.append({"degree": k, "pair": i, **r.to_dict()})
            replica_rows.extend([k, i, j, v] for j, v in enumerate(r.replicas))
    alpha = adjoint_residual(alpha_field(f), alpha_field(f), run.quad())
    run.write_csv("adjoint_replicas", replica_rows)
    passed = all(r["pass"] for r in rows) and alpha.passed
    run.write_json("adjoint", {"sigmas": 3, "alpha_alpha": alpha.to_dict(), "pairs": rows}, passed)
    return passed


def cmd_orthogonality(run: Run, args) -> bool:
    f = run.model
    rng = np.random.default_rng(run.cfg.seed)
    rows, replica_rows = [], []
    ix = ixomega_field(f)
    for i in range(run.cfg["l2"]["pairs"]):
        theta = random_field(f, f.n - 1, rng)
        r = orthogonality_check(theta, run.quad(i))
        rows.append({"case": i, **r.to_dict()})
        replica_rows.extend([i, j, v] for j, v in enumerate(r.replicas))
    self_case = orthogonality_check(ix, run.quad())
    norms = {
        "alpha_alpha": l2_inner(alpha_field(f), alpha_field(f), run.quad(), target=1.0).to_dict(),
        "omega_omega": l2_inner(volume_field(f), volume_field(f), run.quad(), target=1.0).to_dict(),
    }
    star = star_alpha_identity(f, seed=run.cfg.seed)
    run.write_csv("orthogonality_replicas", replica_rows)
    passed = (all(r["pass"] for r in rows) and self_case.value == 0.0 and star.passed
              and all(v["pass"] for v in norms.values()))
    run.write_json("orthogonality", {"sigmas": 3, "theta_is_ixomega": self_case.to_dict(), "norms": norms,
                                     "star_ixomega_identity": star.to_dict(), "cases": rows}, passed)
    return passed


def cmd_weak_closed(run: Run, args) -> bool:
    f = run.model
    rng = np.random.default_rng(run.cfg.seed)
    rows = []
    for i in range(run.cfg["l2"]["pairs"]):
        omega = random_field(f, f.n - 2, rng)
        direct, paired = decomposition_consistency(omega, run.quad(i))
        combined = math.hypot(direct.sigma, paired.sigma)
        agree = abs(direct.value - paired.value) <= 3 * combined
        rows.append({"case": i, **direct.to_dict(), "paired_value": paired.value, "paired_sigma": paired.sigma,
                     "paths_agree": agree})
    x = np.random.default_rng(run.cfg.seed).random((64, f.m))
    s = np.linspace(0.0, 1.0, 64, endpoint=False)
    d_alpha = float(np.abs(alpha_field(f).exterior_derivative().coefficients_batch(x, s)).max(initial=0.0))
    passed = all(r["pass"] and r["paths_agree"] for r in rows) and d_alpha <= 1e-12
    run.write_json("weak-closed", {"sigmas": 3, "d_alpha_max": d_alpha, "cases": rows}, passed)
    return passed


def cmd_obstruction(run: Run, args) -> bool:
    f = run.model
    rng = np.random.default_rng(run.cfg.seed)
    xi1 = random_field(f, 1, rng)
    coboundary = xi1.lie_derivative_field()
    psi = atom_field(f, (), ExpFourierProfile(1.0, (0.5, 1.0), (0.0, -0.7)))
    x_psi = psi.lie_derivative_field()
    alpha = alpha_field(f)
    tol = 1e-10
    rows, counts, ok = [], [], True
    for p in range(1, run.cfg["obstruction"]["max_period"] + 1):
        Ap = _int_power(f.A.tolist(), p)
        expected = abs(_int_det([[Ap[i][j] - (i == j) for j in range(f.m)] for i in range(f.m)]))
        pts = periodic_points(f, p)
        counts.append({"period": p, "count": len(pts), "abs_det": expected})
        ok &= len(pts) == expected
        for j, pt in enumerate(pts):
            for name, form, target in (("alpha", alpha, float(p)), ("lie_derivative_1form", coboundary, 0.0),
                                       ("x_derivative_function", x_psi, 0.0)):
                oi = orbit_obstruction(form, pt, p)
                good = abs(oi.value - target) <= tol
                ok &= good
                rows.append([p, j, name, oi.value, target, oi.return_distance])
    run.write_csv("obstruction", rows)
    worst = max((abs(r[3] - r[4]) for r in rows), default=0.0)
    run.write_json("obstruction", {"tol": tol, "counts": counts, "max_deviation": worst, "orbits": len(rows) // 3},
                   ok)
    return ok


COMMANDS = {
    "algebra-selftest": cmd_algebra_selftest,
    "model": cmd_model,
    "rates": cmd_rates,
    "solve": cmd_solve,
    "adjoint": cmd_adjoint,
    "orthogonality": cmd_orthogonality,
    "obstruction": cmd_obstruction,
    "weak-closed": cmd_weak_closed,
}


def cmd_all(run: Run, args) -> bool:
    summary = {}
    for name, func in COMMANDS.items():
        sub = argparse.Namespace(samples=None, degree=None, form=None, points=None, horizon_cap=None,
                                 oracle=(name == "solve"))
        summary[name] = bool(func(run, sub))
    passed = all(summary.values())
    run.write_json("all", {"commands": summary}, passed)
    return passed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="output directory (default [output] dir)")
    common.add_argument("--tol", type=float, help="override [run] tol")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress lines on stdout")

    parser = argparse.ArgumentParser(prog="anosovforms", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("algebra-selftest", parents=[common], help="randomised exterior-algebra identities")
    sub.add_parser("model", parents=[common], help="eigendata, splitting, constants, periodic point counts")
    p = sub.add_parser("rates", parents=[common], help="backward contraction rates and asymmetry verdict")
    p.add_argument("--samples", type=int, help="base points to sample")
    p = sub.add_parser("solve", parents=[common], help="solve L_X eta = xi at sample sites")
    p.add_argument("--degree", type=int)
    p.add_argument("--form", help="atoms separated by '|', or @file")
    p.add_argument("--points", help="site count, or a CSV file of x_1..x_m,s rows")
    p.add_argument("--horizon-cap", type=float, dest="horizon_cap")
    p.add_argument("--oracle", action="store_true",
                   help="treat the form as eta0, solve L_X eta = L_X eta0 and compare with eta0")
    for name, text in (("adjoint", "adjoint identity of L_X on random pairs"),
                       ("orthogonality", "orthogonality of i_X Omega to the image of L_X"),
                       ("obstruction", "periodic-orbit integrals"),
                       ("weak-closed", "int d(omega) ^ alpha"),
                       ("all", "every subcommand")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(run__seed=args.seed, run__tol=args.tol, output__dir=args.out)
        out = Path(cfg["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, out, args.quiet)
        func = cmd_all if args.command == "all" else COMMANDS[args.command]
        return EXIT_OK if func(run, args) else EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
