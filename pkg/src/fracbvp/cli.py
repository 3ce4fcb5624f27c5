"""Command line entry point ``fracbvp``.

Exit codes: 0 success, 2 conditions not certified (report still written),
1 malformed input or resource limits (error JSON on stderr).
Reports are canonical JSON (sorted keys, no timestamps) embedding the
resolved configuration and its SHA-256.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource
from scipy.spatial import cKDTree
from threadpoolctl import threadpool_limits

from . import __version__
from .fractal import FractalCurveSpec, ResourceError, Sphere, build_region, region_json, region_svg
from .jump import (
    JumpProblem,
    NotCertifiedError,
    SolutionVariant,
    check_solvability,
    check_uniqueness_window,
    jump_residual,
    monogenicity_residual,
    log_holder_example_g,
    smooth_example_g,
    solve,
)
from .metrics import box_counting_dimension, marcinkiewicz_closed_form, marcinkiewicz_numeric
from .oracles import circle_jump_oracle, index_one_coefficient, reduced_coordinate
from .rbvp2d import BranchError, CoefficientProblem, UndersamplingError, complex_to_even, rbvp_residual, solve_rbvp
from .whitney import decompose, extend, gradient_bound_audit

log = logging.getLogger("fracbvp")

COMMANDS = ("curve", "exponents", "whitney-audit", "solve-jump", "solve-rbvp2d", "check", "oracle-circle")


class InputError(ValueError):
    """Malformed arguments or configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------------------
# serialisation


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    text = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def _schemas() -> dict:
    root = resources.files("fracbvp") / "schemas"
    return {p.name: json.loads(p.read_text()) for p in root.iterdir() if p.name.endswith(".json")}


def validate(doc: dict, schema_name: str) -> None:
    """Validate against a shipped schema; raises InputError listing the first problem."""
    sch = _schemas()
    reg = Registry().with_resources([(s["$id"], Resource.from_contents(s)) for s in sch.values()])
    validator = jsonschema.Draft202012Validator(sch[schema_name], registry=reg)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise InputError(f"{schema_name}: {where}: {e.message}")


def make_report(command: str, config: dict, result: dict, status: str = "ok") -> dict:
    report = {
        "command": command,
        "version": __version__,
        "config": _clean(config),
        "config_sha256": config_hash(config),
        "status": status,
        "result": _clean(result),
    }
    validate(report, "report.schema.json")
    return report


# ---------------------------------------------------------------------------
# building problems from configuration


def build_boundary(spec: dict, n: int):
    kind = spec["kind"]
    if kind == "fractal":
        if n != 2:
            raise InputError("fractal boundaries are planar (n = 2)")
        for key in ("alpha", "beta", "depth"):
            if key not in spec:
                raise InputError(f"fractal boundary needs '{key}'")
        return build_region(FractalCurveSpec(spec["alpha"], spec["beta"], spec["depth"]))
    if (kind == "circle") != (n == 2):
        raise InputError(f"boundary kind '{kind}' does not match n = {n}")
    return Sphere(n, spec.get("radius", 1.0))


def _nearest(points, values, width: int):
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float)
    if pts.ndim != 2 or vals.shape != (len(pts), width):
        raise InputError(f"samples need matching points and {width}-coefficient values")
    tree = cKDTree(pts)

    def f(x):
        _, i = tree.query(np.atleast_2d(x))
        return vals[i]

    return f


def build_data(spec: dict, n: int):
    kind = spec["kind"]
    width = 1 << n
    if kind == "paper-example":
        if n != 2:
            raise InputError("the example datum is planar")
        return log_holder_example_g(spec.get("beta", 2.2))
    if kind == "smooth":
        return smooth_example_g(n)
    if kind == "constant":
        coeffs = np.asarray(spec.get("coeffs", []), dtype=float)
        if coeffs.shape != (width,):
            raise InputError(f"constant data need {width} coefficients")
        return lambda x: np.tile(coeffs, (len(np.atleast_2d(x)), 1))
    return _nearest(spec.get("points"), spec.get("values"), width)


def build_coefficient(spec: dict, pivot: int):
    kind = spec["kind"]
    if kind == "constant":
        coeffs = np.asarray(spec.get("coeffs", []), dtype=float)
        if coeffs.shape != (4,):
            raise InputError("constant coefficient needs 4 coefficients")
        return lambda x: np.tile(coeffs, (len(np.atleast_2d(x)), 1))
    if kind == "power":
        k = int(spec.get("k", 0))
        return lambda x: complex_to_even(reduced_coordinate(x, pivot) ** k, pivot)
    if kind == "index-one-example":
        def G(x):
            return complex_to_even(index_one_coefficient(reduced_coordinate(x, pivot)), pivot)

        return G
    return _nearest(spec.get("points"), spec.get("values"), 4)


def _jump_problem(cfg: dict) -> JumpProblem:
    n = cfg["n"]
    c = cfg.get("c")
    if c is not None and len(c) != 1 << n:
        raise InputError(f"c needs {1 << n} coefficients")
    return JumpProblem(
        n,
        build_boundary(cfg["boundary"], n),
        build_data(cfg["g"], n),
        cfg["nu"],
        pivot=cfg.get("pivot", 1),
        c=c,
        nu_even=cfg.get("nu_even"),
        nu_odd=cfg.get("nu_odd"),
        label=cfg["g"]["kind"],
    )


def _dimension_bound(boundary) -> dict:
    if isinstance(boundary, Sphere):
        return {"value": float(boundary.ambient_dim - 1), "method": "smooth"}
    bc = box_counting_dimension(boundary.polyline())
    return {"value": bc["dimension"], "method": "box-counting", "stderr": bc["stderr"]}


def _load_config(path: str, schema: str) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"config not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    validate(cfg, schema)
    return cfg


# ---------------------------------------------------------------------------
# subcommands; each returns (config, result, status)


def cmd_curve(args):
    cfg = {"alpha": args.alpha, "beta": args.beta, "depth": args.depth}
    spec = FractalCurveSpec(args.alpha, args.beta, args.depth)
    region = build_region(spec)
    census = []
    for m in range(1, args.depth + 1):
        fl = spec.floor_mbeta(m)
        census.append({
            "level": m,
            "floor_m_beta": fl,
            "count": spec.count(m),
            "count_is_2_pow_floor": spec.count(m) == 2**fl,
            "spacing": spec.spacing(m),
            "spacing_exact": spec.spacing(m) == math.ldexp(1.0, -m - fl),
        })
    result = {"n_rects": spec.n_rects(), "census": census, "bbox": [list(b) for b in region.bbox]}
    if args.json:
        Path(args.json).write_text(canonical_json(region_json(region)))
        result["json"] = args.json
    if args.svg:
        Path(args.svg).write_text(region_svg(region))
        result["svg"] = args.svg
    return cfg, result, "ok"


def cmd_exponents(args):
    cfg = {"alpha": args.alpha, "beta": args.beta, "depth": args.depth, "grid": args.grid}
    region = build_region(FractalCurveSpec(args.alpha, args.beta, args.depth))
    p_grid = np.linspace(0.3, 1.1, args.grid)
    mp, mm = marcinkiewicz_closed_form(args.alpha, args.beta)
    inner = marcinkiewicz_numeric(region, "inner", p_grid=p_grid)
    outer = marcinkiewicz_numeric(region, "outer", p_grid=p_grid)
    result = {
        "m_plus_closed": mp,
        "m_minus_closed": mm,
        "m_plus_numeric": inner.to_dict(),
        "m_minus_numeric": outer.to_dict(),
        "box_dimension": box_counting_dimension(region.polyline()),
    }
    return cfg, result, "ok"


def _audit_probes(points: np.ndarray, rng, n_probes: int, reach: float) -> np.ndarray:
    idx = rng.integers(0, len(points), n_probes)
    d = points.shape[1]
    direction = rng.normal(size=(n_probes, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = np.exp(rng.uniform(np.log(1e-3 * reach), np.log(reach), n_probes))
    return points[idx] + r[:, None] * direction


def cmd_whitney_audit(args):
    cfg = _load_config(args.config, "jump_job.schema.json")
    seed = cfg.get("seed", args.seed)
    problem = _jump_problem(cfg)
    spacing = cfg.get("sample_spacing", 2.0**-8)
    depth = cfg.get("whitney_depth", 10)
    sample = problem.samples(spacing)
    dec = decompose(sample, max_depth=depth)
    ext = extend(sample, dec)
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in problem.boundary.bbox)
    reach = 0.5 * float(np.max(hi - lo))
    probes = _audit_probes(sample.points, rng, cfg.get("n_probes", 2000), reach)
    inside = np.all((probes >= dec.origin) & (probes <= dec.origin + dec.root_side), axis=1)
    probes = probes[inside]
    vals, _, _ = ext.evaluate(sample.points)
    prop = dec.proportionality()
    result = {
        "n_samples": len(sample.points),
        "n_cubes": len(dec),
        "count_by_level": dec.count_by_level(),
        "collar_measure": dec.collar_measure(),
        "proportionality_fraction": float(np.mean(prop)),
        "partition_of_unity_deviation": float(np.max(np.abs(ext.partition_sum(probes) - 1.0))),
        "max_overlap": int(np.max(ext.overlap_count(probes))),
        "interpolation_error": float(np.max(np.abs(vals - sample.values))),
        "gradient_audit": gradient_bound_audit(ext, probes, nu=problem.nu),
    }
    if args.csv:
        dec.to_csv(args.csv)
        result["csv"] = args.csv
    return cfg, result, "ok"


def _write_field(sol, boundary, path: str, n_grid: int) -> None:
    lo, hi = (np.asarray(b, dtype=float) for b in boundary.bbox)
    lo, hi = lo - 0.25, hi + 0.25
    axes = [np.linspace(a, b, n_grid) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))
    vals, ok = sol.evaluate(pts)
    d = pts.shape[1]
    head = [f"x{i + 1}" for i in range(d)] + [f"c{k}" for k in range(vals.shape[1])] + ["valid"]
    table = np.column_stack([pts, vals, ok.astype(float)])
    np.savetxt(path, table, delimiter=",", header=",".join(head), comments="", fmt="%.17g")


def cmd_solve_jump(args):
    cfg = _load_config(args.config, "jump_job.schema.json")
    if args.variant:
        cfg["variant"] = args.variant
    cfg.setdefault("variant", "inner,inner")
    cfg.setdefault("seed", args.seed)
    problem = _jump_problem(cfg)
    variant = SolutionVariant.parse(cfg["variant"])
    cert = problem.solvability()
    dim = _dimension_bound(problem.boundary)
    window = check_uniqueness_window(max(dim["value"], problem.n - 1), problem.nu,
                                     max(cert["m_plus"], cert["m_minus"]), problem.n)
    result = {"certificate": cert, "dimension_bound": dim, "uniqueness_window": window, "variant": variant.label}
    try:
        sol = solve(
            problem,
            variant,
            resolution=cfg.get("resolution", 2.0**-10),
            sample_spacing=cfg.get("sample_spacing"),
            whitney_depth=cfg.get("whitney_depth"),
            unsafe=cfg.get("unsafe", False),
            richardson=cfg.get("richardson", False),
        )
    except NotCertifiedError as exc:
        result["error"] = str(exc)
        return cfg, result, "not-certified"
    result["provenance"] = sol.provenance
    result["jump_residual"] = jump_residual(sol, eps=cfg.get("eps", 0.05), n_probes=cfg.get("n_probes", 256),
                                            seed=cfg["seed"])
    bd = problem.boundary
    if cfg.get("oracle", isinstance(bd, Sphere) and problem.n == 2):
        if not (isinstance(bd, Sphere) and problem.n == 2):
            raise InputError("the circle oracle needs a circle boundary")
        result["oracle"] = _oracle_error(sol, problem, cfg["seed"], cfg.get("n_probes", 256))
    if cfg.get("monogenicity", False):
        rng = np.random.default_rng(cfg["seed"])
        lo, hi = (np.asarray(b, dtype=float) for b in bd.bbox)
        centres = rng.uniform(lo - 1.0, hi + 1.0, size=(64, problem.n))
        result["monogenicity"] = monogenicity_residual(sol, centres)
    if args.field:
        _write_field(sol, bd, args.field, cfg.get("field_grid", 64))
        result["field"] = args.field
    return cfg, result, "ok"


def _oracle_error(sol, problem: JumpProblem, seed: int, n_probes: int) -> dict:
    """Max relative deviation from the complex Cauchy-integral solution, dist >= 0.1."""
    rng = np.random.default_rng(seed)
    R = problem.boundary.radius
    half = n_probes // 2
    rad = np.concatenate([rng.uniform(0.0, R - 0.1, half), rng.uniform(R + 0.1, 2.5 * R, n_probes - half)])
    ang = rng.uniform(0.0, 2 * np.pi, n_probes)
    x = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    ref = circle_jump_oracle(problem.g, x, problem.pivot, R) + problem.c
    num, ok = sol.evaluate(x)
    err = float(np.max(np.linalg.norm(num - ref, axis=1)[ok]) / np.max(np.linalg.norm(ref[ok], axis=1)))
    return {"max_relative_error": err, "tolerance": 1e-3, "passed": err <= 1e-3, "n_probes": int(ok.sum())}


def cmd_solve_rbvp2d(args):
    cfg = _load_config(args.config, "rbvp_job.schema.json")
    cfg.setdefault("variant", "inner,inner")
    cfg.setdefault("seed", args.seed)
    pivot = cfg.get("pivot", 1)
    c = cfg.get("c")
    if c is not None and len(c) != 4:
        raise InputError("c needs 4 coefficients")
    problem = CoefficientProblem(
        build_boundary(cfg["boundary"], 2),
        build_coefficient(cfg["G"], pivot),
        build_data(cfg["g"], 2),
        cfg["nu"],
        pivot=pivot,
        c=c,
        nu_even=cfg.get("nu_even"),
        nu_odd=cfg.get("nu_odd"),
        label=cfg["g"]["kind"],
    )
    polys = cfg.get("polynomials")
    if polys is not None:
        polys = [[complex(a, b) for a, b in p] for p in polys]
    variant = SolutionVariant.parse(cfg["variant"])
    result = {"certificate": problem.jump_problem.solvability(), "variant": variant.label}
    try:
        sol = solve_rbvp(
            problem,
            variant,
            resolution=cfg.get("resolution", 2.0**-10),
            sample_spacing=cfg.get("sample_spacing"),
            whitney_depth=cfg.get("whitney_depth"),
            gamma_side=cfg.get("gamma_side", "inner"),
            polynomials=polys,
            moment_tol=cfg.get("moment_tol", 1e-3),
            unsafe=cfg.get("unsafe", False),
            richardson=cfg.get("richardson", False),
        )
    except NotCertifiedError as exc:
        result["error"] = str(exc)
        return cfg, result, "not-certified"
    base = sol.fine if cfg.get("richardson", False) else sol
    result["rbvp"] = base.report
    result["richardson"] = bool(cfg.get("richardson", False))
    result["boundary_residual"] = rbvp_residual(sol, n_probes=cfg.get("n_probes", 128), seed=cfg["seed"])
    return cfg, result, "ok" if base.solvable else "not-certified"


def cmd_check(args):
    cfg = {"nu": args.nu, "n": args.n, "alpha": args.alpha, "beta": args.beta, "depth": args.depth,
           "nu_even": args.nu_even, "nu_odd": args.nu_odd, "dim": args.dim}
    if (args.alpha is None) != (args.beta is None):
        raise InputError("give both --alpha and --beta, or neither")
    nu_even = args.nu if args.nu_even is None else args.nu_even
    nu_odd = args.nu if args.nu_odd is None else args.nu_odd
    if abs(min(nu_even, nu_odd) - args.nu) > 1e-12:
        raise InputError("--nu must equal min(--nu-even, --nu-odd)")
    if args.alpha is None:
        mp = mm = 1.0
        dim = {"value": float(args.n - 1), "method": "smooth"}
    else:
        if args.n != 2:
            raise InputError("fractal curves are planar (n = 2)")
        mp, mm = marcinkiewicz_closed_form(args.alpha, args.beta)
        dim = _dimension_bound(build_region(FractalCurveSpec(args.alpha, args.beta, args.depth)))
    if args.dim is not None:
        dim = {"value": args.dim, "method": "given"}
    cert = check_solvability(nu_even, nu_odd, mp, mm, args.n)
    window = check_uniqueness_window(max(dim["value"], args.n - 1), args.nu, max(mp, mm), args.n)
    result = {"certificate": cert, "solvable": cert["solvable"], "dimension_bound": dim, "uniqueness_window": window}
    return cfg, result, "ok" if cert["solvable"] else "not-certified"


def cmd_oracle_circle(args):
    cfg = {"nu": args.nu, "resolution": args.resolution, "richardson": args.richardson,
           "n_probes": args.n_probes, "seed": args.seed}
    problem = JumpProblem(2, Sphere(2, 1.0), smooth_example_g(2), args.nu, label="smooth")
    sol = solve(problem, SolutionVariant("inner", "inner"), resolution=args.resolution, richardson=args.richardson)
    result = {"oracle": _oracle_error(sol, problem, args.seed, args.n_probes),
              "jump_residual": jump_residual(sol, seed=args.seed)}
    print(f"max relative error vs Cauchy-integral oracle: {result['oracle']['max_relative_error']:.3e}",
          file=sys.stderr)
    return cfg, result, "ok"


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracbvp", description="Riemann and jump problems on fractal boundaries.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized probes")
    common.add_argument("--threads", type=int, default=None, help="cap on BLAS threads")
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("curve", parents=[common], help="generate O(alpha, beta), write SVG/JSON")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--beta", type=float, required=True)
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--svg")
    c.add_argument("--json")

    e = sub.add_parser("exponents", parents=[common], help="Marcinkiewicz exponents and box dimension")
    e.add_argument("--alpha", type=float, required=True)
    e.add_argument("--beta", type=float, required=True)
    e.add_argument("--depth", type=int, default=8)
    e.add_argument("--grid", type=int, default=81, help="number of trial exponents in [0.3, 1.1]")
    e.add_argument("--json", help="alias of --out")

    w = sub.add_parser("whitney-audit", parents=[common], help="audit a Whitney extension of job data")
    w.add_argument("--config", required=True)
    w.add_argument("--csv", help="dump the cube decomposition")

    j = sub.add_parser("solve-jump", parents=[common], help="solve a jump problem")
    j.add_argument("--config", required=True)
    j.add_argument("--variant", help="even_side,odd_side (overrides the config)")
    j.add_argument("--field", help="CSV of the solution on a grid")

    r = sub.add_parser("solve-rbvp2d", parents=[common], help="planar Riemann problem with even coefficient")
    r.add_argument("--config", required=True)

    k = sub.add_parser("check", parents=[common], help="solvability and uniqueness inequalities")
    k.add_argument("--nu", type=float, required=True)
    k.add_argument("--n", type=int, default=2)
    k.add_argument("--alpha", type=float)
    k.add_argument("--beta", type=float)
    k.add_argument("--depth", type=int, default=6)
    k.add_argument("--nu-even", type=float)
    k.add_argument("--nu-odd", type=float)
    k.add_argument("--dim", type=float, help="known upper bound of the boundary dimension")

    o = sub.add_parser("oracle-circle", parents=[common], help="jump solver against the circle oracle")
    o.add_argument("--nu", type=float, default=1.0)
    o.add_argument("--resolution", type=float, default=2.0**-10)
    o.add_argument("--richardson", action="store_true")
    o.add_argument("--n-probes", type=int, default=256)
    return p


HANDLERS = {
    "curve": cmd_curve,
    "exponents": cmd_exponents,
    "whitney-audit": cmd_whitney_audit,
    "solve-jump": cmd_solve_jump,
    "solve-rbvp2d": cmd_solve_rbvp2d,
    "check": cmd_check,
    "oracle-circle": cmd_oracle_circle,
}


def _fail(exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return 1


def run(argv=None) -> int:
    level = os.environ.get("FRACBVP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "json", None) and args.command == "exponents" and not args.out:
            args.out = args.json
        with threadpool_limits(limits=args.threads):
            cfg, result, status = HANDLERS[args.command](args)
        report = make_report(args.command, cfg, result, status)
    except (InputError, ValueError, TypeError, ResourceError, UndersamplingError, BranchError,
            jsonschema.ValidationError, OSError, KeyError) as exc:
        return _fail(exc)
    text = canonical_json(report)
    try:
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        return _fail(exc)
    return 0 if status == "ok" else 2


def main() -> None:
    sys.exit(run())
