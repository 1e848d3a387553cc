"""Command-line front end.

Exit codes: 0 ok, 2 parse error, 3 numerical failure, 4 dimension mismatch,
5 verification failure.  Reports are JSON with sorted keys (``--json``) or
plain text; apart from ``timestamp`` (and ``timings`` when requested), two
runs with the same input, seed and flags print identical JSON.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from importlib import metadata

import numpy as np

from .algebra import (BlockDiagonalizationError, MultiplicityMismatchError,
                      algebra_generation_test, block_diagonalize, reduce_multiplicities)
from .channelsynth import (EPS_STAT, CertificateError, NotProjectionError,
                           build_optimal_scheme, two_projection_form, verify_scheme)
from .curvebound import (CurveError, OrbitClosureError, PathTrackingError,
                         geometric_lower_bound)
from .dimension import SolverError, dimension_from_reduced
from .generators import (degree3_example, irreducible_example, planted_instance,
                         two_projections)
from .io import (ParseError, observables_to_dict, read_observables, read_scheme,
                 scheme_to_dict, write_json)
from .matcore import DimensionError, NotHermitianError, SpectralRadiusError

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_DIM, EXIT_VERIFY = 0, 2, 3, 4, 5

_NUMERIC_ERRORS = (SolverError, BlockDiagonalizationError, MultiplicityMismatchError,
                   CertificateError, CurveError, PathTrackingError, OrbitClosureError,
                   SpectralRadiusError, np.linalg.LinAlgError)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _seeds(seed: int, k: int) -> list[int]:
    """``k`` independent child seeds derived from the single ``--seed``."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k, dtype=np.uint32)]


class _Timer:
    def __init__(self):
        self.laps: dict[str, float] = {}

    def lap(self, name: str, t0: float) -> None:
        self.laps[name] = round(time.perf_counter() - t0, 6)


def _plain(obj):
    """``json`` fallback for numpy scalars and arrays."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _finish(report: dict, args, timer: _Timer | None = None) -> None:
    report["tool_version"] = _version()
    report["seed"] = args.seed
    report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if timer is not None and getattr(args, "timings", False):
        report["timings"] = timer.laps
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True, default=_plain))
    else:
        _print_text(report)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{v:.6e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _print_text(report: dict, indent: str = "") -> None:
    for key in sorted(report):
        val = report[key]
        if isinstance(val, dict):
            print(f"{indent}{key}:")
            _print_text(val, indent + "  ")
        else:
            print(f"{indent}{key}: {_fmt(val)}")


# -- commands -----------------------------------------------------------------

def _analyze_core(obs, seed_bd: int):
    canon = obs.canonical()
    bs = block_diagonalize(canon, seed_bd)
    reduced = reduce_multiplicities(canon, bs)
    report = dimension_from_reduced(reduced)
    return canon, bs, reduced, report


def cmd_analyze(args) -> int:
    obs, names = read_observables(args.input)
    s_bd, s_gen, s_bound, s_verify = _seeds(args.seed, 4)
    timer = _Timer()
    t0 = time.perf_counter()
    canon, bs, reduced, rep = _analyze_core(obs, s_bd)
    timer.lap("dimension", t0)
    out = {
        "input": {"dim": obs.dim, "operators": names},
        "block_structure": {"blocks": [list(b) for b in bs.blocks], "full": bs.is_full,
                            "algebra_dim": bs.algebra_dim},
        "dimension": rep.to_dict(),
    }
    if not args.no_generation_test and len(obs.operators) >= 2:
        t0 = time.perf_counter()
        v = algebra_generation_test(list(obs.operators[:2]), s_gen)
        out["generation_test"] = {"full": v.full, "consistent": v.consistent,
                                  "vanishing_k": list(v.vanishing_k)}
        timer.lap("generation_test", t0)
    if not args.no_bound:
        t0 = time.perf_counter()
        gb = geometric_lower_bound(obs, seed=s_bound, draws=args.draws,
                                   ceiling=rep.compression_dimension)
        fac = gb.factorization
        out["geometric_bound"] = {"bound": gb.bound,
                                  "real_factor_degrees": list(fac.real_factor_degrees),
                                  "complex_orbit_sizes": list(fac.complex_orbit_sizes)}
        timer.lap("geometric_bound", t0)
    t0 = time.perf_counter()
    scheme = build_optimal_scheme(reduced, rep)
    chk = verify_scheme(scheme, obs, trials=args.trials, seed=s_verify)
    out["scheme"] = {"d": scheme.achieved_dim, "n": scheme.classical_register,
                     "kept_blocks": list(scheme.kept_blocks),
                     "max_residual": float(chk.max_residual), "ok": bool(chk.ok)}
    timer.lap("scheme", t0)
    _finish(out, args, timer)
    return EXIT_OK


def cmd_compress(args) -> int:
    obs, _ = read_observables(args.input)
    s_bd, _, _, _ = _seeds(args.seed, 4)
    _, _, reduced, rep = _analyze_core(obs, s_bd)
    scheme = build_optimal_scheme(reduced, rep)
    write_json(args.scheme_out, scheme_to_dict(scheme))
    _finish({"scheme_out": args.scheme_out, "d": scheme.achieved_dim,
             "n": scheme.classical_register, "kept_blocks": list(scheme.kept_blocks)}, args)
    return EXIT_OK


def cmd_verify(args) -> int:
    obs, _ = read_observables(args.input)
    scheme = read_scheme(args.scheme)
    _, _, _, s_verify = _seeds(args.seed, 4)
    tol = EPS_STAT if args.tol is None else args.tol
    chk = verify_scheme(scheme, obs, trials=args.trials, seed=s_verify)
    ok = (chk.max_residual <= tol and chk.compress_cptp and chk.decompress_cptp
          and chk.duals_unital)
    _finish({"max_residual": chk.max_residual, "random_residual": chk.random_residual,
             "basis_residual": chk.basis_residual, "compress_cptp": chk.compress_cptp,
             "decompress_cptp": chk.decompress_cptp, "duals_unital": chk.duals_unital,
             "trials": chk.trials, "tol": tol, "ok": ok}, args)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_lower_bound(args) -> int:
    obs, _ = read_observables(args.input)
    _, _, s_bound, _ = _seeds(args.seed, 4)
    gb = geometric_lower_bound(obs, pair_choice=args.pair, seed=s_bound, draws=args.draws)
    fac = gb.factorization
    _finish({"bound": gb.bound, "real_factor_degrees": list(fac.real_factor_degrees),
             "complex_orbit_sizes": list(fac.complex_orbit_sizes),
             "branch_points": len(fac.branch_points), "draws": gb.draws}, args)
    return EXIT_OK


def cmd_two_proj(args) -> int:
    obs, _ = read_observables(args.input)
    if len(obs.operators) != 2:
        raise ParseError("two-proj needs exactly two operators")
    p, q = obs.operators
    form = two_projection_form(p, q)
    rp, rq = form.residuals(p, q)
    out = {"dim": form.dim, "corner_dims": list(form.corner_dims),
           "generic_pairs": form.generic_pairs, "angles": list(form.angles),
           "ambiguous": list(form.ambiguous), "template_residual": max(rp, rq)}
    _finish(out, args)
    tol = 1e-8 if args.tol is None else args.tol
    return EXIT_OK if max(rp, rq) <= tol else EXIT_VERIFY


def _gen_ops(name: str, params: list[str]):
    try:
        if name == "degree3" and not params:
            return list(degree3_example()), ["A", "B"]
        if name == "irred" and len(params) == 1:
            return list(irreducible_example(int(params[0]))), ["A", "B"]
        if name == "twoproj" and len(params) == 2:
            return list(two_projections(int(params[0]), int(params[1]))), ["P", "Q"]
        if name == "planted" and len(params) in (1, 2):
            seed = int(params[1]) if len(params) == 2 else 0
            inst = planted_instance(params[0], seed)
            return list(inst.operators), [f"W{i + 1}" for i in range(len(inst.operators))]
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    raise ParseError(f"unknown example {' '.join([name, *params])!r}; expected "
                     "'degree3', 'irred D', 'twoproj D SEED' or 'planted VARIANT [SEED]'")


def cmd_gen(args) -> int:
    ops, names = _gen_ops(args.name, args.params)
    data = observables_to_dict(ops, names)
    if args.output:
        write_json(args.output, data)
    else:
        print(json.dumps(data, indent=2, sort_keys=True))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--json", action="store_true", help="emit a JSON report")

    parser = argparse.ArgumentParser(prog="qcompress",
                                     description="Compression of quantum measurement statistics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="full analysis of an observable file")
    p.add_argument("input")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--draws", type=int, default=3, help="pencils tried for the geometric bound")
    p.add_argument("--no-bound", action="store_true", help="skip the geometric bound")
    p.add_argument("--no-generation-test", action="store_true")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compress", parents=[common], help="build and save an optimal scheme")
    p.add_argument("input")
    p.add_argument("--scheme-out", required=True)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("verify", parents=[common], help="check a saved scheme")
    p.add_argument("input")
    p.add_argument("--scheme", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", parents=[common], help="write a named example file")
    p.add_argument("name")
    p.add_argument("params", nargs="*")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("lower-bound", parents=[common], help="geometric lower bound only")
    p.add_argument("input")
    p.add_argument("--draws", type=int, default=3)
    p.add_argument("--pair", choices=("random", "given"), default="random")
    p.set_defaults(func=cmd_lower_bound)

    p = sub.add_parser("two-proj", parents=[common], help="canonical form of two projections")
    p.add_argument("input")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_two_proj)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionError as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (ParseError, NotHermitianError, NotProjectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _NUMERIC_ERRORS as exc:
        print(f"error: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
