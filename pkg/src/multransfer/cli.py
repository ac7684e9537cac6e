"""Command-line front end.

Exit codes: 0 success, 1 a theorem violation was found, 2 input error,
3 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import exponents, instances, transference
from .box_calculus import BoxSpec, DimensionError, DomainError, PreconditionError
from .lattice_engine import DEFAULT_CAP, CapExceeded, TargetMatrix, find_dual_point, find_primal_point

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(ValueError):
    pass


def _json_print(payload: Any, out=None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _floats(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad number list {value!r}") from exc


def _key_values(value: str) -> dict[str, float]:
    out = {}
    for part in value.split(","):
        if not part.strip():
            continue
        key, sep, raw = part.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {part!r}")
        try:
            out[key.strip()] = float(raw)
        except ValueError as exc:
            raise InputError(f"bad value in {part!r}") from exc
    return out


def _matrix(args) -> TargetMatrix:
    if args.preset:
        return instances.preset(args.preset)
    if args.theta:
        try:
            return instances.load_matrix(args.theta)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read matrix file: {exc}") from exc
    raise InputError("one of --theta or --preset is required")


def _add_matrix_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=str, help='JSON file {"m":..,"n":..,"theta":[[row],..]}')
    p.add_argument("--preset", choices=sorted(instances.PRESETS))
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- search


def cmd_search(args) -> int:
    theta = _matrix(args)
    box = BoxSpec(_floats(args.lam), _floats(args.mu))
    search = find_dual_point if args.dual else find_primal_point
    point = search(theta, box, require_nonzero_x=args.nonzero_x, cap=args.cap)
    _json_print(
        {
            "side": "dual" if args.dual else "primal",
            "lam": box.lam.tolist(),
            "mu": box.mu.tolist(),
            "result": "none" if point is None else "found",
            "witness": None if point is None else point.as_dict(),
        }
    )
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _run_one(job: tuple) -> dict:
    theorem, spec, scale, cap, timing = job
    theta, box = spec.theta, spec.box
    if theorem == "mahler":
        c = transference.mahler_constant(theta.d) * scale
        report = transference.check_mahler(theta, box, c=c, cap=cap, seed=spec.seed)
    elif theorem == "mult":
        c1 = transference.TransferenceConstants.for_instance(theta.m, theta.n).c1 * scale
        report = transference.check_mult_transference(theta, box.lam, box.mu, c1=c1, cap=cap, seed=spec.seed)
    else:
        report = transference.check_proof_chain(theta, box.lam, box.mu, cap=cap, seed=spec.seed)
    out = report.as_dict(timing=timing)
    out["index"] = spec.index
    return out


GENERATORS = {
    "mahler": instances.mahler_instances,
    "mult": instances.mult_instances,
    "chain": instances.chain_instances,
}


def cmd_verify(args) -> int:
    if args.instances < 1:
        raise InputError("--instances must be at least 1")
    sabotage = _key_values(args.sabotage) if args.sabotage else {}
    unknown = set(sabotage) - {"scale"}
    if unknown:
        raise InputError(f"unknown sabotage keys {sorted(unknown)}")
    scale = sabotage.get("scale", 1.0)
    if scale != 1.0 and args.theorem == "chain":
        raise InputError("sabotage applies to --theorem mahler or mult")
    specs = GENERATORS[args.theorem](args.instances, args.seed, target=args.target, spread=args.spread)
    jobs = [(args.theorem, s, scale, args.cap, args.timing) for s in specs]
    start = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        results = [_run_one(j) for j in jobs]
    counts = {"verified": 0, "vacuous": 0, "inconclusive": 0, "VIOLATION": 0}
    for r in results:
        counts[r["verdict"]] += 1
    payload = {
        "theorem": args.theorem,
        "seed": args.seed,
        "instances": args.instances,
        "target": args.target,
        "spread": args.spread,
        "sabotage": sabotage,
        "verified": counts["verified"],
        "vacuous": counts["vacuous"],
        "inconclusive": counts["inconclusive"],
        "violations": [r for r in results if r["verdict"] == "VIOLATION"],
        "reports": results if args.details else [
            {"index": r["index"], "verdict": r["verdict"]} for r in results
        ],
        "generated_at": _stamp(),
    }
    if args.timing:
        payload["elapsed_s"] = time.perf_counter() - start
    _json_print(payload, args.output)
    return EXIT_VIOLATION if payload["violations"] else EXIT_OK


# -------------------------------------------------------------- exponent


def _grid(value: str | None, default: dict) -> dict:
    grid = dict(default)
    if value:
        parsed = _key_values(value)
        unknown = set(parsed) - {"t0", "ratio", "steps", "tail"}
        if unknown:
            raise InputError(f"unknown grid keys {sorted(unknown)}")
        grid.update(parsed)
    grid["steps"] = int(grid["steps"])
    grid["tail"] = int(grid.get("tail", min(4, grid["steps"])))
    return grid


def _estimate_dict(est: exponents.ExponentEstimate) -> dict:
    out = est.as_dict()
    out.pop("trace")
    return out


def cmd_exponent(args) -> int:
    theta = _matrix(args)
    grids = {
        "ordinary": _grid(args.grid, {"t0": 2.0, "ratio": 2.0, "steps": 13, "tail": 4}),
        "multiplicative": _grid(args.mult_grid, {"t0": 2.0, "ratio": 2.0, "steps": 6, "tail": 3}),
    }
    sides = {"theta": theta, "theta-transpose": theta.T}
    estimates: dict[str, dict[str, exponents.ExponentEstimate]] = {"theta": {}, "theta-transpose": {}}
    status = EXIT_OK
    error = None
    for kind in ("ordinary", "multiplicative"):
        g = grids[kind]
        for side, mat in sides.items():
            try:
                estimates[side][kind] = exponents.estimate_exponent(
                    mat, kind, g["t0"], g["ratio"], g["steps"], g["tail"], args.cap, matrix_side=side
                )
            except exponents.EstimateCapExceeded as exc:
                estimates[side][kind] = exc.partial
                status, error = EXIT_CAP, str(exc)
                break
        if status:
            break

    m, n = theta.m, theta.n
    comparisons = {}
    for kind in ("ordinary", "multiplicative"):
        a = estimates["theta"].get(kind)
        b = estimates["theta-transpose"].get(kind)
        if a is None or b is None or status:
            continue
        comparisons[kind] = {
            "bound_for_transpose": _finite(transference.dyson_rhs(a.estimate, m, n)) if a.estimate >= m / n else None,
            "transpose_estimate": _finite(b.estimate),
            "bound_for_theta": _finite(transference.dyson_rhs(b.estimate, n, m)) if b.estimate >= n / m else None,
            "theta_estimate": _finite(a.estimate),
        }
    payload = {
        "matrix": instances.dump_matrix(theta),
        "grid": grids,
        "estimates": {
            side: {kind: _estimate_dict(e) for kind, e in by_kind.items()} for side, by_kind in estimates.items()
        },
        "dyson_comparisons": comparisons,
        "note": "comparisons are finite-scale and informational",
        "generated_at": _stamp(),
    }
    if error:
        payload["error"] = error
    if args.csv:
        rows = []
        for by_kind in estimates.values():
            for est in by_kind.values():
                rows.append(exponents.trace_csv(est))
        header, *_ = rows[0].splitlines(keepends=True) if rows else [""]
        body = "".join("".join(r.splitlines(keepends=True)[1:]) for r in rows)
        Path(args.csv).write_text(header + body, encoding="utf-8")
    _json_print(payload, args.output)
    return status


def _finite(x: float):
    return "inf" if math.isinf(x) else x


# -------------------------------------------------------------- transfer


def cmd_transfer(args) -> int:
    theta = _matrix(args)
    report = transference.check_exponent_transfer(
        theta, args.kind, s0=args.s0, ratio=args.ratio, scales=args.scales, cap=args.cap
    )
    payload = report.as_dict()
    payload["generated_at"] = _stamp()
    _json_print(payload, args.output)
    return EXIT_VIOLATION if report.failures else EXIT_OK


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multransfer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    search = sub.add_parser("search", help="search a box for a nonzero lattice point")
    _add_matrix_args(search)
    search.add_argument("--lambda", dest="lam", required=True, help="comma-separated lam weights")
    search.add_argument("--mu", required=True, help="comma-separated mu weights")
    search.add_argument("--dual", action="store_true", help="search the dual lattice")
    search.add_argument("--nonzero-x", action="store_true")
    search.set_defaults(func=cmd_search)

    verify = sub.add_parser("verify", help="check a transference implication on generated instances")
    verify.add_argument("--theorem", choices=["mahler", "mult", "chain"], required=True)
    verify.add_argument("--instances", type=int, default=300)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--target", type=float, default=1.2, help="prod(lam) prod(mu) of generated boxes")
    verify.add_argument("--spread", type=float, default=1.0, help="half-width of the log-weight range")
    verify.add_argument("--sabotage", type=str, default=None, help="negative control, e.g. scale=0.5")
    verify.add_argument("--jobs", type=int, default=1)
    verify.add_argument("--details", action="store_true", help="full per-instance reports")
    verify.add_argument("--timing", action="store_true")
    verify.add_argument("--output", type=str, default=None)
    verify.add_argument("--cap", type=int, default=DEFAULT_CAP)
    verify.set_defaults(func=cmd_verify)

    expo = sub.add_parser("exponent", help="estimate ordinary and multiplicative exponents")
    _add_matrix_args(expo)
    expo.add_argument("--grid", type=str, default=None, help="t0=2,ratio=2,steps=13[,tail=4]")
    expo.add_argument("--mult-grid", type=str, default=None)
    expo.add_argument("--csv", type=str, default=None, help="write the traces as CSV")
    expo.add_argument("--output", type=str, default=None)
    expo.set_defaults(func=cmd_exponent)

    transfer = sub.add_parser("transfer", help="per-scale exponent transfer check")
    _add_matrix_args(transfer)
    transfer.add_argument("--kind", choices=["ordinary", "multiplicative"], default="ordinary")
    transfer.add_argument("--s0", type=float, default=2.0)
    transfer.add_argument("--ratio", type=float, default=1.1)
    transfer.add_argument("--scales", type=int, default=50)
    transfer.add_argument("--output", type=str, default=None)
    transfer.set_defaults(func=cmd_transfer)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InputError, DimensionError, DomainError, PreconditionError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
