"""Command-line front end.

Every stochastic subcommand takes an explicit --seed (default 0) and every
JSON output embeds the resolved configuration under "config".  Exit codes:
0 for success or a passing verdict, 1 for a failing test verdict, 2 for
usage or validation problems.  The EPRCHECK_TOL environment variable
overrides the default exact-check tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import serialize
from .bb84 import STRATEGIES, exact_stats, run_protocol
from .checker import DEFAULT_EXACT_TOL, check_conjugate, check_self_checking, empirical_check
from .decompose import decompose
from .errors import ConformanceError, ValidationError
from .gallery import build_classical_source, build_random_extended_ideal, gallery, perturb_source
from .linalg import BipartiteShape
from .sources import build_ideal_source

TOL_ENV_VAR = "EPRCHECK_TOL"


def _default_tol() -> float:
    value = os.environ.get(TOL_ENV_VAR)
    return float(value) if value else DEFAULT_EXACT_TOL


def _emit(payload, out_path: str | None) -> None:
    text = payload if isinstance(payload, str) else serialize.dumps(payload)
    if out_path:
        serialize.write_atomic(out_path, text)
    else:
        sys.stdout.write(text)


def _parse_dims(text: str) -> BipartiteShape:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        return BipartiteShape(parts[0], parts[0])
    if len(parts) == 2:
        return BipartiteShape(parts[0], parts[1])
    raise ValidationError(f"--dims expects 'D' or 'DA,DB', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eprcheck",
        description="Build, certify, and decompose entangled photon-pair source models.",
        epilog=f"Set {TOL_ENV_VAR} to override the default exact-check tolerance "
        f"({DEFAULT_EXACT_TOL:g}).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen_ideal = sub.add_parser("gen-ideal", help="write the ideal 2x2 source")
    gen_ideal.add_argument("--out", default=None)

    gen_ext = sub.add_parser("gen-extended", help="write a random orthogonal-block source")
    gen_ext.add_argument("--blocks", type=int, required=True)
    gen_ext.add_argument("--dims", type=str, required=True, help="'D' or 'DA,DB' per factor")
    gen_ext.add_argument("--seed", type=int, default=0)
    gen_ext.add_argument("--degenerate", action="store_true", help="force equal block weights")
    gen_ext.add_argument("--out", default=None)

    gen_cls = sub.add_parser("gen-classical", help="write the hidden-label counterexample")
    gen_cls.add_argument("--out", default=None)

    pert = sub.add_parser("perturb", help="perturb a source's state or bases")
    pert.add_argument("source")
    pert.add_argument("--epsilon", type=float, required=True)
    pert.add_argument("--mode", choices=("state", "measurement"), required=True)
    pert.add_argument("--seed", type=int, default=0)
    pert.add_argument("--out", default=None)

    chk = sub.add_parser("check", help="run a conformance check on a source file")
    chk.add_argument("source")
    chk.add_argument("--mode", choices=("conjugate", "self", "empirical"), required=True)
    chk.add_argument("--tol", type=float, default=None)
    chk.add_argument("--samples", type=int, default=10000)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--out", default=None)

    dec = sub.add_parser("decompose", help="extract the Bell-block decomposition")
    dec.add_argument("source")
    dec.add_argument("--tol", type=float, default=None)
    dec.add_argument("--out", default=None)

    bb = sub.add_parser("bb84", help="run the BB84 transmission simulation")
    bb.add_argument("source")
    bb.add_argument("--n", type=int, required=True)
    bb.add_argument("--eve", choices=STRATEGIES, default="none")
    bb.add_argument("--seed", type=int, default=0)
    bb.add_argument("--exact", action="store_true", help="enumerate expectations, no sampling")
    bb.add_argument("--format", choices=("json", "csv"), default="json",
                    help="csv emits the per-round record table instead of stats")
    bb.add_argument("--out", default=None)

    gal = sub.add_parser("gallery", help="run the regression corpus and report a summary")
    gal.add_argument("--out-dir", default=None, help="also write each source and a manifest here")
    gal.add_argument("--out", default=None)
    return parser


def _config(args: argparse.Namespace, **extra) -> dict:
    cfg = {"command": args.command, **extra}
    for key in ("tol", "seed", "samples", "epsilon", "mode", "blocks", "dims", "n", "eve"):
        if hasattr(args, key) and getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    return cfg


def _cmd_generate(args) -> int:
    if args.command == "gen-ideal":
        source = build_ideal_source()
    elif args.command == "gen-classical":
        source = build_classical_source()
    else:
        shape = _parse_dims(args.dims)
        source = build_random_extended_ideal(
            args.blocks, shape, np.random.default_rng(args.seed), equal_weights=args.degenerate
        )
    payload = serialize.source_to_json(source)
    payload["config"] = _config(args)
    _emit(payload, args.out)
    return 0


def _cmd_perturb(args) -> int:
    source = serialize.load_source(args.source)
    perturbed = perturb_source(source, args.epsilon, args.mode, np.random.default_rng(args.seed))
    payload = serialize.source_to_json(perturbed)
    payload["config"] = _config(args, input=args.source)
    _emit(payload, args.out)
    return 0


def _cmd_check(args) -> int:
    source = serialize.load_source(args.source)
    tol = args.tol if args.tol is not None else _default_tol()
    if args.mode == "conjugate":
        report = check_conjugate(source, tol)
    elif args.mode == "self":
        report = check_self_checking(source, tol)
    else:
        report = empirical_check(source, args.samples, args.seed, tol)
    payload = serialize.report_to_json(report)
    payload["config"] = _config(args, input=args.source, tol=tol)
    _emit(payload, args.out)
    return 0 if report.passed else 1


def _cmd_decompose(args) -> int:
    source = serialize.load_source(args.source)
    tol = args.tol if args.tol is not None else _default_tol()
    try:
        decomp = decompose(source, tol)
    except ConformanceError as exc:
        payload = serialize.report_to_json(exc.report)
        payload["config"] = _config(args, input=args.source, tol=tol)
        _emit(payload, args.out)
        print(f"eprcheck: {exc}", file=sys.stderr)
        return 1
    payload = serialize.decomposition_to_json(decomp)
    payload["config"] = _config(args, input=args.source, tol=tol)
    _emit(payload, args.out)
    return 0


def _cmd_bb84(args) -> int:
    source = serialize.load_source(args.source)
    if args.exact:
        stats = exact_stats(source, args.eve)
        payload = serialize.stats_to_json(stats, args.eve, None)
        payload["config"] = _config(args, input=args.source)
        _emit(payload, args.out)
        return 0
    records, stats = run_protocol(source, args.n, args.eve, np.random.default_rng(args.seed))
    if args.format == "csv":
        _emit(serialize.records_to_csv(records), args.out)
        return 0
    payload = serialize.stats_to_json(stats, args.eve, args.seed)
    payload["config"] = _config(args, input=args.source)
    _emit(payload, args.out)
    return 0


def _cmd_gallery(args) -> int:
    entries = gallery()
    source_files: dict[str, str] = {}
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        for entry in entries:
            name = f"{entry.name}.json"
            serialize.write_atomic(
                os.path.join(args.out_dir, name), serialize.dumps(serialize.source_to_json(entry.source))
            )
            source_files[entry.name] = name

    summary = []
    all_ok = True
    for entry in entries:
        actual = {}
        for test_id, runner in (("conjugate", check_conjugate), ("self_checking", check_self_checking)):
            if test_id not in entry.expected:
                continue
            actual[test_id] = runner(entry.source, _default_tol()).verdict
        ok = actual == dict(entry.expected)
        all_ok = all_ok and ok
        summary.append({"name": entry.name, "expected": dict(entry.expected), "actual": actual, "ok": ok})

    payload = {"entries": summary, "all_ok": all_ok, "config": _config(args)}
    if args.out_dir:
        manifest = serialize.manifest_to_json(entries, source_files)
        serialize.write_atomic(os.path.join(args.out_dir, "manifest.json"), serialize.dumps(manifest))
        payload["manifest"] = os.path.join(args.out_dir, "manifest.json")
    _emit(payload, args.out)
    return 0 if all_ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "gen-ideal": _cmd_generate,
        "gen-extended": _cmd_generate,
        "gen-classical": _cmd_generate,
        "perturb": _cmd_perturb,
        "check": _cmd_check,
        "decompose": _cmd_decompose,
        "bb84": _cmd_bb84,
        "gallery": _cmd_gallery,
    }
    try:
        return handlers[args.command](args)
    except (ValidationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"eprcheck: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
