"""Command-line entry points.

Subcommands::

    geopinn mesh <cfg> [--out FILE]              generate and write the mesh
    geopinn train <cfg> [--out DIR] [--seed N]   train; checkpoint + history
    geopinn eval <cfg> --checkpoint PATH [--out DIR] [--params v ...]
    geopinn oracle <cfg> [--out DIR]             classical solve per test point
    geopinn sample-source <cfg> --seed N [--count K] [--out DIR]

Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cases, gpfield, model, physics
from .grid import GridError, GridField, write_field_file, write_mesh_file


def _build(path):
    return cases.build_case(path)


def cmd_mesh(args) -> int:
    case = _build(args.config)
    out = args.out or f"{case.name}.mesh"
    write_mesh_file(out, case.train_points[0].mesh)
    print(f"wrote {out}")
    return 0


def cmd_train(args) -> int:
    case = _build(args.config)
    if args.seed is not None:
        case.hyper.seed = args.seed
    out_dir = args.out or f"{case.name}_run"
    result = cases.train(case, out_dir)
    print(f"trained {case.name}: {result.iterations} iterations, "
          f"final loss {result.final_loss:.6e}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"history:    {result.history_path}")
    return 0


def cmd_eval(args) -> int:
    case = _build(args.config)
    net, _, _ = model.load_checkpoint(args.checkpoint)
    points = case.test_points
    if args.params:
        wanted = {f"{float(v):g}" for v in args.params}
        pool = {p.label: p for p in case.train_points + case.test_points}
        missing = wanted - set(pool)
        if missing:
            raise GridError(f"unknown parameter labels: {sorted(missing)}")
        points = [pool[lbl] for lbl in sorted(wanted, key=float)]
    rows = cases.evaluate(net, case, points, out_dir=args.out)
    channels = ",".join(f"res_{c}" for c in physics.EQUATION_CHANNELS[case.pde])
    print(f"label,error,plain_ratio,{channels}")
    for row in rows:
        err = f"{row.errors['T']:.6f}" if row.errors else "property-only"
        ratio = f"{row.plain_ratio['T']:.6f}" if row.plain_ratio else "n/a"
        print(f"{row.label},{err},{ratio}," + ",".join(f"{v:.6e}" for v in row.residual_ms))
    return 0


def cmd_oracle(args) -> int:
    case = _build(args.config)
    if case.pde == "ns":
        print("no classical oracle for Navier-Stokes cases", file=sys.stderr)
        return 2
    out_dir = args.out or f"{case.name}_oracle"
    os.makedirs(out_dir, exist_ok=True)
    for pt in case.test_points:
        ref = cases.oracle_reference(pt, case)
        path = os.path.join(out_dir, f"{case.name}_{pt.label}.oracle")
        write_field_file(path, GridField(values=ref[None], names=("T",)))
        print(f"solved {pt.label}: wrote {path}")
    return 0


def cmd_sample_source(args) -> int:
    case = _build(args.config)
    if case.kl_basis is None:
        print("case has no random-source parameterization", file=sys.stderr)
        return 1
    out_dir = args.out or f"{case.name}_sources"
    os.makedirs(out_dir, exist_ok=True)
    fields = gpfield.sample_many(case.kl_basis, args.count, seed=args.seed)
    for i in range(args.count):
        path = os.path.join(out_dir, f"source_{args.seed}_{i}.field")
        write_field_file(path, GridField(values=fields[i][None], names=("f",)))
    print(f"wrote {args.count} sampled source fields to {out_dir}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geopinn",
                                     description="physics-constrained CNN PDE solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate the case mesh")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("train", help="train the case")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out")
    p.add_argument("--params", nargs="*")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="classical reference solve")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sample-source", help="emit sampled source fields")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_source)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (GridError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, GridError) and not isinstance(exc, cases.ConfigError) else 1
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
