"""Command-line front end.

    vgf train    --config cfg.json --out rundir
    vgf eval     --checkpoint model.json --source "0.3,0.4" --out field.csv
    vgf validate --case disk-dirichlet --out rundir
    vgf ablate   --study hyper-vs-single --out rundir
    vgf app      --task commute --checkpoint model.json --x "..." --y "..." --out rundir

Exit codes: 0 success, 2 usage/config problem, 3 numerical failure.
The VGF_SEED environment variable overrides the config seed and is
recorded in the run manifest.
"""

from __future__ import annotations

import argparse
import sys

from .errors import EXIT_NUMERICAL, EXIT_USAGE, NumericalFailure, UsageError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vgf",
        description="Learn and use variational Green functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model from a config file")
    p.add_argument("--config", required=True, help="run config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--force", action="store_true",
                   help="allow reuse of a directory holding a previous run")
    p.add_argument("--quiet", action="store_true", help="suppress progress chatter")
    p.set_defaults(entry="train")

    p = sub.add_parser("eval", help="dump G(., s) on a grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True, help='source point, e.g. "0.3,0.4"')
    p.add_argument("--grid", type=int, default=128, help="grid nodes per axis")
    p.add_argument("--cond", default=None, help='conditioning, e.g. "k=2.0" or "z=0.3"')
    p.add_argument("--out", required=True, help="output file (.csv or .ppm)")
    p.set_defaults(entry="eval")

    p = sub.add_parser("validate", help="compare a model against a reference solver")
    p.add_argument("--case", required=True, help="benchmark case name")
    p.add_argument("--config", default=None,
                   help="override the shipped config for this case")
    p.add_argument("--checkpoint", default=None,
                   help="evaluate this checkpoint instead of training")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(entry="validate")

    p = sub.add_parser("ablate", help="paired-seed training studies")
    p.add_argument("--study", required=True, help="hyper-vs-single or sifting")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=3, help="number of paired seeds")
    p.add_argument("--parallel", action="store_true",
                   help="run each training in its own process")
    p.add_argument("--force", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(entry="ablate")

    p = sub.add_parser("app", help="distances, clustering, skinning, inverse fits")
    p.add_argument("--task", required=True,
                   help="commute, biharmonic-distance, cluster, skin, or inverse")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cond", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.add_argument("--x", action="append", help="first point of a pair (repeatable)")
    p.add_argument("--y", action="append", help="second point of a pair (repeatable)")
    p.add_argument("--points", default=None, help="CSV of points")
    p.add_argument("--sample", type=int, default=None,
                   help="draw this many interior points instead of --points")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--iters", type=int, default=40)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--source", default=None, help="handle location (skin)")
    p.add_argument("--transform", default=None,
                   help='affine rows, e.g. "1,0,0.2;0,1,0" (skin / inverse init)')
    p.add_argument("--observations", default=None,
                   help="CSV of observed displacements (inverse)")
    p.add_argument("--init-source", default=None, help="starting source guess (inverse)")
    p.add_argument("--init-transform", default=None)
    p.add_argument("--cache-interval", type=int, default=50)
    p.add_argument("--cache-samples", type=int, default=10_000)
    p.set_defaults(entry="app")

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["vgf"] + list(argv)

    # imports deferred so --help stays fast and dependency-light
    from . import commands

    entry = {
        "train": commands.cmd_train,
        "eval": commands.cmd_eval,
        "validate": commands.cmd_validate,
        "ablate": commands.cmd_ablate,
        "app": commands.cmd_app,
    }[args.entry]
    try:
        return entry(args)
    except UsageError as exc:
        print(f"vgf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"vgf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
