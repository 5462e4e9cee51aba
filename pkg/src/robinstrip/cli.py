"""Command-line front end.

    robinstrip <kind> [--config cfg.json] [--out dir] [--workers n]
               [--mesh-scale f] [--seed u64]

kind is one of: fiber, strip, theorem1, theorem2, corollary, oracle.
Without --config a built-in default configuration for that kind is used.
Exit codes: 0 all verdicts hold or are indeterminate within tolerance,
2 at least one certified violation, 1 execution error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import RobinStripError
from .harness import (
    KINDS,
    ExperimentConfig,
    default_config,
    emit_outputs,
    load_config,
    run_experiment,
)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robinstrip",
        description="Robin eigenvalues on curved strips and convex exteriors",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker pool size")
        p.add_argument("--mesh-scale", type=float, dest="mesh_scale",
                       help="multiply all mesh resolutions")
        p.add_argument("--seed", type=int, help="random seed")
    return parser


def _configure(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
        if config.kind != args.kind:
            raise SystemExit(
                f"config kind {config.kind!r} does not match subcommand {args.kind!r}"
            )
    else:
        config = default_config(args.kind)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.mesh_scale is not None:
        overrides["mesh_scale"] = args.mesh_scale
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        doc = config.to_dict()
        doc.update(overrides)
        config = ExperimentConfig.from_dict(doc)
    return config


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = _configure(args)
        record = run_experiment(config)
        paths = emit_outputs(record, config.out_dir)
    except (RobinStripError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for case in record.cases:
        print(f"{case['verdict']:>13s}  {case['case_id']}")
    print(f"overall: {record.overall}")
    for kind, path in sorted(paths.items()):
        print(f"wrote {path}")
    if record.overall == "fails":
        return 2
    if record.overall == "error":
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
