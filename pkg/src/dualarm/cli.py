"""Command-line interface.

Subcommands: ``optimize``, ``lift-comparison``, ``bar-lift``, ``pick``,
``build-shapespace`` and ``infer``. Scenario paths may use the ``pkg:``
prefix to reference files shipped inside the package
(e.g. ``pkg:scenarios/lift_comparison.yaml``).

Exit code 0 means every requested trial completed; per-trial success lives
in the report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def resolve_data_path(value: str) -> Path:
    if value.startswith("pkg:"):
        from importlib.resources import files

        return Path(str(files("dualarm.data").joinpath(value[4:])))
    return Path(value)


def _add_common(parser, trials_default=None):
    parser.add_argument("--scenario", required=True,
                        help="scenario YAML (supports the pkg: prefix)")
    parser.add_argument("--out", help="write the JSON report here")
    parser.add_argument("--seed", type=int, help="override the base seed")
    parser.add_argument("--trials", type=int, default=trials_default,
                        help="override the scenario's trial count")


def _load(args):
    from .pipeline import load_scenario

    overrides = {"base_seed": args.seed, "trials": args.trials}
    return load_scenario(resolve_data_path(args.scenario), overrides)


def _emit(report: dict, out: str | None):
    from .pipeline import dump_report, format_table, write_report

    if out:
        write_report(out, report)
        print(f"report written to {out}")
    else:
        sys.stdout.write(dump_report(report))
    table = format_table(report)
    if table:
        print(table)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dualarm",
        description="Dual-arm trajectory optimization and grasp-transfer benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="one seeded trajectory optimization run")
    p.add_argument("--scenario", required=True)
    p.add_argument("--closure", choices=("on", "off"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float, help="wall-clock budget in seconds")
    p.add_argument("--report", help="write the JSON report here")

    for name in ("lift-comparison", "bar-lift", "pick"):
        _add_common(sub.add_parser(name, help=f"run the {name} benchmark"))

    p = sub.add_parser("build-shapespace", help="register a category and save the bundle")
    p.add_argument("--category", required=True,
                   help="directory with canonical.xyz, train_*.xyz and grasps.yaml")
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("infer", help="estimate pose and latent shape for one cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--space", help="prebuilt shape-space bundle (npz)")
    p.add_argument("--category", help="category directory to build the space from")
    p.add_argument("--components", type=int, default=8)
    p.add_argument("--out")

    args = parser.parse_args(argv)

    if args.command == "optimize":
        from .pipeline import load_scenario, run_optimize_single

        scenario = load_scenario(resolve_data_path(args.scenario))
        report = run_optimize_single(scenario, args.closure == "on", args.seed,
                                     args.budget)
        if args.report:
            from .pipeline import write_report

            write_report(args.report, report)
            print(f"report written to {args.report}")
        else:
            from .pipeline import dump_report

            sys.stdout.write(dump_report(report))
        trial = report["trial"]
        print(f"success={trial['success']} iterations={trial['iterations']} "
              f"runtime={trial['timing']['runtime_s']:.2f}s")
        return 0

    if args.command == "lift-comparison":
        from .pipeline import run_lift_comparison

        _emit(run_lift_comparison(_load(args)), args.out)
        return 0

    if args.command == "bar-lift":
        from .pipeline import run_bar_lift

        _emit(run_bar_lift(_load(args)), args.out)
        return 0

    if args.command == "pick":
        from .pipeline import run_pick

        _emit(run_pick(_load(args)), args.out)
        return 0

    if args.command == "build-shapespace":
        from .pipeline import build_space_bundle

        space = build_space_bundle(resolve_data_path(args.category),
                                   args.out, args.components)
        print(f"shape space with {space.n_components} components over "
              f"{space.n_points} points written to {args.out}")
        return 0

    if args.command == "infer":
        from .shapespace import (
            estimate_initial_pose,
            infer_latent,
            load_cloud,
            load_space,
        )

        if bool(args.space) == bool(args.category):
            parser.error("provide exactly one of --space or --category")
        if args.space:
            space = load_space(args.space)
        else:
            from .pipeline import build_space_bundle
            import tempfile

            with tempfile.NamedTemporaryFile(suffix=".npz") as tmp:
                space = build_space_bundle(resolve_data_path(args.category),
                                           tmp.name, args.components)
        observed = load_cloud(resolve_data_path(args.cloud))
        pose = estimate_initial_pose(observed, space)
        descriptor = infer_latent(space, observed, pose)
        result = {
            "schema": "dualarm-infer/1",
            "residual_m": descriptor.residual,
            "converged": descriptor.converged,
            "coordinates": descriptor.coordinates.tolist(),
            "alignment": {
                "xyz": descriptor.alignment.translation.tolist(),
                "rpy": descriptor.alignment.rpy().tolist(),
            },
        }
        text = json.dumps(result, indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
            print(f"result written to {args.out}")
        else:
            sys.stdout.write(text)
        print(f"residual {1000 * descriptor.residual:.2f} mm, "
              f"|z| {np.linalg.norm(descriptor.coordinates):.3f}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
