"""``hf`` command line.

Exit codes: 0 completed (whatever the flow outcome), 2 invalid config or
arguments, 3 I/O failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _grid_arg(text):
    try:
        counts = tuple(int(p) for p in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected A,B,C")
    if len(counts) != 3:
        raise argparse.ArgumentTypeError("grid needs three counts")
    return counts


def calibration_report(counts):
    """Quadrature, bracket and degree checks on one grid."""
    from hflab import quaternion as quat
    from hflab.curvature import EPS, structure_functions
    from hflab.framing import reference_left_framing, reference_right_framing
    from hflab.grid import VOLUME, build_grid, integrate
    from hflab.topology import calibration_constant, covering_map_field, degree

    grid = build_grid(*counts)
    q = grid.nodes
    f = q[..., 0] * q[..., 1] ** 2 + q[..., 2] * q[..., 3]  # fixed smooth test function
    grad = grid.gradient(f)
    second = grid.gradient(grad)  # [a, b] = E_b(E_a f)
    bracket = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        res = second[..., b, a] - second[..., a, b] - 2.0 * grad[..., c]
        bracket = max(bracket, float(np.max(np.abs(res))))
    c_left = structure_functions(reference_left_framing(grid))
    c_right = structure_functions(reference_right_framing(grid))
    deg = degree(covering_map_field(grid))
    K = calibration_constant(grid)
    return {
        "grid": grid.resolution,
        "bandlimit": grid.bandlimit,
        "volume": float(integrate(grid, np.ones(grid.shape))),
        "volume_error": float(integrate(grid, np.ones(grid.shape)) - VOLUME),
        "bracket_residual": bracket,
        "left_structure_deviation": float(np.max(np.abs(c_left - 2 * EPS))),
        "right_structure_deviation": float(np.max(np.abs(c_right + 2 * EPS))),
        "degree_calibration": K,
        "degree_calibration_relative_to_16pi2": K / (16 * np.pi**2),
        "covering_map_degree_raw": deg.raw,
        "unit_norm_error": float(np.max(np.abs(np.sum(q**2, axis=-1) - 1.0))),
    }


def cmd_calibrate(args):
    print(json.dumps(calibration_report(args.grid), indent=2))
    return EXIT_OK


def cmd_run(args):
    from hflab.harness import ConfigError, load_config, run_experiment

    try:
        config, text = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        config.output_dir = args.output_dir
    art = run_experiment(config, text, plot=not args.no_plot)
    print(json.dumps({"directory": str(art.directory), "outcome": art.outcome, **art.summary_row()}, indent=2))
    return EXIT_OK


def cmd_sweep(args):
    from hflab.harness import ConfigError, load_config, sweep

    paths = sorted(Path(args.configs).glob("*.cfg")) + sorted(Path(args.configs).glob("*.txt"))
    if not paths:
        print(f"no *.cfg or *.txt configs in {args.configs}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        configs = [load_config(p) for p in paths]
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = sweep(configs, args.output_dir, jobs=args.jobs, plot=not args.no_plot)
    print(f"{len(rows)} runs, summary in {Path(args.output_dir) / 'summary.csv'}")
    return EXIT_OK


def cmd_degree(args):
    from hflab.container import load_gauge
    from hflab.framing import polar_project
    from hflab.topology import degree

    a = load_gauge(args.field)
    r = a if a.is_rotation() else polar_project(a)
    print(json.dumps(degree(r).to_dict(), indent=2))
    return EXIT_OK


def cmd_analyze(args):
    from hflab.analysis import analyze
    from hflab.container import load_framing

    w = load_framing(args.framing)
    print(json.dumps(analyze(w, args.tol).to_dict(), indent=2))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hf", description="Homogeneous flow laboratory on S^3.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="quadrature / bracket / degree calibration report")
    p.add_argument("--grid", type=_grid_arg, default=(16, 16, 32))
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run", help="run one experiment from a key = value config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every config in a directory, write summary.csv")
    p.add_argument("--configs", required=True)
    p.add_argument("--output-dir", default="runs/sweep")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("degree", help="degree of a gauge field stored in a container file")
    p.add_argument("--field", required=True)
    p.set_defaults(func=cmd_degree)

    p = sub.add_parser("analyze", help="LLG check and Lie classification of a stored framing")
    p.add_argument("--framing", required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from hflab.container import ContainerError

    try:
        return args.func(args)
    except ContainerError as exc:
        print(f"bad field file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
