"""Command line interface: ``wcca fit|scores|simulate|plot-lambdas|whiten``.

Exit codes::

    0  success
    2  usage error (bad flags)
    3  input file not found or unreadable
    4  CSV parse error
    5  dimension mismatch
    6  constant column
    7  singular correlation estimate
    8  other invalid input
    9  unreadable or malformed model file
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .cca import fit_cca, scores
from .errors import (
    ConstantColumnError,
    DimensionError,
    SingularityError,
    ValidationError,
    WccaError,
)
from .io import (
    CsvParseError,
    ModelFormatError,
    TabularMatrix,
    lambdas_svg,
    load_model,
    read_matrix,
    save_model,
    simulation_svg,
    write_matrix,
)
from .simulation import DEFAULT_LAMBDAS, DEFAULT_NS, SimulationConfig, run_sign_recovery
from .shrinkage import shrinkage_intensity, standardize
from .whitening import block_whitening, pca_cor_rotation

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_PARSE = 4
EXIT_DIMENSION = 5
EXIT_CONSTANT = 6
EXIT_SINGULAR = 7
EXIT_INVALID = 8
EXIT_MODEL = 9

THREADS_ENV = "WCCA_NUM_THREADS"


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _row_ids_flag(text):
    return {"auto": "auto", "yes": True, "no": False}[text]


def _shrinkage_flag(text):
    if text in ("auto", "none"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("shrinkage must be auto, none or a number in [0, 1]")
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("shrinkage intensity must lie in [0, 1]")
    return v


def _read(path, args):
    return read_matrix(path, row_ids=_row_ids_flag(args.row_ids))


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _close_out(fh):
    if fh is not sys.stdout:
        fh.close()


def cmd_fit(args):
    x = _read(args.x, args)
    y = _read(args.y, args)
    model = fit_cca(x.values, y.values, scale=args.scale, shrinkage=args.shrinkage)
    if args.out:
        save_model(model, args.out)
    lam = "none" if model.shrink_lambda is None else f"{model.shrink_lambda:.6f}"
    print(f"n: {model.n_samples}  p: {model.p}  q: {model.q}")
    print(f"m: {model.m}")
    print(f"shrinkage intensity: {lam}")
    print("lambdas:")
    for i, v in enumerate(model.lambdas, 1):
        print(f"  {i:3d} {v: .6f}")
    return EXIT_OK


def cmd_scores(args):
    model = load_model(args.model)
    x = _read(args.x, args)
    y = _read(args.y, args)
    sx, sy = scores(model, x.values, y.values)
    ids = x.row_ids or y.row_ids or [str(i) for i in range(1, sx.shape[0] + 1)]
    names = [f"cca_x_{i}" for i in range(1, model.m + 1)]
    names += [f"cca_y_{i}" for i in range(1, model.m + 1)]
    out = _open_out(args.out)
    try:
        write_matrix(out, TabularMatrix(names, np.hstack([sx, sy]), ids), id_header="row_id")
    finally:
        _close_out(out)
    return EXIT_OK


def cmd_simulate(args):
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get(THREADS_ENV, "1") or 1)
    config = SimulationConfig(
        p=args.p, q=args.q,
        lambda_grid=args.lambdas, n_grid=args.ns,
        replicates=args.replicates, seed=args.seed, n_jobs=jobs,
    )
    report = run_sign_recovery(config)
    out = _open_out(args.out)
    try:
        out.write(report.to_csv())
    finally:
        _close_out(out)
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(simulation_svg(report))
    print(f"{len(report.cells)} cells in {report.elapsed:.1f}s", file=sys.stderr)
    return EXIT_OK


def cmd_plot_lambdas(args):
    model = load_model(args.model)
    svg = lambdas_svg(model.lambdas)
    out = _open_out(args.out)
    try:
        out.write(svg)
    finally:
        _close_out(out)
    return EXIT_OK


def cmd_whiten(args):
    x = _read(args.x, args)
    y = _read(args.y, args) if args.y else None
    if args.target == "y" and y is None:
        raise ValidationError("--target y needs --y")
    if args.method == "CCA":
        if y is None:
            raise ValidationError("CCA whitening needs both --x and --y")
        model = fit_cca(x.values, y.values, scale=True, shrinkage=args.shrinkage)
        sx, sy = scores(model, x.values, y.values)
        block, white = (x, sx) if args.target == "x" else (y, sy)
    else:
        block = x if args.target == "x" else y
        z, mean, sd = standardize(block.values)
        lam = args.shrinkage
        lam = shrinkage_intensity(z) if lam == "auto" else 0.0 if lam == "none" else lam
        cor = (1 - lam) * (z.T @ z) / (z.shape[0] - 1)
        np.fill_diagonal(cor, 1.0)
        Q = np.eye(cor.shape[0]) if args.method == "ZCA-cor" else pca_cor_rotation(cor)
        res = block_whitening((cor + cor.T) / 2, sd**2, Q)
        white = (block.values - mean) @ res.whitening_matrix.T
    prefix = {"ZCA-cor": "zca", "PCA-cor": "pca", "CCA": "cca"}[args.method]
    names = [f"{prefix}_{args.target}_{i}" for i in range(1, white.shape[1] + 1)]
    return _write_white(args, white, names, block.row_ids)


def _write_white(args, white, names, ids):
    out = _open_out(args.out)
    try:
        write_matrix(out, TabularMatrix(names, white, ids), id_header="row_id")
    finally:
        _close_out(out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wcca", description="CCA as a whitening transformation"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--row-ids", choices=("auto", "yes", "no"), default="auto",
                       help="first CSV column holds row identifiers (default: detect)")

    p = sub.add_parser("fit", help="fit CCA and write a model file")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--scale", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--shrinkage", type=_shrinkage_flag, default="auto")
    p.add_argument("--out", help="model JSON path")
    add_io(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scores", help="canonical variables for paired data")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", help="CSV path (default: stdout)")
    add_io(p)
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("simulate", help="sign-recovery simulation")
    p.add_argument("--p", type=int, default=60)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--lambdas", type=_float_list, default=list(DEFAULT_LAMBDAS))
    p.add_argument("--ns", type=_int_list, default=list(DEFAULT_NS))
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes (default: ${THREADS_ENV} or 1)")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--svg", help="write a line chart here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot-lambdas", help="SVG bar chart of a model's lambdas")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="SVG path (default: stdout)")
    p.set_defaults(func=cmd_plot_lambdas)

    p = sub.add_parser("whiten", help="ZCA-cor, PCA-cor or CCA whitening of data")
    p.add_argument("--x", required=True)
    p.add_argument("--y")
    p.add_argument("--method", choices=("ZCA-cor", "PCA-cor", "CCA"), default="ZCA-cor")
    p.add_argument("--target", choices=("x", "y"), default="x")
    p.add_argument("--shrinkage", type=_shrinkage_flag, default="none")
    p.add_argument("--out", help="CSV path (default: stdout)")
    add_io(p)
    p.set_defaults(func=cmd_whiten)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        code, msg = EXIT_FILE, f"file not found: {exc.filename}"
    except ModelFormatError as exc:
        code, msg = EXIT_MODEL, str(exc)
    except CsvParseError as exc:
        code, msg = EXIT_PARSE, str(exc)
    except DimensionError as exc:
        code, msg = EXIT_DIMENSION, str(exc)
    except ConstantColumnError as exc:
        code, msg = EXIT_CONSTANT, str(exc)
    except SingularityError as exc:
        code, msg = EXIT_SINGULAR, str(exc)
    except (ValidationError, WccaError) as exc:
        code, msg = EXIT_INVALID, str(exc)
    except OSError as exc:
        code, msg = EXIT_FILE, str(exc)
    print(f"error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
