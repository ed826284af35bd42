"""Command-line entry point: ``rareq quantize | std | demo``.

Exit codes: 0 success, 2 bad input or unmet precondition, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import io
from .demo import DemoConfig, run_demo
from .diagnostics import std_centroid
from .quantizer import LloydConfig, SampleBatch, find_prototypes

log = logging.getLogger("rareq")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
SEED_ENV = "RAREQ_SEED"


class NumericFailure(ArithmeticError):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _resolve_seed(arg) -> int:
    if arg is not None:
        return int(arg)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins timestamps for byte-reproducible manifests.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return datetime.fromtimestamp(t, tz=timezone.utc).isoformat()


def _load_batch(args) -> SampleBatch:
    points = io.read_points_csv(args.data, header=args.header)
    if args.weights == "unit":
        weights = np.ones(len(points))
    else:
        weights = io.read_weights_csv(args.weights, header=args.header)
        if len(weights) != len(points):
            raise ValueError(f"{len(points)} points in {args.data} but "
                             f"{len(weights)} weights in {args.weights}")
    return SampleBatch(points, weights)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise NumericFailure("non-finite values in results")


def cmd_quantize(args) -> int:
    batch = _load_batch(args)
    cfg = LloydConfig(nb_cells=args.cells, multistart=args.multistart, max_iter=args.max_iter,
                      tol=args.tol, seed=_resolve_seed(args.seed), threads=args.threads)
    res = find_prototypes(batch, cfg)
    _check_finite(res.codebook, res.masses, [res.distortion])
    io.save_result(res, args.out)
    log.info("wrote %s (distortion %.6g, converged=%s)", args.out, res.distortion, res.converged)
    return EXIT_OK


def _parse_cells(text):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"--cells must be a comma-separated list of integers, got {text!r}") from None


def cmd_std(args) -> int:
    batch = _load_batch(args)
    codebooks = [io.load_codebook(p) for p in args.prototypes]
    rep = std_centroid(batch, codebooks, cells=_parse_cells(args.cells), nv=args.nv,
                       threads=args.threads)
    for cells in rep.cells:
        _check_finite(*[c.std for c in cells if c.std is not None])
    io.dump_json(io.std_report_to_dict(rep), args.out)
    log.info("wrote %s (%d batches of %d)", args.out, rep.n_batches, rep.nv)
    return EXIT_OK


def write_demo_outputs(report, out_dir: Path, started: str) -> dict:
    """Write every demo artifact into ``out_dir``; returns the manifest dict."""
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []

    def emit(name):
        files.append(name)
        return out_dir / name

    masses = {}
    for tag, path in (("mc", report.mc), ("is", report.is_)):
        io.save_result(path.result, emit(f"quantization_{tag}.json"))
        io.dump_json(io.std_report_to_dict(path.std_report), emit(f"std_{tag}.json"))
        scatter = emit(f"scatter_{tag}.csv")
        protos = emit(f"prototypes_{tag}.csv")
        io.write_scatter_csv(scatter, path.fit_batch.points, path.fit_batch.weights,
                             path.result.assignment)
        io.write_prototypes_csv(protos, path.result.codebook, path.result.masses)
        title = "classical Lloyd" if tag == "mc" else "importance sampling weights"
        emit(f"scatter_{tag}.svg").write_text(io.svg_from_csv(scatter, protos, title))
        masses[tag] = {"prototypes": path.result.codebook, "normalized": path.masses,
                       "unnormalized": path.masses_unnormalized}
    masses["is_zero_point_mass"] = report.zero_mass_is
    io.dump_json(masses, emit("masses.json"))

    manifest = {
        "config": {**report.config.to_dict(), "alpha": report.alpha},
        "inputs": [],
        "outputs": sorted(files),
        "software": {"package": "rareq", "version": _version(),
                     "numpy": np.__version__, "python": sys.version.split()[0]},
        "timestamps": {"started": started, "finished": _timestamp()},
    }
    io.dump_json(manifest, out_dir / "manifest.json")
    return manifest


def cmd_demo(args) -> int:
    started = _timestamp()
    overrides = {k: getattr(args, k) for k in
                 ("sigma1", "sigma2", "p_zero", "n_fit", "n_eval", "multistart", "nv",
                  "max_iter", "tol", "threads") if getattr(args, k) is not None}
    if args.cells is not None:
        overrides["nb_cells"] = args.cells
    cfg = DemoConfig(seed=_resolve_seed(args.seed), **overrides)
    report = run_demo(cfg)
    for path in (report.mc, report.is_):
        _check_finite(path.result.codebook, path.masses)
    write_demo_outputs(report, Path(args.out_dir), started)
    log.info("demo written to %s (alpha=%.10f)", args.out_dir, report.alpha)
    return EXIT_OK


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV of points, one per row")
    p.add_argument("--weights", default="unit",
                   help='CSV with one weight per row, or "unit" for all ones (default)')
    p.add_argument("--header", action="store_true", help="skip the first row of every CSV")
    p.add_argument("--threads", type=int, default=1, help="worker threads (1 = reference)")
    p.add_argument("--out", required=True, help="output JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rareq",
        description="Importance-sampling weighted quantization for rare-event outputs.",
        epilog=f"If --seed is omitted, ${SEED_ENV} is used, then 0.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="fit prototypes with weighted Lloyd")
    _add_data_args(q)
    q.add_argument("--cells", type=int, required=True, help="number of cells")
    q.add_argument("--multistart", type=int, default=1)
    q.add_argument("--max-iter", type=int, default=100)
    q.add_argument("--tol", type=float, default=1e-8,
                   help="stop when no prototype moves more than this")
    q.add_argument("--seed", type=int)
    q.set_defaults(func=cmd_quantize)

    s = sub.add_parser("std", help="batch-means std of the centroid estimators")
    _add_data_args(s)
    s.add_argument("--prototypes", required=True, action="append",
                   help="JSON with prototypes (repeat for several codebooks)")
    s.add_argument("--nv", type=int, required=True, help="batch size")
    s.add_argument("--cells", help="comma-separated 0-based cell indices "
                                   "(sorted by first coordinate); default all")
    s.set_defaults(func=cmd_std)

    d = sub.add_parser("demo", help="run the truncated-normal rare-event example")
    d.add_argument("--out-dir", required=True)
    d.add_argument("--seed", type=int)
    d.add_argument("--sigma1", type=float)
    d.add_argument("--sigma2", type=float)
    d.add_argument("--p-zero", type=float)
    d.add_argument("--n-fit", type=int)
    d.add_argument("--n-eval", type=int)
    d.add_argument("--cells", type=int)
    d.add_argument("--multistart", type=int)
    d.add_argument("--nv", type=int)
    d.add_argument("--max-iter", type=int)
    d.add_argument("--tol", type=float)
    d.add_argument("--threads", type=int)
    d.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"rareq: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"rareq: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
