"""Command-line surface: score, batch, saliency, distort, evaluate.

Data goes to stdout (or the chosen output file), diagnostics go to stderr,
and identical invocations produce byte-identical data output: anything
nondeterministic (stage timings) is printed to stderr under --verbose only.
Exit status 0 means no fatal error; 2 specifically means a missing file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .cloud import load_ply, save_ply
from .distortion import KINDS, DistortionSpec
from .distortion import apply as apply_distortion
from .errors import (
    ConfigError,
    CorrelationError,
    FitError,
    ParseError,
    PoolingError,
    PqsmError,
)
from .evaluation import fit_logistic, format_report, plcc, read_pairs_csv, rmse, srocc
from .images import raster_to_image, write_pgm16, write_ppm
from .metric import T1_DEFAULT, T2_DEFAULT, MetricConfig, compute_pqsm
from .neighborhood import KNN_DEFAULT
from .projection import ProjectionConfig, project
from .saliency import attach_saliency, build_saliency_field, make_backend, saliency_2d

JOBS_ENV_VAR = "PQSM_JOBS"


def _add_projection_flags(parser):
    parser.add_argument(
        "--views", type=int, default=6, help="view count (fixed at 6; flag reserved)"
    )
    parser.add_argument(
        "--resolution", type=int, default=512, help="pixels along the longest bbox side"
    )


def _add_saliency_flag(parser):
    parser.add_argument(
        "--saliency",
        default="spectral-residual",
        metavar="BACKEND",
        help="2D saliency backend: spectral-residual, flat, or file:<dir>",
    )


def _add_metric_flags(parser):
    parser.add_argument("--t1", type=float, default=T1_DEFAULT, help="geometry/color stabilizer")
    parser.add_argument("--t2", type=float, default=T2_DEFAULT, help="saliency stabilizer")
    parser.add_argument(
        "--features", default="F1,F2,F3", help="comma-separated subset of F1,F2,F3"
    )
    parser.add_argument("--pooling", default="SAW", help="SAW or AVE")
    parser.add_argument(
        "--knn-k", type=int, default=KNN_DEFAULT, dest="knn_k",
        help="k for the support-radius estimate",
    )


def _projection_config(args) -> ProjectionConfig:
    return ProjectionConfig(views=args.views, resolution=args.resolution)


def _metric_config(args) -> MetricConfig:
    features = tuple(f.strip() for f in args.features.split(",") if f.strip())
    return MetricConfig(t1=args.t1, t2=args.t2, features=features, pooling=args.pooling)


def _print_timings(report):
    for stage, seconds in report.timings.items():
        print(f"[timing] {stage}: {seconds:.3f}s", file=sys.stderr)


def cmd_score(args) -> int:
    reference = load_ply(args.reference)
    distorted = load_ply(args.distorted)
    report = compute_pqsm(
        reference,
        distorted,
        projection_config=_projection_config(args),
        saliency_backend=make_backend(args.saliency),
        config=_metric_config(args),
        knn_k=args.knn_k,
    )
    if args.json:
        print(json.dumps(report.to_json_dict(include_points=args.verbose), sort_keys=True, indent=2))
    else:
        if args.verbose:
            sys.stdout.write(report.to_text(include_points=True))
        print(f"Q = {report.q:.6f}")
    if args.verbose:
        _print_timings(report)
    return 0


def _read_manifest(path):
    import csv as _csv

    rows = []
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            cells = [cell.strip() for cell in row]
            if line_no == 1 and cells[0].lower() in ("ref", "reference"):
                continue
            if len(cells) not in (2, 3):
                raise ParseError(f"{path}: expected 'ref,dist[,mos]'", line_no)
            mos = None
            if len(cells) == 3 and cells[2]:
                try:
                    mos = float(cells[2])
                except ValueError:
                    raise ParseError(f"{path}: bad MOS value {cells[2]!r}", line_no) from None
            rows.append((cells[0], cells[1], mos))
    if not rows:
        raise ConfigError(f"{path}: manifest has no rows")
    return rows


def _score_row(payload):
    """Score one manifest row; returns (radius, q, error). Runs in worker
    processes, so failures are captured rather than raised."""
    try:
        reference = load_ply(payload["ref"])
        distorted = load_ply(payload["dist"])
        report = compute_pqsm(
            reference,
            distorted,
            projection_config=ProjectionConfig(
                views=payload["views"], resolution=payload["resolution"]
            ),
            saliency_backend=make_backend(payload["saliency"]),
            config=MetricConfig(
                t1=payload["t1"],
                t2=payload["t2"],
                features=payload["features"],
                pooling=payload["pooling"],
            ),
            knn_k=payload["knn_k"],
        )
        return report.radius, report.q, None
    except Exception as exc:  # a bad row must not void the batch
        return None, None, f"{type(exc).__name__}: {exc}"


def cmd_batch(args) -> int:
    import csv as _csv

    rows = _read_manifest(args.manifest)
    for ref, dist, _ in rows:
        for p in (ref, dist):
            if not Path(p).exists():
                raise FileNotFoundError(2, "No such file or directory", p)

    config = _metric_config(args)  # validate flags before spawning workers
    payloads = [
        {
            "ref": ref,
            "dist": dist,
            "views": args.views,
            "resolution": args.resolution,
            "saliency": args.saliency,
            "t1": config.t1,
            "t2": config.t2,
            "features": config.features,
            "pooling": config.pooling,
            "knn_k": args.knn_k,
        }
        for ref, dist, _ in rows
    ]
    jobs = args.jobs if args.jobs is not None else int(os.environ.get(JOBS_ENV_VAR, "1"))
    if jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {jobs}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_row, payloads))
    else:
        results = [_score_row(p) for p in payloads]

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = _csv.writer(out, lineterminator="\n")
        writer.writerow(["ref", "dist", "r", "q", "error"])
        failures = 0
        scored = []
        for (ref, dist, mos), (radius, q, error) in zip(rows, results):
            if error is None:
                writer.writerow([ref, dist, f"{radius:.12g}", f"{q:.12g}", ""])
                scored.append((q, mos))
            else:
                failures += 1
                writer.writerow([ref, dist, "", "", error])
        with_mos = [(q, mos) for q, mos in scored if mos is not None]
        if with_mos:
            _write_footer(out, with_mos)
        if failures:
            print(f"warning: {failures} of {len(rows)} rows failed", file=sys.stderr)
    finally:
        if args.output:
            out.close()
    return 0


def _write_footer(out, with_mos):
    objective = np.array([q for q, _ in with_mos])
    subjective = np.array([mos for _, mos in with_mos])
    try:
        params = fit_logistic(objective, subjective)
        out.write(f"PLCC={plcc(params(objective), subjective):.6f}\n")
        out.write(f"SROCC={srocc(objective, subjective):.6f}\n")
        out.write(f"RMSE={rmse(objective, subjective, params):.6f}\n")
    except (CorrelationError, FitError) as exc:
        print(f"warning: correlation footer skipped: {exc}", file=sys.stderr)


def cmd_saliency(args) -> int:
    cloud = load_ply(args.input)
    config = _projection_config(args)
    backend = make_backend(args.saliency)
    views = project(cloud, config)
    field = build_saliency_field(cloud, config, backend, views=views)
    save_ply(attach_saliency(cloud, field), args.output, format=args.format)

    if args.dump_views:
        directory = Path(args.dump_views)
        directory.mkdir(parents=True, exist_ok=True)
        for idx, view in enumerate(views):
            write_ppm(directory / f"texture_{idx}.ppm", raster_to_image(view.texture))
            write_pgm16(directory / f"depth_{idx}.pgm", raster_to_image(_depth_image(view)))
            sal = saliency_2d(view, backend, idx)
            write_pgm16(directory / f"{idx}.pgm", raster_to_image(sal))
    return 0


def _depth_image(view):
    """Occupied depths normalized to (0, 1] with nearer = brighter; empty = 0."""
    occupied = view.point_index >= 0
    out = np.zeros(view.depth.shape)
    if not occupied.any():
        return out
    depths = view.depth[occupied]
    lo, hi = depths.min(), depths.max()
    if hi > lo:
        out[occupied] = 1.0 - (depths - lo) / (hi - lo)
    else:
        out[occupied] = 1.0
    return out


def cmd_distort(args) -> int:
    cloud = load_ply(args.input)
    spec = DistortionSpec(kind=args.kind, level=args.level, seed=args.seed)
    save_ply(apply_distortion(cloud, spec), args.output, format=args.format)
    sidecar = Path(args.output).with_suffix(".json")
    with open(sidecar, "w") as fh:
        json.dump({"kind": spec.kind, "level": spec.level, "seed": spec.seed}, fh, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_evaluate(args) -> int:
    _, objective, subjective = read_pairs_csv(args.scores)
    sys.stdout.write(format_report(objective, subjective))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqsm",
        description="Saliency-weighted full-reference point cloud quality metric",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score one distorted cloud against its reference")
    p_score.add_argument("reference")
    p_score.add_argument("distorted")
    _add_projection_flags(p_score)
    _add_saliency_flag(p_score)
    _add_metric_flags(p_score)
    p_score.add_argument("--json", action="store_true", help="emit the full report as JSON")
    p_score.add_argument("--verbose", action="store_true")
    p_score.set_defaults(func=cmd_score)

    p_batch = sub.add_parser("batch", help="score a CSV manifest of ref,dist[,mos] rows")
    p_batch.add_argument("manifest")
    p_batch.add_argument("-o", "--output", help="output CSV path (default stdout)")
    p_batch.add_argument(
        "--jobs", type=int, default=None,
        help=f"parallel workers (default ${JOBS_ENV_VAR} or 1)",
    )
    _add_projection_flags(p_batch)
    _add_saliency_flag(p_batch)
    _add_metric_flags(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    p_sal = sub.add_parser("saliency", help="attach a saliency channel to a cloud")
    p_sal.add_argument("input")
    p_sal.add_argument("output")
    _add_projection_flags(p_sal)
    _add_saliency_flag(p_sal)
    p_sal.add_argument("--dump-views", metavar="DIR", help="write per-view PPM/PGM rasters")
    p_sal.add_argument("--format", default="binary", choices=("binary", "ascii"))
    p_sal.set_defaults(func=cmd_saliency)

    p_dist = sub.add_parser("distort", help="generate a distorted copy of a cloud")
    p_dist.add_argument("input")
    p_dist.add_argument("output")
    p_dist.add_argument("--kind", required=True, choices=KINDS)
    p_dist.add_argument("--level", required=True, type=float)
    p_dist.add_argument("--seed", type=int, default=0)
    p_dist.add_argument("--format", default="binary", choices=("binary", "ascii"))
    p_dist.set_defaults(func=cmd_distort)

    p_eval = sub.add_parser("evaluate", help="correlate scores against MOS")
    p_eval.add_argument("scores", help="CSV with header id,objective,subjective")
    p_eval.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else str(exc)
        print(f"error: file not found: {name}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PoolingError as exc:
        print(f"pooling error: {exc}", file=sys.stderr)
        return 1
    except (CorrelationError, FitError) as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 1
    except PqsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
