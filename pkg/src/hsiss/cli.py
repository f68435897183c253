"""Command-line front end: ``hsiss {classify,bench,foms,synth}``.

Errors are reported on stderr as a single ``error: <kind>: <message>``
line and a nonzero exit status.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import (average_power, build_report, compare_published, compute_foms, format_fom,
                    load_fom_table, load_power_trace, render_report)
from .cube import load_cube, save_cube
from .exceptions import HsissError, ParameterError
from .knn import DEFAULT_BATCH_ROWS, DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_WINDOW_ROWS, KnnParams
from .maps import colorize, write_color_map, write_label_map
from .pipeline import PipelineConfig, run_ss_pipeline
from .svm import load_model, save_model
from .synth import SyntheticScene, analytic_model, generate_scene, load_scene_spec, scene_means

logger = logging.getLogger("hsiss")


def _add_knn_args(p):
    p.add_argument("--k", type=int, default=DEFAULT_K, help="neighbours per pixel (default %(default)s)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help="spatial weight (default %(default)s)")
    p.add_argument("--window-rows", type=int, default=DEFAULT_WINDOW_ROWS,
                   help="rows in the neighbour search window (default %(default)s)")
    p.add_argument("--batch-rows", type=int, default=DEFAULT_BATCH_ROWS,
                   help="rows per processing batch (default %(default)s)")
    p.add_argument("--workers", type=int, default=0, help="worker threads, 0 = one per CPU")


def _add_cube_args(p, required=True):
    p.add_argument("--cube", type=Path, required=required, help="cube header file")
    p.add_argument("--cube-data", type=Path, help="cube data file (default: from the header)")
    p.add_argument("--model", type=Path, required=required, help="SVM model file")


def build_parser():
    parser = argparse.ArgumentParser(prog="hsiss", description="Spatial-spectral hyperspectral classifier")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a cube and write label/colour maps")
    _add_cube_args(p)
    p.add_argument("--out-map", type=Path, required=True, help="label map output (binary PGM)")
    p.add_argument("--out-color", type=Path, help="colour map output (binary PPM)")
    _add_knn_args(p)
    p.add_argument("--serial", action="store_true", help="run the single-worker reference path")
    p.add_argument("--dump-intermediates", action="store_true",
                   help="write the one-band image and both probability maps")
    p.add_argument("--dump-pca", action="store_true", help="write band means, covariance and eigenvalues")
    p.add_argument("--dump-neighbors", action="store_true", help="write per-pixel neighbour indices")
    p.add_argument("--dump-dir", type=Path, help="directory for dumps (default: next to --out-map)")

    p = sub.add_parser("bench", help="time repeated runs and report figures of merit")
    _add_cube_args(p, required=False)
    _add_knn_args(p)
    p.add_argument("--reps", type=int, default=20, help="repetitions (default %(default)s)")
    p.add_argument("--power-trace", type=Path, help="t_ms,watts CSV power trace")
    p.add_argument("--trace-start", type=float, help="averaging window start, seconds")
    p.add_argument("--trace-end", type=float, help="averaging window end, seconds")
    p.add_argument("--watts", type=float, help="constant average power instead of a trace")
    p.add_argument("--timings", type=Path, help="replay durations (seconds, one per line) instead of running")
    p.add_argument("--require-foms", action="store_true", help="fail when no power source is given")
    p.add_argument("--image-id", help="image label for the report")
    p.add_argument("--report", type=Path, help="report output file (default: stdout)")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--series", type=Path, help="per-repetition stage timings CSV")

    p = sub.add_parser("foms", help="figure-of-merit calculator")
    p.add_argument("--time", type=float, help="execution time, seconds")
    p.add_argument("--power", type=float, help="average power, watts")
    p.add_argument("--table", type=Path, help="CSV table of published rows to check")
    p.add_argument("--published", action="store_true", help="check the bundled published table")
    p.add_argument("--tolerance", type=float, default=0.02, help="relative tolerance (default %(default)s)")

    p = sub.add_parser("synth", help="write a synthetic cube, analytic model and ground truth")
    p.add_argument("--spec", type=Path, help="scene spec file (key=value)")
    p.add_argument("--seed", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--bands", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--prefix", default="scene")
    return parser


def _knn_params(args):
    return KnnParams(args.k, args.lam, args.window_rows, args.batch_rows)


def _load_inputs(args):
    if args.cube is None or args.model is None:
        raise ParameterError("--cube and --model are required")
    return load_cube(args.cube, args.cube_data), load_model(args.model)


def cmd_classify(args):
    cube, model = _load_inputs(args)
    dumping = args.dump_intermediates or args.dump_pca or args.dump_neighbors
    config = PipelineConfig(
        n_workers=args.workers, knn=_knn_params(args), serial_reference=args.serial,
        dump_intermediates=args.dump_intermediates, dump_pca=args.dump_pca,
        dump_neighbors=args.dump_neighbors,
        dump_dir=(args.dump_dir or args.out_map.parent) if dumping else None)
    result = run_ss_pipeline(cube, model, config)
    write_label_map(result.labels, args.out_map)
    if args.out_color is not None:
        write_color_map(colorize(result.labels, model.class_ids, model.colors), args.out_color)
    logger.info("classified %dx%d cube in %.3f s", cube.rows, cube.cols, result.timings.total)
    return 0


def _read_timings(path):
    values = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                values.append(float(line))
            except ValueError:
                raise ParameterError(f"{path}:{lineno}: not a duration: {line!r}") from None
    if not values:
        raise ParameterError(f"{path}: no durations")
    return values


def cmd_bench(args):
    if args.reps < 1:
        raise ParameterError(f"--reps must be >= 1, got {args.reps}")
    if args.power_trace is not None and args.watts is not None:
        raise ParameterError("give either --power-trace or --watts, not both")
    series = []
    image_id = args.image_id
    if args.timings is not None:
        durations = _read_timings(args.timings)
    else:
        cube, model = _load_inputs(args)
        image_id = image_id or cube.image_id
        config = PipelineConfig(n_workers=args.workers, knn=_knn_params(args), repetitions=args.reps)
        for _ in range(config.repetitions):
            series.append(run_ss_pipeline(cube, model, config).timings)
        durations = [t.total for t in series]

    power = args.watts
    if args.power_trace is not None:
        avg = average_power(load_power_trace(args.power_trace), args.trace_start, args.trace_end)
        if avg.clipped:
            print("warning: power interval clipped to the trace span", file=sys.stderr)
        power = avg.watts
    report = build_report(image_id or "-", durations, power)
    text = render_report(report, args.format)
    if args.report is not None:
        args.report.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.series is not None and series:
        with args.series.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rep", "svm_s", "pca_s", "knn_s", "io_and_setup_s", "total_s"])
            for i, t in enumerate(series):
                writer.writerow([i, *(f"{v:.6f}" for v in (t.svm, t.pca, t.knn, t.io_and_setup, t.total))])
    if not report.under_limit:
        print(f"note: time stddev {100 * report.stddev_fraction:.2f}% is not under 1%", file=sys.stderr)
    if power is None and args.require_foms:
        raise ParameterError("figures of merit need --power-trace or --watts")
    return 0


def cmd_foms(args):
    if args.table is None and not args.published:
        if args.time is None or args.power is None:
            raise ParameterError("give --time and --power, or --table/--published")
        foms = compute_foms(args.time, args.power)
        print(" / ".join(format_fom(v) for v in foms))
        return 0
    comparisons = compare_published(load_fom_table(args.table))
    bad = 0
    print("table,image,device,time_s,power_w,fom1,fom1_pub,fom2,fom2_pub,fom3,fom3_pub,max_rel_err")
    for cmp in comparisons:
        r = cmp.row
        cells = [r.table, r.image, r.device, f"{r.time_s:g}", f"{r.power_w:g}"]
        for c, p in zip(cmp.computed, r.foms):
            cells += [format_fom(c), f"{p:g}"]
        cells.append(f"{max(cmp.rel_errors):.4f}")
        print(",".join(cells))
        bad += sum(e > args.tolerance for e in cmp.rel_errors)
    total = 3 * len(comparisons)
    if bad == 0:
        print(f"all within {100 * args.tolerance:g}% ({total} values)")
    else:
        print(f"{bad} of {total} values outside {100 * args.tolerance:g}%")
    return 0


def cmd_synth(args):
    scene = load_scene_spec(args.spec) if args.spec is not None else SyntheticScene()
    overrides = {"seed": args.seed, "rows": args.rows, "cols": args.cols, "bands": args.bands,
                 "n_classes": args.classes, "sigma": args.sigma}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        fields = {**scene.__dict__, **overrides}
        if "bands" in overrides or "n_classes" in overrides:
            fields["means"] = None
        scene = SyntheticScene(**fields)
    cube, truth = generate_scene(scene)
    model = analytic_model(scene_means(scene))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_cube(cube, out / f"{args.prefix}.hdr", out / f"{args.prefix}.raw")
    save_model(model, out / f"{args.prefix}_model.txt")
    write_label_map(model.class_ids[truth], out / f"{args.prefix}_truth.pgm")
    return 0


COMMANDS = {"classify": cmd_classify, "bench": cmd_bench, "foms": cmd_foms, "synth": cmd_synth}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except HsissError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: value: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
