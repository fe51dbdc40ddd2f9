"""``fbc`` command line: synth, compress, decompress, simulate, metrics, bench, ingest."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import bench, io, synth
from .cascade import cascade_compress, cascade_decompress, is_archive
from .flow import FlowField, OracleFlow, PlaneFitFlow
from .metrics import MetricParams, MetricsReport, astsm_distance, mean_distance, temporal_error
from .model import US_PER_MS, CodecConfig, EventStream
from .pipeline import simulate
from .receiver import reconstruct
from .transmitter import compress_stream


class UsageError(Exception):
    pass


def _sweep(spec: str) -> list[int]:
    try:
        a, b, step = (int(v) for v in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {spec!r}") from None
    if step <= 0 or a <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"bad sweep {spec!r}")
    return list(range(a, b + 1, step))


def _int_list(spec: str) -> list[int]:
    try:
        return [int(v) for v in spec.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {spec!r}") from None


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="event file (.aer8 or .csv)")
    p.add_argument("--preset", choices=sorted(synth.PRESETS), help="generate a synthetic scene instead")
    p.add_argument("--scene", help="synthetic scene file (key=value format)")
    p.add_argument("--duration-ms", type=int, default=2000, help="synthetic scene length")
    p.add_argument("--format", choices=io.FORMATS, help="input format (default: from suffix)")
    p.add_argument("--width", type=int, help="sensor width for files without a header")
    p.add_argument("--height", type=int, help="sensor height for files without a header")
    p.add_argument("--assume-sorted", action="store_true", help="reject out-of-order input instead of sorting")


def _add_codec(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pt-ms", type=int, default=30, help="predict time in ms (default 30)")
    p.add_argument("--slack", type=float, default=0.4, help="pixel slack in px (default 0.4)")
    p.add_argument("--calib-count", type=int, default=500, help="flow samples per ST calibration")
    p.add_argument("--flow", choices=("planefit", "oracle"), default="planefit")
    p.add_argument("--cascade", choices=("none", "lzma"), default="none")
    p.add_argument("--parallelism", type=int, default=1, help="receiver worker threads")


def _add_metric(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-x", type=float, default=5.0)
    p.add_argument("--sigma-y", type=float, default=5.0)
    p.add_argument("--sigma-t", type=float, default=5000.0, help="us")
    p.add_argument("--cube-ms", type=float, default=5.0)


def _metric_params(args) -> MetricParams:
    return MetricParams(args.sigma_x, args.sigma_y, args.sigma_t, cube_len=round(args.cube_ms * US_PER_MS))


def _check_source(args) -> None:
    given = [s for s in (args.input, args.preset, args.scene) if s]
    if len(given) != 1:
        raise UsageError("give exactly one of an input file, --preset or --scene")
    if getattr(args, "flow", None) == "oracle" and args.input:
        raise UsageError("--flow oracle needs a synthetic scene (--preset or --scene), not a recorded file")
    for path in (args.input, args.scene):
        if path and not os.path.exists(path):
            raise UsageError(f"no such file: {path}")


def _load_source(args):
    """(stream, ground truth or None)."""
    if args.input:
        return io.read_events(args.input, args.format, args.width, args.height, args.assume_sorted), None
    if args.preset:
        scene = synth.preset(args.preset, args.duration_ms, args.seed)
    else:
        with open(args.scene) as fh:
            scene = synth.parse_scene(fh.read())
        scene = replace(scene, seed=args.seed) if args.seed_given else scene
    return synth.generate(scene)


def _codec(args, stream: EventStream) -> CodecConfig:
    return CodecConfig(
        predict_time_us=args.pt_ms * US_PER_MS,
        pixel_slack=args.slack,
        calibration_count=args.calib_count,
        sensor_width=stream.width,
        sensor_height=stream.height,
    )


def _flow(args, stream: EventStream, truth) -> FlowField:
    if args.flow == "oracle":
        return OracleFlow(truth).estimate(stream)
    return PlaneFitFlow().estimate(stream)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- subcommands -------------------------------------------------------------


def cmd_synth(args) -> int:
    _check_source(args)
    if args.input:
        raise UsageError("synth takes --preset or --scene, not an input file")
    stream, truth = _load_source(args)
    io.write_events(stream, args.out, args.out_format)
    _err(f"wrote {len(stream)} events ({int(truth.noise.sum())} noise) to {args.out}")
    return 0


def cmd_compress(args) -> int:
    _check_source(args)
    stream, truth = _load_source(args)
    cfg = _codec(args, stream)
    packets, stats = compress_stream(stream, _flow(args, stream, truth), cfg)
    if args.cascade == "lzma":
        data = cascade_compress(io.encode_capture(packets, stream.width, stream.height), "lzma")
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        io.write_packets(packets, args.out, stream.width, stream.height)
    size = os.path.getsize(args.out)
    _err(
        f"events_in {stats.n_s} sent {stats.n_tx} noflow {stats.n_nf} cycles {stats.n_cycles} "
        f"bytes {size} file_CR {stats.n_s * 8 / size:.4f}"
    )
    return 0


def _read_any_capture(path):
    """Packets and geometry from a ``.fbc`` capture or a cascaded archive of one."""
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    if is_archive(data):
        data = cascade_decompress(data)
    return io.decode_capture(data, path)


def cmd_decompress(args) -> int:
    packets, width, height = _read_any_capture(args.input)
    cfg = CodecConfig(pixel_slack=args.slack, sensor_width=width, sensor_height=height)
    recon = reconstruct(packets, cfg, args.parallelism)
    io.write_events(recon, args.out, args.out_format)
    _err(f"packets {len(packets)} events_out {len(recon)}")
    return 0


def _report_text(report: MetricsReport, base: MetricsReport | None) -> str:
    lines = report.lines()
    if base is not None:
        lines += [
            f"random_distance_mean {base.mean_distance:.4f}",
            f"random_TE_median_us  {base.median_te:.1f}",
        ]
    return "\n".join(lines) + "\n"


SWEEP_HEADER = "pt_ms,er,cr,wire_cr,cascaded_cr,distance,random_distance,mean_te_us,median_te_us,events_out"


def cmd_simulate(args) -> int:
    _check_source(args)
    if args.baseline not in (None, "random"):
        raise UsageError(f"unknown baseline {args.baseline!r}")
    stream, truth = _load_source(args)
    flow = _flow(args, stream, truth)
    params = _metric_params(args)
    pts = args.sweep_pt or [args.pt_ms]
    rows = []
    text = []
    for pt in pts:
        a = argparse.Namespace(**{**vars(args), "pt_ms": pt})
        res = simulate(
            stream,
            flow,
            _codec(a, stream),
            params,
            cascade=args.cascade,
            parallelism=args.parallelism,
            baseline=args.baseline == "random",
            seed=args.seed,
        )
        r, b = res.report, res.baseline
        rows.append(
            f"{pt},{r.er:.6f},{r.cr:.6f},{r.wire_cr:.6f},"
            f"{'' if r.cascaded_cr is None else f'{r.cascaded_cr:.6f}'},"
            f"{r.mean_distance:.6f},{'' if b is None else f'{b.mean_distance:.6f}'},"
            f"{r.mean_te:.3f},{r.median_te:.3f},{r.n_out}"
        )
        text.append(f"[PT {pt} ms]\n" + _report_text(r, b))
        if args.out and len(pts) == 1:
            io.write_events(res.recon, args.out)
    sys.stdout.write("".join(text))
    if args.csv:
        with open(args.csv, "w", newline="\n") as fh:
            fh.write("\n".join([SWEEP_HEADER] + rows) + "\n")
    return 0


def cmd_metrics(args) -> int:
    for path in (args.orig, args.recon):
        if not os.path.exists(path):
            raise UsageError(f"no such file: {path}")
    orig = io.read_events(args.orig, None, args.width, args.height)
    recon = io.read_events(args.recon, None, args.width, args.height)
    params = _metric_params(args)
    cubes = astsm_distance(orig, recon, params)
    mean_te, median_te, unmatched = temporal_error(orig, recon, params.te_window)
    print(f"events_orig    {len(orig)}")
    print(f"events_recon   {len(recon)}")
    print(f"distance_mean  {mean_distance(cubes):.4f}")
    print(f"cubes          {len(cubes)}")
    print(f"TE_mean_us     {mean_te:.1f}")
    print(f"TE_median_us   {median_te:.1f}")
    print(f"TE_unmatched   {unmatched}")
    if args.csv:
        with open(args.csv, "w", newline="\n") as fh:
            fh.write("cube_index,t_start_us,distance\n")
            for c in cubes:
                fh.write(f"{c.index[0]}:{c.index[1]}:{c.index[2]},{c.t_start_us},{c.distance:.6f}\n")
    return 0


def cmd_bench(args) -> int:
    rows = bench.run_sweeps(
        args.sweep_pt,
        args.counts,
        fixed_events=args.events,
        fixed_pt_ms=args.pt_ms,
        parallelism=args.parallelism,
        seed=args.seed,
        repeats=args.repeats,
    )
    print(f"{'sweep':<6}{'events':>9}{'PT_ms':>7}{'predict_ms':>12}{'sort_ms':>10}{'total_ms':>10}  realtime")
    for r in rows:
        print(
            f"{r.sweep:<6}{r.n_events:>9}{r.pt_ms:>7}{r.predict_ms:>12.2f}{r.sort_ms:>10.2f}"
            f"{r.total_ms:>10.2f}  {'yes' if r.realtime else 'no'}"
        )
    counts = [r for r in rows if r.sweep == "count"]
    if len(counts) >= 2:
        k = bench.scaling_exponent([r.n_events for r in counts], [r.total_ms for r in counts])
        print(f"scaling exponent {k:.3f}")
    if args.csv:
        with open(args.csv, "w", newline="\n") as fh:
            fh.write("\n".join([bench.BenchRow.CSV_HEADER] + [r.csv() for r in rows]) + "\n")
    return 0


def cmd_ingest(args) -> int:
    if not os.path.exists(args.input):
        raise UsageError(f"no such file: {args.input}")
    stream = io.ingest_text(args.input, args.width, args.height, args.columns, args.time_unit, args.rebase)
    io.write_events(stream, args.out, args.out_format)
    _err(f"wrote {len(stream)} events to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbc", description="Flow-based event stream compression.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic event scene")
    _add_source(p)
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", choices=io.FORMATS)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress", parents=[common], help="events -> .fbc capture (or .fbcz with --cascade lzma)")
    _add_source(p)
    _add_codec(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", parents=[common], help=".fbc/.fbcz -> reconstructed events")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", choices=io.FORMATS)
    p.add_argument("--slack", type=float, default=0.4)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("simulate", parents=[common], help="transmitter -> receiver -> metrics in one process")
    _add_source(p)
    _add_codec(p)
    _add_metric(p)
    p.add_argument("--baseline", help="'random': add matched-ER random removal")
    p.add_argument("--sweep-pt", type=_sweep, help="PT sweep a:b:step in ms")
    p.add_argument("--csv", help="write one CSV row per PT")
    p.add_argument("--out", help="write the reconstructed stream (single PT only)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", parents=[common], help="distance and temporal error between two event files")
    p.add_argument("--orig", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    _add_metric(p)
    p.add_argument("--csv", help="per-cube distances")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", parents=[common], help="receiver prediction + sort latency")
    p.add_argument("--sweep-pt", type=_sweep, default=_sweep("10:100:10"))
    p.add_argument("--counts", type=_int_list, default=_int_list("2500,5000,10000,25000,50000,100000,250000"))
    p.add_argument("--events", type=int, default=25_000, help="events for the PT sweep")
    p.add_argument("--pt-ms", type=int, default=60, help="PT for the event-count sweep")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ingest", parents=[common], help="convert a text event export to aer8/csv")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", choices=io.FORMATS)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--columns", default="t,x,y,p", help="column order, e.g. x,y,t,p")
    p.add_argument("--time-unit", choices=("auto", "s", "us"), default="auto")
    p.add_argument("--rebase", action="store_true", help="shift timestamps to start at 0")
    p.set_defaults(func=cmd_ingest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        ap.exit(2, f"fbc: error: {exc}\n")
    except (OSError, ValueError) as exc:
        ap.exit(1, f"fbc: error: {exc}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
