"""Command-line entry point: ``cloudmarch {render,sequence,bench,fig2}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import evalbench
from .config import ConfigError, default_scene_path, load_config
from .ppm import write_ppm
from .renderer import render_frame, render_sequence

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def cmd_render(args, loaded) -> int:
    out = _out_dir(args.out)
    frame, _ = render_frame(loaded.scene, None, args.frame_index)
    path = write_ppm(out / args.name, frame.final_image, args.sixteen_bit)
    s = frame.stats
    print(f"{path}: density_samples={s.density_samples} light_samples={s.light_samples} "
          f"wall_time={s.wall_time:.3f}s")
    return EXIT_OK


def cmd_sequence(args, loaded) -> int:
    out = _out_dir(args.out)
    n = args.frames if args.frames is not None else 16
    frames = render_sequence(loaded.scene, n)
    with open(out / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frame", "density_samples", "light_samples", "wall_time_s"))
        for i, fr in enumerate(frames):
            write_ppm(out / f"frame_{i:04d}.ppm", fr.final_image, args.sixteen_bit)
            w.writerow((i, fr.stats.density_samples, fr.stats.light_samples,
                        f"{fr.stats.wall_time:.6f}"))
    print(f"wrote {n} frames to {out}")
    return EXIT_OK


def cmd_bench(args, loaded) -> int:
    out = _out_dir(args.out)
    specs = loaded.experiments
    if specs is None:
        taa_frames = args.frames if args.frames is not None else 16
        specs = evalbench.canonical_specs(loaded.scene, taa_frames=taa_frames)
    dump = out / "frames" if args.dump_frames else None
    report = evalbench.run_experiments(specs, repeats=args.repeats, dump_dir=dump)
    evalbench.write_report(report, out)
    print(evalbench.format_table(report), end="")
    failed = [r.name for r in report.rows if not r.ok]
    if failed:
        print(f"cloudmarch: {len(failed)} experiment(s) failed: {', '.join(failed)}",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_fig2(args, loaded) -> int:
    out = _out_dir(args.out)
    rep = evalbench.fig2_experiment(loaded.scene)
    (out / "fig2.csv").write_text(rep.to_csv())
    (out / "fig2.txt").write_text(rep.format())
    print(rep.format(), end="")
    return EXIT_OK


COMMANDS = {
    "render": cmd_render,
    "sequence": cmd_sequence,
    "bench": cmd_bench,
    "fig2": cmd_fig2,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="scene YAML (default: the bundled canonical scene)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted config override, repeatable")
    common.add_argument("--sixteen-bit", action="store_true", help="write 16-bit PPMs")

    p = argparse.ArgumentParser(
        prog="cloudmarch", description="Volumetric cloud renderer and benchmark harness.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", parents=[common], help="render one frame to a PPM")
    r.add_argument("--frame-index", type=int, default=0)
    r.add_argument("--name", default="render.ppm", help="output file name")

    s = sub.add_parser("sequence", parents=[common], help="render a frame sequence")
    s.add_argument("--frames", type=int, default=None, help="number of frames (default 16)")

    b = sub.add_parser("bench", parents=[common], help="run the configuration benchmark")
    b.add_argument("--repeats", type=int, default=evalbench.MIN_REPEATS)
    b.add_argument("--frames", type=int, default=None,
                   help="TAA frames for the default experiment rows (default 16)")
    b.add_argument("--dump-frames", action="store_true", help="write each final frame as PPM")

    sub.add_parser("fig2", parents=[common], help="step-length brightness study")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "frames", None) is not None and args.frames < 1:
            raise ConfigError("--frames must be >= 1")
        if getattr(args, "repeats", evalbench.MIN_REPEATS) < evalbench.MIN_REPEATS:
            raise ConfigError(f"--repeats must be >= {evalbench.MIN_REPEATS}")
        loaded = load_config(args.config or default_scene_path(), args.overrides)
    except ConfigError as exc:
        print(f"cloudmarch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, loaded)
    except ConfigError as exc:
        print(f"cloudmarch: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"cloudmarch: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
