"""Benchmark harness: configuration table, step-length bias study and image metrics.

Reports split into a deterministic part (sample counts, errors, luminance) and
wall-clock timings, so the main CSV is byte-stable across identical runs.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ppm import write_ppm
from .raymarch import RaymarchConfig
from .renderer import RenderedFrame, SceneConfig, render_frame, render_sequence
from .transport import LUMA

MIN_REPEATS = 5
FIG2_STEPS = (8, 16, 32, 64, 128)

REPORT_COLUMNS = (
    "name", "buffer_scale", "n_steps", "jitter_mode", "taa", "n_frames", "reference",
    "density_samples", "light_samples", "rmse_vs_reference", "mean_luminance", "error",
)
TIMING_COLUMNS = ("name", "median_wall_time_s", "repeat_wall_times_s")


def rmse(image_a, image_b) -> float:
    """Root-mean-square difference over all pixels and channels."""
    a = np.asarray(image_a, dtype=np.float64)
    b = np.asarray(image_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    # (a - b)**2 == (b - a)**2 bit for bit, so the metric is exactly symmetric.
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mean_luminance(image) -> float:
    rgb = np.asarray(image, dtype=np.float64)[..., :3]
    return float(np.mean(rgb @ np.asarray(LUMA)))


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    scene: SceneConfig
    n_frames: int = 1
    reference: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("experiment name must be non-empty")
        if int(self.n_frames) != self.n_frames or self.n_frames < 1:
            raise ValueError(f"{self.name}: n_frames must be an integer >= 1")


@dataclass
class RunRow:
    spec: ExperimentSpec
    density_samples: Optional[int] = None
    light_samples: Optional[int] = None
    median_wall_time: Optional[float] = None
    wall_times: list = field(default_factory=list)
    rmse_vs_reference: Optional[float] = None
    mean_luminance: Optional[float] = None
    error: Optional[str] = None
    final: Optional[RenderedFrame] = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class RunReport:
    rows: list

    def __getitem__(self, name: str) -> RunRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def names(self) -> list:
        return [r.name for r in self.rows]


def resolve_order(specs: Sequence[ExperimentSpec]) -> list:
    """Order specs so every reference runs before its dependents.

    Raises ValueError on duplicate names, unknown references or cycles.
    A spec may name itself as its own reference.
    """
    by_name = {}
    for s in specs:
        if s.name in by_name:
            raise ValueError(f"duplicate experiment name {s.name!r}")
        by_name[s.name] = s
    for s in specs:
        if s.reference is not None and s.reference not in by_name:
            raise ValueError(f"experiment {s.name!r} references unknown {s.reference!r}")

    order, state = [], {}

    def visit(name, chain):
        mark = state.get(name)
        if mark == "done":
            return
        if mark == "active":
            raise ValueError("experiment reference cycle: " + " -> ".join(chain + [name]))
        state[name] = "active"
        ref = by_name[name].reference
        if ref is not None and ref != name:
            visit(ref, chain + [name])
        state[name] = "done"
        order.append(by_name[name])

    for s in specs:
        visit(s.name, [])
    return order


def _render_spec(spec: ExperimentSpec) -> RenderedFrame:
    if spec.n_frames == 1:
        return render_frame(spec.scene, None, 0)[0]
    return render_sequence(spec.scene, spec.n_frames)[-1]


def _run_one(spec: ExperimentSpec, repeats: int) -> RunRow:
    row = RunRow(spec)
    final = None
    for _ in range(repeats):
        start = time.perf_counter()
        frame = _render_spec(spec)
        row.wall_times.append((time.perf_counter() - start) / spec.n_frames)
        if final is None:
            final = frame
    row.final = final
    row.median_wall_time = statistics.median(row.wall_times)
    row.density_samples = final.stats.density_samples
    row.light_samples = final.stats.light_samples
    row.mean_luminance = mean_luminance(final.final_image)
    return row


def run_experiments(specs: Sequence[ExperimentSpec], repeats: int = MIN_REPEATS,
                    dump_dir=None) -> RunReport:
    """Run every spec ``repeats`` times and collect metrics.

    Wall time per repeat is the mean per-frame time of the spec's sequence; the
    report keeps the median. Metrics use the final frame of the first repeat
    (repeats are bit-identical). A failing spec yields a row with ``error``
    set instead of aborting the batch.
    """
    if repeats < MIN_REPEATS:
        raise ValueError(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
    ordered = resolve_order(specs)
    done = {}
    for spec in ordered:
        try:
            row = _run_one(spec, repeats)
        except Exception as exc:  # surfaced in the report, the batch goes on
            row = RunRow(spec, error=f"{type(exc).__name__}: {exc}")
        done[spec.name] = row

    for spec in ordered:
        row = done[spec.name]
        if not row.ok or spec.reference is None:
            continue
        ref = done[spec.reference]
        if not ref.ok:
            row.error = f"reference {spec.reference!r} failed"
            continue
        if ref.spec.scene.display_resolution != spec.scene.display_resolution:
            row.error = f"reference {spec.reference!r} has a different display resolution"
            continue
        row.rmse_vs_reference = rmse(row.final.final_image, ref.final.final_image)

    if dump_dir is not None:
        out = Path(dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        for spec in ordered:
            if done[spec.name].ok:
                write_ppm(out / f"{spec.name}.ppm", done[spec.name].final.final_image)
    # Report rows follow the caller's order, not the dependency order.
    return RunReport([done[s.name] for s in specs])


def canonical_specs(scene: SceneConfig, taa_frames: int = 16) -> list:
    """The six configuration rows of the timing table, all compared to full/128."""
    rm = scene.raymarch
    off = replace(scene.taa, enabled=False)
    on = replace(scene.taa, enabled=True)

    def make(name, scale, steps, jitter, taa, frames):
        cfg = replace(rm, n_steps=steps, jitter_mode=jitter)
        s = scene.with_changes(cloud_buffer_scale=scale, raymarch=cfg, taa=taa)
        return ExperimentSpec(name, s, frames, "full_128")

    return [
        make("full_128", "full", 128, "off", off, 1),
        make("half_128", "half", 128, "off", off, 1),
        make("half_8", "half", 8, "off", off, 1),
        make("half_8_jitter", "half", 8, "per_pixel", off, 1),
        make("half_8_jitter_taa", "half", 8, "per_pixel", on, taa_frames),
        make("quarter_8_jitter_taa", "quarter", 8, "per_pixel", on, taa_frames),
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_csv(report: RunReport) -> str:
    """Deterministic CSV: one row per experiment, columns as ``REPORT_COLUMNS``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.rows:
        s = r.spec.scene
        w.writerow([
            r.name, s.cloud_buffer_scale, s.raymarch.n_steps, s.raymarch.jitter_mode,
            int(s.taa.enabled), r.spec.n_frames, r.spec.reference or "",
            _fmt(r.density_samples), _fmt(r.light_samples), _fmt(r.rmse_vs_reference),
            _fmt(r.mean_luminance), r.error or "",
        ])
    return buf.getvalue()


def timings_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMING_COLUMNS)
    for r in report.rows:
        w.writerow([r.name, _fmt(r.median_wall_time),
                    " ".join(f"{t:.6f}" for t in r.wall_times)])
    return buf.getvalue()


def format_table(report: RunReport) -> str:
    """Aligned plain-text table, wall time shown in milliseconds."""
    header = ("experiment", "density", "light", "median ms", "rmse", "mean lum", "status")
    lines = []
    for r in report.rows:
        lines.append((
            r.name,
            _fmt(r.density_samples),
            _fmt(r.light_samples),
            "" if r.median_wall_time is None else f"{1e3 * r.median_wall_time:.1f}",
            "" if r.rmse_vs_reference is None else f"{r.rmse_vs_reference:.6f}",
            "" if r.mean_luminance is None else f"{r.mean_luminance:.6f}",
            "ok" if r.ok else r.error,
        ))
    widths = [max(len(h), *(len(row[i]) for row in lines)) if lines else len(h)
              for i, h in enumerate(header)]
    fmt_row = lambda cells: "  ".join(  # noqa: E731
        c.ljust(wd) if i in (0, 6) else c.rjust(wd) for i, (c, wd) in enumerate(zip(cells, widths))
    ).rstrip()
    rule = "  ".join("-" * wd for wd in widths)
    return "\n".join([fmt_row(header), rule] + [fmt_row(row) for row in lines]) + "\n"


def write_report(report: RunReport, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "timings": out / "timings.csv",
        "table": out / "report.txt",
    }
    paths["report"].write_text(report_csv(report))
    paths["timings"].write_text(timings_csv(report))
    paths["table"].write_text(format_table(report))
    return paths


@dataclass
class Fig2Report:
    step_counts: tuple
    luminance: dict  # mode -> list of mean luminances, aligned with step_counts

    def spread(self, mode: str, steps: Optional[Sequence[int]] = None) -> float:
        """(max - min) / mean of the mode's luminances, optionally over a subset of steps."""
        vals = [v for n, v in zip(self.step_counts, self.luminance[mode])
                if steps is None or n in steps]
        mean = float(np.mean(vals))
        if mean == 0.0:
            return 0.0
        return (max(vals) - min(vals)) / mean

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("integration_mode", "n_steps", "mean_luminance"))
        for mode, vals in self.luminance.items():
            for n, v in zip(self.step_counts, vals):
                w.writerow((mode, n, repr(v)))
        for mode in self.luminance:
            w.writerow((mode, "spread", repr(self.spread(mode))))
        return buf.getvalue()

    def format(self) -> str:
        modes = list(self.luminance)
        lines = ["n_steps  " + "  ".join(f"{m:>12}" for m in modes)]
        for i, n in enumerate(self.step_counts):
            lines.append(f"{n:>7}  " + "  ".join(f"{self.luminance[m][i]:>12.6f}" for m in modes))
        lines.append("spread   " + "  ".join(f"{100 * self.spread(m):>11.3f}%" for m in modes))
        return "\n".join(lines) + "\n"


def fig2_experiment(scene: SceneConfig, step_counts: Sequence[int] = FIG2_STEPS) -> Fig2Report:
    """Mean cloud luminance versus step count for both integration modes.

    Jitter and TAA are switched off. Luminance is taken over the cloud
    buffer's scattered light alone, so the background does not dilute the
    brightness change being measured.
    """
    base = scene.with_changes(taa=replace(scene.taa, enabled=False))
    lum = {}
    for mode in ("naive", "analytic"):
        vals = []
        for n in step_counts:
            cfg: RaymarchConfig = replace(scene.raymarch, n_steps=n, integration_mode=mode,
                                          jitter_mode="off")
            frame, _ = render_frame(base.with_changes(raymarch=cfg), None, 0)
            vals.append(mean_luminance(frame.cloud_buffer))
        lum[mode] = vals
    return Fig2Report(tuple(step_counts), lum)
