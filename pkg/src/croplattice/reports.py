"""Result serialization: summary CSV, per-cell CSV, and SVG heatmaps.

File contents are fully determined by the report values (no timestamps, no
environment-dependent formatting), so identical runs produce byte-identical
artifacts.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .lattice import CHANNELS
from .scenario import RunReport, ScenarioConfig

Array = np.ndarray

SUMMARY_COLUMNS = [
    "name",
    "mean_d",
    "max_d",
    "min_d",
    "cv_d",
    "exceed_frac",
    "moran_i",
    "moran_p",
    "cvm_n",
    "p_n",
    "cvm_p",
    "p_p",
    "cvm_k",
    "p_k",
    "cvm_combined",
    "p_combined",
    "dom_n",
    "dom_p",
    "dom_k",
]

# Sequential, perceptually ordered colormap anchors (viridis), dark to light.
_COLOR_ANCHORS = np.array(
    [
        (0.267004, 0.004874, 0.329415),
        (0.282327, 0.094955, 0.417331),
        (0.278826, 0.175490, 0.483397),
        (0.258965, 0.251537, 0.524736),
        (0.229739, 0.322361, 0.545706),
        (0.199430, 0.387607, 0.554642),
        (0.172719, 0.448791, 0.557885),
        (0.149039, 0.508051, 0.557250),
        (0.127568, 0.566949, 0.550556),
        (0.120638, 0.625828, 0.533488),
        (0.157851, 0.683765, 0.501686),
        (0.246070, 0.738910, 0.452024),
        (0.369214, 0.788888, 0.382914),
        (0.515992, 0.831158, 0.294279),
        (0.678489, 0.863742, 0.189503),
        (0.845561, 0.887322, 0.099702),
        (0.993248, 0.906157, 0.143936),
    ]
)


def sequential_color(t: float) -> str:
    """Hex color for t in [0, 1] along the sequential colormap."""
    t = min(1.0, max(0.0, float(t)))
    pos = t * (len(_COLOR_ANCHORS) - 1)
    low = int(pos)
    high = min(low + 1, len(_COLOR_ANCHORS) - 1)
    frac = pos - low
    rgb = (1 - frac) * _COLOR_ANCHORS[low] + frac * _COLOR_ANCHORS[high]
    r, g, b = (int(round(255 * channel)) for channel in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def summary_row(report: RunReport) -> list[str]:
    s = report.stress_summary
    per_channel = report.cvm.per_channel or {}
    row = [report.name]
    row += [_fmt(v) for v in (s.mean_d, s.max_d, s.min_d, s.cv_d, s.exceed_fraction)]
    row += [_fmt(report.moran.i), _fmt(report.moran.p_value)]
    for channel in CHANNELS:
        stat, p = per_channel[channel]
        row += [_fmt(stat), _fmt(p)]
    row += [_fmt(report.cvm.statistic), _fmt(report.cvm.p_value)]
    row += [_fmt(report.decomposition.fractions[channel]) for channel in CHANNELS]
    return row


def write_summary_csv(reports: list[RunReport], path: str | Path) -> Path:
    """One row per scenario in the given order."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for report in reports:
            writer.writerow(summary_row(report))
    return path


def write_cells_csv(report: RunReport, path: str | Path) -> Path:
    """Per-cell table: x,y,n,p,k,stress,dominant; row-major, 6 significant digits."""
    path = Path(path)
    labels = report.decomposition.labels()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "n", "p", "k", "stress", "dominant"])
        for x in range(report.grid.nx):
            for y in range(report.grid.ny):
                conc = report.final[x, y]
                writer.writerow(
                    [
                        x,
                        y,
                        f"{conc[0]:.6g}",
                        f"{conc[1]:.6g}",
                        f"{conc[2]:.6g}",
                        f"{report.stress.d[x, y]:.6g}",
                        labels[x, y],
                    ]
                )
    return path


def load_cells_csv(path: str | Path) -> dict[str, Array]:
    """Re-ingest a cells CSV into arrays keyed n, p, k, stress, dominant."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty cells file")
    nx = max(int(r["x"]) for r in rows) + 1
    ny = max(int(r["y"]) for r in rows) + 1
    if len(rows) != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} rows, got {len(rows)}")
    out: dict[str, Array] = {
        key: np.empty((nx, ny)) for key in ("n", "p", "k", "stress")
    }
    out["dominant"] = np.empty((nx, ny), dtype=object)
    for r in rows:
        x, y = int(r["x"]), int(r["y"])
        for key in ("n", "p", "k", "stress"):
            out[key][x, y] = float(r[key])
        out["dominant"][x, y] = r["dominant"]
    return out


def write_heatmap_svg(
    report: RunReport,
    path: str | Path,
    scale_max: float | None = None,
    cell_px: int = 18,
) -> Path:
    """Stress heatmap: one rect per cell, row y=0 at the bottom.

    ``scale_max`` pins the top of the color scale; a suite passes its global
    maximum so all panels share one scale. A degenerate (all-zero) map
    renders at the colormap minimum.
    """
    path = Path(path)
    nx, ny = report.grid.nx, report.grid.ny
    top = report.stress_summary.max_d if scale_max is None else float(scale_max)
    width, height = nx * cell_px, ny * cell_px
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>stress {report.name}</title>",
    ]
    for x in range(nx):
        for y in range(ny):
            t = report.stress.d[x, y] / top if top > 0 else 0.0
            color = sequential_color(t)
            px = x * cell_px
            py = (ny - 1 - y) * cell_px
            lines.append(
                f'<rect x="{px}" y="{py}" width="{cell_px}" height="{cell_px}" fill="{color}"/>'
            )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_reports(
    report: RunReport,
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    scale_max: float | None = None,
    write_summary: bool = True,
) -> list[Path]:
    """Write the artifacts enabled by the config's output flags.

    Returns the paths written. ``out_dir`` overrides the configured output
    directory; a suite passes ``write_summary=False`` and writes one
    combined summary itself.
    """
    directory = Path(out_dir) if out_dir is not None else Path(config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if config.output.summary and write_summary:
        written.append(write_summary_csv([report], directory / "summary.csv"))
    if config.output.cells:
        written.append(write_cells_csv(report, directory / f"cells_{report.name}.csv"))
    if config.output.heatmap:
        written.append(
            write_heatmap_svg(report, directory / f"heatmap_{report.name}.svg", scale_max)
        )
    return written
