"""Self-contained SVG line plots of simulation runs.

Rendering is a small hand-rolled SVG writer: no display server, no plotting
dependency, and fully deterministic output (fixed coordinate precision,
fixed palette, data-dependent but seed-stable downsampling), so plot files
are byte-identical across repeated runs of the same scenario and seed.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .simcore import Trajectory

__all__ = ["render_line_plot", "plot_node_errors", "plot_detector_outputs", "plot_run"]

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64.0, 16.0, 36.0, 46.0


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] at a 1/2/5 decade step."""
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, target)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if (hi - lo) / step <= target + 0.5:
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    # snap near-zero values produced by the arange arithmetic
    ticks[np.abs(ticks) < 1e-12 * step] = 0.0
    return [float(v) for v in ticks]


def _fmt_tick(v: float) -> str:
    return f"{v:g}"


def _series_path(
    x: np.ndarray, y: np.ndarray, to_px: callable, stride: int
) -> str:
    xs = x[::stride]
    ys = y[::stride]
    if xs[-1] != x[-1]:
        xs = np.append(xs, x[-1])
        ys = np.append(ys, y[-1])
    pts = [to_px(a, b) for a, b in zip(xs, ys)]
    return " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)


def render_line_plot(
    path,
    t: np.ndarray,
    series: list[tuple[str, np.ndarray, str]],
    title: str,
    ylabel: str,
    xlabel: str = "t [s]",
    width: int = 720,
    height: int = 440,
    max_points: int = 1600,
) -> None:
    """Write one SVG line plot.

    ``series`` holds (label, values, style) triples with style ``"solid"``
    or ``"dashed"``; values are sampled on ``t``. Long series are strided
    down to at most ``max_points`` vertices (endpoints kept).
    """
    t = np.asarray(t, dtype=float)
    k = len(t)
    stride = max(1, int(np.ceil(k / max_points)))

    ymin = min(float(np.min(v)) for _, v, _ in series)
    ymax = max(float(np.max(v)) for _, v, _ in series)
    if ymax - ymin < 1e-300:
        ymin -= 1.0
        ymax += 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad
    xmin, xmax = float(t[0]), float(t[-1])
    if xmax <= xmin:
        xmax = xmin + 1.0

    px_w = width - _MARGIN_L - _MARGIN_R
    px_h = height - _MARGIN_T - _MARGIN_B

    def to_px(x: float, y: float) -> tuple[float, float]:
        fx = (x - xmin) / (xmax - xmin)
        fy = (y - ymin) / (ymax - ymin)
        return _MARGIN_L + fx * px_w, _MARGIN_T + (1.0 - fy) * px_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    out.append(
        f'<text x="{width / 2:.2f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(title)}</text>'
    )

    # gridlines + ticks
    for xv in _nice_ticks(xmin, xmax, 8):
        px, _ = to_px(xv, ymin)
        out.append(
            f'<line x1="{px:.2f}" y1="{_MARGIN_T:.2f}" x2="{px:.2f}" '
            f'y2="{_MARGIN_T + px_h:.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{_MARGIN_T + px_h + 18:.2f}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{escape(_fmt_tick(xv))}</text>"
        )
    for yv in _nice_ticks(ymin, ymax, 6):
        _, py = to_px(xmin, yv)
        out.append(
            f'<line x1="{_MARGIN_L:.2f}" y1="{py:.2f}" '
            f'x2="{_MARGIN_L + px_w:.2f}" y2="{py:.2f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 6:.2f}" y="{py + 4:.2f}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11">'
            f"{escape(_fmt_tick(yv))}</text>"
        )

    # axes frame and labels
    out.append(
        f'<rect x="{_MARGIN_L:.2f}" y="{_MARGIN_T:.2f}" width="{px_w:.2f}" '
        f'height="{px_h:.2f}" fill="none" stroke="#000000" stroke-width="1"/>'
    )
    out.append(
        f'<text x="{_MARGIN_L + px_w / 2:.2f}" y="{height - 8:.2f}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">'
        f"{escape(xlabel)}</text>"
    )
    out.append(
        f'<text x="16" y="{_MARGIN_T + px_h / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_MARGIN_T + px_h / 2:.2f})">'
        f"{escape(ylabel)}</text>"
    )

    # series
    for idx, (label, values, style) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        dash = ' stroke-dasharray="7,4"' if style == "dashed" else ""
        pts = _series_path(t, np.asarray(values, dtype=float), to_px, stride)
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.4"{dash}/>'
        )

    # legend (top-right corner of the plot area)
    lx = _MARGIN_L + px_w - 140
    ly = _MARGIN_T + 10
    for idx, (label, _, style) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        dash = ' stroke-dasharray="7,4"' if style == "dashed" else ""
        yy = ly + 16 * idx
        out.append(
            f'<line x1="{lx:.2f}" y1="{yy:.2f}" x2="{lx + 26:.2f}" '
            f'y2="{yy:.2f}" stroke="{color}" stroke-width="1.4"{dash}/>'
        )
        out.append(
            f'<text x="{lx + 32:.2f}" y="{yy + 4:.2f}" '
            f'font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )

    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def plot_node_errors(traj: Trajectory, path) -> None:
    """Per-node estimation-error magnitudes over time, one curve per node."""
    e = traj.e
    N = e.shape[1]
    series = [
        (f"node {i + 1}", np.linalg.norm(e[:, i, :], axis=1), "solid")
        for i in range(N)
    ]
    render_line_plot(
        path,
        traj.t,
        series,
        title=f"Estimation errors per node ({traj.kind} run)",
        ylabel="|e_i(t)|",
    )


def plot_detector_outputs(traj: Trajectory, path) -> None:
    """Compensation signals of every node, with applied attacks dashed.

    Single-channel compensation signals are plotted directly; wider ones
    as magnitudes. Nodes that were actually attacked contribute a second,
    dashed curve with the injected signal for visual comparison.
    """
    series = []
    for i, u in enumerate(traj.u):
        if u.shape[1] == 1:
            vals = u[:, 0]
        else:
            vals = np.linalg.norm(u, axis=1)
        series.append((f"u{i + 1}", vals, "solid"))
    for i, f in enumerate(traj.f):
        if f.size and np.any(f != 0.0):
            vals = f[:, 0] if f.shape[1] == 1 else np.linalg.norm(f, axis=1)
            series.append((f"f{i + 1} (attack)", vals, "dashed"))
    render_line_plot(
        path,
        traj.t,
        series,
        title=f"Compensation signals vs applied attacks ({traj.kind} run)",
        ylabel="u_i(t)",
    )


def plot_run(traj: Trajectory, outdir) -> list:
    """Write the standard pair of run plots into ``outdir``; returns paths."""
    import os

    os.makedirs(outdir, exist_ok=True)
    p1 = os.path.join(outdir, "errors.svg")
    p2 = os.path.join(outdir, "detector.svg")
    plot_node_errors(traj, p1)
    plot_detector_outputs(traj, p2)
    return [p1, p2]
