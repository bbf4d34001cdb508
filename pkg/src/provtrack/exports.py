"""Tabular and visual exports of logged metric series.

The plot writer emits plain hand-assembled SVG with a fixed canvas and
palette: byte-stable output, no drawing library, no external assets.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape as _xml_escape

from .errors import InvalidArgumentError, NotFoundError
from .records import Context
from .series import MetricSample, metric_filename, read_series_file

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

_WIDTH, _HEIGHT = 800, 500
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 70, 70, 40, 50


def _series_path(run_dir: Path, key: str, context: Context) -> Path:
    path = Path(run_dir) / "metrics" / metric_filename(key, context)
    if not path.is_file():
        raise NotFoundError(f"no series for key={key!r} context={context.label!r} in {run_dir}")
    return path


def export_metric_csv(
    run_dir: str | Path, key: str, context: Context, output: str | Path | None = None
) -> Path:
    """Rewrite one spilled series as CSV. Field text is copied verbatim from
    the TSV, so the numbers survive byte-for-byte."""
    source = _series_path(Path(run_dir), key, context)
    target = Path(output) if output is not None else source.with_suffix(".csv")
    with open(source, "r", encoding="utf-8") as fh:
        rows = [line.rstrip("\n").split("\t") for line in fh]
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write("step,timestamp,value\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return target


def _fmt(value: float) -> str:
    return f"{value:.2f}"


class _Axis:
    """Linear map from a value interval onto a pixel interval."""

    def __init__(self, lo: float, hi: float, pixel_lo: float, pixel_hi: float):
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi = lo, hi
        self.pixel_lo, self.pixel_hi = pixel_lo, pixel_hi

    def __call__(self, value: float) -> float:
        frac = (value - self.lo) / (self.hi - self.lo)
        return self.pixel_lo + frac * (self.pixel_hi - self.pixel_lo)


def _ranges_disjoint(a: list[MetricSample], b: list[MetricSample]) -> bool:
    a_lo, a_hi = min(s.value for s in a), max(s.value for s in a)
    b_lo, b_hi = min(s.value for s in b), max(s.value for s in b)
    return a_hi < b_lo or b_hi < a_lo


def plot_metrics(
    run_dir: str | Path,
    series_list: list[tuple[str, Context]],
    output: str | Path,
) -> Path:
    """Line chart of one or more series against step. With exactly two
    series whose value ranges do not overlap, each gets its own y-axis
    (left/right); otherwise all share the left axis."""
    if not series_list:
        raise InvalidArgumentError("need at least one series to plot")
    run_dir = Path(run_dir)
    loaded: list[tuple[str, Context, list[MetricSample]]] = []
    for key, context in series_list:
        samples = read_series_file(_series_path(run_dir, key, context))
        if not samples:
            raise NotFoundError(f"series key={key!r} context={context.label!r} is empty")
        loaded.append((key, context, samples))

    x_lo = min(s.step for _, _, samples in loaded for s in samples)
    x_hi = max(s.step for _, _, samples in loaded for s in samples)
    x_axis = _Axis(float(x_lo), float(x_hi), _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT)

    plot_top, plot_bottom = float(_MARGIN_TOP), float(_HEIGHT - _MARGIN_BOTTOM)
    dual = len(loaded) == 2 and _ranges_disjoint(loaded[0][2], loaded[1][2])
    if dual:
        y_axes = []
        for _, _, samples in loaded:
            lo = min(s.value for s in samples)
            hi = max(s.value for s in samples)
            y_axes.append(_Axis(lo, hi, plot_bottom, plot_top))
    else:
        lo = min(s.value for _, _, samples in loaded for s in samples)
        hi = max(s.value for _, _, samples in loaded for s in samples)
        shared = _Axis(lo, hi, plot_bottom, plot_top)
        y_axes = [shared] * len(loaded)

    left_x, right_x = _fmt(_MARGIN_LEFT), _fmt(_WIDTH - _MARGIN_RIGHT)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{left_x}" y1="{_fmt(plot_bottom)}" x2="{right_x}" '
        f'y2="{_fmt(plot_bottom)}" stroke="black"/>',
        f'<line x1="{left_x}" y1="{_fmt(plot_top)}" x2="{left_x}" '
        f'y2="{_fmt(plot_bottom)}" stroke="black"/>',
    ]
    if dual:
        parts.append(
            f'<line x1="{right_x}" y1="{_fmt(plot_top)}" x2="{right_x}" '
            f'y2="{_fmt(plot_bottom)}" stroke="black"/>'
        )

    # Axis extent labels.
    parts.append(
        f'<text x="{left_x}" y="{_fmt(plot_bottom + 20)}" font-size="12">{x_lo}</text>'
    )
    parts.append(
        f'<text x="{right_x}" y="{_fmt(plot_bottom + 20)}" font-size="12" '
        f'text-anchor="end">{x_hi}</text>'
    )
    left_axis = y_axes[0]
    parts.append(
        f'<text x="{_fmt(_MARGIN_LEFT - 8)}" y="{_fmt(plot_bottom)}" font-size="12" '
        f'text-anchor="end">{_fmt(left_axis.lo)}</text>'
    )
    parts.append(
        f'<text x="{_fmt(_MARGIN_LEFT - 8)}" y="{_fmt(plot_top + 4)}" font-size="12" '
        f'text-anchor="end">{_fmt(left_axis.hi)}</text>'
    )
    if dual:
        right_axis = y_axes[1]
        parts.append(
            f'<text x="{_fmt(_WIDTH - _MARGIN_RIGHT + 8)}" y="{_fmt(plot_bottom)}" '
            f'font-size="12">{_fmt(right_axis.lo)}</text>'
        )
        parts.append(
            f'<text x="{_fmt(_WIDTH - _MARGIN_RIGHT + 8)}" y="{_fmt(plot_top + 4)}" '
            f'font-size="12">{_fmt(right_axis.hi)}</text>'
        )

    for index, (key, context, samples) in enumerate(loaded):
        color = PALETTE[index % len(PALETTE)]
        y_axis = y_axes[index]
        points = " ".join(
            f"{_fmt(x_axis(float(s.step)))},{_fmt(y_axis(s.value))}" for s in samples
        )
        parts.append(f'<polyline fill="none" stroke="{color}" points="{points}"/>')
        parts.append(
            f'<text x="{_fmt(_MARGIN_LEFT + 10)}" y="{_fmt(plot_top - 10 - 16 * (len(loaded) - 1 - index))}" '
            f'font-size="12" fill="{color}">{_xml_escape(f"{key} ({context.label})")}</text>'
        )

    parts.append("</svg>")
    target = Path(output)
    target.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return target
