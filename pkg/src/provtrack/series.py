"""Append-only metric series with threshold-triggered spill to TSV files.

One file per (key, context) pair under the run's metrics/ directory.  Each
line is `step<TAB>timestamp_ms<TAB>value` with the value rendered through
the same shortest round-trip float form the document serializer uses, so
the fully flushed file bytes never depend on the flush threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidArgumentError, NotFoundError
from .prov.model import format_double, parse_double
from .records import Context

# Filename-safe alphabet. Underscore is deliberately excluded so the single
# literal "_" joining context and key cannot be confused with either part.
_FS_SAFE = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789.-")


def fs_escape(text: str) -> str:
    out = []
    for byte in text.encode("utf-8"):
        ch = chr(byte)
        if ch in _FS_SAFE:
            out.append(ch)
        else:
            out.append("%{:02X}".format(byte))
    return "".join(out)


def fs_unescape(text: str) -> str:
    raw = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "%" and i + 3 <= len(text):
            try:
                raw.append(int(text[i + 1 : i + 3], 16))
                i += 3
                continue
            except ValueError:
                pass
        raw.extend(ch.encode("utf-8"))
        i += 1
    return raw.decode("utf-8")


def metric_filename(key: str, context: Context) -> str:
    return f"{fs_escape(context.label)}_{fs_escape(key)}.tsv"


def parse_metric_filename(name: str) -> tuple[str, Context]:
    """Inverse of metric_filename; raises on names it never produced."""
    if not name.endswith(".tsv"):
        raise InvalidArgumentError(f"not a metric file name: {name!r}")
    stem = name[: -len(".tsv")]
    ctx_part, sep, key_part = stem.partition("_")
    if not sep or not ctx_part or not key_part:
        raise InvalidArgumentError(f"not a metric file name: {name!r}")
    return fs_unescape(key_part), Context(fs_unescape(ctx_part))


@dataclass(frozen=True)
class MetricSample:
    step: int
    timestamp_ms: int
    value: float

    def __post_init__(self):
        if self.step < 0:
            raise InvalidArgumentError("metric step must be nonnegative")
        if not math.isfinite(self.value):
            raise InvalidArgumentError("metric value must be finite")


def _sample_line(sample: MetricSample) -> str:
    return f"{sample.step}\t{sample.timestamp_ms}\t{format_double(sample.value)}\n"


def read_series_file(path: Path) -> list[MetricSample]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            step_text, ts_text, value_text = line.rstrip("\n").split("\t")
            samples.append(
                MetricSample(int(step_text), int(ts_text), parse_double(value_text))
            )
    return samples


@dataclass
class MetricSeries:
    """Samples for one (key, context), in exact log order.

    Running aggregates cover every sample ever appended, spilled or not;
    the buffer holds only the tail not yet on disk.
    """

    key: str
    context: Context
    spill_path: Path
    buffered: list[MetricSample] = field(default_factory=list)
    spilled_count: int = 0
    count: int = 0
    min_value: float = math.inf
    max_value: float = -math.inf
    last_value: float = 0.0

    def append(self, sample: MetricSample) -> None:
        self.buffered.append(sample)
        self.count += 1
        self.min_value = min(self.min_value, sample.value)
        self.max_value = max(self.max_value, sample.value)
        self.last_value = sample.value

    def flush(self) -> None:
        if not self.buffered:
            return
        # One write call per flush keeps lines whole under concurrent readers.
        chunk = "".join(_sample_line(s) for s in self.buffered)
        with open(self.spill_path, "a", encoding="utf-8") as fh:
            fh.write(chunk)
        self.spilled_count += len(self.buffered)
        self.buffered.clear()


class MetricStore:
    """All series of one run, keyed by (key, context label)."""

    def __init__(self, metrics_dir: Path, flush_threshold: int | None):
        if flush_threshold is not None and flush_threshold < 1:
            raise InvalidArgumentError("flush threshold must be >= 1")
        self.metrics_dir = metrics_dir
        self.flush_threshold = flush_threshold
        self._series: dict[tuple[str, str], MetricSeries] = {}

    def series(self, key: str, context: Context) -> MetricSeries:
        try:
            return self._series[(key, context.label)]
        except KeyError:
            raise NotFoundError(f"no series for key={key!r} context={context.label!r}")

    def all_series(self) -> list[MetricSeries]:
        return list(self._series.values())

    def log(self, key: str, value: float, context: Context, step: int, timestamp_ms: int) -> None:
        if not key:
            raise InvalidArgumentError("metric key must be non-empty")
        ident = (key, context.label)
        series = self._series.get(ident)
        if series is None:
            series = MetricSeries(
                key=key,
                context=context,
                spill_path=self.metrics_dir / metric_filename(key, context),
            )
            self._series[ident] = series
        series.append(MetricSample(step=step, timestamp_ms=timestamp_ms, value=float(value)))
        if self.flush_threshold is not None and len(series.buffered) >= self.flush_threshold:
            series.flush()

    def flush_all(self) -> None:
        for series in self._series.values():
            series.flush()
