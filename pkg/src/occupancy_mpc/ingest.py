"""Turn asynchronous motion-sensor pulses and weather files into step series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError

DEFAULT_DWELL_SECONDS = 900.0
HOUR = 3600.0


@dataclass(frozen=True, order=True)
class PulseEvent:
    timestamp: float
    sensor_id: str = ""


@dataclass
class OccupancySeries:
    start_time: float
    step_seconds: float
    gammas: np.ndarray

    def __len__(self):
        return len(self.gammas)


@dataclass
class WeatherSeries:
    start_time: float
    step_seconds: float
    outdoor_dry_bulb: np.ndarray
    ground_temp: np.ndarray

    def __post_init__(self):
        self.outdoor_dry_bulb = np.asarray(self.outdoor_dry_bulb, dtype=float)
        self.ground_temp = np.asarray(self.ground_temp, dtype=float)
        if self.outdoor_dry_bulb.shape != self.ground_temp.shape:
            raise ValueError("dry-bulb and ground series must have equal length")

    def __len__(self):
        return len(self.outdoor_dry_bulb)

    def boundary(self, index: int) -> np.ndarray:
        """Boundary vector ``[outdoor, ground]`` for step ``index`` (clamped to the last row)."""
        i = min(index, len(self) - 1)
        return np.array([self.outdoor_dry_bulb[i], self.ground_temp[i]])

    def window(self, index: int, length: int) -> np.ndarray:
        """``length x 2`` forecast rows starting at ``index``; the final row is held past the end."""
        idx = np.minimum(np.arange(index, index + length), len(self) - 1)
        return np.column_stack([self.outdoor_dry_bulb[idx], self.ground_temp[idx]])


def merge_pulses(events: Iterable, dwell_seconds: float = DEFAULT_DWELL_SECONDS) -> list[tuple[float, float]]:
    """Extend every pulse forward by ``dwell_seconds`` and coalesce overlaps.

    Accepts ``PulseEvent`` objects or bare timestamps. Touching intervals are
    merged as well.
    """
    if dwell_seconds <= 0:
        raise ValueError("dwell_seconds must be positive")
    times = (e.timestamp if isinstance(e, PulseEvent) else float(e) for e in events)
    return coalesce_intervals((t, t + dwell_seconds) for t in times)


def coalesce_intervals(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sorted union of ``(start, end)`` intervals; touching intervals join."""
    merged: list[tuple[float, float]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            if b > merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return merged


def discretize(intervals: Sequence[tuple[float, float]], start_time: float,
               step_seconds: float = HOUR, n_steps: int | None = None) -> OccupancySeries:
    """Fraction of each step covered by the occupied intervals."""
    if n_steps is None:
        last = max((b for _, b in intervals), default=start_time)
        n_steps = max(0, math.ceil((last - start_time) / step_seconds))
    covered = np.zeros(n_steps)
    for a, b in intervals:
        lo = max(a, start_time)
        hi = min(b, start_time + n_steps * step_seconds)
        if hi <= lo:
            continue
        first = int((lo - start_time) // step_seconds)
        last = min(int((hi - start_time) // step_seconds), n_steps - 1)
        for k in range(first, last + 1):
            s0 = start_time + k * step_seconds
            covered[k] += max(0.0, min(hi, s0 + step_seconds) - max(lo, s0))
    gammas = np.clip(covered / step_seconds, 0.0, 1.0)
    return OccupancySeries(float(start_time), float(step_seconds), gammas)


def occupancy_from_pulses(events, start_time: float, n_steps: int, step_seconds: float = HOUR,
                          dwell_seconds: float = DEFAULT_DWELL_SECONDS) -> OccupancySeries:
    return discretize(merge_pulses(events, dwell_seconds), start_time, step_seconds, n_steps)


def parse_timestamp(text: str) -> float:
    """Epoch seconds from an integer/float string or ISO-8601 (naive means UTC)."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _read_rows(path, expected_header: list[str]):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: file is empty")
    line, header = rows[0]
    if [h.strip() for h in header] != expected_header:
        raise ParseError(f"{path}: expected header {','.join(expected_header)}", line)
    return path, rows[1:]


def read_pulse_csv(path) -> list[PulseEvent]:
    path, rows = _read_rows(path, ["timestamp", "sensor_id"])
    events = []
    for line, row in rows:
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 columns, got {len(row)}", line)
        try:
            ts = parse_timestamp(row[0])
        except ValueError as exc:
            raise ParseError(f"{path}: bad timestamp {row[0]!r}", line) from exc
        events.append(PulseEvent(ts, row[1].strip()))
    events.sort()
    return events


def write_pulse_csv(events: Iterable[PulseEvent], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "sensor_id"])
        for e in events:
            w.writerow([f"{e.timestamp:.0f}" if float(e.timestamp).is_integer() else repr(e.timestamp),
                        e.sensor_id])


def read_weather_csv(path) -> WeatherSeries:
    path, rows = _read_rows(path, ["timestamp", "dry_bulb_c", "ground_c"])
    if not rows:
        raise ParseError(f"{path}: no weather rows")
    times, dry, ground = [], [], []
    for line, row in rows:
        if len(row) != 3:
            raise ParseError(f"{path}: expected 3 columns, got {len(row)}", line)
        try:
            times.append(parse_timestamp(row[0]))
            dry.append(float(row[1]))
            ground.append(float(row[2]))
        except ValueError as exc:
            raise ParseError(f"{path}: malformed row {row!r}", line) from exc
    order = np.argsort(times, kind="stable")
    times = np.asarray(times)[order]
    step = float(times[1] - times[0]) if len(times) > 1 else HOUR
    if step <= 0 or (len(times) > 1 and not np.allclose(np.diff(times), step)):
        raise ParseError(f"{path}: timestamps are not evenly spaced")
    return WeatherSeries(float(times[0]), step, np.asarray(dry)[order], np.asarray(ground)[order])


def write_weather_csv(weather: WeatherSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "dry_bulb_c", "ground_c"])
        for k in range(len(weather)):
            t = weather.start_time + k * weather.step_seconds
            w.writerow([f"{t:.0f}", f"{weather.outdoor_dry_bulb[k]:.6f}", f"{weather.ground_temp[k]:.6f}"])


def write_occupancy_csv(series: OccupancySeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step_index", "gamma"])
        for k, g in enumerate(series.gammas):
            w.writerow([k, repr(float(g))])
