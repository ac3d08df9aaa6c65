"""Seeded synthetic occupancy pulse logs and cold-season weather."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import HOUR, PulseEvent, WeatherSeries

DAY = 24 * HOUR
# 2024-01-01 00:00 UTC, a Monday
DEFAULT_START = 1704067200.0


def is_weekday(t: float) -> bool:
    # epoch day 0 (1970-01-01) was a Thursday
    return (int(t // DAY) + 3) % 7 < 5


@dataclass
class SynthOccupancyParams:
    start_hour: float = 9.0
    duration_hours: float = 8.0
    start_jitter_hours: float = 0.25
    duration_jitter_hours: float = 0.5
    attendance: float = 1.0  # probability a weekday has the meeting block
    pulse_rate_per_hour: float = 30.0
    drift_hours: float = 0.0  # shift of start/end after drift_day
    drift_day: int | None = None
    extra_meeting_prob: float = 0.0  # chance of an additional short meeting per weekday
    dwell_seconds: float = 900.0


def synth_occupancy(seed: int, days: int, params: SynthOccupancyParams | None = None,
                    start_time: float = DEFAULT_START) -> list[PulseEvent]:
    """Weekday meeting-style pulse log.

    Pulses form a Poisson stream inside each meeting, stopping one dwell
    before the meeting ends so that dwell-merging recovers the block length.
    """
    p = params or SynthOccupancyParams()
    rng = np.random.default_rng(seed)
    events: list[PulseEvent] = []
    for day in range(days):
        day_start = start_time + day * DAY
        # draw unconditionally so one day's randomness does not depend on another's branch
        attend, extra = rng.random(2)
        jitter = rng.normal(0.0, [p.start_jitter_hours, p.duration_jitter_hours])
        extra_start = rng.uniform(7.0, 19.0)
        if not is_weekday(day_start):
            continue
        blocks = []
        shift = p.drift_hours if p.drift_day is not None and day >= p.drift_day else 0.0
        if attend < p.attendance:
            begin = p.start_hour + shift + jitter[0]
            blocks.append((begin, begin + max(0.25, p.duration_hours + jitter[1])))
        if extra < p.extra_meeting_prob:
            blocks.append((extra_start, extra_start + 1.0))
        for begin_h, end_h in blocks:
            t0 = day_start + begin_h * HOUR
            t1 = day_start + end_h * HOUR - p.dwell_seconds
            events.extend(_pulse_train(rng, t0, max(t0, t1), p.pulse_rate_per_hour))
    events.sort()
    return events


def _pulse_train(rng, t0: float, t1: float, rate_per_hour: float) -> list[PulseEvent]:
    if rate_per_hour <= 0:
        return []
    n = rng.poisson(rate_per_hour * (t1 - t0) / HOUR)
    times = np.concatenate([[t0], rng.uniform(t0, t1, n), [t1]])
    return [PulseEvent(float(np.round(t)), "synthetic") for t in np.unique(np.round(times))]


@dataclass
class SynthWeatherParams:
    mean_c: float = -2.0
    daily_amplitude_c: float = 5.0
    peak_hour: float = 15.0
    ground_c: float = 6.0
    day_to_day_std_c: float = 2.5
    persistence: float = 0.7  # AR(1) coefficient of the daily offset


def synth_weather(seed: int, hours: int, params: SynthWeatherParams | None = None,
                  start_time: float = DEFAULT_START, step_seconds: float = HOUR) -> WeatherSeries:
    """Sinusoidal daily cycle plus a slowly varying daily offset."""
    p = params or SynthWeatherParams()
    rng = np.random.default_rng(seed)
    t = start_time + np.arange(hours) * step_seconds
    hour_of_day = (t % DAY) / HOUR
    day_index = ((t - start_time) // DAY).astype(int)
    n_days = int(day_index[-1]) + 1 if hours else 0
    offsets = np.zeros(n_days)
    scale = p.day_to_day_std_c * np.sqrt(1.0 - p.persistence ** 2)
    for d in range(n_days):
        prev = offsets[d - 1] if d else 0.0
        offsets[d] = p.persistence * prev + scale * rng.standard_normal()
    dry = p.mean_c + p.daily_amplitude_c * np.cos(2 * np.pi * (hour_of_day - p.peak_hour) / 24.0)
    if n_days:
        dry = dry + offsets[day_index]
    ground = np.full(hours, p.ground_c)
    return WeatherSeries(float(start_time), float(step_seconds), dry, ground)
