"""Closed-loop simulation, metrics and the forgetting-factor sweep."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import control, ingest, occupancy, synth, thermal
from .errors import ConfigError, SolverFailure
from .ingest import HOUR, OccupancySeries, WeatherSeries

log = logging.getLogger(__name__)

CONTROLLERS = ("predictive", "triggered", "scheduled")
HISTOGRAM_BIN = 0.5  # degC * hr * occ
J_PER_KWH = 3.6e6


@dataclass
class ScenarioConfig:
    pulse_file: str | None = None
    weather_file: str | None = None
    thermal_model_file: str | None = None
    building: thermal.SingleZoneParams = field(default_factory=thermal.SingleZoneParams)
    controller: str = "predictive"
    mpc: control.MpcConfig = field(default_factory=control.MpcConfig)
    lam: float = 0.974
    period: int = 24
    grid_size: int = occupancy.DEFAULT_GRID_SIZE
    dwell_seconds: float = ingest.DEFAULT_DWELL_SECONDS
    pretrain_days: int = 7
    sim_days: int = 60
    start_time: float = synth.DEFAULT_START
    step_seconds: float = HOUR
    weekend_setback: bool = True
    initial_temp: float = 18.0
    seed: int = 0
    occupancy_params: synth.SynthOccupancyParams = field(default_factory=synth.SynthOccupancyParams)
    weather_params: synth.SynthWeatherParams = field(default_factory=synth.SynthWeatherParams)

    def validate(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}; choose from {', '.join(CONTROLLERS)}")
        if self.pretrain_days < 0 or self.sim_days < 1:
            raise ConfigError("pretrain_days must be >= 0 and sim_days >= 1")
        for name in ("pulse_file", "weather_file", "thermal_model_file"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} {path!r} does not exist")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")

    @property
    def pretrain_steps(self) -> int:
        return int(round(self.pretrain_days * 86400 / self.step_seconds))

    @property
    def total_steps(self) -> int:
        return self.pretrain_steps + int(round(self.sim_days * 86400 / self.step_seconds))


_NESTED = {
    "building": thermal.SingleZoneParams,
    "mpc": control.MpcConfig,
    "occupancy_params": synth.SynthOccupancyParams,
    "weather_params": synth.SynthWeatherParams,
}


def _coerce(value: str):
    text = value.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("\"'")


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a config from a nested dict; dotted keys (``mpc.beta``) are accepted too."""
    nested: dict[str, dict] = {k: {} for k in _NESTED}
    top = {}
    for key, value in data.items():
        if "." in key:
            head, tail = key.split(".", 1)
            if head not in _NESTED:
                raise ConfigError(f"unknown config section {head!r}")
            nested[head][tail] = value
        elif key in _NESTED and isinstance(value, dict):
            nested[key].update(value)
        else:
            top[key] = value
    names = {f.name for f in fields(ScenarioConfig)}
    unknown = set(top) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        for key, cls in _NESTED.items():
            if nested[key]:
                allowed = {f.name for f in fields(cls)}
                bad = set(nested[key]) - allowed
                if bad:
                    raise ConfigError(f"unknown {key} keys: {', '.join(sorted(bad))}")
                if key == "building":
                    for layer_key in ("wall_layers", "roof_layers", "floor_layers"):
                        if nested[key].get(layer_key) is not None:
                            nested[key][layer_key] = [thermal.Layer(**l) for l in nested[key][layer_key]]
                top[key] = cls(**nested[key])
        return ScenarioConfig(**top)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    """JSON file, or plain ``key = value`` lines (``#`` comments)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        data = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            data[key.strip()] = _coerce(value)
    cfg = config_from_dict(data)
    base = path.parent
    for name in ("pulse_file", "weather_file", "thermal_model_file"):
        value = getattr(cfg, name)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg, name, str(base / value))
    return cfg


def load_occupancy(cfg: ScenarioConfig) -> OccupancySeries:
    if cfg.pulse_file:
        events = ingest.read_pulse_csv(cfg.pulse_file)
    else:
        days = int(np.ceil(cfg.total_steps * cfg.step_seconds / 86400))
        params = replace(cfg.occupancy_params, dwell_seconds=cfg.dwell_seconds)
        events = synth.synth_occupancy(cfg.seed, days, params, cfg.start_time)
    return ingest.occupancy_from_pulses(events, cfg.start_time, cfg.total_steps,
                                        cfg.step_seconds, cfg.dwell_seconds)


def load_weather(cfg: ScenarioConfig) -> tuple[WeatherSeries, int]:
    """Weather series and the index of the scenario's first step within it."""
    if cfg.weather_file:
        weather = ingest.read_weather_csv(cfg.weather_file)
        offset = int(round((cfg.start_time - weather.start_time) / weather.step_seconds))
        if offset < 0 or offset >= len(weather):
            raise ConfigError("weather file does not cover the scenario start time")
        if weather.step_seconds != cfg.step_seconds:
            raise ConfigError("weather step does not match the simulation step")
        return weather, offset
    n = cfg.total_steps + cfg.mpc.horizon
    # weather is seeded independently of occupancy
    return synth.synth_weather(cfg.seed + 7919, n, cfg.weather_params, cfg.start_time, cfg.step_seconds), 0


def load_plant(cfg: ScenarioConfig) -> thermal.StateSpaceModel:
    if cfg.thermal_model_file:
        model = thermal.load_state_space(cfg.thermal_model_file)
        if model.step_seconds != cfg.step_seconds:
            raise ConfigError("thermal model step does not match the simulation step")
        return model
    return thermal.discretize(thermal.build_single_zone(cfg.building), cfg.step_seconds)


def slot_of(t: float, step_seconds: float, period: int) -> int:
    return int(t // step_seconds) % period


@dataclass
class SimulationTrace:
    """One row per closed-loop step.

    At step ``k`` the clock reads ``t_k``; ``gamma`` is the occupied fraction
    of the interval that just ended, ``x_zone`` the zone temperature now and
    ``u`` the heat applied over the next interval.
    """

    clock: np.ndarray
    gamma: np.ndarray
    gamma_predicted: np.ndarray
    x_zone: np.ndarray
    outdoor: np.ndarray
    u: np.ndarray
    discomfort: np.ndarray
    energy_kwh: np.ndarray

    COLUMNS = ("clock", "gamma", "gamma_predicted", "x_zone", "outdoor", "u", "discomfort", "energy_kwh")

    def __len__(self):
        return len(self.clock)


@dataclass
class MetricsSummary:
    controller: str
    total_discomfort: float
    peak_discomfort: float
    discomfort_variance: float
    total_energy_kwh: float
    savings_vs_reference: float | None
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray


def discomfort_histogram(discomfort: np.ndarray, width: float = HISTOGRAM_BIN):
    top = max(width, np.ceil(float(np.max(discomfort, initial=0.0)) / width) * width)
    if top <= float(np.max(discomfort, initial=0.0)):
        top += width
    edges = np.arange(0.0, top + width / 2, width)
    counts, _ = np.histogram(discomfort, bins=edges)
    return edges, counts


def compute_metrics(trace: SimulationTrace, controller: str, reference_energy: float | None = None) -> MetricsSummary:
    total_energy = float(np.sum(trace.energy_kwh))
    savings = None
    if reference_energy is not None and reference_energy > 0:
        savings = (reference_energy - total_energy) / reference_energy * 100.0
    edges, counts = discomfort_histogram(trace.discomfort)
    return MetricsSummary(
        controller=controller,
        total_discomfort=float(np.sum(trace.discomfort)),
        peak_discomfort=float(np.max(trace.discomfort, initial=0.0)),
        discomfort_variance=float(np.var(trace.discomfort)),
        total_energy_kwh=total_energy,
        savings_vs_reference=savings,
        histogram_edges=edges,
        histogram_counts=counts,
    )


@dataclass
class SimulationResult:
    trace: SimulationTrace
    metrics: MetricsSummary
    config: ScenarioConfig
    model: occupancy.OccupancyModel


def run_simulation(cfg: ScenarioConfig, occupancy_series: OccupancySeries | None = None,
                   weather: tuple[WeatherSeries, int] | None = None,
                   plant: thermal.StateSpaceModel | None = None) -> SimulationResult:
    """Pretrain the occupancy model, then run the closed loop for ``sim_days``.

    Each step observes the interval that just ended, trains on the latest
    observation pair, synthesizes the chosen controller against the perfect
    weather forecast and applies the first input to the plant.
    """
    cfg.validate()
    occ = occupancy_series or load_occupancy(cfg)
    weather_series, w_offset = weather or load_weather(cfg)
    plant = plant or load_plant(cfg)
    mpc = cfg.mpc
    dt = cfg.step_seconds
    gammas = occ.gammas
    if len(gammas) < cfg.total_steps:
        raise ConfigError(f"occupancy series has {len(gammas)} steps, scenario needs {cfg.total_steps}")

    model = occupancy.new_model(cfg.period, cfg.grid_size, cfg.lam)
    clock = lambda i: cfg.start_time + i * dt  # noqa: E731
    working = lambda t: synth.is_weekday(t) or not cfg.weekend_setback  # noqa: E731

    def train_through(k):
        # pair (k-2, k-1) is complete at time t_k
        if k >= 2 and working(clock(k - 2)):
            model.train_step(slot_of(clock(k - 2), dt, cfg.period), gammas[k - 2], gammas[k - 1])

    for k in range(cfg.pretrain_steps):
        train_through(k)

    x = thermal.equilibrium(plant, np.full(plant.n_boundary, cfg.initial_temp))
    A_tilde, B_tilde = thermal.augmentation_matrices(plant, mpc.horizon)
    rows = {name: [] for name in SimulationTrace.COLUMNS}
    last_prediction = np.nan
    for k in range(cfg.pretrain_steps, cfg.total_steps):
        t = clock(k)
        train_through(k)
        gamma_now = float(gammas[k - 1]) if k >= 1 else 0.0
        slot = slot_of(clock(k - 1), dt, cfg.period)
        forecast = weather_series.window(w_offset + k, mpc.horizon)
        aug = thermal.AugmentedModel(A_tilde, B_tilde, plant, mpc.horizon, mpc.tau, forecast)
        x_tilde = aug.state(x)
        # weight j scores the interval that ends j steps from now
        mask = np.array([working(clock(k - 1 + j)) for j in range(mpc.horizon)])
        weekend_now = not working(t)
        try:
            if weekend_now:
                decision = control.solve_weighted(aug, x_tilde, np.zeros(mpc.horizon), mpc, tau=mpc.tau_setback)
            elif cfg.controller == "predictive":
                decision = control.solve_mpc(aug, x_tilde, gamma_now, model, slot, mpc, horizon_mask=mask)
            elif cfg.controller == "triggered":
                decision = control.triggered_controller(aug, x_tilde, gamma_now, mpc)
            else:
                hour = int((t % 86400) // 3600)
                decision = control.scheduled_controller(aug, x_tilde, gamma_now, hour, mpc, working_mask=mask)
        except SolverFailure as exc:
            raise SolverFailure(str(exc), step=k) from exc

        u = decision.applied_u
        discomfort = gamma_now * abs(x[plant.zone_index] - mpc.tau) * dt / HOUR
        rows["clock"].append(t)
        rows["gamma"].append(gamma_now)
        rows["gamma_predicted"].append(last_prediction)
        rows["x_zone"].append(x[plant.zone_index])
        rows["outdoor"].append(forecast[0, 0])
        rows["u"].append(u)
        rows["discomfort"].append(discomfort)
        rows["energy_kwh"].append(u * dt / J_PER_KWH)

        last_prediction = float(occupancy.predict_sequence(model, slot, gamma_now, 1)[0])
        x = thermal.simulate_step(plant, x, u, forecast[0])

    trace = SimulationTrace(**{name: np.asarray(v, dtype=float) for name, v in rows.items()})
    metrics = compute_metrics(trace, cfg.controller)
    return SimulationResult(trace, metrics, cfg, model)


def compare_controllers(cfg: ScenarioConfig, controllers: Sequence[str] = CONTROLLERS,
                        reference: str = "scheduled") -> dict[str, SimulationResult]:
    """Run the same scenario under several controllers; savings are relative to ``reference``."""
    occ = load_occupancy(cfg)
    weather = load_weather(cfg)
    plant = load_plant(cfg)
    results = {}
    for name in controllers:
        results[name] = run_simulation(replace(cfg, controller=name), occ, weather, plant)
    if reference in results:
        ref_energy = results[reference].metrics.total_energy_kwh
        for name, res in results.items():
            res.metrics = compute_metrics(res.trace, name, ref_energy)
    return results


def preconditioning_fraction(trace: SimulationTrace, step_seconds: float = HOUR,
                             onset_hour: int | None = None) -> tuple[float, int]:
    """Share of weekdays where heat is on during the step before occupancy onset.

    Onset is the first interval of a day whose occupied fraction is at least
    one half. Only days whose onset hour equals ``onset_hour`` (default: the
    most common onset) are counted. Returns ``(fraction, n_days)``.
    """
    index = {int(round(t)): k for k, t in enumerate(trace.clock)}
    # gamma logged at clock t covers the interval that starts one step earlier
    interval_start = np.round(trace.clock - step_seconds).astype(np.int64)
    onsets: dict[int, int] = {}
    for k in np.flatnonzero(trace.gamma >= control.OCCUPIED_THRESHOLD):
        day = int(interval_start[k] // 86400)
        if day not in onsets and synth.is_weekday(day * 86400.0):
            onsets[day] = int(interval_start[k])
    if onset_hour is not None:
        wanted = {d: t for d, t in onsets.items() if (t % 86400) // 3600 == onset_hour}
    elif onsets:
        hours = np.array([(t % 86400) // 3600 for t in onsets.values()])
        values, counts = np.unique(hours, return_counts=True)
        mode = values[np.argmax(counts)]
        wanted = {d: t for d, t in onsets.items() if (t % 86400) // 3600 == mode}
    else:
        wanted = {}
    hits = total = 0
    for onset in wanted.values():
        # the input logged at clock (onset - step) is applied over the step just before onset
        k = index.get(int(onset - step_seconds))
        if k is None:
            continue
        total += 1
        hits += bool(trace.u[k] > 0.0)
    return (hits / total if total else 0.0), total


def lambda_sweep(gammas: np.ndarray, lambdas: Sequence[float], start_time: float = synth.DEFAULT_START,
                 step_seconds: float = HOUR, period: int = 24, grid_size: int = occupancy.DEFAULT_GRID_SIZE,
                 weekend_skip: bool = True, skip_steps: int = 0) -> list[tuple[float, float]]:
    """One-step RMS prediction error for each forgetting factor.

    Every observation is compared with the prediction made one step earlier,
    while the model trains online. Pairs whose origin falls on a weekend are
    neither trained nor scored when ``weekend_skip`` is set; the first
    ``skip_steps`` observations train but are not scored.
    """
    gammas = np.asarray(gammas, dtype=float)
    out = []
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"lambda {lam} outside [0, 1]")
        model = occupancy.new_model(period, grid_size, lam)
        sq = []
        for i in range(1, len(gammas)):
            t_prev = start_time + (i - 1) * step_seconds
            if weekend_skip and not synth.is_weekday(t_prev):
                continue
            slot = slot_of(t_prev, step_seconds, period)
            pred = occupancy.predict_sequence(model, slot, gammas[i - 1], 1)[0]
            if i >= skip_steps:
                sq.append((pred - gammas[i]) ** 2)
            model.train_step(slot, gammas[i - 1], gammas[i])
        out.append((float(lam), float(np.sqrt(np.mean(sq))) if sq else float("nan")))
    return out


DEFAULT_LAMBDAS = (0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.974,
                   0.98, 0.99, 1.0)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(trace: SimulationTrace, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SimulationTrace.COLUMNS)
        for k in range(len(trace)):
            w.writerow([_fmt(getattr(trace, c)[k]) for c in SimulationTrace.COLUMNS])


def write_histogram_csv(metrics_list: Sequence[MetricsSummary], path) -> None:
    width = max(len(m.histogram_counts) for m in metrics_list)
    edges = np.arange(width + 1) * HISTOGRAM_BIN
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high"] + [m.controller for m in metrics_list])
        for b in range(width):
            counts = [int(m.histogram_counts[b]) if b < len(m.histogram_counts) else 0 for m in metrics_list]
            w.writerow([f"{edges[b]:.1f}", f"{edges[b + 1]:.1f}"] + counts)


def format_metrics_table(metrics_list: Sequence[MetricsSummary]) -> str:
    header = f"{'controller':<12} {'total_disc':>11} {'peak_disc':>10} {'variance':>9} {'energy_kwh':>11} {'savings_%':>10}"
    lines = ["# discomfort in degC*hr*occ", header]
    for m in metrics_list:
        savings = "n/a" if m.savings_vs_reference is None else f"{m.savings_vs_reference:.1f}"
        lines.append(f"{m.controller:<12} {m.total_discomfort:>11.2f} {m.peak_discomfort:>10.2f} "
                     f"{m.discomfort_variance:>9.3f} {m.total_energy_kwh:>11.1f} {savings:>10}")
    return "\n".join(lines) + "\n"


def write_sweep_csv(rows: Sequence[tuple[float, float]], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "rms_error"])
        for lam, rms in rows:
            w.writerow([_fmt(lam), _fmt(rms)])


def emit_reports(results: dict[str, SimulationResult] | SimulationResult, out_dir,
                 sweep: Sequence[tuple[float, float]] | None = None) -> list[Path]:
    """Write trace, metrics table, histogram (and optional sweep) files to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(results, SimulationResult):
        results = {results.config.controller: results}
    written = []
    for name, res in results.items():
        path = out / f"trace_{name}.csv"
        write_trace_csv(res.trace, path)
        written.append(path)
    metrics_list = [r.metrics for r in results.values()]
    path = out / "metrics.txt"
    path.write_text(format_metrics_table(metrics_list))
    written.append(path)
    path = out / "histogram.csv"
    write_histogram_csv(metrics_list, path)
    written.append(path)
    if sweep is not None:
        path = out / "lambda_sweep.csv"
        write_sweep_csv(sweep, path)
        written.append(path)
    return written


def config_summary(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["mpc"]["r"] = np.asarray(cfg.mpc.r).tolist()
    return d
