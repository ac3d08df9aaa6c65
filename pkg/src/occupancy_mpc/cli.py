"""Command-line entry point: ``occupancy-mpc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, ingest, synth, thermal
from .errors import OccupancyMpcError

log = logging.getLogger("occupancy_mpc")


def _scenario(args) -> harness.ScenarioConfig:
    cfg = harness.load_config(args.config) if args.config else harness.ScenarioConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "days", None) is not None:
        cfg = replace(cfg, sim_days=args.days)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    controllers = harness.CONTROLLERS if args.controller == "all" else (args.controller or cfg.controller,)
    cfg = replace(cfg, controller=controllers[0])
    cfg.validate()
    t0 = time.perf_counter()
    if len(controllers) > 1:
        results = harness.compare_controllers(cfg, controllers)
    else:
        results = {controllers[0]: harness.run_simulation(cfg)}
    written = harness.emit_reports(results, _out_dir(args))
    log.info("simulated %d controller(s) in %.1f s", len(results), time.perf_counter() - t0)
    sys.stdout.write(harness.format_metrics_table([r.metrics for r in results.values()]))
    for name, res in results.items():
        if name == "predictive":
            frac, days = harness.preconditioning_fraction(res.trace, cfg.step_seconds)
            print(f"preconditioning: {frac:.2f} of {days} weekdays")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _scenario(args)
    cfg.validate()
    lambdas = args.lambdas or harness.DEFAULT_LAMBDAS
    occ = harness.load_occupancy(cfg)
    rows = harness.lambda_sweep(occ.gammas, lambdas, cfg.start_time, cfg.step_seconds,
                                cfg.period, cfg.grid_size, weekend_skip=cfg.weekend_setback)
    path = _out_dir(args) / "lambda_sweep.csv"
    harness.write_sweep_csv(rows, path)
    best = min(rows, key=lambda r: r[1])
    for lam, rms in rows:
        print(f"{lam:<6g} {rms:.5f}")
    print(f"best lambda {best[0]:g} (rms {best[1]:.5f})")
    print(f"wrote {path}")
    return 0


def cmd_synth_occupancy(args) -> int:
    cfg = _scenario(args)
    days = args.days if args.days is not None else cfg.pretrain_days + cfg.sim_days
    params = replace(cfg.occupancy_params, dwell_seconds=cfg.dwell_seconds)
    events = synth.synth_occupancy(cfg.seed, days, params, cfg.start_time)
    out = _out_dir(args)
    path = out / "pulses.csv"
    ingest.write_pulse_csv(events, path)
    series = ingest.occupancy_from_pulses(events, cfg.start_time, int(days * 86400 // cfg.step_seconds),
                                          cfg.step_seconds, cfg.dwell_seconds)
    occ_path = out / "occupancy.csv"
    ingest.write_occupancy_csv(series, occ_path)
    hours = float(np.sum(series.gammas)) * cfg.step_seconds / 3600
    print(f"{len(events)} pulses, {hours:.1f} occupied hours over {days} days")
    print(f"wrote {path}\nwrote {occ_path}")
    return 0


def cmd_synth_weather(args) -> int:
    cfg = _scenario(args)
    days = args.days if args.days is not None else cfg.pretrain_days + cfg.sim_days
    n = int(days * 86400 // cfg.step_seconds) + cfg.mpc.horizon
    weather = synth.synth_weather(cfg.seed, n, cfg.weather_params, cfg.start_time, cfg.step_seconds)
    path = _out_dir(args) / "weather.csv"
    ingest.write_weather_csv(weather, path)
    print(f"{n} hourly rows, mean outdoor {np.mean(weather.outdoor_dry_bulb):.2f} C")
    print(f"wrote {path}")
    return 0


def cmd_step_response(args) -> int:
    cfg = _scenario(args)
    plant = harness.load_plant(cfg)
    samples = thermal.step_response_report(plant, args.initial, args.final, args.steps)
    out = _out_dir(args)
    path = out / "step_response.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "hours", "zone_c"])
        for k, value in enumerate(samples):
            w.writerow([k, repr(k * plant.step_seconds / 3600), repr(float(value))])
    model_path = out / "state_space.txt"
    thermal.save_state_space(plant, model_path)
    tau_h = thermal.dominant_time_constant(plant) / 3600
    print(f"{plant.n_states} states, dominant time constant {tau_h:.1f} h, "
          f"final zone {samples[-1]:.3f} C")
    print(f"wrote {path}\nwrote {model_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occupancy-mpc",
                                     description="Occupancy-predictive building climate control simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON or key = value scenario file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="seed for the synthetic generators")
        return p

    p = common(sub.add_parser("simulate", help="closed-loop simulation with reports"))
    p.add_argument("--controller", choices=harness.CONTROLLERS + ("all",),
                   help="controller to run; 'all' compares the three against the scheduled reference")
    p.add_argument("--days", type=int, help="simulated days after pretraining")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("sweep-lambda", help="one-step RMS prediction error per forgetting factor"))
    p.add_argument("--lambdas", type=float, nargs="+", help="forgetting factors to evaluate")
    p.add_argument("--days", type=int, help="simulated days after pretraining")
    p.set_defaults(func=cmd_sweep_lambda)

    p = common(sub.add_parser("synth-occupancy", help="write a synthetic pulse log"))
    p.add_argument("--days", type=int, help="number of days (default: pretrain + simulated)")
    p.set_defaults(func=cmd_synth_occupancy)

    p = common(sub.add_parser("synth-weather", help="write a synthetic cold-season weather file"))
    p.add_argument("--days", type=int, help="number of days (default: pretrain + simulated)")
    p.set_defaults(func=cmd_synth_weather)

    p = common(sub.add_parser("step-response", help="unheated zone response to a boundary step"))
    p.add_argument("--initial", type=float, default=20.0, help="initial uniform temperature (C)")
    p.add_argument("--final", type=float, default=0.0, help="stepped boundary temperature (C)")
    p.add_argument("--steps", type=int, default=96, help="number of steps to simulate")
    p.set_defaults(func=cmd_step_response)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OccupancyMpcError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
