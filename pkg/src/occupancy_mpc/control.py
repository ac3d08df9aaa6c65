"""Occupancy-weighted finite-horizon control and its triggered/scheduled baselines.

Every controller solves the same condensed QP

    min_u  sum_j  w_j * beta * (z_j - tau)^2 + r_j * u_j,    u_min <= u <= u_max

where ``z_j`` is the zone temperature ``j`` steps ahead and ``w_j`` an
occupancy weight. Only the weights and setpoint differ between controllers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidArgument
from .occupancy import OccupancyModel, predict_sequence
from .qp import solve_box_qp
from .thermal import AugmentedModel

OCCUPIED_THRESHOLD = 0.5
SCHEDULE_START_HOUR = 5
SCHEDULE_END_HOUR = 21


@dataclass
class MpcConfig:
    horizon: int = 24
    beta: float = 1.0  # per degC^2 at full occupancy
    r: float | np.ndarray = 1e-2  # per W, scalar or per-step sequence
    tau: float = 23.0
    tau_setback: float = 10.0
    u_max: float = 8000.0
    u_min: float = 0.0
    tolerance: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        if int(self.horizon) < 1:
            raise InvalidArgument("horizon must be >= 1")
        if not self.beta > 0:
            raise InvalidArgument("beta must be positive")
        if np.any(np.asarray(self.r) < 0):
            raise InvalidArgument("energy gain r must be non-negative")
        if not self.u_max > 0:
            raise InvalidArgument("u_max must be positive")
        if not self.u_min < self.u_max:
            raise InvalidArgument("u_min must be below u_max")

    def energy_gains(self) -> np.ndarray:
        r = np.asarray(self.r, dtype=float)
        if r.ndim == 0:
            return np.full(self.horizon, float(r))
        if r.size < self.horizon:
            raise InvalidArgument(f"r sequence has {r.size} entries, horizon is {self.horizon}")
        return r[: self.horizon].copy()


@dataclass
class ControlDecision:
    u_sequence: np.ndarray
    predicted_cost: float
    weights: np.ndarray
    tau: float
    iterations: int = 0
    kkt_residual: float = 0.0
    zone_trajectory: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def applied_u(self) -> float:
        return float(self.u_sequence[0])


def stage_cost(x_zone: float, tau: float, u: float, gamma: float, beta: float, r: float) -> float:
    return gamma * beta * (x_zone - tau) ** 2 + r * abs(u)


def zone_response(aug: AugmentedModel, x_tilde0, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Free response ``f`` and input map ``S`` with ``z = f + S @ u``.

    ``z_j`` is the zone temperature at step ``j`` of the horizon, so ``z_0``
    is the current measurement and ``u_{N-1}`` affects nothing.
    """
    x_tilde0 = np.asarray(x_tilde0, dtype=float)
    if x_tilde0.shape != (aug.A_tilde.shape[0],):
        raise DimensionMismatch(f"augmented state has shape {x_tilde0.shape}, expected ({aug.A_tilde.shape[0]},)")
    if horizon > aug.horizon:
        raise DimensionMismatch(f"controller horizon {horizon} exceeds forecast register length {aug.horizon}")
    row = np.zeros(aug.A_tilde.shape[0])
    row[aug.zone_index] = 1.0
    free = np.empty(horizon)
    impulse = np.empty(horizon)
    for j in range(horizon):
        free[j] = row @ x_tilde0
        impulse[j] = row @ aug.B_tilde
        row = row @ aug.A_tilde
    S = np.zeros((horizon, horizon))
    for j in range(1, horizon):
        S[j, :j] = impulse[j - 1::-1]
    return free, S


def solve_weighted(aug: AugmentedModel, x_tilde0, weights, config: MpcConfig,
                   tau: float | None = None) -> ControlDecision:
    """Solve the QP for explicit occupancy weights.

    ``tau`` overrides the setpoint stored in the augmented state.
    """
    N = config.horizon
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (N,):
        raise DimensionMismatch(f"need {N} weights, got {weights.shape}")
    x_tilde0 = np.array(x_tilde0, dtype=float)
    if tau is not None:
        x_tilde0[aug.setpoint_index] = tau
    tau = float(x_tilde0[aug.setpoint_index])
    free, S = zone_response(aug, x_tilde0, N)
    r = config.energy_gains()

    if config.u_min < 0.0 < config.u_max:
        u, res = _solve_split(free, S, weights, tau, r, config)
    else:
        u, res = _solve_one_sided(free, S, weights, tau, r, config)
    z = free + S @ u
    cost = float(np.sum(weights * config.beta * (z - tau) ** 2 + r * np.abs(u)))
    return ControlDecision(u, cost, weights, tau, res.iterations, res.kkt_residual, z)


def _solve_one_sided(free, S, weights, tau, r, config):
    """Bounds of one sign, so ``|u|`` is linear; solve in s = (u - u_min) / span, s in [0, 1]."""
    N = config.horizon
    sign = 1.0 if config.u_min >= 0.0 else -1.0
    span = config.u_max - config.u_min
    lower = np.full(N, config.u_min)
    dev = free + S @ lower - tau
    Ss = S * span
    WS = weights[:, None] * Ss
    H = 2.0 * config.beta * (Ss.T @ WS)
    H = 0.5 * (H + H.T)
    g = 2.0 * config.beta * (WS.T @ dev) + sign * r * span
    res = solve_box_qp(H, g, np.zeros(N), np.ones(N), tol=config.tolerance, max_iter=config.max_iter)
    u = np.clip(config.u_min + span * res.x, config.u_min, config.u_max)
    u[res.x <= 0.0] = config.u_min
    u[res.x >= 1.0] = config.u_max
    return u, res


def _solve_split(free, S, weights, tau, r, config):
    """Heating and cooling parts ``u = u_max*a - |u_min|*b`` with a, b in [0, 1]."""
    N = config.horizon
    scale = np.concatenate([np.full(N, config.u_max), np.full(N, config.u_min)])
    M = np.hstack([S, S]) * scale
    WM = weights[:, None] * M
    H = 2.0 * config.beta * (M.T @ WM)
    H = 0.5 * (H + H.T)
    g = 2.0 * config.beta * (WM.T @ (free - tau)) + np.concatenate([r, r]) * np.abs(scale)
    res = solve_box_qp(H, g, np.zeros(2 * N), np.ones(2 * N), tol=config.tolerance, max_iter=config.max_iter)
    heat = np.where(res.x[:N] >= 1.0, config.u_max, config.u_max * res.x[:N])
    cool = np.where(res.x[N:] >= 1.0, config.u_min, config.u_min * res.x[N:])
    # with r > 0 at most one part is active per step; the sum is the net input
    return np.clip(heat + cool, config.u_min, config.u_max), res


def occupancy_weights(model: OccupancyModel, slot: int, gamma_now: float, horizon: int) -> np.ndarray:
    """Live observation first, then expected occupancy conditioned on it."""
    w = np.empty(horizon)
    w[0] = gamma_now
    if horizon > 1:
        w[1:] = predict_sequence(model, slot, gamma_now, horizon - 1)
    return w


def solve_mpc(aug: AugmentedModel, x_tilde0, gamma_now: float, occupancy_model: OccupancyModel,
              slot: int, config: MpcConfig, horizon_mask=None) -> ControlDecision:
    """Occupancy-predictive controller.

    ``slot`` is the period slot that ``gamma_now`` was measured over.
    ``horizon_mask`` optionally zeroes weights for horizon steps the caller
    wants ignored (e.g. weekends under a setback policy).
    """
    w = occupancy_weights(occupancy_model, slot, gamma_now, config.horizon)
    if horizon_mask is not None:
        w = w * np.asarray(horizon_mask, dtype=float)
    return solve_weighted(aug, x_tilde0, w, config)


def is_occupied(gamma: float) -> bool:
    return gamma >= OCCUPIED_THRESHOLD


def triggered_controller(aug: AugmentedModel, x_tilde0, gamma_now: float, config: MpcConfig) -> ControlDecision:
    """Current boolean occupancy held across the horizon; setback when vacant."""
    if is_occupied(gamma_now):
        return solve_weighted(aug, x_tilde0, np.ones(config.horizon), config, tau=config.tau)
    return solve_weighted(aug, x_tilde0, np.zeros(config.horizon), config, tau=config.tau_setback)


def schedule_weights(clock_hour: int, gamma_now: float, horizon: int, working_mask=None,
                     start: int = SCHEDULE_START_HOUR, end: int = SCHEDULE_END_HOUR) -> np.ndarray:
    """1 where the fixed schedule is active or the space is occupied now.

    Weight ``j`` belongs to the hour ending at ``clock_hour + j``.
    """
    hours = (clock_hour - 1 + np.arange(horizon)) % 24
    active = (hours >= start) & (hours < end)
    if working_mask is not None:
        active &= np.asarray(working_mask, dtype=bool)
    if is_occupied(gamma_now):
        active[:] = True
    return active.astype(float)


def scheduled_controller(aug: AugmentedModel, x_tilde0, gamma_now: float, clock_hour: int,
                         config: MpcConfig, weekend: bool = False, working_mask=None) -> ControlDecision:
    """Fixed 5:00-21:00 schedule supplemented with occupancy triggering.

    ``weekend`` forces the setback controller. ``working_mask`` marks horizon
    steps on working days so the schedule does not foresee weekend comfort.
    """
    if weekend:
        return solve_weighted(aug, x_tilde0, np.zeros(config.horizon), config, tau=config.tau_setback)
    w = schedule_weights(clock_hour, gamma_now, config.horizon, working_mask)
    tau = config.tau if w.any() else config.tau_setback
    return solve_weighted(aug, x_tilde0, w, config, tau=tau)
