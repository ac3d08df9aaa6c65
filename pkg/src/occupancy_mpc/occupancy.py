"""Periodic two-state Markov occupancy model with online Bayesian training.

Each slot ``k`` of the period owns two densities over a transition bias
``theta`` in [0, 1]:

* ``occupied[k]`` -- belief over P(occupied at k+1 | occupied at k)
* ``vacant[k]``   -- belief over P(occupied at k+1 | vacant at k)

Densities are sampled on the uniform grid ``theta_i = i / (G - 1)`` and all
integrals use the trapezoidal rule on that grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePosterior, DimensionMismatch, FormatError, InvalidArgument

DEFAULT_GRID_SIZE = 201
DEGENERATE_THRESHOLD = 1e-12


def theta_grid(grid_size: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_size)


def _trapezoid_weights(grid_size: int) -> np.ndarray:
    w = np.full(grid_size, 1.0 / (grid_size - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def integrate(values: np.ndarray) -> float:
    """Trapezoidal integral of grid samples over [0, 1]."""
    values = np.asarray(values, dtype=float)
    return float(_trapezoid_weights(values.size) @ values)


def uniform_grid(grid_size: int) -> np.ndarray:
    return np.ones(grid_size)


def normalize(values: np.ndarray) -> np.ndarray:
    total = integrate(values)
    if not total > DEGENERATE_THRESHOLD:
        raise DegeneratePosterior(f"density integrates to {total:.3g}")
    return np.asarray(values, dtype=float) / total


def expected_bias(grid: np.ndarray) -> float:
    """Posterior mean of the bias, int theta * density(theta) dtheta."""
    grid = np.asarray(grid, dtype=float)
    theta = theta_grid(grid.size)
    return float(_trapezoid_weights(grid.size) @ (theta * grid))


def bayes_update(grid: np.ndarray, outcome: bool) -> np.ndarray:
    """Multiply by the Bernoulli likelihood of ``outcome`` and renormalize."""
    grid = np.asarray(grid, dtype=float)
    theta = theta_grid(grid.size)
    likelihood = theta if outcome else 1.0 - theta
    return normalize(grid * likelihood)


def apply_forgetting(grid: np.ndarray, lam: float) -> np.ndarray:
    """Blend toward the uniform prior: ``lam * grid + (1 - lam)``."""
    if lam == 1.0:
        return np.array(grid, dtype=float)
    blended = lam * np.asarray(grid, dtype=float) + (1.0 - lam)
    return normalize(blended)


def fractional_posterior(prior: np.ndarray, weight_origin: float, gamma_next: float) -> np.ndarray:
    """Training blend for one density before forgetting.

    ``weight_origin`` is the probability that the interval started in the
    state this density belongs to; ``gamma_next`` the fraction of the next
    interval that was occupied.
    """
    prior = np.asarray(prior, dtype=float)
    if weight_origin == 0.0:
        return prior.copy()
    trained = np.zeros_like(prior)
    # skip zero-weight branches so an impossible outcome never raises
    if gamma_next > 0.0:
        trained += gamma_next * bayes_update(prior, True)
    if gamma_next < 1.0:
        trained += (1.0 - gamma_next) * bayes_update(prior, False)
    trained *= weight_origin
    if weight_origin < 1.0:
        trained += (1.0 - weight_origin) * prior
    return normalize(trained)


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise InvalidArgument(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass
class OccupancyModel:
    """Densities for every slot of the period plus the forgetting factor.

    ``occupied`` and ``vacant`` are ``(period, grid_size)`` arrays. Training
    mutates them in place; prediction only reads them.
    """

    occupied: np.ndarray
    vacant: np.ndarray
    lam: float

    @property
    def period(self) -> int:
        return self.occupied.shape[0]

    @property
    def grid_size(self) -> int:
        return self.occupied.shape[1]

    def copy(self) -> "OccupancyModel":
        return OccupancyModel(self.occupied.copy(), self.vacant.copy(), self.lam)

    def transition_probabilities(self) -> tuple[np.ndarray, np.ndarray]:
        """Expected biases ``(p, q)`` for every slot."""
        # same arithmetic as expected_bias so one-step predictions match it bit for bit
        p = np.array([expected_bias(g) for g in self.occupied])
        q = np.array([expected_bias(g) for g in self.vacant])
        return p, q

    def train_step(self, slot: int, gamma_k: float, gamma_next: float) -> "OccupancyModel":
        """Train slot ``slot`` on the observed pair, then forget.

        ``gamma_k`` is the occupied fraction of slot ``slot`` and
        ``gamma_next`` that of the following slot.
        """
        slot = self._check_slot(slot)
        gamma_k = _check_unit("gamma_k", gamma_k)
        gamma_next = _check_unit("gamma_next", gamma_next)
        occ = fractional_posterior(self.occupied[slot], gamma_k, gamma_next)
        vac = fractional_posterior(self.vacant[slot], 1.0 - gamma_k, gamma_next)
        self.occupied[slot] = apply_forgetting(occ, self.lam)
        self.vacant[slot] = apply_forgetting(vac, self.lam)
        return self

    def _check_slot(self, slot: int) -> int:
        if not 0 <= int(slot) < self.period:
            raise InvalidArgument(f"slot {slot} outside [0, {self.period})")
        return int(slot)


def new_model(period: int = 24, grid_size: int = DEFAULT_GRID_SIZE, lam: float = 0.974) -> OccupancyModel:
    if int(period) < 1:
        raise InvalidArgument(f"period must be >= 1, got {period}")
    if int(grid_size) < 3:
        raise InvalidArgument(f"grid_size must be >= 3, got {grid_size}")
    lam = _check_unit("lambda", lam)
    shape = (int(period), int(grid_size))
    return OccupancyModel(np.ones(shape), np.ones(shape), lam)


def train_step(model: OccupancyModel, slot: int, gamma_k: float, gamma_next: float) -> OccupancyModel:
    return model.train_step(slot, gamma_k, gamma_next)


def transition_matrix(model: OccupancyModel) -> np.ndarray:
    """Row-stochastic ``2M x 2M`` matrix, occupied slots first."""
    m = model.period
    p, q = model.transition_probabilities()
    P = np.zeros((2 * m, 2 * m))
    rows = np.arange(m)
    nxt = (rows + 1) % m
    P[rows, nxt] = p
    P[rows, m + nxt] = 1.0 - p
    P[m + rows, nxt] = q
    P[m + rows, m + nxt] = 1.0 - q
    return P


def initial_distribution(model: OccupancyModel, slot: int, gamma_k: float) -> np.ndarray:
    m = model.period
    pi = np.zeros(2 * m)
    pi[slot] = gamma_k
    pi[m + slot] = 1.0 - gamma_k
    return pi


def predict(model: OccupancyModel, slot: int, gamma_k: float, steps: int) -> float:
    """Expected occupied fraction ``steps`` slots after ``slot``."""
    if int(steps) < 1:
        raise InvalidArgument(f"steps must be >= 1, got {steps}")
    slot = model._check_slot(slot)
    gamma_k = _check_unit("gamma_k", gamma_k)
    m = model.period
    pi = initial_distribution(model, slot, gamma_k)
    dist = pi @ np.linalg.matrix_power(transition_matrix(model), int(steps))
    return float(dist[:m].sum())


def predict_sequence(model: OccupancyModel, slot: int, gamma_k: float, steps: int) -> np.ndarray:
    """Expected occupancy for 1..steps slots ahead.

    Exploits the cyclic sparsity of the transition matrix: only the marginal
    probability of being occupied needs to be propagated.
    """
    slot = model._check_slot(slot)
    occ = _check_unit("gamma_k", gamma_k)
    out = np.empty(int(steps))
    s = slot
    for j in range(int(steps)):
        p, q = expected_bias(model.occupied[s]), expected_bias(model.vacant[s])
        occ = occ * p + (1.0 - occ) * q
        out[j] = occ
        s = (s + 1) % model.period
    return out


def save_model(model: OccupancyModel, path) -> None:
    lines = [f"{model.period} {model.grid_size} {model.lam!r}"]
    for row in np.vstack([model.occupied, model.vacant]):
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> OccupancyModel:
    text = Path(path).read_text().splitlines()
    if not text:
        raise FormatError(f"{path}: empty model file")
    try:
        m_str, g_str, lam_str = text[0].split()
        m, g, lam = int(m_str), int(g_str), float(lam_str)
    except ValueError as exc:
        raise FormatError(f"{path}: bad header {text[0]!r}") from exc
    rows = [line for line in text[1:] if line.strip()]
    if len(rows) != 2 * m:
        raise DimensionMismatch(f"{path}: expected {2 * m} density rows, found {len(rows)}")
    data = np.empty((2 * m, g))
    for i, line in enumerate(rows):
        try:
            values = [float(v) for v in line.split()]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i + 2} is not numeric") from exc
        if len(values) != g:
            raise DimensionMismatch(f"{path}: row {i + 2} has {len(values)} samples, header says {g}")
        data[i] = values
    if m < 1 or g < 3 or not 0.0 <= lam <= 1.0:
        raise FormatError(f"{path}: invalid header values {text[0]!r}")
    if np.any(data < 0) or not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: densities must be finite and non-negative")
    return OccupancyModel(data[:m].copy(), data[m:].copy(), lam)
