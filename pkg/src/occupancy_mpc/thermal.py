"""Single-zone RC thermal network and its discrete-time state-space model.

Continuous dynamics are ``C dx/dt = -L x + K w + e_zone u`` where ``L`` is the
conductance Laplacian (boundary conductances on the diagonal), ``K`` maps the
boundary temperatures ``w = [outdoor, ground]`` into the nodes and ``u`` is
heat (W) injected into the zone air.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, FormatError, InvalidGeometry, SingularCapacitance

BOUNDARY_LABELS = ("outdoor", "ground")
AIR_DENSITY = 1.2  # kg/m3
AIR_SPECIFIC_HEAT = 1005.0  # J/(kg K)


@dataclass
class RcNetwork:
    """Lumped thermal network.

    ``edges`` are ``(i, j, conductance)`` between nodes, ``boundary_edges``
    are ``(i, source, conductance)`` from node ``i`` to a boundary source.
    """

    capacitances: np.ndarray
    edges: list[tuple[int, int, float]]
    boundary_edges: list[tuple[int, int, float]]
    zone_index: int = 0
    source_labels: tuple[str, ...] = BOUNDARY_LABELS
    node_labels: list[str] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.capacitances)

    @property
    def n_sources(self) -> int:
        return len(self.source_labels)

    def conductance_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(L, K)`` with ``L @ 1 == K @ 1``."""
        n, m = self.n_nodes, self.n_sources
        L = np.zeros((n, n))
        K = np.zeros((n, m))
        for i, j, g in self.edges:
            L[i, i] += g
            L[j, j] += g
            L[i, j] -= g
            L[j, i] -= g
        for i, s, g in self.boundary_edges:
            L[i, i] += g
            K[i, s] += g
        return L, K

    def validate(self) -> None:
        caps = np.asarray(self.capacitances, dtype=float)
        if np.any(~np.isfinite(caps)) or np.any(caps <= 0):
            raise SingularCapacitance("all node capacitances must be positive")
        for edge in list(self.edges) + list(self.boundary_edges):
            if edge[2] < 0:
                raise InvalidGeometry(f"negative conductance on edge {edge}")
        if not self._zone_reaches_boundary():
            raise InvalidGeometry("zone node is not connected to any boundary source")

    def _zone_reaches_boundary(self) -> bool:
        adjacency: dict[int, list[int]] = {i: [] for i in range(self.n_nodes)}
        for i, j, g in self.edges:
            if g > 0:
                adjacency[i].append(j)
                adjacency[j].append(i)
        grounded = {i for i, _, g in self.boundary_edges if g > 0}
        seen = {self.zone_index}
        queue = deque([self.zone_index])
        while queue:
            i = queue.popleft()
            if i in grounded:
                return True
            for j in adjacency[i]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        return False


@dataclass(frozen=True)
class Layer:
    thickness: float  # m
    conductivity: float  # W/(m K)
    density: float  # kg/m3
    specific_heat: float  # J/(kg K)


GYPSUM = Layer(0.0125, 0.25, 800.0, 1090.0)
BRICK = Layer(0.10, 0.72, 1900.0, 840.0)
CONCRETE = Layer(0.10, 1.4, 2200.0, 880.0)
TIMBER_FLOOR = Layer(0.02, 0.15, 600.0, 1600.0)


def insulation(thickness: float) -> Layer:
    return Layer(thickness, 0.04, 30.0, 1400.0)


@dataclass
class SingleZoneParams:
    length: float = 10.0
    width: float = 8.0
    height: float = 3.0
    # layers run inside to outside; roof/floor default to the wall build-up when None
    wall_layers: Sequence[Layer] = (GYPSUM, insulation(0.08), BRICK)
    roof_layers: Sequence[Layer] | None = (GYPSUM, insulation(0.15))
    floor_layers: Sequence[Layer] | None = (TIMBER_FLOOR, CONCRETE, insulation(0.05))
    h_inside: float = 8.0  # W/(m2 K), fixed convection
    h_outside: float = 25.0
    h_ground: float = 2.0  # floor-to-ground contact
    window_area: float = 6.0
    window_u: float = 2.8
    air_changes_per_hour: float = 0.5
    air_mass_multiplier: float = 5.0  # furnishings lumped with the air node


def _surface_chain(net_caps, edges, boundary_edges, labels, name, area, layers, h_in, h_out, source):
    resist_in = 1.0 / (h_in * area)
    prev = None
    for depth, layer in enumerate(layers):
        half = layer.thickness / (2.0 * layer.conductivity * area)
        node = len(net_caps)
        net_caps.append(layer.density * layer.specific_heat * layer.thickness * area)
        labels.append(f"{name}[{depth}]")
        if prev is None:
            edges.append((0, node, 1.0 / (resist_in + half)))
        else:
            edges.append((prev[0], node, 1.0 / (prev[1] + half)))
        prev = (node, half)
    boundary_edges.append((prev[0], source, 1.0 / (prev[1] + 1.0 / (h_out * area))))


def build_single_zone(params: SingleZoneParams | None = None) -> RcNetwork:
    """Zone air node plus layered chains for four walls, roof and floor."""
    p = params or SingleZoneParams()
    if min(p.length, p.width, p.height) <= 0:
        raise InvalidGeometry("room dimensions must be positive")
    wall = list(p.wall_layers)
    roof = list(p.roof_layers) if p.roof_layers is not None else wall
    floor = list(p.floor_layers) if p.floor_layers is not None else wall
    for layers, name in ((wall, "wall"), (roof, "roof"), (floor, "floor")):
        if not layers:
            raise InvalidGeometry(f"{name} needs at least one layer")
        for layer in layers:
            if min(layer.thickness, layer.conductivity, layer.density, layer.specific_heat) <= 0:
                raise InvalidGeometry(f"{name} layer has non-positive property: {layer}")
    if min(p.h_inside, p.h_outside, p.h_ground) <= 0:
        raise InvalidGeometry("convection coefficients must be positive")
    if p.window_area < 0 or p.window_area >= p.length * p.height:
        raise InvalidGeometry("window must fit in the first wall")

    volume = p.length * p.width * p.height
    caps = [AIR_DENSITY * AIR_SPECIFIC_HEAT * volume * p.air_mass_multiplier]
    labels = ["zone_air"]
    edges: list[tuple[int, int, float]] = []
    boundary: list[tuple[int, int, float]] = []
    direct = p.window_u * p.window_area + AIR_DENSITY * AIR_SPECIFIC_HEAT * volume * p.air_changes_per_hour / 3600.0
    if direct > 0:
        boundary.append((0, 0, direct))

    walls = [
        ("wall_a", p.length * p.height - p.window_area),
        ("wall_b", p.width * p.height),
        ("wall_c", p.length * p.height),
        ("wall_d", p.width * p.height),
    ]
    for name, area in walls:
        _surface_chain(caps, edges, boundary, labels, name, area, wall, p.h_inside, p.h_outside, 0)
    _surface_chain(caps, edges, boundary, labels, "roof", p.length * p.width, roof, p.h_inside, p.h_outside, 0)
    _surface_chain(caps, edges, boundary, labels, "floor", p.length * p.width, floor, p.h_inside, p.h_ground, 1)
    net = RcNetwork(np.asarray(caps), edges, boundary, 0, BOUNDARY_LABELS, labels)
    net.validate()
    return net


def demo_building() -> RcNetwork:
    """Lightweight-interior meeting room; 8 kW just saturates on cold mornings."""
    return build_single_zone(SingleZoneParams())


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    step_seconds: float
    zone_index: int = 0

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.B_w.shape[1]


def discretize(network: RcNetwork, step_seconds: float = 3600.0) -> StateSpaceModel:
    """Exact zero-order-hold discretization through one matrix exponential."""
    caps = np.asarray(network.capacitances, dtype=float)
    if np.any(~np.isfinite(caps)) or np.any(caps <= 0):
        raise SingularCapacitance("all node capacitances must be positive")
    if step_seconds < 0:
        raise ValueError("step_seconds must be non-negative")
    L, K = network.conductance_matrices()
    n, m = L.shape[0], K.shape[1]
    inputs = np.zeros((n, 1 + m))
    inputs[network.zone_index, 0] = 1.0
    inputs[:, 1:] = K
    block = np.zeros((n + 1 + m, n + 1 + m))
    block[:n, :n] = -L / caps[:, None]
    block[:n, n:] = inputs / caps[:, None]
    phi = expm(block * step_seconds)
    return StateSpaceModel(phi[:n, :n], phi[:n, n].copy(), phi[:n, n + 1:].copy(),
                           float(step_seconds), network.zone_index)


def simulate_step(model: StateSpaceModel, x, u: float, w) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if x.shape != (model.n_states,):
        raise DimensionMismatch(f"state has shape {x.shape}, model expects ({model.n_states},)")
    if w.shape != (model.n_boundary,):
        raise DimensionMismatch(f"boundary vector has shape {w.shape}, model expects ({model.n_boundary},)")
    return model.A @ x + model.B_u * float(u) + model.B_w @ w


def equilibrium(model: StateSpaceModel, w, u: float = 0.0) -> np.ndarray:
    """Fixed point of the one-step map under constant inputs."""
    n = model.n_states
    rhs = model.B_u * u + model.B_w @ np.atleast_1d(np.asarray(w, dtype=float))
    return np.linalg.solve(np.eye(n) - model.A, rhs)


def dominant_time_constant(model: StateSpaceModel) -> float:
    """Slowest time constant in seconds, from the largest eigenvalue of ``A``."""
    rho = float(np.max(np.abs(np.linalg.eigvals(model.A))))
    return -model.step_seconds / np.log(rho)


def step_response_report(model: StateSpaceModel, initial: float, boundary_step: float,
                         n_steps: int) -> np.ndarray:
    """Zone temperature after all boundaries jump from ``initial`` to ``boundary_step``.

    Returns ``n_steps + 1`` samples starting with the initial equilibrium.
    """
    x = np.full(model.n_states, float(initial))
    w = np.full(model.n_boundary, float(boundary_step))
    trace = [x[model.zone_index]]
    for _ in range(int(n_steps)):
        x = simulate_step(model, x, 0.0, w)
        trace.append(x[model.zone_index])
    return np.asarray(trace)


@dataclass
class AugmentedModel:
    """Plant state stacked with a constant setpoint and a forecast shift register.

    Layout of the augmented state: ``[x (n); tau (1); phi_0 .. phi_{N-1} (N*m)]``
    where ``phi_j`` is the boundary vector expected ``j`` steps ahead.
    """

    A_tilde: np.ndarray
    B_tilde: np.ndarray
    plant: StateSpaceModel
    horizon: int
    tau: float
    forecast: np.ndarray

    @property
    def setpoint_index(self) -> int:
        return self.plant.n_states

    @property
    def zone_index(self) -> int:
        return self.plant.zone_index

    @property
    def forecast_register_indices(self) -> np.ndarray:
        start = self.plant.n_states + 1
        return np.arange(start, start + self.horizon * self.plant.n_boundary)

    def state(self, x) -> np.ndarray:
        """Augmented state for plant state ``x`` with this model's setpoint and forecast."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.plant.n_states,):
            raise DimensionMismatch(f"plant state has shape {x.shape}")
        return np.concatenate([x, [self.tau], self.forecast.ravel()])

    def step(self, x_tilde, u: float) -> np.ndarray:
        return self.A_tilde @ x_tilde + self.B_tilde * float(u)


def augmentation_matrices(model: StateSpaceModel, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    n, m = model.n_states, model.n_boundary
    dim = n + 1 + horizon * m
    A = np.zeros((dim, dim))
    A[:n, :n] = model.A
    reg = n + 1
    A[:n, reg:reg + m] = model.B_w
    A[n, n] = 1.0
    for j in range(horizon):
        src = j + 1 if j + 1 < horizon else j
        A[reg + j * m: reg + (j + 1) * m, reg + src * m: reg + (src + 1) * m] = np.eye(m)
    B = np.zeros(dim)
    B[:n] = model.B_u
    return A, B


def augment(model: StateSpaceModel, tau: float, forecast) -> AugmentedModel:
    """Build the augmented model for one controller synthesis.

    ``forecast`` has one boundary row per horizon step; its length sets the
    horizon.
    """
    forecast = np.asarray(forecast, dtype=float)
    if forecast.ndim == 1 and model.n_boundary == 1:
        forecast = forecast[:, None]
    if forecast.ndim != 2 or forecast.shape[1] != model.n_boundary or forecast.shape[0] < 1:
        raise DimensionMismatch(
            f"forecast must be (N, {model.n_boundary}) with N >= 1, got {forecast.shape}")
    A, B = augmentation_matrices(model, forecast.shape[0])
    return AugmentedModel(A, B, model, forecast.shape[0], float(tau), forecast)


def save_state_space(model: StateSpaceModel, path) -> None:
    n, m = model.n_states, model.n_boundary
    lines = [f"{n} {m} {model.step_seconds!r} {model.zone_index}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.A]
    lines += [repr(float(v)) for v in model.B_u]
    lines += [" ".join(repr(float(v)) for v in row) for row in model.B_w]
    Path(path).write_text("\n".join(lines) + "\n")


def load_state_space(path) -> StateSpaceModel:
    text = Path(path).read_text().split("\n", 1)
    try:
        n_s, m_s, dt_s, z_s = text[0].split()
        n, m, dt, zone = int(n_s), int(m_s), float(dt_s), int(z_s)
        values = np.array([float(v) for v in (text[1].split() if len(text) > 1 else [])])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed thermal model file") from exc
    expected = n * n + n + n * m
    if values.size != expected:
        raise DimensionMismatch(f"{path}: expected {expected} values for n={n}, m={m}, found {values.size}")
    if not 0 <= zone < n:
        raise FormatError(f"{path}: zone index {zone} out of range")
    A = values[: n * n].reshape(n, n)
    B_u = values[n * n: n * n + n].copy()
    B_w = values[n * n + n:].reshape(n, m)
    return StateSpaceModel(A, B_u, B_w, dt, zone)
