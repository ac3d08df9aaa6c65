import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from occupancy_mpc import thermal
from occupancy_mpc.errors import DimensionMismatch, FormatError, InvalidGeometry, SingularCapacitance
from occupancy_mpc.thermal import Layer, RcNetwork, SingleZoneParams


def scalar_network(C=1e6, G=100.0):
    return RcNetwork(np.array([C]), [], [(0, 0, G)], source_labels=("outdoor",))


@st.composite
def networks(draw):
    """Random connected networks: a spanning tree plus extra edges, one or two sources."""
    n = draw(st.integers(1, 7))
    m = draw(st.integers(1, 2))
    caps = draw(st.lists(st.floats(1e4, 1e7), min_size=n, max_size=n))
    cond = st.floats(1.0, 500.0)
    edges = [(draw(st.integers(0, i - 1)), i, draw(cond)) for i in range(1, n)]
    for _ in range(draw(st.integers(0, 3))):
        i, j = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if i != j:
            edges.append((i, j, draw(cond)))
    boundary = [(draw(st.integers(0, n - 1)), s, draw(cond)) for s in range(m)]
    return RcNetwork(np.array(caps), edges, boundary, source_labels=("outdoor", "ground")[:m])


# --- construction ------------------------------------------------------------

def test_single_layer_box_has_six_chains():
    layer = Layer(0.2, 0.8, 1800.0, 900.0)
    params = SingleZoneParams(5.0, 5.0, 3.0, wall_layers=[layer], roof_layers=None, floor_layers=None)
    net = thermal.build_single_zone(params)
    assert net.n_nodes == 1 + 6
    # every surface node couples to the zone and to one boundary
    assert sum(1 for i, j, _ in net.edges if 0 in (i, j)) == 6
    assert sorted(s for _, s, _ in net.boundary_edges) == [0, 0, 0, 0, 0, 0, 1]


def test_two_layer_walls_make_chains_of_two():
    layers = [Layer(0.1, 0.5, 1000.0, 900.0), Layer(0.1, 0.04, 30.0, 1400.0)]
    params = SingleZoneParams(5.0, 5.0, 3.0, wall_layers=layers, roof_layers=None, floor_layers=None)
    net = thermal.build_single_zone(params)
    assert net.n_nodes == 1 + 12
    assert sum(1 for label in net.node_labels if label.startswith("wall_a")) == 2


@pytest.mark.parametrize("bad", [
    dict(wall_layers=[Layer(0.0, 0.5, 1000.0, 900.0)]),
    dict(length=0.0),
    dict(wall_layers=[]),
    dict(window_area=100.0),
    dict(h_inside=0.0),
])
def test_invalid_geometry(bad):
    with pytest.raises(InvalidGeometry):
        thermal.build_single_zone(SingleZoneParams(**bad))


def test_isolated_zone_is_invalid():
    net = RcNetwork(np.array([1e5, 1e5]), [], [(1, 0, 10.0)], source_labels=("outdoor",))
    with pytest.raises(InvalidGeometry):
        net.validate()


@pytest.mark.parametrize("caps", [[0.0], [-1.0], [np.nan]])
def test_non_positive_capacitance(caps):
    net = RcNetwork(np.array(caps), [], [(0, 0, 10.0)], source_labels=("outdoor",))
    with pytest.raises(SingularCapacitance):
        thermal.discretize(net)


def test_demo_building_size():
    net = thermal.demo_building()
    assert 10 <= net.n_nodes <= 40


# --- discretization ----------------------------------------------------------

def test_scalar_closed_form():
    model = thermal.discretize(scalar_network(), 3600)
    assert model.A[0, 0] == pytest.approx(np.exp(-0.36), abs=1e-12)
    assert model.A[0, 0] == pytest.approx(0.6977, abs=1e-4)
    assert model.A[0, 0] + model.B_w[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert model.B_u[0] == pytest.approx((1 - np.exp(-0.36)) / 100.0, rel=1e-12)
    x1 = thermal.simulate_step(model, [10.0], 0.0, [20.0])
    assert x1[0] == pytest.approx(13.023, abs=1e-3)


def test_zero_step_is_identity():
    model = thermal.discretize(thermal.demo_building(), 0.0)
    assert np.array_equal(model.A, np.eye(model.n_states))
    assert not model.B_u.any() and not model.B_w.any()


def test_discretization_matches_ode_integration():
    # independent oracle: integrate the continuous network with a stiff ODE solver
    net = thermal.demo_building()
    L, K = net.conductance_matrices()
    caps = net.capacitances
    rng = np.random.default_rng(0)
    x0 = rng.uniform(5, 25, net.n_nodes)
    u, w = 3000.0, np.array([-5.0, 6.0])
    e = np.zeros(net.n_nodes)
    e[0] = 1.0

    def rhs(_, x):
        return (-L @ x + K @ w + e * u) / caps

    sol = solve_ivp(rhs, (0, 3600), x0, method="Radau", rtol=1e-10, atol=1e-10)
    model = thermal.discretize(net, 3600)
    assert np.allclose(thermal.simulate_step(model, x0, u, w), sol.y[:, -1], atol=1e-6)


@given(networks())
@settings(max_examples=60, deadline=None)
def test_unit_dc_gain(net):
    model = thermal.discretize(net, 3600)
    T = 17.5
    fixed = thermal.equilibrium(model, np.full(model.n_boundary, T))
    assert np.allclose(fixed, T, atol=1e-9)
    x1 = thermal.simulate_step(model, np.full(model.n_states, 20.0), 0.0, np.full(model.n_boundary, 20.0))
    assert np.allclose(x1, 20.0, atol=1e-9)


@given(networks())
@settings(max_examples=60, deadline=None)
def test_stable(net):
    model = thermal.discretize(net, 3600)
    assert np.max(np.abs(np.linalg.eigvals(model.A))) < 1


@given(networks(), st.sampled_from([600.0, 1800.0, 3600.0]))
@settings(max_examples=40, deadline=None)
def test_semigroup(net, dt):
    full = thermal.discretize(net, dt)
    half = thermal.discretize(net, dt / 2)
    assert np.allclose(half.A @ half.A, full.A, atol=1e-9, rtol=0)
    # the input maps compose too: B(dt) = A(dt/2) B(dt/2) + B(dt/2)
    assert np.allclose(half.A @ half.B_w + half.B_w, full.B_w, atol=1e-9, rtol=0)


@given(networks(), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
@settings(max_examples=40, deadline=None)
def test_superposition(net, u, du):
    model = thermal.discretize(net, 3600)
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 30, model.n_states)
    w = rng.uniform(-10, 10, model.n_boundary)
    zero_x, zero_w = np.zeros(model.n_states), np.zeros(model.n_boundary)
    lhs = thermal.simulate_step(model, x, u, w) + thermal.simulate_step(model, zero_x, du, zero_w)
    assert np.allclose(lhs, thermal.simulate_step(model, x, u + du, w), atol=1e-9)


def test_simulate_step_dimension_mismatch():
    model = thermal.discretize(thermal.demo_building())
    with pytest.raises(DimensionMismatch):
        thermal.simulate_step(model, np.zeros(3), 0.0, [0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        thermal.simulate_step(model, np.zeros(model.n_states), 0.0, [0.0])


# --- step response -----------------------------------------------------------

def test_step_response_monotone_and_converges():
    model = thermal.discretize(thermal.demo_building(), 3600)
    tau_h = thermal.dominant_time_constant(model) / 3600
    n = int(np.ceil(10 * tau_h))
    trace = thermal.step_response_report(model, 10.0, 20.0, n)
    assert np.all(np.diff(trace) >= -1e-12)
    assert abs(trace[-1] - 20.0) < 0.1


def test_step_response_flat_for_zero_step():
    model = thermal.discretize(thermal.demo_building(), 3600)
    trace = thermal.step_response_report(model, 15.0, 15.0, 48)
    assert np.allclose(trace, 15.0, atol=1e-9)


# --- augmentation ------------------------------------------------------------

@given(st.integers(1, 12))
@settings(max_examples=12, deadline=None)
def test_augmented_rollout_matches_plant(N):
    model = thermal.discretize(thermal.demo_building(), 3600)
    rng = np.random.default_rng(N)
    forecast = rng.uniform(-10, 10, (N, 2))
    aug = thermal.augment(model, 21.0, forecast)
    x = rng.uniform(10, 20, model.n_states)
    xt = aug.state(x)
    us = rng.uniform(0, 8000, N + 3)
    for j, u in enumerate(us):
        x = thermal.simulate_step(model, x, u, forecast[min(j, N - 1)])
        xt = aug.step(xt, u)
        assert np.allclose(xt[:model.n_states], x, atol=1e-9)
        assert xt[aug.setpoint_index] == 21.0


def test_augmented_single_register():
    model = thermal.discretize(thermal.demo_building(), 3600)
    aug = thermal.augment(model, 20.0, [[1.0, 2.0]])
    n = model.n_states
    assert aug.A_tilde.shape == (n + 1 + 2, n + 1 + 2)
    assert np.array_equal(aug.A_tilde[n + 1:, n + 1:], np.eye(2))
    assert aug.forecast_register_indices.tolist() == [n + 1, n + 2]


def test_augment_rejects_bad_forecast():
    model = thermal.discretize(thermal.demo_building(), 3600)
    with pytest.raises(DimensionMismatch):
        thermal.augment(model, 20.0, np.zeros((4, 3)))


# --- persistence -------------------------------------------------------------

def test_state_space_round_trip(tmp_path):
    model = thermal.discretize(thermal.demo_building(), 3600)
    thermal.save_state_space(model, tmp_path / "m.txt")
    back = thermal.load_state_space(tmp_path / "m.txt")
    assert np.array_equal(back.A, model.A)
    assert np.array_equal(back.B_u, model.B_u)
    assert np.array_equal(back.B_w, model.B_w)
    assert back.step_seconds == model.step_seconds and back.zone_index == model.zone_index


def test_state_space_bad_files(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 1 3600.0 0\n1 0\n0 1\n")
    with pytest.raises(DimensionMismatch):
        thermal.load_state_space(path)
    path.write_text("two 1 3600 0\n")
    with pytest.raises(FormatError):
        thermal.load_state_space(path)
