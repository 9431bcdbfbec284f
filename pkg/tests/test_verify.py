import numpy as np
import pytest
from conftest import TWO_NODE_C, TWO_NODE_GAP, TWO_NODE_U0, random_connected_graph
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hkgame import GameParams, GridTooCoarseError, SocialGraph, Trajectory, build_setup, sample_trajectory, zachary
from hkgame.graph import dynamics_matrix
from hkgame.matfun import expm
from hkgame.openloop import uniform_opinions
from hkgame.verify import (
    OutcomeKind,
    classify_outcome,
    cost_gradient,
    deviation_test,
    discrete_game_oracle,
    evaluate_cost,
    format_report,
    simulate_forward,
)


def test_cost_trivial_cases():
    g = SocialGraph.from_edges(2, [(0, 1)])
    p = GameParams.create(2, 1.0, [0.0, 0.0])
    ts = np.linspace(0, 1, 11)
    still = Trajectory(ts, np.zeros((11, 2)), np.zeros((11, 2)))
    assert evaluate_cost(still, 0, p, g).total == 0.0
    apart = Trajectory(ts, np.tile([0.0, 1.0], (11, 1)), np.zeros((11, 2)))
    for i in (0, 1):
        assert evaluate_cost(apart, i, p, g).disagreement == 1.0


def test_cost_stubborn_terms():
    g = SocialGraph.from_edges(2, [(0, 1)])
    p = GameParams.create(2, 1.0, [0.0, 0.0], omega=0.25)
    ts = np.linspace(0, 1, 11)
    traj = Trajectory(ts, np.tile([0.0, 2.0], (11, 1)), np.zeros((11, 2)))
    c = evaluate_cost(traj, 1, p, g, stubborn=True)
    assert c.disagreement == 0.75 * 4 and c.prejudice == 0.25 * 4
    assert c.total == 4.0


def test_cost_grid_too_coarse():
    g = SocialGraph.from_edges(2, [(0, 1)])
    p = GameParams.create(2, 1.0, [0.0, 0.0])
    traj = Trajectory(np.array([0.0, 1.0]), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(GridTooCoarseError):
        evaluate_cost(traj, 0, p, g)


def test_two_node_costs(two_node):
    g, p = two_node
    traj = sample_trajectory(build_setup(g, p), p, dt=1e-3)
    c0, c1 = (evaluate_cost(traj, i, p, g) for i in (0, 1))
    effort = TWO_NODE_C**2 * (1 - np.exp(-4.0)) / 4
    assert abs(c0.total - c1.total) <= 1e-12
    assert abs(c0.disagreement - TWO_NODE_GAP**2) <= 1e-12
    assert abs(c0.effort - effort) <= 1e-7


def test_effort_converges_second_order(two_node):
    g, p = two_node
    s = build_setup(g, p)
    exact = TWO_NODE_C**2 * (1 - np.exp(-4.0)) / 4
    errs = [abs(evaluate_cost(sample_trajectory(s, p, dt), 0, p, g).effort - exact) for dt in (0.02, 0.01)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_forward_zero_controls_is_flow():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0)
    sim = simulate_forward(g, p, lambda t: np.zeros(34), 1e-3)
    assert np.max(np.abs(sim.final - expm(dynamics_matrix(g), 10.0) @ x0)) <= 1e-8


@pytest.mark.parametrize("tau", [0.0, 0.3])
def test_forward_constant_controls(tau):
    # difference and sum coordinates decouple on the two-node graph
    g = SocialGraph.from_edges(2, [(0, 1)])
    c = np.array([0.3, -0.1])
    p = GameParams.create(2, 2.0, [-1.0, 1.0], tau=tau)
    sim = simulate_forward(g, p, lambda t: c, 1e-3)
    t = 2.0 - tau
    d0 = -2.0 * np.exp(-2 * tau)
    d = d0 * np.exp(-2 * t) + (c[0] - c[1]) * (1 - np.exp(-2 * t)) / 2
    m = (c[0] + c[1]) / 2 * t
    np.testing.assert_allclose(sim.final, [m + d / 2, m - d / 2], atol=1e-10)


def test_two_node_deviation(two_node):
    g, p = two_node
    for i in (0, 1):
        rep = deviation_test(g, p, i, n_perturbations=20, seed=3)
        assert rep.passed and len(rep.margins) == 20
        assert rep.min_margin >= 0.0


def test_zero_perturbation_margin(two_node):
    g, p = two_node
    rep = deviation_test(g, p, 0, n_perturbations=3, amplitude=0.0)
    assert max(abs(m) for m in rep.margins) == 0.0


def test_zachary_deviation_agent0():
    g = zachary()
    p = GameParams.create(34, 10.0, uniform_opinions(34))
    assert deviation_test(g, p, 0, n_perturbations=5, seed=0).passed


def test_gradient_vanishes_at_equilibrium(small_instances):
    g, p = small_instances[3]
    for stubborn in (False, True):
        grad, J = cost_gradient(g, p, 0, stubborn, dt=2e-3)
        assert np.max(np.abs(grad)) <= 1e-4 * (1 + abs(J))


def test_discrete_oracle_two_node(two_node):
    g, p = two_node
    errs = []
    for N in (100, 1000):
        U, _ = discrete_game_oracle(g, p, N)
        errs.append(abs(U[0, 0] - TWO_NODE_U0))
        np.testing.assert_allclose(U[:, 0], -U[:, 1], atol=1e-15)
    assert errs[0] <= 5e-2 and errs[1] <= 5e-3
    assert errs[1] < errs[0]


def test_discrete_oracle_consensus_zero(path3):
    p = GameParams.create(3, 1.0, [0.2, 0.2, 0.2])
    U, _ = discrete_game_oracle(path3, p, 50)
    assert np.max(np.abs(U)) <= 1e-15


def test_discrete_oracle_refinement_path3(path3):
    p = GameParams.create(3, 2.0, [-1.0, 0.1, 0.8], r=[1.0, 0.5, 2.0])
    ref = sample_trajectory(build_setup(path3, p), p, dt=2.0 / 200)
    errs = []
    for N in (50, 100, 200):
        _, traj = discrete_game_oracle(path3, p, N)
        errs.append(np.max(np.abs(traj.final - ref.final)))
    assert errs[2] <= 5.0 / 200
    # first order: halving the step roughly halves the error
    assert 1.6 < errs[1] / errs[2] < 2.4


def test_discrete_oracle_rejects_delay(two_node):
    g, p = two_node
    with pytest.raises(ValueError):
        discrete_game_oracle(g, p.replace(tau=0.1), 10)


def test_classify_examples():
    assert classify_outcome(np.full(5, 0.3)).kind is OutcomeKind.CONSENSUS
    c = classify_outcome(np.array([-0.5, -0.49, 0.5, 0.51]), cluster_tol=0.1)
    assert str(c) == "Clustered(2)" and c.k == 2
    np.testing.assert_allclose(c.cluster_centers, [-0.495, 0.505])
    d = classify_outcome(uniform_opinions(34), cluster_tol=0.01)
    assert d.kind is OutcomeKind.DISAGREEMENT
    with pytest.raises(ValueError):
        classify_outcome(np.zeros(3), consensus_tol=0.0)


def test_classify_cluster_cap():
    x = np.repeat(np.arange(6.0), 3)
    assert classify_outcome(x).kind is OutcomeKind.DISAGREEMENT
    assert str(classify_outcome(x, max_clusters=6)) == "Clustered(6)"


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=30),
    st.floats(-5, 5, allow_nan=False),
    st.randoms(use_true_random=False),
)
def test_classify_invariances(xs, shift, rnd):
    x = np.array(xs)
    # keep gaps and spreads away from the tolerances so rounding of the shift cannot flip them
    gaps = np.abs(np.subtract.outer(x, x)).ravel()
    assume(np.all(np.abs(gaps - 0.1) > 1e-9) and np.all(np.abs(gaps - 0.05) > 1e-9))
    base = classify_outcome(x)
    perm = list(x)
    rnd.shuffle(perm)
    assert classify_outcome(np.array(perm)) == base
    moved = classify_outcome(x + shift)
    assert moved.kind == base.kind and moved.k == base.k


def test_format_report():
    text = format_report([("a", 1), ("ok", True), ("bad", False), ("x", 0.1)])
    assert text == "a=1\nok=PASS\nbad=FAIL\nx=0.1\n"
