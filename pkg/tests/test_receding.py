import numpy as np
import pytest
from conftest import TWO_NODE_U0

from hkgame import EmptyNeighborhoodError, GameParams, build_setup, sample_trajectory, uniform_opinions, zachary
from hkgame.graph import dynamics_matrix
from hkgame.matfun import expm
from hkgame.openloop import nash_controls
from hkgame.receding import GainMode, HorizonConfig, RecedingAborted, rh_control, rh_run, rh_window
from hkgame.verify import simulate_forward


def test_rh_control_examples(two_node):
    g, p = two_node
    s = build_setup(g, p)
    assert abs(rh_control(s, p.x0)[0] - TWO_NODE_U0) <= 1e-13
    np.testing.assert_allclose(rh_control(s, p.x0), nash_controls(s, p.x0, 0.0), atol=1e-15)
    np.testing.assert_allclose(rh_control(s, np.full(2, 0.4)), 0.0, atol=1e-15)
    np.testing.assert_allclose(rh_control(s, 3.0 * p.x0), 3.0 * rh_control(s, p.x0), rtol=1e-13)


def test_tracking_gain_is_open_loop_control(small_instances):
    g, p = small_instances[0]
    s = build_setup(g, p)
    x_tau = expm(s.lam, p.tau) @ p.x0
    for t in (0.0, 0.4, p.horizon):
        np.testing.assert_allclose(rh_control(s, x_tau, t, GainMode.TRACKING), nash_controls(s, x_tau, t), atol=1e-13)


@pytest.mark.parametrize("tau", [0.0, 0.3])
def test_single_window_equals_open_loop(small_instances, tau):
    g, p = small_instances[1]
    p = p.replace(tau=tau)
    h = HorizonConfig(sigma=p.t_f, total_time=p.t_f, dt=0.01)
    rh = rh_run(g, p.x0, p, h)
    ol = sample_trajectory(build_setup(g, p), p, 0.01)
    np.testing.assert_allclose(rh.times, ol.times, atol=1e-12)
    assert np.max(np.abs(rh.opinions - ol.opinions)) <= 1e-10
    assert np.max(np.abs(rh.controls - ol.controls)) <= 1e-10


def test_frozen_gain_matches_rk4(small_instances):
    # piecewise-constant controls, checked against forward integration
    g, p = small_instances[2]
    p = p.replace(tau=0.2)
    h = HorizonConfig(sigma=0.5, total_time=0.5, dt=1e-3, gain="frozen")
    seg, _, x_end, _, _ = rh_window(g, p.x0, p, h)
    u_bar = seg.controls[-1]
    sim = simulate_forward(g, p.replace(t_f=0.5), lambda t: u_bar, 1e-3)
    assert np.max(np.abs(sim.final - x_end)) <= 1e-9


def test_window_prefix_is_uncontrolled():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0, tau=0.6)
    h = HorizonConfig(sigma=1.0, total_time=2.0, dt=0.05, eps=1.2)
    traj, windows = rh_run(g, x0, p, h, return_windows=True)
    assert len(windows) == 2
    local = np.round(traj.times % 1.0, 9)
    assert np.all(traj.controls[(local < 0.6 - 1e-9) & (traj.times < 2.0)] == 0)
    lam = dynamics_matrix(windows[0].graph)
    np.testing.assert_allclose(traj.opinions[traj.times == 0.5][0], expm(lam, 0.5) @ x0, atol=1e-14)


def test_baseline_matches_filtered_flow():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0)
    h = HorizonConfig(sigma=1.0, total_time=1.0, dt=0.1, eps=2.0, baseline=True)
    traj = rh_run(g, x0, p, h)
    np.testing.assert_allclose(traj.final, expm(dynamics_matrix(g), 1.0) @ x0, atol=1e-14)
    assert np.all(traj.controls == 0)


def test_empty_neighbourhood_aborts_with_partial():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0)
    h = HorizonConfig(sigma=1.0, total_time=3.0, eps=0.5)
    with pytest.raises(RecedingAborted) as info:
        rh_run(g, x0, p, h)
    assert isinstance(info.value, EmptyNeighborhoodError)
    assert info.value.time == 0.0
    assert info.value.partial.opinions.shape == (1, 34)


def test_eps_autogrow_recovers():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0)
    h = HorizonConfig(sigma=1.0, total_time=2.0, eps=0.5, eps_autogrow=True, dt=0.05)
    traj, windows = rh_run(g, x0, p, h, return_windows=True)
    assert traj.times[-1] == 2.0
    assert np.max(windows[0].eps) > 0.5
    assert np.min(windows[0].eps) == 0.5


def test_horizon_config_validation():
    p = GameParams.create(2, 1.0, [0.0, 1.0], tau=0.5)
    with pytest.raises(ValueError):
        HorizonConfig(sigma=0.4).validate_for(p)
    with pytest.raises(ValueError):
        HorizonConfig(sigma=2.0, total_time=2.0).validate_for(p)
    with pytest.raises(ValueError):
        HorizonConfig(sigma=1.0, total_time=0.5)


def test_rh_run_deterministic():
    g = zachary()
    x0 = uniform_opinions(34)
    p = GameParams.create(34, 10.0, x0, tau=0.6)
    h = HorizonConfig(sigma=1.0, total_time=3.0, eps=0.36, mode="second", dt=0.05)
    a, b = rh_run(g, x0, p, h), rh_run(g, x0, p, h)
    np.testing.assert_array_equal(a.opinions, b.opinions)
