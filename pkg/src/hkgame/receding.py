"""Receding-horizon execution of the open-loop game with confidence filtering.

Every window of length ``sigma`` starts by filtering the social graph
with the agents' confidence bounds at the current opinions, solves the
non-stubborn game on the filtered graph over a horizon ``t_f`` from the
current state, and applies its controls on ``[t + tau, t + sigma)``.
Controls issued in one window never reach the plant in the next: the
first ``tau`` of every window is uncontrolled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyNeighborhoodError
from .graph import FilterMode, SocialGraph, confidence_filter, dynamics_matrix
from .matfun import expm
from .openloop import GameParams, GameSetup, Trajectory, build_setup, equilibrium_segment, time_grid

__all__ = [
    "GainMode",
    "HorizonConfig",
    "feedback_gain",
    "rh_control",
    "rh_window",
    "rh_run",
    "RecedingAborted",
    "WindowRecord",
]


class GainMode(str, enum.Enum):
    TRACKING = "tracking"  # time-varying open-loop gain P_i(t_f, t)
    FROZEN = "frozen"      # gain held at its window-start value


@dataclass(frozen=True)
class HorizonConfig:
    sigma: float
    mode: FilterMode = FilterMode.FIXED
    total_time: float = 10.0
    dt: float = 0.01
    eps: "float | np.ndarray" = np.inf
    baseline: bool = False
    gain: GainMode = GainMode.TRACKING
    eps_autogrow: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", FilterMode.parse(self.mode))
        object.__setattr__(self, "gain", GainMode(self.gain))
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.total_time < self.sigma - 1e-12:
            raise ValueError("total_time must be at least sigma")

    def validate_for(self, p: GameParams):
        # sigma == t_f is admitted for the single-window case
        if not p.tau < self.sigma <= p.t_f + 1e-12:
            raise ValueError(f"need tau < sigma <= t_f, got tau={p.tau}, sigma={self.sigma}, t_f={p.t_f}")


@dataclass(frozen=True)
class WindowRecord:
    start: float
    graph: SocialGraph
    eps: np.ndarray


class RecedingAborted(EmptyNeighborhoodError):
    """Empty neighbourhood during a run; ``partial`` holds the samples so far."""

    def __init__(self, agent, time, partial, windows):
        super().__init__(agent, time)
        self.partial = partial
        self.windows = windows


def feedback_gain(s: GameSetup, i: int, t: float) -> np.ndarray:
    """``P_i(t_f, t) = exp((T - t) Lam') L_hat_i H^{-1} / |N_i|``, ``T = t_f - tau``.

    At ``t = T`` this is ``L_hat_i H^{-1} / |N_i|``.
    """
    K = s.solver.solve(s.L_hat[i].T, trans=True).T / s.graph.degree(i)
    return expm(s.lam.T, s.T - t) @ K


def rh_control(s: GameSetup, xbar0_tau, t=0.0, gain: GainMode = GainMode.FROZEN) -> np.ndarray:
    """Receding-horizon controls issued at window-local time ``t``.

    ``xbar0_tau`` is the predicted state ``tau`` into the window.  With
    ``gain="frozen"`` every agent holds its window-start control
    ``-(1/r_i) B_hat_i' P_i(t_f, 0) exp((t_f - 2 tau) Lam) xbar0_tau``;
    ``gain="tracking"`` evaluates the gain at ``t`` instead, which is the
    open-loop equilibrium control of the window's game.
    """
    gain = GainMode(gain)
    t_eval = 0.0 if gain is GainMode.FROZEN else float(t)
    z = expm(s.lam, s.params.t_f - 2 * s.params.tau) @ np.asarray(xbar0_tau, dtype=float)
    u = np.empty(s.n)
    for i in range(s.n):
        u[i] = -s.B_hat[:, i] @ (feedback_gain(s, i, t_eval) @ z) / s.params.r[i]
    return u


def _constant_input_response(lam, f, q):
    """``int_0^q exp((q - v) lam) f dv`` via the bordered exponential."""
    n = lam.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = lam
    M[:n, n] = f
    return expm(M, q)[:n, n]


def _filtered_graph(g, x, eps, mode, autogrow, t):
    eps = np.array(np.broadcast_to(np.asarray(eps, dtype=float), (g.n,)), dtype=float)
    while True:
        try:
            return confidence_filter(g, x, eps, mode), eps
        except EmptyNeighborhoodError as err:
            if not autogrow:
                raise EmptyNeighborhoodError(err.agent, t) from None
            eps[err.agent] *= 1.5


def rh_window(g: SocialGraph, x_t, p: GameParams, h: HorizonConfig, t: float = 0.0, length: float = None):
    """One receding-horizon window starting at absolute time ``t``.

    Returns ``(segment, filtered_graph, x_end, eps_used, u_end)``.
    ``segment`` samples ``[t, t + length)`` (``length`` defaults to
    ``sigma``), ``x_end`` is the state at ``t + length``, handed unchanged
    to the next window, and ``u_end`` the control applied at that instant.
    """
    h.validate_for(p)
    length = h.sigma if length is None else length
    x_t = np.asarray(x_t, dtype=float)
    fg, eps_used = _filtered_graph(g, x_t, h.eps, h.mode, h.eps_autogrow, t)
    lam = dynamics_matrix(fg)
    tau = p.tau

    local = time_grid(length, h.dt, breakpoints=(tau,) if tau < length else ())
    X = np.empty((len(local), g.n))
    U = np.zeros((len(local), g.n))

    pre = local < tau
    for k in np.flatnonzero(pre):
        X[k] = expm(lam, local[k]) @ x_t
    x_tau = expm(lam, min(tau, length)) @ x_t
    post = np.flatnonzero(~pre)
    issue = local[post] - tau
    if post.size:
        issue[0] = 0.0

    if post.size and h.baseline:
        for k, q in zip(post, issue):
            X[k] = expm(lam, q) @ x_tau
    elif post.size:
        s = build_setup(fg, p.replace(x0=x_t), stubborn=False)
        if h.gain is GainMode.TRACKING:
            Xs, Us = equilibrium_segment(s, x_tau, issue)
        else:
            u_bar = rh_control(s, x_tau, 0.0, GainMode.FROZEN)
            f = p.b * u_bar
            Xs = np.array([expm(lam, q) @ x_tau + _constant_input_response(lam, f, q) for q in issue])
            Us = np.tile(u_bar, (len(issue), 1))
        X[post] = Xs
        U[post] = Us
    X[0] = x_t
    segment = Trajectory(t + local[:-1], X[:-1], U[:-1])
    # the control active at the window end belongs to this window; the
    # next window restarts with the uncontrolled delay interval
    return segment, fg, X[-1], eps_used, U[-1]


def rh_run(g: SocialGraph, x0, p: GameParams, h: HorizonConfig, return_windows: bool = False):
    """Concatenate windows from ``0`` to ``h.total_time``.

    On an empty neighbourhood raises :class:`RecedingAborted` carrying the
    partial trajectory.
    """
    h.validate_for(p)
    x = np.asarray(x0, dtype=float).copy()
    times, opinions, controls, windows = [], [], [], []
    n_win = int(np.ceil(h.total_time / h.sigma - 1e-9))
    last_u = np.zeros(g.n)
    for k in range(n_win):
        t = k * h.sigma
        length = min(h.sigma, h.total_time - t)
        try:
            seg, fg, x_end, eps_used, last_u = rh_window(g, x, p, h, t, length)
        except EmptyNeighborhoodError as err:
            partial = _assemble(times, opinions, controls, t, x, np.zeros(g.n))
            raise RecedingAborted(err.agent, t, partial, windows) from None
        windows.append(WindowRecord(t, fg, eps_used))
        times.append(seg.times)
        opinions.append(seg.opinions)
        controls.append(seg.controls)
        x = x_end
    traj = _assemble(times, opinions, controls, h.total_time, x, last_u)
    return (traj, windows) if return_windows else traj


def _assemble(times, opinions, controls, t_last, x_last, u_last):
    n = x_last.shape[0]
    T = np.concatenate(times + [[t_last]]) if times else np.array([t_last])
    X = np.vstack(opinions + [x_last[None, :]]) if opinions else x_last[None, :]
    U = np.vstack(controls + [u_last[None, :]]) if controls else np.zeros((1, n))
    return Trajectory(T, X, U)
