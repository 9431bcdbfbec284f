"""Open-loop Nash equilibrium of the delayed HK opinion game.

Each agent ``i`` steers its own opinion through ``b_i u_i(t - tau)`` and
minimises a terminal disagreement cost (plus, for stubborn agents, a
pull towards its prejudice ``x0_i``) and a quadratic effort
``r_i * int u_i^2``.

The input delay is removed with ``y(t) = exp(-tau Lam) x(t + tau)``; in
``y`` the game is an ordinary LQ game on ``[0, T]`` with ``T = t_f - tau``
and input columns ``B_hat_i = exp(-tau Lam) B_i``.  Pontryagin's
conditions give ``u_i(t) = -(1/r_i) B_hat_i' exp((T - t) Lam') lam_i``
with terminal co-states ``lam_i`` linear in ``y(T)``, and ``y(T)`` solves
``H y(T) = exp(T Lam) y(0) + sum_i Psi_i(T) Omega_i x0``.

Times passed to the control and trajectory functions are *issue* times
``t`` in ``[0, T]``: the control issued at ``t`` reaches the plant at
``t + tau`` and the trajectory functions return ``x(t + tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .graph import SocialGraph, agent_laplacian, dynamics_matrix
from .matfun import LinearSolver, expm, gramian_block

__all__ = [
    "GameParams",
    "GameSetup",
    "Trajectory",
    "build_setup",
    "costate_terminal",
    "nash_controls",
    "nash_control_nonstubborn",
    "nash_control_stubborn",
    "opinion_trajectory_nonstubborn",
    "opinion_trajectory_stubborn",
    "delay_free_state",
    "sample_trajectory",
    "time_grid",
    "uniform_opinions",
]

_TIME_TOL = 1e-12


def _vector(value, n, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or a length-{n} vector")
    return arr.copy()


def uniform_opinions(n, spacing=None):
    """Opinions ``-1, -1 + h, ...`` uniformly spaced on ``[-1, 1)``.

    The default step is ``2/n`` rounded to two decimals (0.06 for the
    34-member karate club), falling back to ``2/n`` when the rounded
    step would push the last opinion to 1 or beyond.
    """
    if spacing is None:
        spacing = round(2.0 / n, 2)
        if spacing <= 0 or -1.0 + (n - 1) * spacing >= 1.0:
            spacing = 2.0 / n
    return np.round(-1.0 + spacing * np.arange(n), 12)


@dataclass(frozen=True)
class GameParams:
    """Horizon, delay and per-agent weights of one game instance."""

    t_f: float
    tau: float
    r: np.ndarray
    b: np.ndarray
    omega: np.ndarray
    x0: np.ndarray

    @classmethod
    def create(cls, n, t_f, x0, tau=0.0, r=1.0, b=1.0, omega=0.0):
        p = cls(
            t_f=float(t_f),
            tau=float(tau),
            r=_vector(r, n, "r"),
            b=_vector(b, n, "b"),
            omega=_vector(omega, n, "omega"),
            x0=_vector(x0, n, "x0"),
        )
        p.validate()
        return p

    @property
    def n(self):
        return self.x0.shape[0]

    @property
    def horizon(self):
        """Length ``t_f - tau`` of the delay-free game."""
        return self.t_f - self.tau

    def validate(self):
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        if not 0 <= self.tau < self.t_f:
            raise ValueError("tau must satisfy 0 <= tau < t_f")
        if np.any(self.r <= 0):
            raise ValueError("control weights r_i must be positive")
        if np.any(self.b == 0):
            raise ValueError("input gains b_i must be nonzero")
        if np.any((self.omega < 0) | (self.omega > 1)):
            raise ValueError("stubbornness omega_i must lie in [0, 1]")
        for name in ("r", "b", "omega", "x0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")

    def replace(self, **changes):
        fields = dict(t_f=self.t_f, tau=self.tau, r=self.r, b=self.b, omega=self.omega, x0=self.x0)
        fields.update(changes)
        return GameParams.create(self.n, **fields)


@dataclass(frozen=True)
class Trajectory:
    """Sampled opinions and *applied* controls ``u(t - tau)``."""

    times: np.ndarray
    opinions: np.ndarray
    controls: np.ndarray

    @property
    def final(self):
        return self.opinions[-1]

    def spread(self):
        return self.opinions.max(axis=1) - self.opinions.min(axis=1)


@dataclass(frozen=True, eq=False)
class GameSetup:
    graph: SocialGraph
    params: GameParams
    stubborn: bool
    lam: np.ndarray
    exp_tau: np.ndarray
    L_hat: np.ndarray          # (n, n, n), L_hat[i] = exp(tau Lam') L_i exp(tau Lam)
    B_hat: np.ndarray          # (n, n), column i = exp(-tau Lam) B_i
    S: np.ndarray              # (n, n, n), S[i] = B_hat_i B_hat_i' / r_i
    psi_T: np.ndarray          # (n, n, n), Psi_i(T)
    terminal_weight: np.ndarray  # (n, n, n), quadratic terminal weight per agent
    prejudice_gain: np.ndarray   # (n, n, n), exp(tau Lam') W_i (zero if non-stubborn)
    H: np.ndarray
    solver: LinearSolver = field(repr=False)

    @property
    def n(self):
        return self.graph.n

    @property
    def T(self):
        return self.params.horizon

    @property
    def degrees(self):
        return self.graph.degrees

    @property
    def Delta(self):
        """Stacked ``L_hat_i / |N_i|`` as an ``(n*n, n)`` matrix."""
        d = self.degrees[:, None, None]
        return (self.L_hat / d).reshape(self.n * self.n, self.n)

    @property
    def W_hat(self):
        """``exp(tau Lam') W_i exp(tau Lam)`` stacked per agent."""
        return self.prejudice_gain @ self.exp_tau

    @property
    def W_tilde(self):
        """``2 exp(tau Lam') W_i`` stacked per agent."""
        return 2.0 * self.prejudice_gain

    def psi(self, t):
        """Per-agent Gramians ``Psi_i(t)`` as an ``(n, n, n)`` array."""
        return np.stack([gramian_block(self.lam, S_i, t) for S_i in self.S])


def build_setup(g: SocialGraph, p: GameParams, stubborn: bool = False) -> GameSetup:
    """Precompute every matrix the equilibrium formulas need.

    Raises :class:`~hkgame.errors.SingularMatrixError` when ``H`` (or its
    stubborn counterpart) is singular, i.e. no unique equilibrium exists.
    """
    if p.n != g.n:
        raise ValueError(f"parameters are for {p.n} agents, graph has {g.n}")
    n = g.n
    lam = dynamics_matrix(g)
    exp_tau = expm(lam, p.tau)
    exp_mtau = expm(lam, -p.tau)
    deg = g.degrees

    L = np.stack([agent_laplacian(g, i) for i in range(n)])
    L_hat = exp_tau.T @ L @ exp_tau
    L_hat = 0.5 * (L_hat + L_hat.transpose(0, 2, 1))
    B_hat = exp_mtau * p.b[None, :]
    S = B_hat.T[:, :, None] * B_hat.T[:, None, :] / p.r[:, None, None]
    psi_T = np.stack([gramian_block(lam, S_i, p.horizon) for S_i in S])

    omega = p.omega if stubborn else np.zeros(n)
    # exp(tau Lam') W_i keeps only column i, which is omega_i times row i of exp(tau Lam)
    prejudice_gain = np.zeros((n, n, n))
    for a in range(n):
        prejudice_gain[a, :, a] = omega[a] * exp_tau[a, :]
    W_hat = prejudice_gain @ exp_tau
    terminal_weight = L_hat * ((1.0 - omega) / deg)[:, None, None] + W_hat

    H = np.eye(n) + (psi_T @ terminal_weight).sum(axis=0)
    solver = LinearSolver(H)
    return GameSetup(
        graph=g,
        params=p,
        stubborn=stubborn,
        lam=lam,
        exp_tau=exp_tau,
        L_hat=L_hat,
        B_hat=B_hat,
        S=S,
        psi_T=psi_T,
        terminal_weight=terminal_weight,
        prejudice_gain=prejudice_gain,
        H=H,
        solver=solver,
    )


def _check_time(s, t):
    if t < -_TIME_TOL or t > s.T + _TIME_TOL:
        raise DomainError(f"issue time {t} outside [0, {s.T}]")
    return min(max(float(t), 0.0), s.T)


def costate_terminal(s: GameSetup, x_tau, x0=None) -> np.ndarray:
    """Terminal co-states ``lam_i(T)`` as the columns of an ``n x n`` matrix.

    ``x_tau`` is the opinion vector at ``tau`` (when the first control
    arrives); ``x0`` is the prejudice vector, needed only for stubborn
    setups.
    """
    x_tau = np.asarray(x_tau, dtype=float)
    rhs = expm(s.lam, s.params.t_f - 2 * s.params.tau) @ x_tau
    if s.stubborn:
        if x0 is None:
            raise ValueError("stubborn setups need the prejudice vector x0")
        x0 = np.asarray(x0, dtype=float)
        pull = s.prejudice_gain @ x0          # (n, n): row a = Omega_a x0
        rhs = rhs + _apply_blocks(s.psi_T, pull.T)
    else:
        pull = np.zeros((s.n, s.n))
    y_T = s.solver.solve(rhs)
    return (s.terminal_weight @ y_T - pull).T


def _apply_blocks(blocks, V):
    """``sum_a blocks[a] @ V[:, a]``."""
    return (blocks @ V.T[:, :, None]).sum(axis=0)[:, 0]


def _controls_from_costate(s, lam_T, t):
    V = expm(s.lam.T, s.T - t) @ lam_T
    return -np.einsum("ja,ja->a", s.B_hat, V) / s.params.r


def _state_from_costate(s, x_tau, lam_T, t, psi_t=None):
    if psi_t is None:
        psi_t = s.psi(t)
    V = expm(s.lam.T, s.T - t) @ lam_T
    pushed = _apply_blocks(psi_t, V)
    return expm(s.lam, t) @ x_tau - s.exp_tau @ pushed


def nash_controls(s: GameSetup, x_tau, t, x0=None) -> np.ndarray:
    """Equilibrium controls of every agent issued at time ``t``."""
    t = _check_time(s, t)
    return _controls_from_costate(s, costate_terminal(s, x_tau, x0), t)


def nash_control_nonstubborn(s: GameSetup, x_tau, t, i) -> float:
    if s.stubborn:
        raise ValueError("setup was built for the stubborn game")
    return float(nash_controls(s, x_tau, t)[i])


def nash_control_stubborn(s: GameSetup, x_tau, x0, t, i) -> float:
    if not s.stubborn:
        raise ValueError("setup was built for the non-stubborn game")
    return float(nash_controls(s, x_tau, t, x0)[i])


def opinion_trajectory_nonstubborn(s: GameSetup, x_tau, t) -> np.ndarray:
    """Opinions ``x(t + tau)`` under the equilibrium controls."""
    if s.stubborn:
        raise ValueError("setup was built for the stubborn game")
    t = _check_time(s, t)
    return _state_from_costate(s, np.asarray(x_tau, float), costate_terminal(s, x_tau), t)


def opinion_trajectory_stubborn(s: GameSetup, x_tau, x0, t) -> np.ndarray:
    if not s.stubborn:
        raise ValueError("setup was built for the non-stubborn game")
    t = _check_time(s, t)
    return _state_from_costate(s, np.asarray(x_tau, float), costate_terminal(s, x_tau, x0), t)


def delay_free_state(s: GameSetup, x_tau, t, x0=None) -> np.ndarray:
    """Transformed state ``y(t)`` of the delay-free game, ``t`` in ``[0, T]``."""
    t = _check_time(s, t)
    x_tau = np.asarray(x_tau, dtype=float)
    lam_T = costate_terminal(s, x_tau, x0)
    y0 = expm(s.lam, -s.params.tau) @ x_tau
    V = expm(s.lam.T, s.T - t) @ lam_T
    return expm(s.lam, t) @ y0 - _apply_blocks(s.psi(t), V)


def time_grid(t_end, dt, breakpoints=(), t_start=0.0):
    """Uniform grid on ``[t_start, t_end]`` with endpoints and breakpoints exact."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    span = t_end - t_start
    if span < 0:
        raise ValueError("empty time interval")
    k = int(np.floor(span / dt + 1e-9))
    pts = t_start + dt * np.arange(k + 1)
    extra = [t_end] + [b for b in breakpoints if t_start <= b <= t_end]
    pts = np.concatenate([pts, extra])
    pts = np.sort(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * max(1.0, abs(t_end))])
    pts = pts[keep]
    # snap near-duplicates onto the exact endpoint/breakpoints
    for b in extra:
        pts[np.argmin(np.abs(pts - b))] = b
    return pts


class _GramianStepper:
    """Exact grid propagation of ``Z(t) = sum_i Psi_i(t) exp((T-t) Lam') lam_i``.

    Uses ``Z(t+h) = exp(h Lam) Z(t) + sum_i Psi_i(h) exp((T-t-h) Lam') lam_i``,
    so only one Gramian per distinct step length is needed.
    """

    def __init__(self, s: GameSetup):
        self.s = s
        self._cache = {}

    def _step(self, h):
        key = round(h, 12)
        if key not in self._cache:
            self._cache[key] = (expm(self.s.lam, h), self.s.psi(h))
        return self._cache[key]

    def run(self, lam_T, ts):
        s = self.s
        Z = np.zeros(s.n)
        out = np.empty((len(ts), s.n))
        prev = 0.0
        for k, t in enumerate(ts):
            h = t - prev
            if h > 0:
                E_h, psi_h = self._step(h)
                V = expm(s.lam.T, s.T - t) @ lam_T
                Z = E_h @ Z + _apply_blocks(psi_h, V)
            out[k] = Z
            prev = t
        return out


def equilibrium_segment(s: GameSetup, x_tau, ts, x0=None):
    """Opinions ``x(t + tau)`` and issued controls ``u(t)`` on issue times ``ts``.

    ``ts`` must be increasing and start at 0.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.size == 0 or abs(ts[0]) > _TIME_TOL:
        raise ValueError("issue-time grid must start at 0")
    x_tau = np.asarray(x_tau, dtype=float)
    lam_T = costate_terminal(s, x_tau, x0)
    Z = _GramianStepper(s).run(lam_T, ts)
    X = np.empty((len(ts), s.n))
    U = np.empty((len(ts), s.n))
    for k, t in enumerate(ts):
        X[k] = expm(s.lam, t) @ x_tau - s.exp_tau @ Z[k]
        U[k] = _controls_from_costate(s, lam_T, t)
    return X, U


def sample_trajectory(s: GameSetup, p: GameParams = None, dt: float = 0.01, baseline: bool = False) -> Trajectory:
    """Sample the full game on ``[0, t_f]``.

    On ``[0, tau)`` no control has reached the plant and the opinions
    follow ``exp(t Lam) x0``; from ``tau`` on the equilibrium applies.
    ``baseline=True`` forces ``u = 0`` throughout.
    """
    p = s.params if p is None else p
    if not 0 < dt <= p.t_f:
        raise ValueError("dt must lie in (0, t_f]")
    times = time_grid(p.t_f, dt, breakpoints=(p.tau,))
    X = np.empty((len(times), s.n))
    U = np.zeros((len(times), s.n))
    pre = times < p.tau
    for k in np.flatnonzero(pre):
        X[k] = expm(s.lam, times[k]) @ p.x0
    x_tau = expm(s.lam, p.tau) @ p.x0
    post = np.flatnonzero(~pre)
    issue = times[post] - p.tau
    issue[0] = 0.0
    if baseline:
        for k, t in zip(post, issue):
            X[k] = expm(s.lam, t) @ x_tau
    else:
        Xs, Us = equilibrium_segment(s, x_tau, issue, p.x0 if s.stubborn else None)
        X[post] = Xs
        U[post] = Us
    X[0] = p.x0
    return Trajectory(times, X, U)
