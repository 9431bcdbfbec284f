"""Independent oracles and outcome metrics.

None of these routines call the closed-form equilibrium formulas; they
integrate the delayed dynamics directly, evaluate the costs by
quadrature, and solve an Euler-discretised version of the game as one
stacked linear system.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarseError, NonFiniteError, SingularMatrixError
from .graph import SocialGraph, agent_laplacian, dynamics_matrix
from .openloop import GameParams, Trajectory, build_setup, costate_terminal, time_grid

__all__ = [
    "CostReport",
    "OutcomeKind",
    "OutcomeClass",
    "evaluate_cost",
    "simulate_forward",
    "equilibrium_control_fn",
    "piecewise_linear",
    "DeviationReport",
    "deviation_test",
    "cost_gradient",
    "discrete_game_oracle",
    "classify_outcome",
    "format_report",
]

CONSENSUS_TOL = 0.05
CLUSTER_TOL = 0.1
MAX_CLUSTERS = 5


@dataclass(frozen=True)
class CostReport:
    agent: int
    disagreement: float
    effort: float
    prejudice: float = 0.0

    @property
    def total(self):
        return self.prejudice + self.disagreement + self.effort


def evaluate_cost(traj: Trajectory, i: int, p: GameParams, g: SocialGraph, stubborn: bool = False) -> CostReport:
    """Terminal disagreement/prejudice plus trapezoidal effort of agent ``i``.

    ``traj.controls`` holds the applied controls ``u(t - tau)``, which
    vanish on ``[0, tau)``.
    """
    times = np.asarray(traj.times)
    if np.max(np.diff(times)) > p.t_f / 10 + 1e-12:
        raise GridTooCoarseError("trajectory grid is coarser than t_f/10")
    xf = traj.opinions[-1]
    nbrs = sorted(g.neighbor_sets[i])
    disagreement = sum((xf[i] - xf[j]) ** 2 for j in nbrs) / len(nbrs)
    prejudice = 0.0
    if stubborn:
        disagreement *= 1.0 - p.omega[i]
        prejudice = p.omega[i] * (xf[i] - p.x0[i]) ** 2
    # applied control is zero before tau and jumps there; integrate the active part only
    on = times >= p.tau - 1e-12
    effort = p.r[i] * np.trapezoid(traj.controls[on, i] ** 2, times[on])
    return CostReport(i, float(disagreement), float(effort), float(prejudice))


def simulate_forward(g: SocialGraph, p: GameParams, controls, dt: float) -> Trajectory:
    """Classical RK4 for ``x' = Lam x + sum_i B_i u_i(t - tau)``.

    ``controls(t)`` returns the vector of controls *issued* at ``t``; it
    is never called outside ``[0, t_f - tau]`` (earlier issue times are
    zero by the model contract).  The grid contains ``tau`` exactly so
    the switch-on of the control is a step boundary.
    """
    lam = dynamics_matrix(g)
    times = time_grid(p.t_f, dt, breakpoints=(p.tau,))
    T = p.horizon

    cache = {}

    def applied(t, side):
        s = t - p.tau
        # at a step that starts on tau use the post-switch value
        if s < -1e-12 or (abs(s) <= 1e-12 and side < 0):
            return np.zeros(g.n)
        s = min(max(s, 0.0), T)
        key = round(s, 13)
        if key not in cache:
            cache[key] = np.asarray(controls(s), dtype=float)
        return p.b * cache[key]

    X = np.empty((len(times), g.n))
    U = np.zeros((len(times), g.n))
    x = np.asarray(p.x0, dtype=float).copy()
    X[0] = x
    U[0] = applied(0.0, +1) / p.b
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        h = t1 - t0
        f0 = applied(t0, +1)
        fm = applied(t0 + h / 2, +1)
        f1 = applied(t1, -1)
        k1 = lam @ x + f0
        k2 = lam @ (x + h / 2 * k1) + fm
        k3 = lam @ (x + h / 2 * k2) + fm
        k4 = lam @ (x + h * k3) + f1
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"state diverged at t={t1:g}")
        X[k + 1] = x
        U[k + 1] = applied(t1, +1) / p.b
    return Trajectory(times, X, U)


def equilibrium_control_fn(g: SocialGraph, p: GameParams, stubborn: bool = False):
    """Vector-valued issued-control function of the open-loop equilibrium."""
    from .matfun import expm

    s = build_setup(g, p, stubborn)
    x_tau = expm(s.lam, p.tau) @ p.x0
    lam_T = costate_terminal(s, x_tau, p.x0 if stubborn else None)

    memo = {}  # deviation tests replay the same sample times many times

    def u(t):
        key = round(float(t), 13)
        if key not in memo:
            V = expm(s.lam.T, s.T - t) @ lam_T
            memo[key] = -np.einsum("ja,ja->a", s.B_hat, V) / p.r
        return memo[key].copy()

    return u


def piecewise_linear(knots, values):
    """Scalar function interpolating ``values`` at ``knots`` (constant beyond)."""
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    return lambda t: float(np.interp(t, knots, values))


def _deviated(u_star, i, delta):
    def u(t):
        v = np.array(u_star(t), dtype=float)
        v[i] += delta(t)
        return v

    return u


def _agent_cost(g, p, i, controls, dt, stubborn):
    return evaluate_cost(simulate_forward(g, p, controls, dt), i, p, g, stubborn).total


@dataclass
class DeviationReport:
    agent: int
    cost: float
    margins: list = field(default_factory=list)

    @property
    def min_margin(self):
        return min(self.margins) if self.margins else 0.0

    @property
    def tolerance(self):
        return 1e-8 * (1.0 + abs(self.cost))

    @property
    def passed(self):
        return self.min_margin >= -self.tolerance


def deviation_test(
    g: SocialGraph,
    p: GameParams,
    i: int,
    n_perturbations: int = 20,
    seed: int = 0,
    stubborn: bool = False,
    dt: float = 1e-2,
    n_knots: int = 16,
    amplitude: float = 0.5,
    u_star=None,
) -> DeviationReport:
    """Unilateral-deviation check of the equilibrium for agent ``i``.

    Perturbations are piecewise linear on ``n_knots`` evenly spaced knots
    over ``[0, t_f - tau]`` with seeded uniform coefficients in
    ``[-amplitude, amplitude]``; the others keep their equilibrium
    controls.
    """
    if u_star is None:
        u_star = equilibrium_control_fn(g, p, stubborn)
    j_star = _agent_cost(g, p, i, u_star, dt, stubborn)
    rng = np.random.default_rng(seed)
    knots = np.linspace(0.0, p.horizon, n_knots)
    report = DeviationReport(i, j_star)
    for _ in range(n_perturbations):
        delta = piecewise_linear(knots, rng.uniform(-amplitude, amplitude, n_knots))
        j_dev = _agent_cost(g, p, i, _deviated(u_star, i, delta), dt, stubborn)
        report.margins.append(j_dev - j_star)
    return report


def cost_gradient(
    g: SocialGraph,
    p: GameParams,
    i: int,
    stubborn: bool = False,
    dt: float = 1e-3,
    n_knots: int = 16,
    step: float = 1e-3,
    u_star=None,
):
    """Central-difference gradient of ``J_i`` in agent ``i``'s hat-function coefficients.

    Returns ``(gradient, J_i)`` at the equilibrium.  ``J_i`` is quadratic
    in the coefficients, so central differences carry no truncation error.
    """
    if u_star is None:
        u_star = equilibrium_control_fn(g, p, stubborn)
    knots = np.linspace(0.0, p.horizon, n_knots)
    j_star = _agent_cost(g, p, i, u_star, dt, stubborn)
    grad = np.empty(n_knots)
    for k in range(n_knots):
        e = np.zeros(n_knots)
        e[k] = step
        jp = _agent_cost(g, p, i, _deviated(u_star, i, piecewise_linear(knots, e)), dt, stubborn)
        jm = _agent_cost(g, p, i, _deviated(u_star, i, piecewise_linear(knots, -e)), dt, stubborn)
        grad[k] = (jp - jm) / (2 * step)
    return grad, j_star


def discrete_game_oracle(g: SocialGraph, p: GameParams, steps: int):
    """Open-loop Nash equilibrium of the forward-Euler discretised game.

    Dynamics ``x[k+1] = (I + h Lam) x[k] + h sum_i B_i u_i[k]`` with
    ``h = t_f / steps`` and costs ``x[N]' L_i x[N] / |N_i| + h r_i |u_i|^2``.
    Stacking every agent's first-order condition gives one linear system
    in all ``n * steps`` controls.  Returns ``(controls, trajectory)``
    with ``controls`` of shape ``(steps, n)`` and the Euler states.
    Delay-free games only.
    """
    if p.tau != 0:
        raise ValueError("the discrete oracle handles tau = 0 only")
    n, N = g.n, int(steps)
    h = p.t_f / N
    lam = dynamics_matrix(g)
    A = np.eye(n) + h * lam
    # powers[k] = A^k
    powers = np.empty((N + 1, n, n))
    powers[0] = np.eye(n)
    for k in range(N):
        powers[k + 1] = A @ powers[k]
    # G[i][:, k] = h A^(N-1-k) B_i : effect of u_i[k] on x[N]
    G = [h * p.b[i] * powers[N - 1 - np.arange(N), :, i].T for i in range(n)]
    free = powers[N] @ p.x0
    M = np.zeros((n * N, n * N))
    rhs = np.zeros(n * N)
    for i in range(n):
        Q = agent_laplacian(g, i) / g.degree(i)
        rows = slice(i * N, (i + 1) * N)
        GtQ = G[i].T @ Q
        for j in range(n):
            M[rows, j * N:(j + 1) * N] = GtQ @ G[j]
        M[rows, rows] += h * p.r[i] * np.eye(N)
        rhs[rows] = -GtQ @ free
    try:
        from .matfun import LinearSolver

        u = LinearSolver(M).solve(rhs)
    except SingularMatrixError:
        raise SingularMatrixError("degenerate discretised game") from None
    U = u.reshape(n, N).T
    X = np.empty((N + 1, n))
    X[0] = p.x0
    for k in range(N):
        X[k + 1] = A @ X[k] + h * p.b * U[k]
    times = h * np.arange(N + 1)
    controls = np.vstack([U, U[-1:]])
    return U, Trajectory(times, X, controls)


class OutcomeKind(str, enum.Enum):
    CONSENSUS = "consensus"
    CLUSTERED = "clustered"
    DISAGREEMENT = "disagreement"


@dataclass(frozen=True)
class OutcomeClass:
    kind: OutcomeKind
    cluster_centers: tuple
    max_spread: float

    @property
    def k(self):
        return len(self.cluster_centers)

    def __str__(self):
        if self.kind is OutcomeKind.CLUSTERED:
            return f"Clustered({self.k})"
        return self.kind.value.capitalize()


def _groups(x, cluster_tol):
    xs = np.sort(np.asarray(x, dtype=float))
    cuts = np.flatnonzero(np.diff(xs) > cluster_tol) + 1
    return np.split(xs, cuts)


def classify_outcome(x_final, consensus_tol=CONSENSUS_TOL, cluster_tol=CLUSTER_TOL, max_clusters=MAX_CLUSTERS) -> OutcomeClass:
    """Consensus, clustered into ``2..max_clusters`` tight groups, or disagreement.

    Groups are formed by sorting and cutting at gaps wider than
    ``cluster_tol``; a clustered outcome additionally needs every group's
    diameter within ``cluster_tol``.
    """
    if consensus_tol <= 0 or cluster_tol <= 0:
        raise ValueError("tolerances must be positive")
    x = np.asarray(x_final, dtype=float)
    spread = float(x.max() - x.min())
    groups = _groups(x, cluster_tol)
    centers = tuple(float(gr.mean()) for gr in groups)
    if spread <= consensus_tol:
        return OutcomeClass(OutcomeKind.CONSENSUS, (float(x.mean()),), spread)
    tight = all(gr[-1] - gr[0] <= cluster_tol for gr in groups)
    if tight and 2 <= len(groups) <= max_clusters:
        return OutcomeClass(OutcomeKind.CLUSTERED, centers, spread)
    return OutcomeClass(OutcomeKind.DISAGREEMENT, centers, spread)


def format_report(entries) -> str:
    """Render ``(key, value)`` pairs as ``key=value`` lines."""
    lines = []
    for key, value in entries:
        if isinstance(value, bool):
            value = "PASS" if value else "FAIL"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"
