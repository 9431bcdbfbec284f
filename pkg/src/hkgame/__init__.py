"""Open-loop and receding-horizon Nash strategies for delayed HK opinion games."""

from .errors import (
    ConfigError,
    DisconnectedError,
    DomainError,
    EmptyNeighborhoodError,
    GridTooCoarseError,
    HKGameError,
    NoFeasibleEpsError,
    NonFiniteError,
    ParseError,
    SelfLoopError,
    SingularMatrixError,
)
from .graph import (
    FilterMode,
    SocialGraph,
    agent_laplacian,
    confidence_filter,
    dynamics_matrix,
    load_edge_list,
    zachary,
)
from .matfun import expm, gramian_block, solve_linear
from .openloop import GameParams, GameSetup, Trajectory, build_setup, sample_trajectory, uniform_opinions
from .receding import GainMode, HorizonConfig, rh_run
from .verify import classify_outcome, deviation_test, evaluate_cost, simulate_forward

__version__ = "0.1.0"
