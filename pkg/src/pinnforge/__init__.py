"""pinnforge: physics-informed neural networks with a decoupled architecture search."""
from .activations import Activation
from .autodiff import Jet, LossTerm, MlpArchitecture, MlpNetwork, forward_jet, init_network, loss_gradient, predict
from .estimator import PinnRegressor
from .exceptions import (
    AllDiverged,
    ConfigError,
    DiscontinuityPoint,
    GridInfeasible,
    GridInfeasibleWarning,
    InsufficientData,
    PinnForgeError,
    ZeroNorm,
)
from .problems import PROBLEMS, PdeProblem, ProblemId, exact_solution, get_problem, residual
from .sampling import PointSet, SamplingSpec, Scheme, get_preset, sample_points, test_grid
from .search import SearchConfig, SearchReport, SearchSpace, auto_pinn, random_search
from .trainer import TrainConfig, TrialResult, composite_loss, l2_relative_error, train

__version__ = "0.1.0"

__all__ = [
    "Activation", "AllDiverged", "ConfigError", "DiscontinuityPoint", "GridInfeasible", "GridInfeasibleWarning",
    "InsufficientData", "Jet", "LossTerm", "MlpArchitecture", "MlpNetwork", "PROBLEMS", "PdeProblem",
    "PinnForgeError", "PinnRegressor", "PointSet", "ProblemId", "SamplingSpec", "Scheme", "SearchConfig",
    "SearchReport", "SearchSpace", "TrainConfig", "TrialResult", "ZeroNorm", "auto_pinn", "composite_loss",
    "exact_solution", "forward_jet", "get_preset", "get_problem", "init_network", "l2_relative_error",
    "loss_gradient", "predict", "random_search", "residual", "sample_points", "test_grid", "train",
]
