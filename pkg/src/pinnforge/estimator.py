"""scikit-learn style front end for training one PINN."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .autodiff import MlpArchitecture, init_network, jet, predict
from .problems import ProblemId, get_problem
from .sampling import PointSet, TestGrid, get_preset, sample_points, test_grid
from .trainer import TrainConfig, composite_loss, l2_relative_error, train


@lru_cache(maxsize=16)
def cached_test_grid(problem_id: str, n_per_axis: int) -> TestGrid:
    return test_grid(get_problem(problem_id), n_per_axis)


def check_points(X) -> np.ndarray:
    """Validate an ``(n, 2)`` array of ``(x, t)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise ValueError(f"expected (n, 2) array of (x, t) points, got shape {X.shape}")
    return X


class PinnRegressor(RegressorMixin, BaseEstimator):
    """Physics-informed MLP for one benchmark PDE.

    ``fit`` trains on collocation/boundary/initial points (sampled from the
    ``sampling`` preset unless a :class:`PointSet` is passed); ``predict``
    evaluates the network at ``(x, t)`` rows.  ``score`` is the usual R^2
    against supplied targets.

    Parameters
    ----------
    problem : str
        Benchmark id, e.g. ``"heat_0"``.
    sampling : str
        Sampling preset for that problem, e.g. ``"uniform1"``.
    width, depth, activation, changing_point
        Architecture; ``changing_point`` is the fraction of epochs run with Adam.
    epochs, learning_rate, log_every
        Training schedule.  ``log_every`` is the test-error cadence.
    n_test : int
        Test grid points per axis used for the error metrics.
    sampling_seed : int
        Seed of random sampling presets.
    random_state : int
        Weight initialization seed.
    """

    def __init__(self, problem="heat_0", sampling="uniform1", width=64, depth=4, activation="tanh",
                 changing_point=0.5, epochs=10000, learning_rate=1e-5, log_every=100, n_test=101,
                 sampling_seed=0, random_state=0):
        self.problem = problem
        self.sampling = sampling
        self.width = width
        self.depth = depth
        self.activation = activation
        self.changing_point = changing_point
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.log_every = log_every
        self.n_test = n_test
        self.sampling_seed = sampling_seed
        self.random_state = random_state

    @property
    def architecture(self) -> MlpArchitecture:
        return MlpArchitecture(self.width, self.depth, self.activation, self.changing_point)

    def _points(self, X) -> PointSet:
        if isinstance(X, PointSet):
            return X
        problem, spec = get_preset(self.problem, self.sampling, seed=self.sampling_seed)
        points = sample_points(problem, spec)
        if X is None:
            return points
        return PointSet(check_points(X), points.boundary, points.initial)

    def fit(self, X=None, y=None, test_grid: TestGrid | None = None):
        """Train the network.

        ``X`` may be ``None`` (use the sampling preset), a :class:`PointSet`,
        or an ``(n, 2)`` array replacing the preset's collocation points.
        ``y`` is ignored; the PDE supplies the supervision.
        """
        self.problem_ = get_problem(ProblemId.parse(self.problem))
        self.points_ = self._points(X)
        self.test_grid_ = test_grid if test_grid is not None else cached_test_grid(self.problem_.id.value, self.n_test)
        seed = 0 if self.random_state is None else int(self.random_state)
        net = init_network(self.architecture, seed)
        cfg = TrainConfig(epochs=self.epochs, learning_rate=self.learning_rate, log_every=self.log_every, seed=seed)
        self.result_ = train(net, self.points_, self.problem_, cfg, self.test_grid_)
        self.network_ = self.result_.network
        self.n_features_in_ = 2
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return predict(self.network_, check_points(X))

    def jet(self, X, orders=("x", "t", "xx", "tt")):
        check_is_fitted(self, "network_")
        return jet(self.network_, check_points(X), orders)

    def loss(self, points: PointSet | None = None):
        """Composite loss parts of the fitted network."""
        check_is_fitted(self, "network_")
        return composite_loss(self.network_, points if points is not None else self.points_, self.problem_)

    def relative_error(self, X=None, y=None) -> float:
        """Relative L2 error on ``(X, y)`` or, by default, the test grid."""
        check_is_fitted(self, "network_")
        grid = self.test_grid_ if X is None else TestGrid(check_points(X), np.asarray(y, dtype=float))
        return l2_relative_error(self.network_, grid)
