from __future__ import annotations

import abc
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .core import (
    DimensionMismatchError,
    DiscreteDistribution,
    LossProfile,
    ParameterError,
    merge_duplicates,
    read_numeric_csv,
    write_csv,
)

logger = logging.getLogger(__name__)


class DataParseError(ValueError):
    pass


class LossKind(enum.Enum):
    L1_REGRESSION = "l1reg"
    HINGE = "hinge"
    NEWSVENDOR = "newsvendor"


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Covariates `X` of shape (T, d) and real responses `Y` of shape (T,)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0]:
            raise DimensionMismatchError(
                f"Covariates of shape {X.shape} and responses of shape {Y.shape}"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def samples(self) -> np.ndarray:
        """Rows (X_t, Y_t)."""
        return np.column_stack([self.X, self.Y])

    @classmethod
    def from_samples(cls, samples):
        samples = np.asarray(samples, dtype=float)
        return cls(samples[:, :-1], samples[:, -1])

    @classmethod
    def from_csv(cls, path: Union[str, Path]):
        """d feature columns followed by the target column."""

        frame = read_numeric_csv(path, DataParseError)
        if frame.shape[1] < 2:
            raise DataParseError(
                f"Expected feature columns and a target column in {path}"
            )
        return cls.from_samples(frame.to_numpy())

    def to_csv(self, path: Union[str, Path]):
        columns = {f"x{i}": self.X[:, i] for i in range(self.X.shape[1])}
        columns["y"] = self.Y
        write_csv(path, columns)


class ClassificationData(RegressionData):
    """Covariates `X` of shape (T, d) and labels `Y` in {-1, +1}."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isin(self.Y, (-1.0, 1.0))):
            raise ParameterError("Labels must be -1 or +1")

    @classmethod
    def from_csv(cls, path: Union[str, Path]):
        """d feature columns followed by the label column."""

        frame = read_numeric_csv(path, DataParseError)
        if frame.shape[1] < 2:
            raise DataParseError(
                f"Expected feature columns and a label column in {path}"
            )
        samples = frame.to_numpy()
        if not np.all(np.isin(samples[:, -1], (-1.0, 1.0))):
            raise DataParseError(f"Labels in {path} must be -1 or +1")
        return cls.from_samples(samples)


def read_demands(path: Union[str, Path]) -> np.ndarray:
    """Demand samples from the first column of a CSV file, shape (T, 1)."""

    frame = read_numeric_csv(path, DataParseError)
    return frame.to_numpy()[:, :1]


def read_demand_distribution(path: Union[str, Path]) -> DiscreteDistribution:
    """Demand atoms from the first column of a CSV file, weighted by the
    optional second column (normalized) or uniformly."""

    values = read_numeric_csv(path, DataParseError).to_numpy()
    if values.shape[1] < 2:
        return DiscreteDistribution.from_samples(values[:, 0])

    weights = values[:, 1]
    if np.any(weights < 0) or weights.sum() <= 0:
        raise DataParseError(f"Demand weights in {path} must be >= 0")
    return DiscreteDistribution(values[:, 0], weights / weights.sum())


def _unit_direction(theta: np.ndarray) -> np.ndarray:
    # subgradient of the norm at zero taken as zero
    norm = np.linalg.norm(theta)
    return theta / norm if norm > 0 else np.zeros_like(theta)


def _check_radii(epsilon: float, epsilon_prime: float):
    if not epsilon >= 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    if not epsilon_prime >= epsilon:
        raise ParameterError(
            f"epsilon_prime ({epsilon_prime}) must be >= epsilon ({epsilon})"
        )


class LossOracle(abc.ABC):
    """Evaluates a loss, its noise-inflated version and its worst case over
    the event set, with subgradients in the decision.

    The vectorized methods take samples as rows of a 2-D array; the
    single-sample methods wrap them.
    """

    epsilon: float
    epsilon_prime: float

    @property
    @abc.abstractmethod
    def dimension(self) -> int:
        """Length of the decision vector."""

    @abc.abstractmethod
    def losses(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def inflated_losses(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def worst_case(self, x: np.ndarray) -> float:
        pass

    @abc.abstractmethod
    def subgradients(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def inflated_subgradients(
        self, x: np.ndarray, samples: np.ndarray
    ) -> np.ndarray:
        pass

    @abc.abstractmethod
    def subgrad_worst(self, x: np.ndarray) -> np.ndarray:
        pass

    @abc.abstractmethod
    def initial_decision(self, samples: np.ndarray) -> np.ndarray:
        pass

    def _as_samples(self, samples) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        return samples

    def _as_decision(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"Decision of length {x.shape[0]}, expected {self.dimension}"
            )
        return x

    def evaluate(self, x, xi) -> float:
        return float(self.losses(x, np.atleast_1d(xi)[None, :])[0])

    def evaluate_inflated(self, x, xi) -> float:
        return float(self.inflated_losses(x, np.atleast_1d(xi)[None, :])[0])

    def subgrad(self, x, xi) -> np.ndarray:
        return self.subgradients(x, np.atleast_1d(xi)[None, :])[0]

    def subgrad_inflated(self, x, xi) -> np.ndarray:
        return self.inflated_subgradients(x, np.atleast_1d(xi)[None, :])[0]


class _LinearModelOracle(LossOracle):
    """Shared plumbing for losses of (X, Y) samples whose event set is the
    training data with covariates inflated by a ball of radius
    `epsilon_prime`. Labels are never perturbed."""

    def __init__(
        self,
        data: RegressionData,
        epsilon: float = 0.0,
        epsilon_prime: Optional[float] = None,
    ):
        if epsilon_prime is None:
            epsilon_prime = epsilon
        _check_radii(epsilon, epsilon_prime)
        self.data = data
        self.epsilon = float(epsilon)
        self.epsilon_prime = float(epsilon_prime)

    def _split(self, samples) -> Tuple[np.ndarray, np.ndarray]:
        samples = self._as_samples(samples)
        d = self.data.X.shape[1]
        if samples.shape[1] != d + 1:
            raise DimensionMismatchError(
                f"Samples with {samples.shape[1]} columns, expected {d + 1}"
            )
        return samples[:, :d], samples[:, d]


class L1RegressionOracle(_LinearModelOracle):
    """Absolute residual |theta'X - Y| of a linear model, decision x = theta.

    The inflated loss has the closed form |theta'X - Y| + epsilon ||theta||.
    """

    @property
    def dimension(self) -> int:
        return self.data.X.shape[1]

    def _residuals(self, x, samples) -> np.ndarray:
        X, Y = self._split(samples)
        return X @ self._as_decision(x) - Y

    def losses(self, x, samples):
        return np.abs(self._residuals(x, samples))

    def inflated_losses(self, x, samples):
        theta = self._as_decision(x)
        return self.losses(theta, samples) + self.epsilon * np.linalg.norm(
            theta
        )

    def worst_case(self, x) -> float:
        theta = self._as_decision(x)
        residuals = np.abs(self.data.X @ theta - self.data.Y)
        return float(
            residuals.max() + self.epsilon_prime * np.linalg.norm(theta)
        )

    def subgradients(self, x, samples):
        X, _ = self._split(samples)
        return np.sign(self._residuals(x, samples))[:, None] * X

    def inflated_subgradients(self, x, samples):
        theta = self._as_decision(x)
        return self.subgradients(
            theta, samples
        ) + self.epsilon * _unit_direction(theta)

    def subgrad_worst(self, x):
        theta = self._as_decision(x)
        residuals = self.data.X @ theta - self.data.Y
        t = int(np.argmax(np.abs(residuals)))
        return np.sign(residuals[t]) * self.data.X[
            t
        ] + self.epsilon_prime * _unit_direction(theta)

    def initial_decision(self, samples=None):
        return np.zeros(self.dimension)


class HingeOracle(_LinearModelOracle):
    """Hinge loss max(1 - Y(theta'X - b), 0), decision x = (theta, b).

    The inflated loss is max(1 - Y(theta'X - b) + epsilon ||theta||, 0).
    """

    def __init__(
        self,
        data: ClassificationData,
        epsilon: float = 0.0,
        epsilon_prime: Optional[float] = None,
    ):
        if not isinstance(data, ClassificationData):
            data = ClassificationData(data.X, data.Y)
        super().__init__(data, epsilon, epsilon_prime)

    @property
    def dimension(self) -> int:
        return self.data.X.shape[1] + 1

    def _margins(self, x, X, Y) -> np.ndarray:
        x = self._as_decision(x)
        return Y * (X @ x[:-1] - x[-1])

    def losses(self, x, samples):
        X, Y = self._split(samples)
        return np.maximum(1 - self._margins(x, X, Y), 0.0)

    def inflated_losses(self, x, samples):
        X, Y = self._split(samples)
        penalty = self.epsilon * np.linalg.norm(self._as_decision(x)[:-1])
        return np.maximum(1 - self._margins(x, X, Y) + penalty, 0.0)

    def worst_case(self, x) -> float:
        margins = self._margins(x, self.data.X, self.data.Y)
        penalty = self.epsilon_prime * np.linalg.norm(self._as_decision(x)[:-1])
        return float(max(1 - margins.min() + penalty, 0.0))

    def _hinge_subgradients(
        self, x, X, Y, epsilon: float, active: np.ndarray
    ) -> np.ndarray:
        theta = self._as_decision(x)[:-1]
        gradient = np.column_stack(
            [-Y[:, None] * X + epsilon * _unit_direction(theta), Y]
        )
        return gradient * active[:, None]

    def subgradients(self, x, samples):
        X, Y = self._split(samples)
        active = 1 - self._margins(x, X, Y) > 0
        return self._hinge_subgradients(x, X, Y, 0.0, active)

    def inflated_subgradients(self, x, samples):
        X, Y = self._split(samples)
        penalty = self.epsilon * np.linalg.norm(self._as_decision(x)[:-1])
        active = 1 - self._margins(x, X, Y) + penalty > 0
        return self._hinge_subgradients(x, X, Y, self.epsilon, active)

    def subgrad_worst(self, x):
        X, Y = self.data.X, self.data.Y
        t = int(np.argmin(self._margins(x, X, Y)))
        active = np.array([self.worst_case(x) > 0])
        return self._hinge_subgradients(
            x, X[t : t + 1], Y[t : t + 1], self.epsilon_prime, active
        )[0]

    def initial_decision(self, samples=None):
        return np.zeros(self.dimension)


class NewsvendorOracle(LossOracle):
    """Newsvendor cost b (d - x)^+ + h (x - d)^+ of ordering x against demand
    d, with demand noise in [-epsilon, epsilon] and event set
    [lower - epsilon_prime, upper + epsilon_prime]."""

    def __init__(
        self,
        b_cost: float,
        h_cost: float,
        support: Tuple[float, float],
        epsilon: float = 0.0,
        epsilon_prime: Optional[float] = None,
    ):
        if epsilon_prime is None:
            epsilon_prime = epsilon
        if not (b_cost > 0 and h_cost > 0):
            raise ParameterError(
                f"Costs must be positive, got b={b_cost}, h={h_cost}"
            )
        lower, upper = support
        if lower > upper:
            raise ParameterError(f"Empty demand support [{lower}, {upper}]")
        _check_radii(epsilon, epsilon_prime)

        self.b_cost = float(b_cost)
        self.h_cost = float(h_cost)
        self.support = (float(lower), float(upper))
        self.epsilon = float(epsilon)
        self.epsilon_prime = float(epsilon_prime)

    @property
    def dimension(self) -> int:
        return 1

    def _demands(self, samples) -> np.ndarray:
        samples = self._as_samples(samples)
        if samples.shape[1] != 1:
            raise DimensionMismatchError(
                f"Demand samples must have one column, got {samples.shape[1]}"
            )
        return samples[:, 0]

    def _cost(self, x: float, demand: np.ndarray) -> np.ndarray:
        return self.b_cost * np.maximum(demand - x, 0.0) + self.h_cost * (
            np.maximum(x - demand, 0.0)
        )

    def _slope(self, x: float, demand: np.ndarray) -> np.ndarray:
        return np.where(
            demand > x, -self.b_cost, np.where(demand < x, self.h_cost, 0.0)
        )

    def _worst_demand(self, x: float, demand: np.ndarray) -> np.ndarray:
        # the cost is piecewise linear in the demand, so the maximum over the
        # noise interval sits at an endpoint
        low = demand - self.epsilon
        high = demand + self.epsilon
        return np.where(self._cost(x, low) >= self._cost(x, high), low, high)

    def losses(self, x, samples):
        x = self._as_decision(x)[0]
        return self._cost(x, self._demands(samples))

    def inflated_losses(self, x, samples):
        x = self._as_decision(x)[0]
        return self._cost(x, self._worst_demand(x, self._demands(samples)))

    def worst_case(self, x) -> float:
        x = self._as_decision(x)[0]
        extremes = np.array(
            [
                self.support[0] - self.epsilon_prime,
                self.support[1] + self.epsilon_prime,
            ]
        )
        return float(self._cost(x, extremes).max())

    def subgradients(self, x, samples):
        x = self._as_decision(x)[0]
        return self._slope(x, self._demands(samples))[:, None]

    def inflated_subgradients(self, x, samples):
        x = self._as_decision(x)[0]
        demand = self._worst_demand(x, self._demands(samples))
        return self._slope(x, demand)[:, None]

    def subgrad_worst(self, x):
        x = self._as_decision(x)[0]
        extremes = np.array(
            [
                self.support[0] - self.epsilon_prime,
                self.support[1] + self.epsilon_prime,
            ]
        )
        worst = extremes[int(np.argmax(self._cost(x, extremes)))]
        return np.array([self._slope(x, np.array([worst]))[0]])

    def initial_decision(self, samples):
        return np.array([float(np.mean(self._demands(samples)))])


def critical_fractile(demands, b_cost: float, h_cost: float) -> float:
    """Order quantity minimizing the empirical newsvendor cost: the
    b/(b+h) quantile of the demand samples."""

    demands = np.sort(np.asarray(demands, dtype=float).reshape(-1))
    level = b_cost / (b_cost + h_cost)
    index = int(np.ceil(level * demands.size - 1e-12)) - 1
    return float(demands[max(index, 0)])


def build_profile(oracle: LossOracle, x, samples) -> LossProfile:
    """Evaluates `oracle` at decision `x` on the empirical distribution of
    `samples`, duplicate samples merged."""

    atoms, counts = merge_duplicates(oracle._as_samples(samples))
    x = oracle._as_decision(x)
    return LossProfile(
        oracle.inflated_losses(x, atoms),
        oracle.losses(x, atoms),
        counts / counts.sum(),
        oracle.worst_case(x),
        atoms,
    )
