from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .core import LossProfile, RobustnessParams, write_csv
from .losses import (
    ClassificationData,
    HingeOracle,
    L1RegressionOracle,
    LossOracle,
    RegressionData,
    build_profile,
)
from .predictors import (
    LossBasis,
    PredictorKind,
    WorstCaseSolution,
    predictor_family,
)
from .solvers import SubgradientConfig, subgradient_descent

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of minimizing a predictor over the decision.

    Parameters
    ----------
    decision: np.ndarray
        theta, (theta, b) for classification, or the inventory level
    initial_decision: np.ndarray
    trajectory: list[float]
        Objective at every iterate, starting with the initial decision
    value: float
        Objective recomputed at `decision`
    solution: Optional[WorstCaseSolution]
        Worst-case distribution at `decision`, absent for the penalized
        baselines
    converged: bool
    kind: str
    """

    decision: np.ndarray
    initial_decision: np.ndarray
    trajectory: list
    value: float
    solution: Optional[WorstCaseSolution]
    converged: bool
    kind: str

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "decision": self.decision.tolist(),
            "initial_decision": self.initial_decision.tolist(),
            "value": self.value,
            "converged": self.converged,
            "iterations": len(self.trajectory) - 1,
            "trajectory": list(self.trajectory),
            "solution": None
            if self.solution is None
            else self.solution.to_json(),
        }

    def write_trajectory(self, path: Union[str, Path]):
        write_csv(
            path,
            {
                "iter": np.arange(len(self.trajectory)),
                "objective": np.asarray(self.trajectory, dtype=float),
            },
        )


def danskin_subgradient(
    oracle: LossOracle,
    x: np.ndarray,
    profile: LossProfile,
    solution: WorstCaseSolution,
) -> np.ndarray:
    """Subgradient of the predictor in the decision: the loss subgradients
    averaged under the worst-case weights, worst-case scenario included."""

    if solution.loss_basis is LossBasis.BASE:
        gradients = oracle.subgradients(x, profile.atoms)
    else:
        gradients = oracle.inflated_subgradients(x, profile.atoms)
    weights = solution.p_prime
    return weights[:-1] @ gradients + weights[-1] * oracle.subgrad_worst(x)


def predictor_objective(
    oracle: LossOracle,
    samples: np.ndarray,
    params: RobustnessParams,
    kind: PredictorKind,
    svp_penalty: float = 0.0,
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """x -> (predictor value, Danskin subgradient)."""

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        profile = build_profile(oracle, x, samples)
        solution = predictor_family(profile, params, kind, svp_penalty)
        return solution.value, danskin_subgradient(oracle, x, profile, solution)

    return objective


def fit(
    oracle: LossOracle,
    samples,
    params: RobustnessParams,
    kind: PredictorKind,
    config: SubgradientConfig = SubgradientConfig(),
    svp_penalty: float = 0.0,
) -> FitResult:
    """Minimizes the predictor `kind` over the decision by projected
    subgradient descent, recomputing the worst-case weights every step."""

    kind = PredictorKind(kind)
    samples = np.asarray(samples, dtype=float)
    x0 = oracle.initial_decision(samples)
    logger.info(
        f"Fitting {kind.value} on {len(samples)} samples from {x0.tolist()}"
    )

    result = subgradient_descent(
        predictor_objective(oracle, samples, params, kind, svp_penalty),
        x0,
        config,
    )
    profile = build_profile(oracle, result.x, samples)
    solution = predictor_family(profile, params, kind, svp_penalty)
    return FitResult(
        result.x,
        x0,
        result.trajectory,
        solution.value,
        solution,
        result.converged,
        kind.value,
    )


def _penalized_fit(
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x0: np.ndarray,
    config: SubgradientConfig,
    kind: str,
) -> FitResult:
    result = subgradient_descent(objective, x0, config)
    value, _ = objective(result.x)
    return FitResult(
        result.x, x0, result.trajectory, value, None, result.converged, kind
    )


def _norm_subgradient(theta: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(theta)
    return theta / norm if norm > 0 else np.zeros_like(theta)


def ridge_fit(
    data: RegressionData,
    epsilon: float,
    config: SubgradientConfig = SubgradientConfig(),
) -> FitResult:
    """Minimizes mean |theta'X - Y| + epsilon ||theta||."""

    X, Y = data.X, data.Y

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        residuals = X @ theta - Y
        value = np.abs(residuals).mean() + epsilon * np.linalg.norm(theta)
        subgradient = (np.sign(residuals) @ X) / len(Y)
        return value, subgradient + epsilon * _norm_subgradient(theta)

    return _penalized_fit(objective, np.zeros(X.shape[1]), config, "ridge")


def softmargin_fit(
    data: ClassificationData,
    epsilon: float,
    config: SubgradientConfig = SubgradientConfig(),
) -> FitResult:
    """Minimizes mean max(1 - Y(theta'X - b), 0) + epsilon ||theta|| over
    x = (theta, b)."""

    X, Y = data.X, data.Y

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        theta, b = x[:-1], x[-1]
        slack = 1 - Y * (X @ theta - b)
        active = (slack > 0).astype(float)
        value = np.maximum(slack, 0.0).mean() + epsilon * np.linalg.norm(theta)
        grad_theta = -(active * Y) @ X / len(Y)
        grad_b = (active * Y).sum() / len(Y)
        return value, np.append(
            grad_theta + epsilon * _norm_subgradient(theta), grad_b
        )

    return _penalized_fit(
        objective, np.zeros(X.shape[1] + 1), config, "softmargin"
    )


def erm_fit(
    data: RegressionData, config: SubgradientConfig = SubgradientConfig()
) -> FitResult:
    """Empirical risk minimizer: absolute loss for regression data, hinge
    loss for classification data."""

    if isinstance(data, ClassificationData):
        return softmargin_fit(data, 0.0, config)
    return ridge_fit(data, 0.0, config)


def robust_fit(
    data: RegressionData,
    params: RobustnessParams,
    kind: PredictorKind,
    config: SubgradientConfig = SubgradientConfig(),
) -> FitResult:
    """`fit` with the oracle matching the data type and the data itself as
    samples."""

    if isinstance(data, ClassificationData):
        oracle = HingeOracle(data, params.epsilon, params.epsilon_prime)
    else:
        oracle = L1RegressionOracle(data, params.epsilon, params.epsilon_prime)
    return fit(oracle, data.samples, params, kind, config)
