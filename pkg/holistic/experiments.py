from __future__ import annotations

import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    DiscreteDistribution,
    ParameterError,
    RobustnessParams,
    write_csv,
)
from .decision import erm_fit, robust_fit, softmargin_fit
from .losses import ClassificationData, LossOracle, build_profile
from .predictors import PredictorKind, predictor_family
from .solvers import SubgradientConfig

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle with `length` along x1 and `width` along x2."""

    center: Tuple[float, float] = (0.3, 0.7)
    length: float = 0.52
    width: float = 0.46

    @property
    def sides(self) -> np.ndarray:
        return np.array([self.length, self.width])

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.center) - self.sides / 2

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.center) + self.sides / 2

    @property
    def variance(self) -> np.ndarray:
        """Per-coordinate variance of the uniform distribution."""
        return self.sides ** 2 / 12

    def reflected(self) -> Rectangle:
        """Mirror image across the line x2 = x1."""
        return Rectangle(
            (self.center[1], self.center[0]), self.width, self.length
        )


NEGATIVE_CLASS = Rectangle()


def _uniform(rng: np.random.Generator, rectangle: Rectangle, n: int):
    return rng.uniform(rectangle.lower, rectangle.upper, size=(n, 2))


def gen_two_rectangles(
    n_per_class: int, seed: Seed, rectangle: Rectangle = NEGATIVE_CLASS
) -> ClassificationData:
    """Class -1 uniform on `rectangle`, class +1 uniform on its reflection
    across x2 = x1, the true classifier being theta = (-1, 1), b = 0.
    Class -1 rows come first."""

    if n_per_class < 1:
        raise ParameterError("Need at least one point per class")
    rng = np.random.default_rng(seed)
    negative = _uniform(rng, rectangle, n_per_class)
    positive = _uniform(rng, rectangle.reflected(), n_per_class)
    return ClassificationData(
        np.vstack([negative, positive]),
        np.repeat([-1.0, 1.0], n_per_class),
    )


def gaussianize(
    data: ClassificationData, seed: Seed, rectangle: Rectangle = NEGATIVE_CLASS
) -> ClassificationData:
    """Replaces each class by normal draws with the mean and per-coordinate
    variance of its uniform rectangle distribution."""

    rng = np.random.default_rng(seed)
    X = data.X.copy()
    for label, shape in ((-1.0, rectangle), (1.0, rectangle.reflected())):
        rows = np.flatnonzero(data.Y == label)
        X[rows] = rng.normal(
            shape.center, np.sqrt(shape.variance), size=(rows.size, 2)
        )
    return ClassificationData(X, data.Y.copy())


def misspecify_closest(
    data: ClassificationData,
    fraction: float,
    center: Tuple[float, float] = NEGATIVE_CLASS.center,
    seed: Optional[Seed] = None,
) -> ClassificationData:
    """Moves the ceil(fraction * n) class -1 points closest to the line
    x2 = x1 onto `center`.

    The selection is deterministic: `seed` is accepted like the other
    generators take it and has no effect, ties keep sample order.
    """

    if not 0 <= fraction <= 1:
        raise ParameterError(f"fraction must be in [0, 1], got {fraction}")

    rows = np.flatnonzero(data.Y == -1.0)
    count = int(math.ceil(fraction * rows.size - 1e-9))
    distance = np.abs(data.X[rows, 1] - data.X[rows, 0]) / math.sqrt(2)
    moved = rows[np.argsort(distance, kind="stable")[:count]]

    X = data.X.copy()
    X[moved] = center
    return ClassificationData(X, data.Y.copy())


class CorruptionMode(enum.Enum):
    RANDOM = "random"
    DETERMINISTIC = "deterministic"


class MisspecificationRule(enum.Enum):
    REPLACE_WITH_POINT = "replace-with-point"
    MOVE_CLOSEST_TO_CENTER = "move-closest-to-center"


@dataclass(frozen=True)
class CorruptionSpec:
    """
    Parameters
    ----------
    mode: CorruptionMode
        Random: every sample is misspecified independently with probability
        `alpha`. Deterministic: floor(alpha * T) samples chosen by `rule`
    epsilon: float
        Radius of the uniform noise ball on the covariates
    alpha: float
    rule: MisspecificationRule
    point: Optional[Tuple[float, ...]]
        Replacement for misspecified samples
    seed: int
    n_covariates: Optional[int]
        Leading sample coordinates receiving noise; all but the last when
        samples have several coordinates, otherwise the single one
    """

    mode: CorruptionMode = CorruptionMode.RANDOM
    epsilon: float = 0.0
    alpha: float = 0.0
    rule: MisspecificationRule = MisspecificationRule.REPLACE_WITH_POINT
    point: Optional[Tuple[float, ...]] = None
    seed: int = 0
    n_covariates: Optional[int] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.alpha <= 1:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.alpha > 0 and self.point is None:
            raise ParameterError("Misspecification needs a replacement point")


@dataclass(frozen=True, eq=False)
class CorruptionResult:
    samples: np.ndarray
    replaced: np.ndarray


def _ball_noise(
    rng: np.random.Generator, n: int, dimension: int, radius: float
) -> np.ndarray:
    direction = rng.standard_normal((n, dimension))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * radius * rng.random((n, 1)) ** (1 / dimension)


def _hyperplane_distance(samples: np.ndarray, decision) -> np.ndarray:
    decision = np.asarray(decision, dtype=float)
    theta, b = decision[:-1], decision[-1]
    covariates = samples[:, : theta.size]
    return np.abs(covariates @ theta - b) / np.linalg.norm(theta)


def corrupt(
    samples,
    spec: CorruptionSpec,
    oracle: Optional[LossOracle] = None,
    decision=None,
    rng: Optional[np.random.Generator] = None,
) -> CorruptionResult:
    """Adds covariate noise and misspecifies samples according to `spec`.

    Deterministic replacement targets the samples with the lowest inflated
    loss under `oracle` at `decision`, or with move-closest-to-center the
    samples nearest the hyperplane `decision` = (theta, b), by default the
    line x2 = x1.
    """

    original = np.asarray(samples, dtype=float)
    corrupted = original.reshape(original.shape[0], -1).copy()
    t, dimension = corrupted.shape
    n_covariates = spec.n_covariates or (
        dimension - 1 if dimension > 1 else 1
    )
    if rng is None:
        rng = np.random.default_rng(spec.seed)

    if spec.mode is CorruptionMode.RANDOM:
        replaced = rng.random(t) < spec.alpha
    else:
        replaced = np.zeros(t, dtype=bool)

    if spec.epsilon > 0:
        noise = _ball_noise(rng, t, n_covariates, spec.epsilon)
        keep = ~replaced
        corrupted[keep, :n_covariates] += noise[keep]

    if spec.mode is CorruptionMode.DETERMINISTIC:
        count = int(math.floor(spec.alpha * t + 1e-9))
        if count > 0:
            if spec.rule is MisspecificationRule.REPLACE_WITH_POINT:
                if oracle is None or decision is None:
                    raise ParameterError(
                        "Adversarial replacement needs an oracle and a decision"
                    )
                score = oracle.inflated_losses(decision, corrupted)
            else:
                if decision is None:
                    decision = (-1.0, 1.0, 0.0)
                score = _hyperplane_distance(corrupted, decision)
            replaced[np.argsort(score, kind="stable")[:count]] = True

    if replaced.any():
        corrupted[replaced] = np.asarray(spec.point, dtype=float)
    return CorruptionResult(corrupted.reshape(original.shape), replaced)


@dataclass(frozen=True, eq=False)
class TrialReport:
    """Per-trial predictor values against the true expected loss."""

    values: np.ndarray
    truths: np.ndarray
    disappointed: np.ndarray
    r: float
    T: int
    kind: str

    def __post_init__(self):
        if not np.array_equal(self.disappointed, self.truths > self.values):
            raise ValueError("Disappointment flags disagree with the values")

    @property
    def trials(self) -> int:
        return self.values.size

    @property
    def rate(self) -> float:
        return float(self.disappointed.mean())

    @property
    def bound(self) -> float:
        return math.exp(-self.r * self.T)

    def bound_with_slack(self) -> float:
        """Bound plus a binomial allowance for the finite number of trials
        and the unquantified o(T) term."""
        return self.bound + 3 * math.sqrt(self.bound / self.trials) + 0.05

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.r,
            "T": self.T,
            "trials": self.trials,
            "rate": self.rate,
            "bound": self.bound,
            "bound_with_slack": self.bound_with_slack(),
        }

    def to_csv(self, path: Union[str, Path]):
        write_csv(
            path,
            {
                "trial": np.arange(self.trials),
                "value": self.values,
                "truth": self.truths,
                "disappointed": self.disappointed.astype(int),
            },
        )

    def write_summary(self, path: Union[str, Path]):
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2)


def disappointment_rate(
    truth: DiscreteDistribution,
    oracle: LossOracle,
    decision,
    kind: PredictorKind,
    params: RobustnessParams,
    T: int,
    trials: int,
    seed: int,
    corruption: Optional[CorruptionSpec] = None,
    svp_penalty: float = 0.0,
    workers: int = 1,
) -> TrialReport:
    """Monte-Carlo frequency of the predictor at `decision` underestimating
    the expected loss under `truth`.

    Trial i draws from its own generator seeded with (seed, i), so results
    do not depend on `workers`.
    """

    kind = PredictorKind(kind)
    decision = np.asarray(decision, dtype=float)
    expected = truth.expectation(oracle.losses(decision, truth.atoms))

    def trial(i: int) -> float:
        rng = np.random.default_rng([seed, i])
        samples = truth.sample(rng, T)
        if corruption is not None:
            samples = corrupt(samples, corruption, oracle, decision, rng).samples
        profile = build_profile(oracle, decision, samples)
        return predictor_family(profile, params, kind, svp_penalty).value

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(trial, range(trials)))
    else:
        values = [trial(i) for i in range(trials)]

    values = np.array(values)
    truths = np.full(trials, expected)
    report = TrialReport(values, truths, truths > values, params.r, T, kind.value)
    logger.info(
        f"{kind.value}: disappointment rate {report.rate:.4f} over {trials} "
        f"trials, bound {report.bound:.4g}"
    )
    return report


def angular_distance(x1, x2) -> float:
    """Angle between the normal vectors of two classifiers (theta, b)."""

    theta1 = np.asarray(x1, dtype=float)[:-1]
    theta2 = np.asarray(x2, dtype=float)[:-1]
    norms = np.linalg.norm(theta1) * np.linalg.norm(theta2)
    if norms == 0:
        raise ValueError("Angle undefined for a zero normal vector")
    return float(np.arccos(np.clip(theta1 @ theta2 / norms, -1.0, 1.0)))


@dataclass(frozen=True, eq=False)
class StudyReport:
    robust_angles: np.ndarray
    erm_angles: np.ndarray

    @property
    def robust_median(self) -> float:
        return float(np.median(self.robust_angles))

    @property
    def erm_median(self) -> float:
        return float(np.median(self.erm_angles))

    def to_json(self) -> dict:
        return {
            "robust_angles": self.robust_angles.tolist(),
            "erm_angles": self.erm_angles.tolist(),
            "robust_median": self.robust_median,
            "erm_median": self.erm_median,
        }


def classifier_study(
    seeds: Sequence[int],
    n_per_class: int = 30,
    fraction: float = 0.15,
    params: RobustnessParams = RobustnessParams(0.08, 0.08, 0.08, 0.0),
    config: SubgradientConfig = SubgradientConfig(),
) -> StudyReport:
    """Angular distance of the holistic and the ERM classifier, both fitted
    on gaussianized data with the class -1 points closest to the true
    boundary moved to the class center, to the soft-margin classifier
    fitted before the move."""

    robust_angles, erm_angles = [], []
    for seed in seeds:
        clean = gaussianize(
            gen_two_rectangles(n_per_class, [seed, 0]), [seed, 1]
        )
        reference = softmargin_fit(clean, params.epsilon, config).decision
        corrupted = misspecify_closest(clean, fraction, seed=[seed, 2])

        robust = robust_fit(corrupted, params, PredictorKind.HR, config)
        erm = erm_fit(corrupted, config)
        robust_angles.append(angular_distance(robust.decision, reference))
        erm_angles.append(angular_distance(erm.decision, reference))
        logger.debug(
            f"Seed {seed}: robust {robust_angles[-1]:.4f}, "
            f"erm {erm_angles[-1]:.4f}"
        )

    return StudyReport(np.array(robust_angles), np.array(erm_angles))
