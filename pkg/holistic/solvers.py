from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

DEFAULT_TOLERANCE = 1e-10
LOWDIM_TOLERANCE = 1e-9

Bound = Union[Tuple[float, float], Callable[[Tuple[float, ...]], Tuple[float, float]]]


class InvalidBracketError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class UnivariateResult:
    argmin: float
    value: float
    iterations: int


@dataclass(frozen=True)
class LowDimResult:
    argmin: np.ndarray
    value: float
    evaluations: int


def _finite_or_inf(value: float) -> float:
    return value if not math.isnan(value) else math.inf


def minimize_univariate(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_TOLERANCE,
) -> UnivariateResult:
    """Golden-section search for the minimum of a convex function on
    [lo, hi].

    Both bracket ends are evaluated as well, so the returned value never
    exceeds min(f(lo), f(hi)). NaN is treated as +inf.

    Parameters
    ----------
    f: Callable[[float], float]
        Convex objective
    lo, hi: float
        Bracket with lo <= hi
    tol: float
        Absolute tolerance on the argument
    """

    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise InvalidBracketError(f"Invalid bracket [{lo}, {hi}]")
    if not tol > 0:
        raise InvalidBracketError(f"Tolerance must be positive, got {tol}")

    def objective(x: float) -> float:
        return _finite_or_inf(float(f(x)))

    candidates = [(lo, objective(lo))]
    if hi > lo:
        candidates.append((hi, objective(hi)))

    a, b = lo, hi
    h = b - a
    iterations = 0
    if h > tol:
        # Required steps to achieve tolerance
        n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

        c = a + INV_PHI_SQUARE * h
        d = a + INV_PHI * h
        yc = objective(c)
        yd = objective(d)

        for _ in range(n - 1):
            if yc < yd:
                b = d
                d = c
                yd = yc
                h = INV_PHI * h
                c = a + INV_PHI_SQUARE * h
                yc = objective(c)
            else:
                a = c
                c = d
                yc = yd
                h = INV_PHI * h
                d = a + INV_PHI * h
                yd = objective(d)
            iterations += 1

        if yc < yd:
            b = d
        else:
            a = c
        middle = (a + b) / 2
        candidates = [(middle, objective(middle)), (c, yc), (d, yd)] + candidates

    argmin, value = min(candidates, key=lambda candidate: candidate[1])
    return UnivariateResult(argmin, value, iterations)


def _resolve(bound: Bound, prefix: Tuple[float, ...]) -> Tuple[float, float]:
    if callable(bound):
        return bound(prefix)
    return bound


def minimize_lowdim(
    f: Callable[[np.ndarray], float],
    bounds: Sequence[Bound],
    tol: float = LOWDIM_TOLERANCE,
) -> LowDimResult:
    """Minimizes a jointly convex function of a few variables by nested
    golden-section searches.

    Each coordinate's bracket is either a fixed `(lo, hi)` pair or a callable
    receiving the values of the preceding coordinates, which expresses linear
    domain constraints. The inner searches compute exact partial minima, and
    partial minimization preserves convexity, so every level stays unimodal.
    """

    if len(bounds) == 0:
        raise InvalidBracketError("At least one coordinate is required")

    evaluations = 0

    def evaluate(point: Tuple[float, ...]) -> float:
        nonlocal evaluations
        evaluations += 1
        return f(np.array(point))

    def nested(prefix: Tuple[float, ...]) -> Tuple[float, Tuple[float, ...]]:
        level = len(prefix)
        lo, hi = _resolve(bounds[level], prefix)
        if lo > hi:
            raise SolverError(
                f"Empty domain for coordinate {level}: [{lo}, {hi}] "
                f"given {prefix}"
            )

        if level == len(bounds) - 1:
            result = minimize_univariate(
                lambda t: evaluate(prefix + (t,)), lo, hi, tol
            )
            return result.value, prefix + (result.argmin,)

        minimizers = {}

        def partial(t: float) -> float:
            value, point = nested(prefix + (t,))
            minimizers[t] = point
            return value

        result = minimize_univariate(partial, lo, hi, tol)
        return result.value, minimizers[result.argmin]

    value, point = nested(())
    logger.debug(f"Nested golden section: {evaluations} evaluations")
    return LowDimResult(np.array(point), value, evaluations)


@dataclass(frozen=True)
class SubgradientConfig:
    """
    Parameters
    ----------
    max_iters: int
        Number of subgradient steps
    step_scale: Optional[float]
        Constant a of the a/sqrt(t) step length; the initial objective value
        is used when absent
    averaging: float
        Fraction of trailing iterates that are averaged
    projection: Optional[Callable[[np.ndarray], np.ndarray]]
        Projection onto the feasible decisions, identity when absent
    """

    max_iters: int = 1000
    step_scale: Optional[float] = None
    averaging: float = 0.5
    projection: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError(f"step_scale must be > 0, got {self.step_scale}")
        if not 0 < self.averaging <= 1:
            raise ValueError(
                f"averaging must be in (0, 1], got {self.averaging}"
            )

    def project(self, x: np.ndarray) -> np.ndarray:
        return x if self.projection is None else self.projection(x)


def box_projection(lower, upper) -> Callable[[np.ndarray], np.ndarray]:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise ValueError("Empty box")
    return lambda x: np.clip(x, lower, upper)


@dataclass
class SubgradientResult:
    x: np.ndarray
    value: float
    trajectory: list[float]
    converged: bool


def _checked(
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x: np.ndarray,
) -> Tuple[float, np.ndarray]:
    value, subgradient = objective(x)
    value = float(value)
    subgradient = np.asarray(subgradient, dtype=float)
    if not math.isfinite(value):
        raise SolverError(f"Non-finite objective {value} at x={x.tolist()}")
    if not np.all(np.isfinite(subgradient)):
        raise SolverError(
            f"Non-finite subgradient {subgradient.tolist()} at x={x.tolist()}"
        )
    return value, subgradient


def subgradient_descent(
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    x0,
    config: SubgradientConfig = SubgradientConfig(),
) -> SubgradientResult:
    """Projected subgradient descent with normalized a/sqrt(t) steps.

    Returns the better of the best iterate and the average of the trailing
    iterates. The trajectory lists the objective at every visited iterate.
    The run counts as converged unless the best value still dropped by more
    than 1e-3 (relative) during the last quarter of the budget.

    Parameters
    ----------
    objective: Callable[[np.ndarray], Tuple[float, np.ndarray]]
        Returns the objective value and one subgradient at a point
    x0:
        Starting point, projected before the first step
    config: SubgradientConfig
    """

    x = config.project(np.array(x0, dtype=float))
    value, subgradient = _checked(objective, x)

    scale = config.step_scale
    if scale is None:
        scale = abs(value) if value != 0 else 1.0

    trajectory = [value]
    best_x, best_value = x, value
    running_best = [value]
    window_start = int(math.floor(config.max_iters * (1 - config.averaging)))
    window_sum = np.zeros_like(x)
    window_count = 0

    for t in range(1, config.max_iters + 1):
        norm = np.linalg.norm(subgradient)
        if norm == 0:
            logger.debug(f"Zero subgradient at iteration {t}, stopping")
            break

        x = config.project(x - scale / math.sqrt(t) * subgradient / norm)
        value, subgradient = _checked(objective, x)
        trajectory.append(value)

        if value < best_value:
            best_x, best_value = x, value
        running_best.append(best_value)

        if t > window_start:
            window_sum += x
            window_count += 1

    if window_count > 0:
        average = config.project(window_sum / window_count)
        average_value, _ = _checked(objective, average)
        if average_value < best_value:
            best_x, best_value = average, average_value

    converged = True
    if len(running_best) > 4:
        quarter = running_best[-(len(running_best) // 4) - 1]
        decrease = quarter - running_best[-1]
        if decrease > 1e-3 * max(abs(quarter), 1e-12):
            converged = False
            logger.warning(
                f"Subgradient descent did not converge in {config.max_iters} "
                f"iterations: best value fell by {decrease:.3g} in the last "
                f"quarter"
            )

    return SubgradientResult(best_x, best_value, trajectory, converged)
