from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .core import (
    DimensionMismatchError,
    DiscreteDistribution,
    LossProfile,
    ParameterError,
)
from .losses import LossOracle
from .solvers import SolverError

logger = logging.getLogger(__name__)

FLOW_TOLERANCE = 1e-15
ENUMERATION_CAP = 10


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint weights over pairs of atoms of two distributions."""

    matrix: np.ndarray

    def marginal_error(
        self, mu: DiscreteDistribution, nu: DiscreteDistribution
    ) -> float:
        rows = np.abs(self.matrix.sum(axis=1) - mu.weights).max()
        columns = np.abs(self.matrix.sum(axis=0) - nu.weights).max()
        return float(max(rows, columns))


@dataclass(frozen=True, eq=False)
class NoiseIndicator:
    """within[i, j] tells whether atom j of the second distribution can be
    reached from atom i of the first by admissible noise."""

    within: np.ndarray

    def __post_init__(self):
        within = np.array(self.within, dtype=bool)
        if within.ndim != 2:
            raise DimensionMismatchError(
                f"Noise indicator must be a matrix, got shape {within.shape}"
            )
        object.__setattr__(self, "within", within)

    @classmethod
    def from_points(
        cls,
        a,
        b,
        epsilon: float,
        n_covariates: Optional[int] = None,
    ) -> NoiseIndicator:
        """Noise set B(0, epsilon) x {0}: the first `n_covariates` coordinates
        may move by at most `epsilon` in Euclidean norm, the rest must match.
        All coordinates are covariates when `n_covariates` is absent."""

        a = np.asarray(a, dtype=float).reshape(len(a), -1)
        b = np.asarray(b, dtype=float).reshape(len(b), -1)
        if a.shape[1] != b.shape[1]:
            raise DimensionMismatchError(
                f"Atoms of dimension {a.shape[1]} and {b.shape[1]}"
            )
        if n_covariates is None:
            n_covariates = a.shape[1]

        difference = a[:, None, :] - b[None, :, :]
        distance = np.linalg.norm(difference[:, :, :n_covariates], axis=2)
        exact = np.all(difference[:, :, n_covariates:] == 0, axis=2)
        return cls((distance <= epsilon * (1 + 1e-12)) & exact)

    @classmethod
    def equality(cls, a, b) -> NoiseIndicator:
        return cls.from_points(a, b, 0.0)


def _max_transport(
    supply: np.ndarray, demand: np.ndarray, within: np.ndarray
) -> np.ndarray:
    """Largest mass movable along `within` edges, by shortest augmenting
    paths on the bipartite graph."""

    m, n = within.shape
    flow = np.zeros((m, n))
    supply_left = supply.copy()
    demand_left = demand.copy()

    while True:
        row_parent = np.full(m, -2)
        column_parent = np.full(n, -1)
        queue = deque()
        for i in np.flatnonzero(supply_left > FLOW_TOLERANCE):
            row_parent[i] = -1
            queue.append(i)

        sink = -1
        while queue and sink < 0:
            i = queue.popleft()
            for j in np.flatnonzero(within[i] & (column_parent < 0)):
                column_parent[j] = i
                if demand_left[j] > FLOW_TOLERANCE:
                    sink = j
                    break
                for k in np.flatnonzero(
                    (flow[:, j] > FLOW_TOLERANCE) & (row_parent == -2)
                ):
                    row_parent[k] = j
                    queue.append(k)

        if sink < 0:
            return flow

        path = []
        j = sink
        while True:
            i = column_parent[j]
            path.append((i, j))
            if row_parent[i] == -1:
                break
            j = row_parent[i]

        # every row but the source also gives back flow on a reverse edge
        source = path[-1][0]
        amount = min(supply_left[source], demand_left[sink])
        for i, _ in path[:-1]:
            amount = min(amount, flow[i, row_parent[i]])
        for i, j in path[:-1]:
            flow[i, j] += amount
            flow[i, row_parent[i]] -= amount
        flow[source, path[-1][1]] += amount
        supply_left[source] -= amount
        demand_left[sink] -= amount


def rho(
    mu: DiscreteDistribution, nu: DiscreteDistribution, within: NoiseIndicator
) -> tuple[float, Coupling]:
    """Smallest probability mass that must travel outside the noise set to
    turn `mu` into `nu`, and a coupling attaining it."""

    if within.within.shape != (mu.size, nu.size):
        raise DimensionMismatchError(
            f"Noise indicator of shape {within.within.shape} for "
            f"distributions with {mu.size} and {nu.size} atoms"
        )

    flow = _max_transport(mu.weights.copy(), nu.weights.copy(), within.within)
    supply_left = np.clip(mu.weights - flow.sum(axis=1), 0, None)
    demand_left = np.clip(nu.weights - flow.sum(axis=0), 0, None)
    residual = supply_left.sum()
    matrix = flow
    if residual > FLOW_TOLERANCE:
        matrix = flow + np.outer(supply_left, demand_left) / residual

    value = float(np.clip((matrix * ~within.within).sum(), 0.0, 1.0))
    return value, Coupling(matrix)


def lp_dro_bruteforce(
    profile: LossProfile, alpha: float, within: Optional[np.ndarray] = None
) -> float:
    """LP-DRO predictor by linear programming over couplings between the
    empirical atoms and the candidate support {xi'_1..xi'_K, xi_inf}.

    Parameters
    ----------
    profile: LossProfile
        Candidate xi'_k carries the inflated loss of atom k, xi_inf the
        worst-case loss
    alpha: float
        Mass allowed to move outside the noise set
    within: Optional[np.ndarray]
        K x (K + 1) reachability of candidates; by default atom k only reaches
        its own candidate
    """

    if alpha < 0:
        raise ParameterError(f"Infeasible: alpha must be >= 0, got {alpha}")

    k = profile.size
    if within is None:
        within = np.hstack([np.eye(k, dtype=bool), np.zeros((k, 1), bool)])
    within = np.asarray(within, dtype=bool)
    if within.shape != (k, k + 1):
        raise DimensionMismatchError(
            f"Expected a {k}x{k + 1} reachability matrix, got {within.shape}"
        )

    candidate_losses = np.append(profile.inflated_losses, profile.worst_case)
    c = -np.tile(candidate_losses, k)

    a_eq = np.kron(np.eye(k), np.ones(k + 1))
    a_ub = (~within).astype(float).reshape(1, -1)
    result = linprog(
        c,
        A_ub=a_ub,
        b_ub=[alpha],
        A_eq=a_eq,
        b_eq=profile.weights,
        bounds=(0, None),
        method="highs",
    )
    if result.status != 0:
        raise SolverError(f"Coupling LP failed: {result.message}")
    return float(-result.fun)


def enumerate_replacements(
    oracle: LossOracle,
    x,
    samples,
    alpha: float,
    cap: int = ENUMERATION_CAP,
) -> float:
    """LP-DRO predictor for T equally weighted samples and integer alpha*T,
    as the best choice of alpha*T samples to replace by the worst case.

    Parameters
    ----------
    oracle: LossOracle
    x:
        Decision at which the losses are evaluated
    samples:
        The T samples, duplicates kept
    alpha: float
        Replaced fraction, alpha*T must be an integer
    cap: int
        Largest T enumerated
    """

    losses = oracle.inflated_losses(x, np.asarray(samples, dtype=float))
    worst_case = oracle.worst_case(x)
    t = losses.size
    if t > cap:
        raise ValueError(f"{t} samples exceed the enumeration cap of {cap}")

    replaced = alpha * t
    count = int(round(replaced))
    if abs(replaced - count) > 1e-9 or not 0 <= count <= t:
        raise ParameterError(f"alpha*T = {replaced} is not an integer in [0, T]")

    total = losses.sum()
    best = -np.inf
    for indices in itertools.combinations(range(t), count):
        kept = total - losses[list(indices)].sum()
        best = max(best, (kept + count * worst_case) / t)
    return float(best)
