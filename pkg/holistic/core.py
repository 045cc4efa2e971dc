from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12
CSV_FLOAT_FORMAT = "%.17g"


class DistributionError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


class ParameterError(ValueError):
    pass


def validate_weights(weights) -> np.ndarray:
    """Returns a read-only copy of `weights`, renormalized when its sum is
    within WEIGHT_TOLERANCE of one.

    Raises
    ------
    DistributionError
        If the vector is empty, negative, non-finite or does not sum to one
    """

    w = np.array(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DistributionError(
            f"Weights must be a nonempty vector, got shape {w.shape}"
        )
    if not np.all(np.isfinite(w)):
        raise DistributionError("Weights must be finite")
    if np.any(w < 0):
        raise DistributionError(f"Negative weight: {w.min()!r}")

    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        raise DistributionError(f"Weights sum to {total!r}, expected 1")

    w = w / total
    w.setflags(write=False)
    return w


def _frozen(values, dtype=float) -> np.ndarray:
    a = np.array(values, dtype=dtype)
    a.setflags(write=False)
    return a


def read_numeric_csv(
    path: Union[str, Path],
    error: type[ValueError] = DistributionError,
    required: Sequence[str] = (),
) -> pd.DataFrame:
    """Reads a CSV file with a header row into an all-float frame.

    Floats are parsed exactly, so a file written by `write_csv` reads back
    bit for bit.

    Raises
    ------
    error
        If the file can't be read, has no rows, lacks one of the `required`
        columns or holds a non-numeric, NaN or infinite value
    """

    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise error(f"Can't read {path}: {e}") from e

    missing = set(required) - set(frame.columns)
    if missing:
        raise error(f"Missing columns in {path}: {sorted(missing)}")
    if frame.empty:
        raise error(f"No rows in {path}")
    try:
        frame = frame.astype(float)
    except ValueError as e:
        raise error(f"Non-numeric value in {path}: {e}") from e
    if not np.all(np.isfinite(frame.to_numpy())):
        raise error(f"NaN or infinite value in {path}")
    return frame


def write_csv(path: Union[str, Path], columns: dict):
    """Writes equal-length columns under their names, floats with 17
    significant digits."""

    pd.DataFrame(columns).to_csv(
        path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
    )


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported probability measure.

    `atoms` holds one row per atom, either scalars or coordinate vectors.
    Zero-weight atoms are stored but never part of the support.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _frozen(self.atoms)
        if atoms.ndim == 0 or atoms.shape[0] == 0:
            raise DistributionError("A distribution needs at least one atom")

        weights = validate_weights(self.weights)
        if weights.shape[0] != atoms.shape[0]:
            raise DimensionMismatchError(
                f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
            )

        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_samples(cls, samples) -> DiscreteDistribution:
        """Empirical distribution, duplicate rows merged in order of first
        occurrence."""

        unique, counts = merge_duplicates(samples)
        return cls(unique, counts / counts.sum())

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws `size` i.i.d. atoms."""

        indices = rng.choice(self.size, size=size, p=self.weights)
        return self.atoms[indices]

    def expectation(self, values) -> float:
        values = np.asarray(values, dtype=float)
        if values.shape != self.weights.shape:
            raise DimensionMismatchError(
                f"Expected {self.size} values, got {values.shape}"
            )
        support = self.support
        return float(np.dot(self.weights[support], values[support]))

    def to_json(self) -> dict:
        return {
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json(cls, json) -> DiscreteDistribution:
        return cls(np.array(json["atoms"]), np.array(json["weights"]))

    def to_csv(self, path: Union[str, Path]):
        atoms = self.atoms.reshape(self.size, -1)
        columns = {"atom_id": np.arange(self.size), "weight": self.weights}
        columns.update({f"xi_{i}": atoms[:, i] for i in range(atoms.shape[1])})
        write_csv(path, columns)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> DiscreteDistribution:
        frame = read_numeric_csv(path, required=("atom_id", "weight"))
        frame = frame.sort_values("atom_id", kind="stable")
        columns = sorted(
            (c for c in frame.columns if c.startswith("xi_")),
            key=lambda c: int(c[3:]),
        )
        if not columns:
            raise DistributionError(f"No atom columns in {path}")
        atoms = frame[columns].to_numpy()
        if atoms.shape[1] == 1:
            atoms = atoms[:, 0]
        return cls(atoms, frame["weight"].to_numpy())


def merge_duplicates(samples) -> tuple[np.ndarray, np.ndarray]:
    """Unique sample rows in first-occurrence order and their counts."""

    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 0 or samples.shape[0] == 0:
        raise DistributionError("At least one sample is required")

    rows = samples.reshape(samples.shape[0], -1)
    _, first, counts = np.unique(
        rows, axis=0, return_index=True, return_counts=True
    )
    order = np.argsort(first, kind="stable")
    return samples[first[order]], counts[order].astype(float)


@dataclass(frozen=True, eq=False)
class LossProfile:
    """The reduced problem data every predictor consumes.

    Parameters
    ----------
    inflated_losses: np.ndarray
        Loss at each atom after the worst admissible noise
    base_losses: np.ndarray
        Loss at each atom as observed
    weights: np.ndarray
        Empirical probability of each atom
    worst_case: float
        Largest loss over the whole event set
    atoms: Optional[np.ndarray]
        Scenario coordinates, when the profile was built from data
    """

    inflated_losses: np.ndarray
    base_losses: np.ndarray
    weights: np.ndarray
    worst_case: float
    atoms: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        inflated = _frozen(self.inflated_losses)
        base = _frozen(self.base_losses)
        weights = validate_weights(self.weights)

        if inflated.ndim != 1 or inflated.shape != base.shape:
            raise DimensionMismatchError(
                f"Loss vectors of shapes {inflated.shape} and {base.shape}"
            )
        if inflated.shape != weights.shape:
            raise DimensionMismatchError(
                f"{inflated.shape[0]} losses but {weights.shape[0]} weights"
            )
        if not (np.all(np.isfinite(inflated)) and np.all(np.isfinite(base))):
            raise DistributionError("Losses must be finite")
        if not np.isfinite(self.worst_case):
            raise DistributionError("Worst-case loss must be finite")

        worst_case = float(self.worst_case)
        slack = 1e-9 * (1.0 + abs(worst_case))
        if np.any(base > inflated + slack):
            raise DistributionError("Base loss exceeds inflated loss")
        if np.any(inflated > worst_case + slack):
            raise DistributionError(
                "Inflated loss exceeds worst-case loss; "
                "samples outside the event set?"
            )

        object.__setattr__(self, "inflated_losses", inflated)
        object.__setattr__(self, "base_losses", base)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "worst_case", worst_case)
        if self.atoms is not None:
            atoms = _frozen(self.atoms)
            if atoms.shape[0] != weights.shape[0]:
                raise DimensionMismatchError(
                    f"{atoms.shape[0]} atoms but {weights.shape[0]} weights"
                )
            object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_losses(
        cls, losses, weights=None, worst_case: Optional[float] = None
    ) -> LossProfile:
        """Profile with base losses equal to inflated losses. Uniform weights
        and the maximum loss are used when not given."""

        losses = np.asarray(losses, dtype=float)
        if weights is None:
            weights = np.full(losses.shape, 1.0 / losses.size)
        if worst_case is None:
            worst_case = float(losses.max())
        return cls(losses, losses, weights, worst_case)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def to_json(self) -> dict:
        json = {
            "inflated_losses": self.inflated_losses.tolist(),
            "base_losses": self.base_losses.tolist(),
            "weights": self.weights.tolist(),
            "worst_case": self.worst_case,
        }
        if self.atoms is not None:
            json["atoms"] = self.atoms.tolist()
        return json

    @classmethod
    def from_json(cls, json) -> LossProfile:
        atoms = json.get("atoms")
        return cls(
            json["inflated_losses"],
            json["base_losses"],
            json["weights"],
            json["worst_case"],
            None if atoms is None else np.array(atoms),
        )

    def to_csv(self, path: Union[str, Path]):
        write_csv(
            path,
            {
                "atom_id": np.arange(self.size),
                "weight": self.weights,
                "base_loss": self.base_losses,
                "inflated_loss": self.inflated_losses,
            },
        )

    @classmethod
    def from_csv(
        cls, path: Union[str, Path], worst_case: Optional[float] = None
    ) -> LossProfile:
        """Reads the `atom_id, weight, base_loss, inflated_loss` layout.

        The worst-case loss is not part of the file; the largest inflated
        loss is used when `worst_case` is not given.
        """

        frame = read_numeric_csv(
            path,
            required=("atom_id", "weight", "base_loss", "inflated_loss"),
        ).sort_values("atom_id", kind="stable")
        inflated = frame["inflated_loss"].to_numpy()
        if worst_case is None:
            worst_case = float(inflated.max())
        return cls(
            inflated,
            frame["base_loss"].to_numpy(),
            frame["weight"].to_numpy(),
            worst_case,
        )


@dataclass(frozen=True)
class RobustnessParams:
    """Noise radius, support inflation, misspecification level and KL radius."""

    epsilon: float = 0.0
    epsilon_prime: Optional[float] = None
    alpha: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.epsilon_prime is None:
            object.__setattr__(self, "epsilon_prime", self.epsilon)

        if not self.epsilon >= 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.epsilon_prime >= self.epsilon:
            raise ParameterError(
                f"epsilon_prime ({self.epsilon_prime}) must be >= "
                f"epsilon ({self.epsilon})"
            )
        if not 0 <= self.alpha <= 1:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if not (self.r >= 0 and np.isfinite(self.r)):
            raise ParameterError(f"r must be finite and >= 0, got {self.r}")

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "epsilon_prime": self.epsilon_prime,
            "alpha": self.alpha,
            "r": self.r,
        }

    @classmethod
    def from_json(cls, json) -> RobustnessParams:
        return cls(
            json.get("epsilon", 0.0),
            json.get("epsilon_prime"),
            json.get("alpha", 0.0),
            json.get("r", 0.0),
        )


def _sorted_support(losses: np.ndarray, weights: np.ndarray):
    support = np.flatnonzero(weights > 0)
    order = support[np.argsort(losses[support], kind="stable")]
    return losses[order], weights[order]


def weighted_quantile(losses, weights, alpha: float) -> float:
    values, w = _sorted_support(
        np.asarray(losses, dtype=float), np.asarray(weights, dtype=float)
    )
    if alpha <= 0:
        return float(values[0])

    cumulative = np.cumsum(w)
    index = np.searchsorted(cumulative, alpha - WEIGHT_TOLERANCE, side="left")
    return float(values[min(index, values.size - 1)])


def quantile(profile: LossProfile, alpha: float) -> float:
    """Smallest inflated loss whose cumulative probability reaches `alpha`.

    `alpha=0` returns the smallest loss on the support.
    """

    return weighted_quantile(profile.inflated_losses, profile.weights, alpha)


def weighted_scaled_cvar(losses, weights, alpha: float) -> float:
    losses = np.asarray(losses, dtype=float)
    weights = np.asarray(weights, dtype=float)
    tau = weighted_quantile(losses, weights, alpha)

    support = weights > 0
    above = support & (losses > tau)
    at_or_below = support & (losses <= tau)
    return float(
        np.dot(weights[above], losses[above])
        + tau * (weights[at_or_below].sum() - alpha)
    )


def scaled_cvar(profile: LossProfile, alpha: float) -> float:
    """(1 - alpha) times the conditional value-at-risk of the inflated losses
    at level `alpha`, computed from sorted tail sums."""

    if not 0 <= alpha <= 1:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    return weighted_scaled_cvar(
        profile.inflated_losses, profile.weights, alpha
    )


def scaled_cvar_minimization(profile: LossProfile, alpha: float) -> float:
    """Same quantity as `scaled_cvar`, as the minimum over beta of
    beta (1 - alpha) + E[(c - beta)^+].

    The objective is piecewise linear with breakpoints at the losses, so the
    minimum is attained at one of them.
    """

    if not 0 <= alpha <= 1:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")

    support = profile.support
    losses = profile.inflated_losses[support]
    weights = profile.weights[support]
    excess = np.maximum(losses[None, :] - losses[:, None], 0.0)
    objective = losses * (1.0 - alpha) + excess @ weights
    return float(objective.min())


def _loss_vector(profile: LossProfile, inflated: bool) -> np.ndarray:
    return profile.inflated_losses if inflated else profile.base_losses


def mean(profile: LossProfile, inflated: bool = False) -> float:
    losses = _loss_vector(profile, inflated)
    support = profile.support
    return float(np.dot(profile.weights[support], losses[support]))


def variance(profile: LossProfile, inflated: bool = False) -> float:
    losses = _loss_vector(profile, inflated)
    support = profile.support
    centered = losses[support] - mean(profile, inflated)
    return float(np.dot(profile.weights[support], centered ** 2))
