from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr, xlogy

from .core import (
    LossProfile,
    ParameterError,
    RobustnessParams,
    mean,
    variance,
)
from .solvers import (
    DEFAULT_TOLERANCE,
    SolverError,
    UnivariateResult,
    minimize_lowdim,
    minimize_univariate,
)

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-5
ABSOLUTE_FLOOR = 1e-9
# eta is kept this far (relative to the loss range) above the worst case
ETA_OFFSET = 1e-12
# the truncation search stays this far (relative to the loss range) below
# the worst case, where the inner problem no longer sees the losses
SATURATION_OFFSET = 1e-9
# tolerance of the truncation search, relative to the loss range
TRUNCATION_TOLERANCE = 1e-13


class PredictorKindError(ValueError):
    pass


class PredictorKind(enum.Enum):
    SAA = "saa"
    SVP = "svp"
    KL = "kl"
    LP = "lp"
    HR = "hr"
    HD = "hd"
    WINF = "winf"
    TV = "tv"


class LossBasis(enum.Enum):
    """Which loss vector the worst-case weights apply to."""

    INFLATED = "inflated"
    BASE = "base"


def values_close(
    a: float,
    b: float,
    rtol: float = RELATIVE_TOLERANCE,
    floor: float = ABSOLUTE_FLOOR,
) -> bool:
    return abs(a - b) <= max(rtol * max(abs(a), abs(b)), floor)


def _optional_array(values) -> Optional[np.ndarray]:
    return None if values is None else np.array(values, dtype=float)


@dataclass(frozen=True)
class DualCertificate:
    """Dual variables (lambda, beta, eta) and the dual objective there.

    By weak duality `dual_value` bounds the predictor from above.
    """

    lam: float
    beta: float
    eta: float
    dual_value: float

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "beta": self.beta,
            "eta": self.eta,
            "dual_value": self.dual_value,
        }

    @classmethod
    def from_json(cls, json) -> DualCertificate:
        return cls(json["lambda"], json["beta"], json["eta"], json["dual_value"])


@dataclass(frozen=True, eq=False)
class WorstCaseSolution:
    """Value of a predictor and the distribution attaining it.

    Parameters
    ----------
    value: float
    p_prime: np.ndarray
        Weights over the K atoms followed by the weight of the worst-case
        scenario
    q_weights: Optional[np.ndarray]
        Intermediate distribution over the same K + 1 slots, for the
        holistic predictors
    s: Optional[np.ndarray]
        Mass moved away from each atom by misspecification
    certificate: Optional[DualCertificate]
    loss_basis: LossBasis
        The variance-penalized predictor weighs base losses, with weights
        that may be negative; every other predictor weighs inflated losses
        with a probability vector
    """

    value: float
    p_prime: np.ndarray
    q_weights: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    certificate: Optional[DualCertificate] = None
    loss_basis: LossBasis = LossBasis.INFLATED

    def objective(self, profile: LossProfile) -> float:
        """Expected loss under `p_prime`."""

        losses = (
            profile.inflated_losses
            if self.loss_basis is LossBasis.INFLATED
            else profile.base_losses
        )
        return _expected_loss(losses, profile.worst_case, self.p_prime)

    def to_json(self) -> dict:
        json = {
            "value": self.value,
            "p_prime": self.p_prime.tolist(),
            "loss_basis": self.loss_basis.value,
        }
        if self.q_weights is not None:
            json["q_weights"] = self.q_weights.tolist()
        if self.s is not None:
            json["s"] = self.s.tolist()
        if self.certificate is not None:
            json["certificate"] = self.certificate.to_json()
        return json

    @classmethod
    def from_json(cls, json) -> WorstCaseSolution:
        certificate = json.get("certificate")
        return cls(
            json["value"],
            np.array(json["p_prime"], dtype=float),
            _optional_array(json.get("q_weights")),
            _optional_array(json.get("s")),
            None
            if certificate is None
            else DualCertificate.from_json(certificate),
            LossBasis(json.get("loss_basis", LossBasis.INFLATED.value)),
        )


def _expected_loss(
    losses: np.ndarray, worst_case: float, weights: np.ndarray
) -> float:
    return float(np.dot(weights[:-1], losses) + weights[-1] * worst_case)


def _check_alpha(alpha: float):
    if not 0 <= alpha <= 1:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")


def _check_radius(r: float, strict: bool = False):
    if strict and not r > 0:
        raise ParameterError(f"The dual representation needs r > 0, got {r}")
    if not (r >= 0 and math.isfinite(r)):
        raise ParameterError(f"r must be finite and >= 0, got {r}")


def saa(profile: LossProfile, use_inflated: bool = True) -> float:
    """Plug-in expectation of the (inflated) losses."""

    return mean(profile, inflated=use_inflated)


def svp(profile: LossProfile, penalty: float) -> float:
    """Sample mean plus `penalty` standard deviations of the base losses."""

    if not penalty >= 0:
        raise ParameterError(f"Penalty must be >= 0, got {penalty}")
    return mean(profile) + penalty * math.sqrt(variance(profile))


def _saa_solution(profile: LossProfile) -> WorstCaseSolution:
    p_prime = np.append(profile.weights, 0.0)
    return WorstCaseSolution(
        _expected_loss(profile.inflated_losses, profile.worst_case, p_prime),
        p_prime,
    )


def _svp_solution(profile: LossProfile, penalty: float) -> WorstCaseSolution:
    value = svp(profile, penalty)
    spread = math.sqrt(variance(profile))
    weights = profile.weights.copy()
    if spread > 0:
        # gradient of mean + penalty * std in the base losses
        centered = profile.base_losses - mean(profile)
        weights = weights * (1 + penalty * centered / spread)
    return WorstCaseSolution(
        value, np.append(weights, 0.0), loss_basis=LossBasis.BASE
    )


def _lp_weights(
    losses: np.ndarray, weights: np.ndarray, alpha: float
) -> np.ndarray:
    """Keeps the top (1 - alpha) mass of the losses and puts alpha on the
    worst-case slot. Ties keep the lower index first."""

    k = losses.shape[0]
    out = np.zeros(k + 1)
    if alpha <= 0:
        out[:k] = weights
        return out
    if alpha >= 1:
        out[k] = 1.0
        return out

    remaining = 1.0 - alpha
    for index in np.argsort(-losses, kind="stable"):
        if remaining <= 0:
            break
        take = min(weights[index], remaining)
        out[index] = take
        remaining -= take
    out[k] = alpha
    return out


def lp_dro(profile: LossProfile, alpha: float) -> WorstCaseSolution:
    """Worst case over distributions reachable by moving at most `alpha`
    mass beyond the noise set: scaled CVaR of the inflated losses plus
    alpha times the worst case."""

    _check_alpha(alpha)
    p_prime = _lp_weights(profile.inflated_losses, profile.weights, alpha)
    return WorstCaseSolution(
        _expected_loss(profile.inflated_losses, profile.worst_case, p_prime),
        p_prime,
        s=np.clip(profile.weights - p_prime[:-1], 0.0, None),
    )


@dataclass(frozen=True)
class _KLSolution:
    weights: np.ndarray
    lam: float
    eta: float
    dual_value: float


def _kl_dual(
    worst_case: float, gaps: np.ndarray, weights: np.ndarray, r: float, u: float
) -> float:
    """eta - exp(-r) exp(E log(eta - c)) at eta = worst_case + u, with
    gaps = worst_case - c over positive weights."""

    if u > 0:
        exponent = -r + float(np.dot(weights, np.log1p(gaps / u)))
        return worst_case - u * math.expm1(exponent)
    with np.errstate(divide="ignore"):
        exponent = -r + float(np.dot(weights, np.log(gaps)))
    return worst_case - math.exp(exponent)


def _kl_stationarity(gaps: np.ndarray, weights: np.ndarray, r: float, u: float):
    # minus the derivative of _kl_dual in u; nonincreasing
    with np.errstate(divide="ignore"):
        log_geometric = float(np.dot(weights, np.log(gaps + u)))
        harmonic = float(np.dot(weights, 1.0 / (gaps + u)))
    return math.exp(-r + log_geometric) * harmonic - 1.0


def _kl_solve(
    losses: np.ndarray, weights: np.ndarray, worst_case: float, r: float
) -> _KLSolution:
    """Worst case over distributions within KL radius `r` of `weights`,
    with the remaining mass allowed on an extra slot of loss `worst_case`.

    Minimizes the univariate dual by a root-find on its derivative and
    recovers the weights p'_k = lambda p_k / (eta - c_k).
    """

    k = losses.shape[0]
    out = np.zeros(k + 1)
    support = np.flatnonzero(weights > 0)
    p = weights[support]
    gaps = np.maximum(worst_case - losses[support], 0.0)

    if r == 0:
        out[:k] = weights
        value = float(np.dot(p, losses[support]))
        return _KLSolution(out, 0.0, math.inf, value)
    if gaps.max() <= 0:
        out[:k] = weights
        return _KLSolution(out, 0.0, worst_case, worst_case)

    scale = gaps.max()
    lower = 0.0 if gaps.min() > 0 else ETA_OFFSET * scale
    upper = float(np.dot(p, gaps)) / math.expm1(r)

    if _kl_stationarity(gaps, p, r, lower) <= 0:
        u = lower
    else:
        upper = max(upper, lower)
        for _ in range(200):
            if _kl_stationarity(gaps, p, r, upper) <= 0:
                break
            logger.debug(f"Expanding KL bracket beyond {upper}")
            upper *= 2
        else:
            raise SolverError("No sign change of the KL stationarity condition")
        u = brentq(
            lambda v: _kl_stationarity(gaps, p, r, v),
            lower,
            upper,
            xtol=1e-15 * scale,
            maxiter=500,
        )

    with np.errstate(divide="ignore"):
        lam = math.exp(-r + float(np.dot(p, np.log(gaps + u))))
    atom_weights = lam * p / (gaps + u)
    total = atom_weights.sum()
    if total > 1:
        atom_weights = atom_weights / total
        total = 1.0
    out[support] = atom_weights
    out[k] = 1.0 - total
    return _KLSolution(
        out, lam, worst_case + u, _kl_dual(worst_case, gaps, p, r, u)
    )


def kl_dro(profile: LossProfile, r: float) -> WorstCaseSolution:
    """Worst case over distributions within KL radius `r` of the empirical
    distribution, the worst-case scenario included in their support."""

    _check_radius(r)
    solution = _kl_solve(
        profile.inflated_losses, profile.weights, profile.worst_case, r
    )
    certificate = None
    if r > 0:
        certificate = DualCertificate(
            solution.lam, 0.0, solution.eta, solution.dual_value
        )
    return WorstCaseSolution(
        _expected_loss(
            profile.inflated_losses, profile.worst_case, solution.weights
        ),
        solution.weights,
        certificate=certificate,
    )


def _lp_profile(profile: LossProfile, alpha: float):
    """Losses and weights of the LP-DRO worst-case distribution, the worst
    case appended as an extra atom."""

    weights = _lp_weights(profile.inflated_losses, profile.weights, alpha)
    losses = np.append(profile.inflated_losses, profile.worst_case)
    return losses, weights


def hd(profile: LossProfile, alpha: float, r: float) -> WorstCaseSolution:
    """Holistic predictor against deterministic corruption: the KL worst case
    around the LP-DRO worst-case distribution."""

    _check_alpha(alpha)
    _check_radius(r)

    k = profile.size
    losses, q_hat = _lp_profile(profile, alpha)
    if r == 0:
        p_prime = q_hat.copy()
    else:
        solution = _kl_solve(losses, q_hat, profile.worst_case, r)
        p_prime = solution.weights[: k + 1].copy()
        p_prime[k] += solution.weights[k + 1]

    return WorstCaseSolution(
        _expected_loss(profile.inflated_losses, profile.worst_case, p_prime),
        p_prime,
        q_weights=q_hat,
        s=np.clip(profile.weights - q_hat[:k], 0.0, None),
    )


def univariate_bracket(
    profile: LossProfile, alpha: float, r: float
) -> Tuple[float, float]:
    """Interval of eta containing a minimizer of the univariate dual of the
    holistic predictor against deterministic corruption."""

    _check_alpha(alpha)
    _check_radius(r, strict=True)
    losses, weights = _lp_profile(profile, alpha)
    worst_case = profile.worst_case
    mean_gap = float(np.dot(weights, worst_case - losses))
    return worst_case, worst_case + max(mean_gap, 0.0) / math.expm1(r)


def hd_univariate(
    profile: LossProfile, alpha: float, r: float, tol: float = DEFAULT_TOLERANCE
) -> UnivariateResult:
    """Same value as `hd` by golden-section search on the univariate dual
    over eta; `argmin` is the minimizing eta."""

    lo, hi = univariate_bracket(profile, alpha, r)
    worst_case = profile.worst_case
    if hi <= lo:
        return UnivariateResult(worst_case, worst_case, 0)

    losses, weights = _lp_profile(profile, alpha)
    support = weights > 0
    gaps = np.maximum(worst_case - losses[support], 0.0)
    p = weights[support]
    result = minimize_univariate(
        lambda u: _kl_dual(worst_case, gaps, p, r, u), 0.0, hi - lo, tol
    )
    return UnivariateResult(lo + result.argmin, result.value, result.iterations)


def _perspective_log(lam: float, denominators: np.ndarray) -> np.ndarray:
    """lam * log(lam / denominators), zero at lam = 0."""

    if lam == 0:
        return np.zeros_like(denominators)
    with np.errstate(divide="ignore"):
        return xlogy(lam, lam / np.maximum(denominators, 0.0))


def hr_dual_objective(
    profile: LossProfile,
    alpha: float,
    r: float,
    lam: float,
    beta: float,
    eta: float,
) -> float:
    """Dual objective of the holistic predictor against random corruption at
    (lam, beta, eta); +inf outside the domain."""

    if lam < 0 or beta < 0 or eta < profile.worst_case:
        return math.inf
    support = profile.support
    p = profile.weights[support]
    w = np.maximum(
        _perspective_log(lam, eta - profile.inflated_losses[support]),
        _perspective_log(lam, np.full(p.shape, eta - profile.worst_case + beta)),
    )
    return float(np.dot(p, w) + lam * (r - 1) + beta * alpha + eta)


def _hd_dual_partial(
    profile: LossProfile, alpha: float, r: float, lam: float, eta: float
) -> Tuple[float, float]:
    """Minimum over beta of the deterministic-corruption dual objective at
    (lam, eta), and the minimizing beta.

    The objective is piecewise linear in beta with breakpoints b - a_k.
    """

    support = profile.support
    p = profile.weights[support]
    a = _perspective_log(lam, eta - profile.inflated_losses[support])
    b = float(_perspective_log(lam, np.array([eta - profile.worst_case]))[0])
    if not (np.all(np.isfinite(a)) and math.isfinite(b)):
        return math.inf, 0.0

    betas = np.append(0.0, np.maximum(b - a, 0.0))
    w = np.maximum(a[None, :], b - betas[:, None])
    objective = w @ p + alpha * betas
    best = int(np.argmin(objective))
    return float(objective[best] + lam * (r - 1) + eta), float(betas[best])


def hd_dual_objective(
    profile: LossProfile,
    alpha: float,
    r: float,
    lam: float,
    beta: float,
    eta: float,
) -> float:
    """Dual objective of the holistic predictor against deterministic
    corruption at (lam, beta, eta); +inf outside the domain."""

    if lam < 0 or beta < 0 or eta < profile.worst_case:
        return math.inf
    support = profile.support
    p = profile.weights[support]
    w = np.maximum(
        _perspective_log(lam, eta - profile.inflated_losses[support]),
        _perspective_log(lam, np.full(p.shape, eta - profile.worst_case))
        - beta,
    )
    return float(np.dot(p, w) + lam * (r - 1) + beta * alpha + eta)


def _loss_range(profile: LossProfile) -> float:
    return float(
        profile.worst_case - profile.inflated_losses[profile.support].min()
    )


def hd_dual(profile: LossProfile, alpha: float, r: float) -> DualCertificate:
    """Minimizes the three-variable dual of the deterministic-corruption
    predictor. beta is minimized exactly, (eta, lam) by nested golden
    sections with eta outermost."""

    _check_alpha(alpha)
    _check_radius(r, strict=True)

    worst_case = profile.worst_case
    spread = _loss_range(profile)
    if spread <= 0:
        return DualCertificate(0.0, 0.0, worst_case, worst_case)

    _, hi = univariate_bracket(profile, alpha, r)
    u_lo = ETA_OFFSET * spread
    u_hi = 2 * (hi - worst_case) + u_lo
    c_min = worst_case - spread
    decay = math.exp(-r)

    result = minimize_lowdim(
        lambda z: _hd_dual_partial(
            profile, alpha, r, z[1], worst_case + z[0]
        )[0],
        [
            (u_lo, u_hi),
            lambda prefix: (0.0, decay * (worst_case + prefix[0] - c_min)),
        ],
    )
    u, lam = result.argmin
    value, beta = _hd_dual_partial(profile, alpha, r, lam, worst_case + u)
    return DualCertificate(float(lam), beta, worst_case + float(u), value)


def hr_dual(profile: LossProfile, alpha: float, r: float) -> DualCertificate:
    """Minimizes the three-variable dual of the random-corruption predictor.

    lambda is eliminated in closed form, which leaves the KL dual of the
    losses max(c_k, worst_case - beta) plus alpha * beta; (beta, eta) are
    found by nested golden sections. beta never needs to exceed
    worst_case - min c.
    """

    _check_alpha(alpha)
    _check_radius(r, strict=True)

    worst_case = profile.worst_case
    spread = _loss_range(profile)
    if spread <= 0:
        return DualCertificate(0.0, 0.0, worst_case, worst_case)

    support = profile.support
    p = profile.weights[support]
    gaps = np.maximum(worst_case - profile.inflated_losses[support], 0.0)
    u_hi = float(np.dot(p, gaps)) / math.expm1(r)

    def objective(z: np.ndarray) -> float:
        beta, u = z
        return _kl_dual(worst_case, np.minimum(gaps, beta), p, r, u) + (
            alpha * beta
        )

    result = minimize_lowdim(objective, [(0.0, spread), (0.0, u_hi)])
    beta, u = (float(v) for v in result.argmin)
    with np.errstate(divide="ignore"):
        lam = math.exp(-r + float(np.dot(p, np.log(np.minimum(gaps, beta) + u))))
    return DualCertificate(lam, beta, worst_case + u, result.value)


def _move_lowest(
    q_prime: np.ndarray, losses: np.ndarray, alpha: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Moves up to `alpha` mass of `q_prime`, lowest losses first, onto the
    worst-case slot. Returns p' and the moved mass s."""

    k = losses.shape[0]
    s = np.zeros(k)
    budget = alpha
    for index in np.argsort(losses, kind="stable"):
        if budget <= 0:
            break
        take = min(q_prime[index], budget)
        s[index] = take
        budget -= take

    p_prime = q_prime.copy()
    p_prime[:k] -= s
    p_prime[k] += s.sum()
    return p_prime, s


def _saturated_hr(
    profile: LossProfile, alpha: float, r: float
) -> Optional[WorstCaseSolution]:
    """The solution of value worst_case, if some distribution within KL
    radius `r` puts at most `alpha` mass below the worst case.

    The closest such distribution scales the mass below the worst case down
    to alpha and the rest up to 1 - alpha, or onto the worst-case slot when
    no atom attains the worst case.
    """

    k = profile.size
    losses, weights = profile.inflated_losses, profile.weights
    below = (losses < profile.worst_case) & (weights > 0)
    mass_below = float(weights[below].sum())
    mass_rest = float(weights[~below].sum())

    q_prime = np.append(weights, 0.0)
    if mass_below > alpha:
        if alpha <= 0:
            return None
        divergence = float(
            rel_entr(mass_below, alpha) + rel_entr(mass_rest, 1 - alpha)
        )
        if divergence > r:
            return None
        q_prime[:k][below] *= alpha / mass_below
        if mass_rest > 0:
            q_prime[:k][~below] *= (1 - alpha) / mass_rest
        else:
            q_prime[k] = 1 - alpha

    logger.debug(f"Mass below the worst case fits into alpha={alpha}")
    p_prime, s = _move_lowest(q_prime, losses, alpha)
    return WorstCaseSolution(
        _expected_loss(losses, profile.worst_case, p_prime),
        p_prime,
        q_weights=q_prime,
        s=s,
    )


def hr(profile: LossProfile, alpha: float, r: float) -> WorstCaseSolution:
    """Holistic predictor against random corruption.

    Minimizes over the truncation level t the sum alpha (worst_case - t)
    plus the KL worst case of the losses max(c_k, t), then moves the alpha
    lowest-loss mass of the inner worst-case distribution onto the
    worst-case slot. The level t = worst_case is handled in closed form.
    """

    _check_alpha(alpha)
    _check_radius(r)
    if r == 0:
        solution = lp_dro(profile, alpha)
        q_prime = np.append(profile.weights, 0.0)
        return replace(solution, q_weights=q_prime)

    saturated = _saturated_hr(profile, alpha, r)
    if saturated is not None:
        return saturated

    losses = profile.inflated_losses
    worst_case = profile.worst_case
    c_min = float(losses[profile.support].min())
    upper = max(c_min, worst_case - SATURATION_OFFSET * (worst_case - c_min))

    def inner(level: float) -> _KLSolution:
        return _kl_solve(
            np.maximum(losses, level), profile.weights, worst_case, r
        )

    result = minimize_univariate(
        lambda level: alpha * (worst_case - level) + inner(level).dual_value,
        c_min,
        upper,
        TRUNCATION_TOLERANCE * max(worst_case - c_min, 1.0),
    )
    logger.debug(f"Truncation level {result.argmin} of [{c_min}, {worst_case}]")

    q_prime = inner(result.argmin).weights
    p_prime, s = _move_lowest(q_prime, losses, alpha)
    return WorstCaseSolution(
        _expected_loss(losses, worst_case, p_prime),
        p_prime,
        q_weights=q_prime,
        s=s,
    )


def kl_divergence(p, q) -> float:
    return float(np.sum(rel_entr(np.asarray(p), np.asarray(q))))


def constraint_violation(
    solution: WorstCaseSolution,
    profile: LossProfile,
    alpha: float,
    r: float,
    kind: PredictorKind,
) -> float:
    """Largest violation of the finite primal constraints of a holistic
    worst-case solution, including the match between value and weights."""

    k = profile.size
    p_prime, q, s = solution.p_prime, solution.q_weights, solution.s
    violations = [
        -p_prime.min(),
        abs(p_prime.sum() - 1),
        abs(solution.objective(profile) - solution.value),
        -q.min(),
        abs(q.sum() - 1),
        -s.min(),
        s.sum() - alpha,
    ]
    if kind is PredictorKind.HR:
        violations.append(kl_divergence(profile.weights, q[:k]) - r)
        violations.append(np.abs(q[:k] - p_prime[:k] - s).max())
    elif kind is PredictorKind.HD:
        violations.append(kl_divergence(q, p_prime) - r)
        violations.append(np.abs(q[:k] + s - profile.weights).max())
    else:
        raise PredictorKindError(f"No finite primal for {kind.value}")
    return float(max(violations))


def predictor_family(
    profile: LossProfile,
    params: RobustnessParams,
    kind: PredictorKind,
    svp_penalty: float = 0.0,
) -> WorstCaseSolution:
    """Evaluates the predictor `kind` on `profile`.

    `winf` is LP-DRO without misspecification, meaningful on profiles built
    with noise inflation. `tv` is LP-DRO with alpha as the total variation
    radius and requires a profile without noise inflation.
    """

    kind = PredictorKind(kind)
    if kind is PredictorKind.SAA:
        return _saa_solution(profile)
    if kind is PredictorKind.SVP:
        return _svp_solution(profile, svp_penalty)
    if kind is PredictorKind.KL:
        return kl_dro(profile, params.r)
    if kind is PredictorKind.LP:
        return lp_dro(profile, params.alpha)
    if kind is PredictorKind.HR:
        return hr(profile, params.alpha, params.r)
    if kind is PredictorKind.HD:
        return hd(profile, params.alpha, params.r)
    if kind is PredictorKind.WINF:
        return lp_dro(profile, 0.0)
    if kind is PredictorKind.TV:
        if not np.allclose(
            profile.inflated_losses, profile.base_losses, rtol=0, atol=1e-12
        ):
            raise PredictorKindError(
                "tv needs a profile without noise inflation (epsilon = 0)"
            )
        return lp_dro(profile, params.alpha)
    raise PredictorKindError(f"Unknown predictor kind: {kind}")


def certify(
    profile: LossProfile,
    params: RobustnessParams,
    kind: PredictorKind,
    solution: WorstCaseSolution,
) -> WorstCaseSolution:
    """Attaches a dual certificate to a holistic solution when r > 0.

    A certificate whose dual value falls below the primal value beyond
    `values_close` is still attached, with a warning.
    """

    kind = PredictorKind(kind)
    if params.r <= 0 or solution.certificate is not None:
        return solution
    if kind is PredictorKind.HR:
        certificate = hr_dual(profile, params.alpha, params.r)
    elif kind is PredictorKind.HD:
        certificate = hd_dual(profile, params.alpha, params.r)
    else:
        return solution

    if certificate.dual_value < solution.value and not values_close(
        certificate.dual_value, solution.value
    ):
        logger.warning(
            f"{kind.value}: dual value {certificate.dual_value} below primal "
            f"value {solution.value}"
        )
    return replace(solution, certificate=certificate)
