import enum
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import click
import typer

from .core import (
    DiscreteDistribution,
    DistributionError,
    LossProfile,
    ParameterError,
    RobustnessParams,
)
from .decision import fit
from .experiments import (
    CorruptionMode,
    CorruptionSpec,
    MisspecificationRule,
    disappointment_rate,
)
from .losses import (
    ClassificationData,
    DataParseError,
    HingeOracle,
    L1RegressionOracle,
    LossKind,
    LossOracle,
    NewsvendorOracle,
    RegressionData,
    build_profile,
    read_demand_distribution,
    read_demands,
)
from .predictors import (
    PredictorKind,
    certify,
    predictor_family,
)
from .solvers import SolverError, SubgradientConfig

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

app = typer.Typer(help="Robust cost predictors and decisions")

logger = logging.getLogger(__name__)


class Command(enum.Enum):
    EVAL = "eval"
    FIT = "fit"
    SIMULATE = "simulate"


class CorruptionChoice(enum.Enum):
    NONE = "none"
    RANDOM = "random"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs.

    Parameters
    ----------
    command: Command
    data: Path
        Loss profile CSV for `eval` without `loss`, otherwise a dataset CSV
    loss: Optional[LossKind]
    kind: PredictorKind
    params: RobustnessParams
    out: Optional[Path]
        JSON output for eval and fit, CSV output for simulate
    decision: Optional[Tuple[float, ...]]
    worst_case: Optional[float]
        Worst-case loss of a profile CSV
    support: Optional[Tuple[float, float]]
        Newsvendor demand support, the range of the data by default
    corruption: Optional[CorruptionSpec]
    """

    command: Command
    data: Path
    loss: Optional[LossKind] = None
    kind: PredictorKind = PredictorKind.SAA
    params: RobustnessParams = RobustnessParams()
    out: Optional[Path] = None
    seed: int = 0
    decision: Optional[Tuple[float, ...]] = None
    worst_case: Optional[float] = None
    svp_penalty: float = 0.0
    b_cost: float = 1.0
    h_cost: float = 1.0
    support: Optional[Tuple[float, float]] = None
    solver: SubgradientConfig = field(default_factory=SubgradientConfig)
    trajectory: Optional[Path] = None
    trials: int = 100
    T: int = 100
    workers: int = 1
    corruption: Optional[CorruptionSpec] = None

    def __post_init__(self):
        if self.command is not Command.EVAL and self.loss is None:
            raise ParameterError(f"{self.command.value} needs --loss")
        if self.command is Command.SIMULATE:
            if self.decision is None or self.out is None:
                raise ParameterError("simulate needs --decision and --out")
            if self.trials < 1 or self.T < 1:
                raise ParameterError("--trials and --T must be positive")
        if (
            self.command is Command.EVAL
            and self.loss is not None
            and self.decision is None
        ):
            raise ParameterError("eval on a dataset needs --decision")
        if self.workers < 1:
            raise ParameterError("--workers must be positive")


def _parse_vector(text: Optional[str]) -> Optional[Tuple[float, ...]]:
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ParameterError(f"Expected comma separated numbers, got {text!r}")


def _support(
    lo: Optional[float], hi: Optional[float]
) -> Optional[Tuple[float, float]]:
    if lo is None and hi is None:
        return None
    if lo is None or hi is None:
        raise ParameterError("Give both --support-lo and --support-hi")
    return lo, hi


def _build_oracle(config: RunConfig) -> Tuple[LossOracle, object]:
    """Oracle for `config.loss` and the samples of the dataset."""

    params = config.params
    if config.loss is LossKind.NEWSVENDOR:
        demands = read_demands(config.data)
        support = config.support or (
            float(demands.min()),
            float(demands.max()),
        )
        oracle = NewsvendorOracle(
            config.b_cost,
            config.h_cost,
            support,
            params.epsilon,
            params.epsilon_prime,
        )
        return oracle, demands
    if config.loss is LossKind.HINGE:
        data = ClassificationData.from_csv(config.data)
        oracle = HingeOracle(data, params.epsilon, params.epsilon_prime)
        return oracle, data.samples

    data = RegressionData.from_csv(config.data)
    oracle = L1RegressionOracle(data, params.epsilon, params.epsilon_prime)
    return oracle, data.samples


def _ground_truth(config: RunConfig, samples) -> DiscreteDistribution:
    if config.loss is LossKind.NEWSVENDOR:
        return read_demand_distribution(config.data)
    return DiscreteDistribution.from_samples(samples)


def _write_json(json_: dict, out: Optional[Path]):
    text = json.dumps(json_, indent=2)
    if out is None:
        typer.echo(text)
        return
    with open(out, "w") as f:
        f.write(text + "\n")
    logger.info(f"Wrote {out}")


def _eval(config: RunConfig) -> int:
    if config.loss is None:
        profile = LossProfile.from_csv(config.data, config.worst_case)
    else:
        oracle, samples = _build_oracle(config)
        profile = build_profile(oracle, config.decision, samples)

    solution = predictor_family(
        profile, config.params, config.kind, config.svp_penalty
    )
    solution = certify(profile, config.params, config.kind, solution)
    _write_json(solution.to_json(), config.out)
    return EXIT_OK


def _fit(config: RunConfig) -> int:
    oracle, samples = _build_oracle(config)
    result = fit(
        oracle,
        samples,
        config.params,
        config.kind,
        config.solver,
        config.svp_penalty,
    )
    _write_json(result.to_json(), config.out)
    if config.trajectory is not None:
        result.write_trajectory(config.trajectory)

    if not result.converged:
        logger.warning("Subgradient descent did not converge")
        return EXIT_SOLVER
    return EXIT_OK


def _simulate(config: RunConfig) -> int:
    oracle, samples = _build_oracle(config)
    report = disappointment_rate(
        _ground_truth(config, samples),
        oracle,
        config.decision,
        config.kind,
        config.params,
        config.T,
        config.trials,
        config.seed,
        config.corruption,
        config.svp_penalty,
        config.workers,
    )
    report.to_csv(config.out)
    report.write_summary(config.out.with_suffix(".json"))
    logger.info(f"Wrote {config.out}")
    return EXIT_OK


COMMANDS = {
    Command.EVAL: _eval,
    Command.FIT: _fit,
    Command.SIMULATE: _simulate,
}


@contextmanager
def _exit_codes():
    """Turns library errors into exit codes."""

    try:
        yield
    except (DataParseError, DistributionError, OSError) as e:
        logger.error(e)
        raise typer.Exit(EXIT_DATA)
    except SolverError as e:
        logger.error(e)
        raise typer.Exit(EXIT_SOLVER)
    except ValueError as e:
        # ParameterError, PredictorKindError, DimensionMismatchError
        logger.error(e)
        raise typer.Exit(EXIT_CONFIG)


def execute(config: RunConfig) -> int:
    logger.debug(f"Running {config}")
    return COMMANDS[config.command](config)


def _params(
    epsilon: float, epsilon_prime: Optional[float], alpha: float, r: float
) -> RobustnessParams:
    return RobustnessParams(epsilon, epsilon_prime, alpha, r)


@app.callback()
def configure_logging():
    log_level = getattr(logging, os.environ.get("LOG_LEVEL", "info").upper())
    logging.basicConfig(level=log_level)


@app.command("eval")
def eval_(
    data: Path = typer.Option(..., help="Loss profile or dataset CSV"),
    predictor: PredictorKind = typer.Option(PredictorKind.SAA),
    loss: Optional[LossKind] = typer.Option(None),
    decision: Optional[str] = typer.Option(None, help="Comma separated"),
    worst_case: Optional[float] = typer.Option(None),
    epsilon: float = typer.Option(0.0),
    epsilon_prime: Optional[float] = typer.Option(None),
    alpha: float = typer.Option(0.0),
    r: float = typer.Option(0.0, "--r"),
    svp_penalty: float = typer.Option(0.0),
    b_cost: float = typer.Option(1.0),
    h_cost: float = typer.Option(1.0),
    support_lo: Optional[float] = typer.Option(None),
    support_hi: Optional[float] = typer.Option(None),
    out: Optional[Path] = typer.Option(None),
):
    """Evaluate a predictor on a loss profile, or on a dataset at a fixed
    decision."""

    with _exit_codes():
        code = execute(
            RunConfig(
                Command.EVAL,
                data,
                loss=loss,
                kind=predictor,
                params=_params(epsilon, epsilon_prime, alpha, r),
                out=out,
                decision=_parse_vector(decision),
                worst_case=worst_case,
                svp_penalty=svp_penalty,
                b_cost=b_cost,
                h_cost=h_cost,
                support=_support(support_lo, support_hi),
            )
        )
    raise typer.Exit(code)


@app.command("fit")
def fit_(
    loss: LossKind = typer.Option(...),
    data: Path = typer.Option(..., help="Dataset CSV"),
    predictor: PredictorKind = typer.Option(PredictorKind.SAA),
    epsilon: float = typer.Option(0.0),
    epsilon_prime: Optional[float] = typer.Option(None),
    alpha: float = typer.Option(0.0),
    r: float = typer.Option(0.0, "--r"),
    svp_penalty: float = typer.Option(0.0),
    b_cost: float = typer.Option(1.0),
    h_cost: float = typer.Option(1.0),
    support_lo: Optional[float] = typer.Option(None),
    support_hi: Optional[float] = typer.Option(None),
    max_iters: int = typer.Option(1000),
    step_scale: Optional[float] = typer.Option(None),
    trajectory: Optional[Path] = typer.Option(None, help="Objective CSV"),
    out: Optional[Path] = typer.Option(None),
):
    """Minimize a predictor over the decision."""

    with _exit_codes():
        code = execute(
            RunConfig(
                Command.FIT,
                data,
                loss=loss,
                kind=predictor,
                params=_params(epsilon, epsilon_prime, alpha, r),
                out=out,
                svp_penalty=svp_penalty,
                b_cost=b_cost,
                h_cost=h_cost,
                support=_support(support_lo, support_hi),
                solver=SubgradientConfig(max_iters, step_scale),
                trajectory=trajectory,
            )
        )
    raise typer.Exit(code)


@app.command("simulate")
def simulate(
    loss: LossKind = typer.Option(...),
    data: Path = typer.Option(..., help="Ground truth CSV"),
    decision: str = typer.Option(..., help="Comma separated"),
    out: Path = typer.Option(..., help="Per-trial CSV"),
    predictor: PredictorKind = typer.Option(PredictorKind.KL),
    epsilon: float = typer.Option(0.0),
    epsilon_prime: Optional[float] = typer.Option(None),
    alpha: float = typer.Option(0.0),
    r: float = typer.Option(0.0, "--r"),
    svp_penalty: float = typer.Option(0.0),
    b_cost: float = typer.Option(1.0),
    h_cost: float = typer.Option(1.0),
    support_lo: Optional[float] = typer.Option(None),
    support_hi: Optional[float] = typer.Option(None),
    trials: int = typer.Option(100),
    T: int = typer.Option(100, "--T"),
    seed: int = typer.Option(0),
    workers: int = typer.Option(1),
    corruption: CorruptionChoice = typer.Option(CorruptionChoice.NONE),
    corruption_epsilon: float = typer.Option(0.0),
    corruption_alpha: float = typer.Option(0.0),
    corruption_point: Optional[str] = typer.Option(None),
    corruption_rule: MisspecificationRule = typer.Option(
        MisspecificationRule.REPLACE_WITH_POINT
    ),
):
    """Monte-Carlo disappointment rate of a predictor at a fixed decision."""

    with _exit_codes():
        spec = None
        if corruption is not CorruptionChoice.NONE:
            spec = CorruptionSpec(
                CorruptionMode(corruption.value),
                corruption_epsilon,
                corruption_alpha,
                corruption_rule,
                _parse_vector(corruption_point),
                seed,
            )
        code = execute(
            RunConfig(
                Command.SIMULATE,
                data,
                loss=loss,
                kind=predictor,
                params=_params(epsilon, epsilon_prime, alpha, r),
                out=out,
                seed=seed,
                decision=_parse_vector(decision),
                svp_penalty=svp_penalty,
                b_cost=b_cost,
                h_cost=h_cost,
                support=_support(support_lo, support_hi),
                trials=trials,
                T=T,
                workers=workers,
                corruption=spec,
            )
        )
    raise typer.Exit(code)


def run(argv: Optional[List[str]] = None) -> int:
    """Runs the CLI on `argv` and returns the exit status."""

    try:
        result = app(
            args=argv, prog_name="holistic", standalone_mode=False
        )
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.Abort:
        return EXIT_CONFIG
    return result if isinstance(result, int) else EXIT_OK


def main():
    sys.exit(run(sys.argv[1:]))
