from .core import (
    DimensionMismatchError,
    DiscreteDistribution,
    DistributionError,
    LossProfile,
    ParameterError,
    RobustnessParams,
    mean,
    quantile,
    scaled_cvar,
    variance,
)
from .decision import (
    FitResult,
    erm_fit,
    fit,
    ridge_fit,
    robust_fit,
    softmargin_fit,
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
)
from .predictors import (
    DualCertificate,
    PredictorKind,
    PredictorKindError,
    WorstCaseSolution,
    hd,
    hd_dual,
    hd_univariate,
    hr,
    hr_dual,
    kl_dro,
    lp_dro,
    predictor_family,
    saa,
    svp,
)
from .solvers import (
    SolverError,
    SubgradientConfig,
    minimize_lowdim,
    minimize_univariate,
    subgradient_descent,
)
from .transport import enumerate_replacements, lp_dro_bruteforce, rho
