"""Exponentially tilted distribution estimates and bootstrap tests for ranked set samples."""

__version__ = "0.1.0"

from .core import (
    NAMED_DESIGNS,
    Design,
    DistributionSpec,
    TiltWeights,
    UrssSample,
    WeightedDf,
    edf,
    eval_df,
)
from .errors import RssTiltError, TargetOutOfRange
from .resampling import BootstrapBatch, bootstrap_ear, bootstrap_eat, parametric_bootstrap
from .sampling import (
    MisrankMatrix,
    RngSeed,
    draw_finite_population_rss,
    draw_urss,
    draw_urss_imperfect,
    draw_urss_matrix,
)
from .stattests import (
    TestOutcome,
    baklizi_test,
    et_bootstrap_test,
    liu_el_test,
    parametric_bootstrap_test,
    percentile_ci_decision,
    pt_statistic,
    pt_test,
    wt_test,
)
from .tilting import (
    TiltProblem,
    ear_weights,
    eat_weights,
    et_df_ear,
    et_df_eat,
    et_variance,
    row_et_weights,
    solve_lambda,
)
