"""Detect and characterize extrapolation in multivariate-response regression.

The pipeline: fit a Bayesian multivariate linear model by Gibbs sampling,
turn the posterior draws into per-location predictive-variance measures
(MVPV and CMVPV), derive cutoffs from the observed locations, flag
extrapolations, and grow a classification tree describing where in
covariate space the flagged locations live.
"""

from extrapolmv.dataset import (
    Dataset,
    IngestConfig,
    RankDeficientError,
    StatusPartition,
    SynthSpec,
    TransformSpec,
    apply_transforms,
    invert_transforms,
    load_csv,
    partition_by_status,
    synthesize,
    write_csv,
)
from extrapolmv.diagnostics import (
    HighLeverageRule,
    LeverageReport,
    cooks_distance,
    hat_diagonal,
    high_leverage_set,
    ivh_contains,
    ivh_value,
    ivh_values,
    leverage_from_mahalanobis,
    leverage_report,
    mahalanobis_sq,
    write_leverage_csv,
)
from extrapolmv.sampler import (
    ConvergenceSummary,
    ModelSpec,
    PosteriorDraws,
    convergence_summary,
    ess,
    gibbs_fit,
    load_fit,
    posterior_predictive_draw,
    predictive_mean_draws,
    rhat,
    save_fit,
)
from extrapolmv.extrapolation import (
    CutoffSpec,
    ExtrapolationReport,
    PredictiveVariance,
    cmvpv,
    compute_cutoff,
    conditional_mvn,
    extrapolation_index,
    mvpv_logdet,
    mvpv_trace,
    predictive_variance,
    rmvpv,
    score_locations,
    score_locations_analytic,
    write_plotdata_csv,
    write_scores_csv,
)
from extrapolmv.cart import (
    TreeNode,
    TreeParams,
    export_tree,
    grow_tree,
    import_tree,
    predict_tree,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "IngestConfig",
    "RankDeficientError",
    "StatusPartition",
    "SynthSpec",
    "TransformSpec",
    "apply_transforms",
    "invert_transforms",
    "load_csv",
    "partition_by_status",
    "synthesize",
    "write_csv",
    "HighLeverageRule",
    "LeverageReport",
    "cooks_distance",
    "hat_diagonal",
    "high_leverage_set",
    "ivh_contains",
    "ivh_value",
    "ivh_values",
    "leverage_from_mahalanobis",
    "leverage_report",
    "mahalanobis_sq",
    "write_leverage_csv",
    "ConvergenceSummary",
    "ModelSpec",
    "PosteriorDraws",
    "convergence_summary",
    "ess",
    "gibbs_fit",
    "load_fit",
    "posterior_predictive_draw",
    "predictive_mean_draws",
    "rhat",
    "save_fit",
    "CutoffSpec",
    "ExtrapolationReport",
    "PredictiveVariance",
    "cmvpv",
    "compute_cutoff",
    "conditional_mvn",
    "extrapolation_index",
    "mvpv_logdet",
    "mvpv_trace",
    "predictive_variance",
    "rmvpv",
    "score_locations",
    "score_locations_analytic",
    "write_plotdata_csv",
    "write_scores_csv",
    "TreeNode",
    "TreeParams",
    "export_tree",
    "grow_tree",
    "import_tree",
    "predict_tree",
]
