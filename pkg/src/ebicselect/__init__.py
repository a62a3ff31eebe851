"""Extended-BIC model selection for sparse GLMs and Ising graphs.

The package covers the full workflow: exponential-family likelihoods and
restricted MLE fits, an L1 solution path that generates candidate supports,
EBIC scoring with its matching combinatorial model prior, Laplace and
quadrature approximations of the model evidence, neighborhood-based Ising
graph estimation, empirical regularity diagnostics, and a deterministic
simulation harness with a CLI front end.
"""

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    EbicSelectError,
    EmptyAfterFiltering,
    EmptyCandidates,
    LengthMismatch,
    NotConverged,
    NumericalError,
    ParseError,
    QuadratureNotConverged,
    SelfNeighborhood,
    SeparationDetected,
    SingularHessian,
    UnconvergedFit,
    ValidationError,
)
from .families import (
    Dataset,
    Family,
    SupportSet,
    cumulant,
    cumulant_derivs,
    hessian,
    log_likelihood,
    score,
)
from .fitting import FitOptions, FittedModel, fit_mle, refit_candidates
from .lasso import (
    PathOptions,
    PathPoint,
    candidate_supports,
    kkt_residual,
    lasso_path,
    penalized_objective,
    rho_max,
)
from .criteria import (
    ModelScore,
    PriorSpec,
    cross_validate,
    ebic_score,
    log_model_prior,
    select_best,
    stability_selection,
)
from .evidence import (
    BayesScore,
    EquivalenceReport,
    GaussianPrior,
    QuadratureOptions,
    UniformBallPrior,
    equivalence_report,
    laplace_log_marginal,
    posterior_laplace_log_marginal,
    quadrature_log_marginal,
    region_decomposition,
)
from .ising import (
    GraphEstimate,
    GraphMetrics,
    IsingParameters,
    combine_graph,
    exact_distribution,
    gibbs_sample,
    graph_metrics,
    grid_graph,
    neighborhood_select,
    node_regression,
)
from .diagnostics import (
    WhpReport,
    hessian_spectrum_scan,
    mle_radius_check,
    quadratic_bound_check,
    score_bound_check,
    smoothed_selection_curve,
)
from .harness import (
    CsvLoadResult,
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    load_csv,
    make_permuted_design,
    report_from_json_bytes,
    report_to_json_bytes,
    run_consistency_sweep,
    run_equivalence_experiment,
    run_ising_experiment,
    run_regression_experiment,
    simulate_glm,
)

__version__ = "0.1.0"
