"""exceedance-lab: spatio-temporal exceedance point processes over
regularly varying time series, verified numerically against closed-form
oracles.
"""

__version__ = "0.1.0"

from ._backend import active_backend, set_backend
from .models import (
    IID_FRECHET,
    SPATIAL_MAX_AR,
    ModelSpec,
    SeriesEnsemble,
    SpatioTemporalSeries,
    UnsupportedModelError,
    analytic_extremal_index,
    analytic_tail_path,
    iid_frechet,
    simulate_series,
    spatial_max_ar,
)
from .risk import (
    MarkFunctionalSpec,
    RiskBoundCertificate,
    RiskFunctionalSpec,
    argmax_risk,
    certify_risk_bound,
    coordinate_risk,
    eval_mark,
    eval_risk,
    sup_norm_risk,
    user_table_risk,
)
from .pointproc import (
    PointPattern,
    ScalingSequence,
    build_exceedance_pattern,
    compute_a_n,
    compute_scaling_sequence,
    max_over_window,
)
from .tailproc import (
    ClusterSample,
    EmpiricalPathEnsemble,
    ThetaEstimate,
    empirical_tail_path,
    extremal_index_blocks,
    extremal_index_mc,
    sample_cluster,
    sample_tail_path,
)
from .limit import (
    SuperpositionSample,
    sample_limit_process,
    superposition_to_pattern,
)
from .laplace import (
    LaplaceEstimate,
    TestFunction,
    block_conditional_laplace,
    empirical_laplace,
    limit_laplace_spectral,
    limit_laplace_tail,
    standard_test_functions,
    superposition_laplace,
    test_function,
    thresholded_g,
)
from .diagnostics import (
    ConditionReport,
    check_condition_AC,
    check_condition_M,
)
from .types import TailPath
