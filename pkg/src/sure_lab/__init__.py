"""SURE-tuned selection over linear smoother families in the Gaussian
sequence model, with Monte Carlo verification of exact per-replicate
identities and excess-degrees-of-freedom bounds."""

from .sequence_model import (
    GaussianSequenceModel,
    Observation,
    derive_stream,
    make_theta0,
    sample,
)
from .smoothers import (
    Smoother,
    SmootherFamily,
    family_from_doc,
    family_to_doc,
    from_matrix,
    knn_from_points,
    knn_opnorm_bound,
    krr_from_gram,
    load_family,
    operator_norm,
    projection_from_design,
    save_family,
)
from .criteria import (
    CenteredVariables,
    DegenerateFamilyError,
    SelectionReport,
    centered_variables,
    edf_bound,
    oracle_gap_bound,
    oracle_select,
    r_star,
    risk,
    shell_index,
    sure,
    sure_identity_residual,
    sure_select,
)
from .montecarlo import (
    MonteCarloSummary,
    ReplicateRecord,
    ShellDecayReport,
    records_to_csv,
    replicate,
    run_experiment,
    shell_decay_report,
    sure_unbiasedness_check,
)
from .concentration import (
    MgfCheck,
    SubExpParams,
    exact_quadratic_mgf,
    max_moment_bound,
    max_moment_bound_subexp,
    quadratic_form_params,
    quadratic_form_sampler,
    verify_max_moment,
    verify_mgf_bound,
)

__version__ = "0.1.0"
