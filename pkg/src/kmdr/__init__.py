"""Distribution regression for right-censored duration data.

The estimator reweights per-threshold binary regressions by the jumps of
the product-limit estimator, so the coefficient path (and everything built
on it) stays consistent under random right censoring. On top of the path
the package provides average distribution marginal effects, their
per-observation linearization, multiplier-bootstrap pointwise and
simultaneous confidence bands, a proportional-hazards baseline for
comparison, and a replicated simulation harness. The ``kmdr`` command-line
tool exposes the same workflow on CSV files.
"""

from .cox import PhFit, cumulative_baseline, fit_ph, ph_adme, ph_cdf
from .errors import (
    DataValidationError,
    DegenerateGridError,
    EmptyInputError,
    FitFailedError,
    InputError,
    KmdrError,
    NumericalError,
    SchemaError,
    SingularMatrixError,
)
from .fit import (
    DrCoefficientPath,
    GridSpec,
    ThresholdFit,
    ThresholdGrid,
    build_grid,
    fit_path,
    fit_threshold,
    objective,
    objective_gradient,
    objective_hessian,
    predict_cdf,
)
from .inference import (
    AdmeBand,
    InfluenceSet,
    bootstrap_bands,
    compute_influence,
    estimate_adme,
    influence_adme,
    influence_theta,
)
from .kaplan_meier import (
    KaplanMeierWeights,
    km_cdf,
    km_cdf_many,
    km_multivariate,
    km_quantile,
    km_weights,
)
from .links import LINK_NAMES, LinkFamily, eval_link, fisher_kernel, get_link, score_kernel
from .sample import CensoredObservation, CensoredSample, OrderedSample, load_csv, order_sample
from .simulate import (
    DgpSpec,
    EstimatorMetrics,
    SimulationReport,
    calibrate_censoring,
    generate,
    population_grid,
    run_experiment,
    true_adme,
    true_cdf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
