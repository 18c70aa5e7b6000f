"""Learning as damped ODE mechanics.

Model weights evolve under damped linear constant-coefficient ODEs excited by
supervision impulses: each labeled example fires the loss gradient as a Dirac
impulse into every weight's dynamics.  The package synthesizes the closed-form
impulse response from characteristic roots, converts between physical operator
parameters and roots, checks Routh-Hurwitz stability, discretizes the forced
system exactly through matrix exponentials, and runs online training
experiments for a scalar linear unit and a small rectifier network.
"""

from .rootspace import (
    CLUSTER_TOL,
    CoefficientSet,
    NumericError,
    PolyCoeffs,
    RootSet,
    characteristic_poly,
    closed_form_on_grid,
    closed_form_response,
    expansion_terms,
    homogeneous_coefficients,
    homogeneous_eval,
    impulse_response_eval,
    partial_fraction_coefficients,
)
from .operators import (
    DesignSpec,
    DesignWarning,
    InfeasibleRootsError,
    OperatorParams,
    SecondOrderParameterization,
    StabilityCondition,
    StabilityReport,
    char_poly_first_order,
    char_poly_second_order,
    design_roots,
    params_from_roots_first_order,
    params_from_roots_second_order,
    poly_from_params,
    poly_roots,
    routh_hurwitz,
)
from .dynamics import (
    CompanionSystem,
    DynamicsEngine,
    StateBank,
    WeightState,
    build_engine,
    companion_system,
    engine_from_poly,
    matrix_exponential,
    step,
    weight_value,
)
from .models import MLP, LinearUnit, splitmix_uniform
from .streams import (
    StreamFormatError,
    TrainingEvent,
    TrainingStream,
    grid_set,
    ingest_csv,
    interval_classification,
    interval_sweep,
    trajectory_2d,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    Metrics,
    MetricsSnapshot,
    ModelSpec,
    Phase,
    RootEngineSpec,
    TraceLog,
    config_from_dict,
    evaluate,
    load_config,
    operator_poly,
    read_trace_csv,
    run_experiment,
)

__version__ = "0.1.0"
