"""Simulation and data-driven learning of fractional-order control-affine systems."""
__version__ = "0.1.0"

from .basis import BasisExpansion, BasisSpec, build_design_row, eval_basis, orthonormality_check
from .core import FractionalOrderVector, MemoryCoefficients, gl_difference, memory_sum, psi_coefficient, psi_table
from .exceptions import (
    DatasetError,
    DomainError,
    FracDynError,
    HistoryLengthError,
    IllPosedRegression,
    InconsistentData,
    InsufficientExcitation,
    ParameterError,
    SimulationDiverged,
    UsageError,
)
from .harness import ComparisonReport, ErrorReport, NoiseSpec, add_noise, compare_responses, field_error_surface
from .learn import (
    LCF,
    LDF,
    ExperimentDataset,
    ExperimentPlan,
    FractionalDynamicsLearner,
    LearnedModel,
    estimate_order,
    fit_control_field,
    fit_drift_field,
    generate_dataset,
    integer_order_baseline,
)
from .simulate import (
    SimulationConfig,
    Trajectory,
    reinitialize,
    simulate,
    simulate_continuous,
    simulate_discrete,
    step_continuous,
    step_discrete,
)
from .systems import (
    BENCHMARKS,
    BenchmarkSpec,
    ControlAffineSystem,
    get_benchmark,
    make_logistic_map,
    make_lotka_volterra,
    make_polynomial_system,
    make_ultra_capacitor,
    make_van_der_pol,
)
