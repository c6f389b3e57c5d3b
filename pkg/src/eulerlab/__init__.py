"""eulerlab: a 2-D torus Euler solver with low-mode controls and a metric
entropy toolkit for comparing attainable sets with Holder balls."""

__version__ = "0.1.0"

from .errors import (
    CflViolation,
    DegenerateBasis,
    DegenerateFit,
    Divergence,
    EulerlabError,
    IntegerOrder,
    NonZeroMean,
    OutOfBall,
    OutOfRange,
)
from .fields import (
    HolderIndex,
    ScalarField2D,
    TorusGrid,
    VectorField2D,
    biot_savart,
    curl2d,
    derivative_stack,
    divergence,
    dyadic_separations,
    field_to_csv,
    grad_perp,
    gradient,
    holder_norm,
    inv_laplacian,
    leray_project,
    load_field,
    load_matrix,
    sample_holder_ball,
    save_field,
    save_matrix,
)
from .paths import (ConstantPath, FieldPath, PiecewiseConstantPath,
                    PiecewiseLinearPath, SmoothPath, ZeroPath)
from .solver import (
    FlowMap,
    SolutionTrajectory,
    SolverConfig,
    Triple,
    conserved_quantities,
    flow_map,
    recover_pressure,
    resolving_endpoint,
    solve,
    spectral_restrict,
    spectral_upsample,
)
from .control import (
    DEFAULT_WAVE_VECTORS,
    ControlPath,
    ControlSpace,
    PrimitivePath,
    composite_norm,
    control_from_csv,
    control_from_json,
    control_to_csv,
    control_to_json,
    endpoint_map,
    make_control_space,
    primitive,
    relaxation_norm,
    sample_Bm,
)
from .entropy import (
    EntropyCurve,
    MetricCloud,
    PiecewiseLinear1D,
    StepFunction1D,
    W11NetParams,
    brute_force_covering,
    brute_force_packing,
    entropy_curve,
    entropy_curve_to_csv,
    finite_dim_ball_entropy,
    greedy_packing,
    l1_distance,
    lipschitz_image_bound,
    sample_w11_ball,
    w11_net_params,
    w11_quantize,
)
from .experiments import (
    EntropyGapConfig,
    QuantizerConfig,
    StabilityConfig,
    ValidationConfig,
    config_from_dict,
    derived_seed,
    run_entropy_gap,
    run_quantizer,
    run_stability,
    run_validation,
)

__all__ = [
    "__version__",
    "EulerlabError", "NonZeroMean", "IntegerOrder", "DegenerateBasis",
    "CflViolation", "Divergence", "OutOfRange", "DegenerateFit", "OutOfBall",
    "TorusGrid", "ScalarField2D", "VectorField2D", "HolderIndex",
    "gradient", "divergence", "grad_perp", "curl2d", "inv_laplacian",
    "biot_savart", "leray_project", "holder_norm", "sample_holder_ball",
    "derivative_stack", "dyadic_separations", "save_field", "load_field", "save_matrix", "load_matrix",
    "field_to_csv",
    "FieldPath", "ZeroPath", "ConstantPath", "PiecewiseConstantPath",
    "PiecewiseLinearPath", "SmoothPath",
    "Triple", "SolverConfig", "SolutionTrajectory", "FlowMap",
    "solve", "resolving_endpoint", "flow_map", "recover_pressure",
    "conserved_quantities", "spectral_upsample", "spectral_restrict",
    "DEFAULT_WAVE_VECTORS", "ControlSpace", "ControlPath", "PrimitivePath",
    "make_control_space", "primitive", "relaxation_norm", "endpoint_map",
    "composite_norm", "sample_Bm", "control_to_csv", "control_from_csv",
    "control_to_json", "control_from_json",
    "MetricCloud", "EntropyCurve", "greedy_packing", "brute_force_packing",
    "brute_force_covering", "entropy_curve", "entropy_curve_to_csv",
    "PiecewiseLinear1D", "StepFunction1D", "W11NetParams", "w11_net_params",
    "w11_quantize", "sample_w11_ball", "l1_distance",
    "lipschitz_image_bound", "finite_dim_ball_entropy",
    "StabilityConfig", "EntropyGapConfig", "QuantizerConfig",
    "ValidationConfig", "run_stability", "run_entropy_gap", "run_quantizer",
    "run_validation", "config_from_dict", "derived_seed",
]
