"""Stability certification for switched linear systems whose mode sequence
is driven by a stochastic graph.

The toolkit decides almost-sure stability by optimizing Lyapunov
multi-functions (one template function per graph node) over graph lifts
that refine the switching structure, and cross-checks every certificate
against an independent Monte Carlo estimate of the top Lyapunov exponent.
"""

__version__ = "0.1.0"

from .errors import (
    BadLabel,
    BadMatrix,
    DuplicateEdge,
    ExplosionLimit,
    GraphValidationError,
    LiftMismatch,
    MatrixLabelMismatch,
    NegativeEntries,
    NoConvergence,
    NonPositiveProbability,
    NotPositiveDefinite,
    NotStronglyConnected,
    RowSumViolation,
    SchemaError,
    SwitchcertError,
    UnknownNode,
)
from .graph import (
    Edge,
    GraphPath,
    LabelWord,
    NodeDistribution,
    StochasticGraph,
    all_words,
    as_fraction,
    cylinder_measure,
    enumerate_paths,
    invariant_measure,
    is_strongly_connected,
    node_word_measure,
    shift_preimage_measure,
    transition_matrix,
)
from .system import (
    SwitchedSystem,
    averaged_matrix,
    mean_square_matrix,
    mean_square_operator_radius,
    spectral_radius,
    word_product,
)
from .lifts import PathLift, StepLift, lift_distribution, path_lift, step_lift
from .templates import (
    CopositiveTemplate,
    LmfReport,
    QuadraticTemplate,
    check_lmf,
    induced_norm,
    template_from_parameters,
)
from .certify import (
    BoundEntry,
    BoundReport,
    Certificate,
    PatternSearchOptions,
    SubgradientOptions,
    copositive_bound,
    hierarchical_bound,
    quadratic_bound,
    verify_certificate,
)
from .montecarlo import (
    CylinderCheckRow,
    ExponentEstimate,
    SampledPath,
    empirical_cylinder_check,
    estimate_lyapunov_exponent,
    sample_path,
)
from .description import SystemDescription, describe_system, parse_system
from .report import AnalysisReport, emit_report, exit_code, run_certify
