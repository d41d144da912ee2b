"""Thermodynamic quantities of rational graph-directed Markov systems."""

from .backward import (
    expansion_estimate,
    iter_leaf_batches,
    julia_cloud,
    preimage_tree,
    repelling_fixed_point,
    vsc_check,
)
from .exceptions import (
    BlowupError,
    BowenError,
    BudgetExceededError,
    ConvergenceError,
    GDMSError,
    HoleValidationError,
    NotIrreducibleError,
    PoleError,
    SystemParseError,
)
from .holes import (
    KOEBE_K,
    build_hole_family,
    hole_preimages,
    measure_bracket_report,
    postcritical_approx,
)
from .model import (
    GdmsSystem,
    build_system,
    check_irreducible,
    diagnose,
    load_system,
    parse_system,
    serialize_system,
)
from .poly import Polynomial, RationalMap, critical_points, preimages, roots
from .spectral import (
    canonical_weights,
    degree_matrix,
    entropy_identity_residual,
    perron,
    topological_entropy,
    vertex_stationary,
)
from .symbolic import count_words, enumerate_words, partition_deg, partition_deg_matrix, pressure_deg
from .thermo import bowen_parameter, decay_exponent, geom_partition, geom_pressure, pressure_function

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
