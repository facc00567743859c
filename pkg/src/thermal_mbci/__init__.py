"""Multi-photon correlation interferometry with multi-mode thermal sources."""

from .correlators import (
    CorrelationResult,
    SourceConfiguration,
    build_interference_matrix,
    build_repeated_column_matrix,
    compute_gn,
    enumerate_configurations,
    g1,
    gn_configuration_sum,
    gn_equal_times,
    gn_equal_times_incoherent,
    gn_permanent_C,
    gn_permutation_sum,
    gn_uncorrelated_limit,
    verify_equal_rate_identities,
)
from .errors import ConfigError, DimensionError, SizeLimitError
from .linalg import (
    UnitarySpec,
    hadamard_product,
    is_positive_semidefinite,
    permanent_naive,
    permanent_ryser,
    random_unitary,
)
from .montecarlo import FrequencyGrid, McEstimate, estimate_gn
from .thermal import (
    DetectionEvent,
    SourceBank,
    ThermalInstance,
    build_A_matrix,
    build_C_matrix,
    build_chi_matrix,
    chi_function,
)

__version__ = "0.1.0"
