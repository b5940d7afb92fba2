"""Online greedy algorithms for nonlinear load balancing, speed scaling and
energy-aware routing, with dual-fitting certificates and offline oracles."""

from .dual import CertificateReport, certify_run, dual_value, machine_dual_contribution
from .integer import (
    augmented_instance,
    check_key_inequality,
    greedy_assign_integer,
    integer_dual_bound,
)
from .model import (
    AssignmentState,
    DualCertificate,
    InvalidInstanceError,
    JobOption,
    JobSpec,
    OnGapInstance,
    Parameters,
    effective_delta,
    make_instance,
    validate_instance,
)
from .waterfill import marginal_rate, run_online_fractional, waterfill_allocate

__version__ = "0.1.0"
