"""Black-Scholes Hamiltonian laboratory.

Closed-form pricing kernel, finite-difference Hamiltonian, real and
continued-time evolution, and probability-flow diagnostics, with a
scenario-driven command line front end (``bsflow``).
"""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericError
from .market import MarketParams, PathEnsemble, deterministic_price, simulate_gbm, terminal_log_density
from .kernel import (
    KernelQuery,
    Quadrature,
    StationarityResult,
    center_shift,
    hermitian_kernel,
    kernel,
    kernel_mass,
    kernel_tau_derivative,
    semigroup_compose,
    stationarity_roots,
)
from .hamiltonian import DiscreteOperator, GridSpec, apply, build_operator, pde_residual, split_hermitian
from .evolution import (
    Field,
    PayoffSpec,
    closed_form_call,
    closed_form_put,
    evolve_imaginary_time,
    evolve_real_time,
    payoff_field,
    price_via_kernel,
)
from .probflow import (
    FlowReport,
    QmParams,
    continuity_residual,
    density,
    exponential_probability_fit,
    f_amplitude_sq,
    free_packet_baseline,
    hermitian_current,
    nonhermitian_density_rate,
    nonhermitian_flow,
    nonhermitian_total_rate,
    probability_budget,
)
