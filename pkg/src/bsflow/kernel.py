r"""Closed-form Black-Scholes pricing kernel in log-price.

The kernel propagates a payoff backward over time-to-maturity ``tau``:

.. math::

    p(x, \tau; x') = e^{-r\tau} \frac{1}{\sqrt{2\pi\tau\sigma^2}}
        \exp\left(-\frac{(x - x' + \tau(r - \sigma^2/2))^2}{2\tau\sigma^2}\right)

As a function of ``x'`` it is the risk-neutral transition density of
``ln S`` started at ``x``, scaled by the discount factor. As a function of
``x`` its peak sits at ``x' + tau (sigma^2/2 - r)``.

Quadratures integrate over the centre +/- ``n_sd`` standard deviations of
the Gaussian factor. With the default ``n_sd = 12`` the discarded tail mass
is ``erfc(12/sqrt(2)) ~ 1.8e-33`` of the total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericError
from .market import MarketParams

__all__ = [
    "Quadrature",
    "KernelQuery",
    "StationarityResult",
    "kernel",
    "hermitian_kernel",
    "center_shift",
    "kernel_mass",
    "semigroup_compose",
    "kernel_tau_derivative",
    "kernel_log_tau_derivative",
    "stationarity_roots",
    "asymptotic_root",
    "transition_cdf",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Quadrature:
    """Settings for the adaptive quadratures (``scipy.integrate.quad``)."""

    epsabs: float = 1e-13
    epsrel: float = 1e-12
    limit: int = 200
    n_sd: float = 12.0


DEFAULT_QUADRATURE = Quadrature()


@dataclass(frozen=True)
class KernelQuery:
    x: float
    x_prime: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.x_prime)):
            raise DomainError("x and x_prime must be finite")
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0 for pointwise evaluation, got {self.tau}")


@dataclass(frozen=True)
class StationarityResult:
    """Non-negative roots of dp/dtau = 0 at fixed separation ``d = x - x'``.

    ``limit_only`` marks the ``d == 0`` case whose single root ``tau = 0``
    is the delta-function limit and cannot be substituted back.
    """

    roots: list[float]
    regime: str
    discriminant: float
    d: float = 0.0
    limit_only: bool = False
    rejected: list[float] = field(default_factory=list)


def _check(params: MarketParams, tau) -> np.ndarray:
    params.require_volatility()
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise DomainError("tau must be > 0 (tau = 0 is the delta-function limit)")
    return tau


def _gaussian(z, var):
    return np.exp(-0.5 * z * z / var) / np.sqrt(2.0 * np.pi * var)


def kernel(params: MarketParams, x, x_prime, tau):
    """Evaluate the pricing kernel; broadcasts over array arguments."""
    tau = _check(params, tau)
    var = tau * params.sigma**2
    z = np.asarray(x) - np.asarray(x_prime) - tau * params.drift_gap
    out = np.exp(-params.r * tau) * _gaussian(z, var)
    return out[()] if out.ndim == 0 else out


def hermitian_kernel(params: MarketParams, x, x_prime, tau):
    """Kernel with the drift term removed: a Gaussian centred on ``x_prime``."""
    tau = _check(params, tau)
    var = tau * params.sigma**2
    z = np.asarray(x) - np.asarray(x_prime)
    out = np.exp(-params.r * tau) * _gaussian(z, var)
    return out[()] if out.ndim == 0 else out


def center_shift(params: MarketParams, tau: float) -> float:
    """Offset of the kernel's peak in ``x`` from ``x_prime``: tau (sigma^2/2 - r)."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    return tau * params.drift_gap


def _quad(func, lo, hi, points, quadrature: Quadrature, what: str) -> float:
    pts = sorted(p for p in points if lo < p < hi)
    value, err, info, *msg = integrate.quad(
        func,
        lo,
        hi,
        points=pts or None,
        epsabs=quadrature.epsabs,
        epsrel=quadrature.epsrel,
        limit=quadrature.limit,
        full_output=1,
    )
    if msg:
        raise NumericError(f"{what}: quadrature did not converge ({msg[0].strip()})", value, err)
    return value


def kernel_mass(
    params: MarketParams,
    x_prime: float,
    tau: float,
    quadrature: Quadrature = DEFAULT_QUADRATURE,
) -> float:
    """Integral of the kernel over ``x``; analytically ``exp(-r tau)``."""
    _check(params, tau)
    c = x_prime + center_shift(params, tau)
    sd = params.sigma * math.sqrt(tau)
    half = quadrature.n_sd * sd
    return _quad(lambda x: kernel(params, x, x_prime, tau), c - half, c + half, [c], quadrature, "kernel_mass")


def semigroup_compose(
    params: MarketParams,
    tau1: float,
    tau2: float,
    x: float,
    x_prime: float,
    quadrature: Quadrature = DEFAULT_QUADRATURE,
) -> float:
    """Integral over y of p(x, tau1; y) p(y, tau2; x_prime).

    The product of the two Gaussian factors in ``y`` is itself Gaussian;
    its centre and width set the integration window so that a very short
    ``tau2`` does not hide the peak from the adaptive rule.
    """
    _check(params, np.array([tau1, tau2]))
    a = -params.drift_gap
    c1, v1 = x + tau1 * a, tau1 * params.sigma**2
    c2, v2 = x_prime - tau2 * a, tau2 * params.sigma**2
    c = (c1 * v2 + c2 * v1) / (v1 + v2)
    sd = math.sqrt(v1 * v2 / (v1 + v2))
    half = quadrature.n_sd * sd

    def integrand(y):
        return kernel(params, x, y, tau1) * kernel(params, y, x_prime, tau2)

    return _quad(integrand, c - half, c + half, [c], quadrature, "semigroup_compose")


def kernel_log_tau_derivative(params: MarketParams, x, x_prime, tau):
    """``d ln p / d tau``; finite even where ``p`` itself underflows."""
    tau = _check(params, tau)
    s2 = params.sigma**2
    d = np.asarray(x) - np.asarray(x_prime)
    a = -params.drift_gap
    out = -params.r - 0.5 / tau - a * a / (2.0 * s2) + d * d / (2.0 * s2 * tau * tau)
    return out[()] if np.ndim(out) == 0 else out


def kernel_tau_derivative(params: MarketParams, x, x_prime, tau):
    """Analytic dp/dtau; the real-time derivative is its negative."""
    out = kernel(params, x, x_prime, tau) * kernel_log_tau_derivative(params, x, x_prime, tau)
    return out[()] if np.ndim(out) == 0 else out


def _regime(params: MarketParams) -> str:
    if params.linear_branch:
        return "r-eq-neg-half-sigma2"
    if params.r == 0:
        return "r-eq-zero"
    if params.is_hermitian:
        return "r-eq-half-sigma2"
    return "generic"


def stationarity_roots(params: MarketParams, d: float) -> StationarityResult:
    """Solve dp/dtau = 0 for tau >= 0 at separation ``d = x - x'``.

    With ``A = (r + sigma^2/2)^2`` the condition reduces to
    ``A tau^2 + sigma^2 tau - d^2 = 0``. The non-negative root is computed
    as ``2 d^2 / (sigma^2 + sqrt(disc))``, which stays accurate as ``A``
    goes to zero and reduces to the linear root ``d^2 / sigma^2`` there.
    """
    params.require_volatility()
    s2 = params.sigma**2
    lead = (params.r + 0.5 * s2) ** 2
    regime = _regime(params)
    if regime == "r-eq-neg-half-sigma2":
        lead = 0.0
    disc = s2 * s2 + 4.0 * lead * d * d
    if lead == 0.0:
        root = (d / params.sigma) ** 2
    else:
        root = 2.0 * d * d / (s2 + math.sqrt(disc))
    rejected = [] if lead == 0.0 else [(-s2 - math.sqrt(disc)) / (2.0 * lead)]
    return StationarityResult(
        roots=[root],
        regime=regime,
        discriminant=disc,
        d=d,
        limit_only=(d == 0),
        rejected=rejected,
    )


def asymptotic_root(params: MarketParams, d: float) -> float:
    """Large-|d| behaviour of the stationarity root: |d| / |r + sigma^2/2|.

    Gives 2|d|/sigma^2 at r = 0 and |d|/sigma^2 at r = sigma^2/2. Undefined
    (infinite) on the linear branch r = -sigma^2/2.
    """
    if params.linear_branch:
        return math.inf
    return abs(d) / abs(params.r + 0.5 * params.sigma**2)


def transition_cdf(
    params: MarketParams,
    x0: float,
    tau: float,
    n_nodes: int = 40001,
    n_sd: float = 12.0,
):
    """CDF in ``x'`` of the undiscounted kernel ``exp(r tau) p(x0, tau; x')``.

    Built by cumulative Simpson quadrature of the kernel on a fine grid and
    returned as a vectorised callable (linear interpolation between nodes).
    """
    _check(params, tau)
    c = x0 - tau * params.drift_gap
    half = n_sd * params.sigma * math.sqrt(tau)
    xs = np.linspace(c - half, c + half, n_nodes)
    dens = math.exp(params.r * tau) * kernel(params, x0, xs, tau)
    cum = integrate.cumulative_simpson(dens, x=xs, initial=0.0)

    def cdf(v):
        return np.interp(v, xs, cum, left=0.0, right=cum[-1])

    return cdf
