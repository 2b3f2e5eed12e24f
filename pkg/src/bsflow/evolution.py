"""Time evolution of option values and wave-like fields.

Two directions of time are supported on the finite-difference grid:

* real time-to-maturity ``tau``:  dC/dtau = -H C, marched backward from
  the payoff with Crank-Nicolson (default) or implicit Euler;
* continued time ``mu`` (t -> -i mu):  dC/dmu = -i H C, marched with
  Crank-Nicolson. For a symmetric H this is the Cayley transform
  ``(I + i dmu H/2)^{-1} (I - i dmu H/2)``, which is unitary, so the
  discrete 2-norm is preserved to round-off.

Each step is one tridiagonal solve (``scipy.linalg.solve_banded``).
Prices computed from the closed-form kernel by quadrature and the standard
Black-Scholes formula serve as references for the grid solver.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import integrate, linalg, special

from .errors import DomainError, NumericError
from .hamiltonian import DiscreteOperator, GridSpec, build_operator
from .kernel import DEFAULT_QUADRATURE, Quadrature, _quad, kernel
from .market import MarketParams

__all__ = [
    "Field",
    "PayoffSpec",
    "payoff_field",
    "evolve_real_time",
    "real_time_snapshots",
    "price_via_kernel",
    "closed_form_call",
    "closed_form_put",
    "closed_form_digital",
    "gaussian_bump_price",
    "evolve_imaginary_time",
    "imaginary_time_snapshots",
    "step_operator",
    "SCHEMES",
]

SCHEMES = ("crank-nicolson", "implicit-euler")


@dataclass(frozen=True)
class Field:
    """Samples of a (possibly complex) function on a grid at one time.

    ``time_label`` is ``("tau", value)`` or ``("mu", value)``.
    """

    grid: GridSpec
    values: np.ndarray
    time_label: tuple[str, float] = ("tau", 0.0)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n,):
            raise DomainError(f"field needs {self.grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("field values must be finite")
        if self.time_label[0] not in ("tau", "mu", "t"):
            raise DomainError(f"unknown time label {self.time_label[0]!r}")
        object.__setattr__(self, "values", values)

    @property
    def time(self) -> float:
        return self.time_label[1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(self.values.imag)

    def with_values(self, values, time_label=None) -> "Field":
        return Field(self.grid, values, self.time_label if time_label is None else time_label)

    def norm_sq(self) -> float:
        """Trapezoid-rule integral of |C|^2 over the grid."""
        return float(integrate.trapezoid(np.abs(self.values) ** 2, dx=self.grid.dx))

    @classmethod
    def from_function(cls, grid: GridSpec, func, time_label=("tau", 0.0)) -> "Field":
        return cls(grid, func(grid.x), time_label)


@dataclass(frozen=True)
class PayoffSpec:
    """Terminal payoff as a function of log-price.

    ``call``/``put``/``digital`` use ``strike`` (a price). ``digital`` pays 1
    above the strike, or below it when ``below=True``. ``gaussian-bump``
    is ``amplitude * exp(-(x - center)^2 / (2 width^2))`` in log-price.
    """

    kind: str
    strike: float | None = None
    center: float = 0.0
    width: float | None = None
    amplitude: float = 1.0
    below: bool = False

    def __post_init__(self):
        if self.kind in ("call", "put", "digital"):
            if self.strike is None or not self.strike > 0:
                raise DomainError(f"{self.kind} payoff needs strike > 0")
        elif self.kind == "gaussian-bump":
            if self.width is None or not self.width > 0:
                raise DomainError("gaussian-bump payoff needs width > 0")
        else:
            raise DomainError(f"unknown payoff kind {self.kind!r}")

    @property
    def kink(self) -> float | None:
        """Log-strike, where the payoff is not smooth (None for the bump)."""
        return None if self.kind == "gaussian-bump" else math.log(self.strike)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "call":
            return np.maximum(np.exp(x) - self.strike, 0.0)
        if self.kind == "put":
            return np.maximum(self.strike - np.exp(x), 0.0)
        if self.kind == "digital":
            above = x > self.kink
            return np.where(~above if self.below else above, 1.0, 0.0)
        return self.amplitude * np.exp(-0.5 * ((x - self.center) / self.width) ** 2)


def payoff_field(payoff: PayoffSpec, grid: GridSpec) -> Field:
    return Field(grid, payoff(grid.x), ("tau", 0.0))


def _operator(field: Field, params: MarketParams, operator, boundary_mode) -> DiscreteOperator:
    if operator is not None:
        if operator.grid != field.grid:
            raise DomainError("operator and field are defined on different grids")
        return operator
    return build_operator(field.grid, params, boundary_mode)


def step_operator(op: DiscreteOperator, dt: complex, theta: float = 0.5):
    """Return a function advancing ``v`` one step of dv/ds = -k H v.

    ``dt`` carries the factor ``k`` (``dt = dtau`` for real time,
    ``dt = 1j * dmu`` for continued time). ``theta = 0.5`` gives
    Crank-Nicolson, ``theta = 1`` implicit Euler.
    """
    ab = op.to_banded().astype(np.result_type(float, dt))
    lhs = theta * dt * ab
    lhs[1] += 1.0
    explicit = (1.0 - theta) * dt

    def step(v):
        rhs = v - explicit * op.matvec(v) if explicit else v
        out = linalg.solve_banded((1, 1), lhs, rhs, check_finite=False)
        if not np.all(np.isfinite(out)):
            raise NumericError("tridiagonal solve produced non-finite values")
        return out

    return step


def _march(field, op, total, n_steps, scale, theta, label) -> Iterator[Field]:
    h = total / n_steps
    step = step_operator(op, scale * h, theta)
    v = np.asarray(field.values, dtype=np.result_type(field.values, scale))
    start = field.time
    yield field.with_values(v, (label, start))
    for k in range(1, n_steps + 1):
        v = step(v)
        yield field.with_values(v, (label, start + k * h))


def _theta(scheme: str) -> float:
    if scheme == "crank-nicolson":
        return 0.5
    if scheme == "implicit-euler":
        return 1.0
    raise DomainError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def real_time_snapshots(
    payoff_field: Field,
    params: MarketParams,
    tau_target: float,
    n_steps: int,
    scheme: str = "crank-nicolson",
    boundary_mode: str = "dirichlet-zero",
    operator: DiscreteOperator | None = None,
    every: int = 1,
) -> list[Field]:
    """All intermediate fields of :func:`evolve_real_time` (every ``every``
    steps, always including both ends)."""
    if not tau_target > 0 or n_steps < 1:
        raise DomainError("need tau_target > 0 and n_steps >= 1")
    if payoff_field.time_label[0] != "tau" or not payoff_field.is_real:
        raise DomainError("real-time evolution starts from a real field at tau")
    op = _operator(payoff_field, params, operator, boundary_mode)
    out = []
    for k, f in enumerate(_march(payoff_field, op, tau_target, n_steps, 1.0, _theta(scheme), "tau")):
        if k % every == 0 or k == n_steps:
            out.append(f)
    return out


def evolve_real_time(
    payoff_field: Field,
    params: MarketParams,
    tau_target: float,
    n_steps: int,
    scheme: str = "crank-nicolson",
    boundary_mode: str = "dirichlet-zero",
    operator: DiscreteOperator | None = None,
) -> Field:
    """March dC/dtau = -H C from the payoff to ``tau_target``."""
    if not tau_target > 0 or n_steps < 1:
        raise DomainError("need tau_target > 0 and n_steps >= 1")
    if payoff_field.time_label[0] != "tau" or not payoff_field.is_real:
        raise DomainError("real-time evolution starts from a real field at tau")
    op = _operator(payoff_field, params, operator, boundary_mode)
    for f in _march(payoff_field, op, tau_target, n_steps, 1.0, _theta(scheme), "tau"):
        pass
    return f


def imaginary_time_snapshots(
    initial: Field,
    params: MarketParams,
    mu_target: float,
    n_steps: int,
    boundary_mode: str = "dirichlet-zero",
    operator: DiscreteOperator | None = None,
    every: int = 1,
) -> list[Field]:
    if not mu_target > 0 or n_steps < 1:
        raise DomainError("need mu_target > 0 and n_steps >= 1")
    op = _operator(initial, params, operator, boundary_mode)
    start = initial.with_values(initial.values.astype(complex), ("mu", initial.time if initial.time_label[0] == "mu" else 0.0))
    out = []
    for k, f in enumerate(_march(start, op, mu_target, n_steps, 1j, 0.5, "mu")):
        if k % every == 0 or k == n_steps:
            out.append(f)
    return out


def evolve_imaginary_time(
    initial: Field,
    params: MarketParams,
    mu_target: float,
    n_steps: int,
    boundary_mode: str = "dirichlet-zero",
    operator: DiscreteOperator | None = None,
) -> Field:
    """March dC/dmu = -i H C with Crank-Nicolson (Cayley form)."""
    return imaginary_time_snapshots(initial, params, mu_target, n_steps, boundary_mode, operator, every=n_steps)[-1]


def price_via_kernel(
    payoff: PayoffSpec,
    params: MarketParams,
    tau: float,
    x_eval: float,
    quadrature: Quadrature = DEFAULT_QUADRATURE,
) -> float:
    """Integral over x' of kernel(x_eval, tau; x') * payoff(x').

    The window is the kernel's Gaussian factor +/- ``n_sd`` widths (widened
    on the upper side for calls by the exponential tilt sigma^2 tau). For
    call, put and digital payoffs the log-strike is an integration endpoint,
    so the integrand is smooth on every piece.
    """
    if not tau > 0:
        raise DomainError("tau must be > 0")
    params.require_volatility()
    sd = params.sigma * math.sqrt(tau)
    c = x_eval - tau * params.drift_gap
    lo, hi = c - quadrature.n_sd * sd, c + quadrature.n_sd * sd

    def integrand(xp):
        return kernel(params, x_eval, xp, tau) * payoff(xp)

    k = payoff.kink
    if payoff.kind == "call" or (payoff.kind == "digital" and not payoff.below):
        if payoff.kind == "call":
            hi += params.sigma**2 * tau
        lo = max(lo, k)
    elif payoff.kind == "put" or payoff.kind == "digital":
        hi = min(hi, k)
    if lo >= hi:
        return 0.0
    return _quad(integrand, lo, hi, [c], quadrature, "price_via_kernel")


def closed_form_call(params: MarketParams, spot: float, strike: float, tau: float) -> float:
    """Black-Scholes European call."""
    if not (spot > 0 and strike > 0 and tau > 0):
        raise DomainError("spot, strike and tau must be > 0")
    vol = params.sigma * math.sqrt(tau)
    disc = strike * math.exp(-params.r * tau)
    if vol == 0:
        return max(spot - disc, 0.0)
    d1 = (math.log(spot / strike) + (params.r + 0.5 * params.sigma**2) * tau) / vol
    d2 = d1 - vol
    return float(spot * special.ndtr(d1) - disc * special.ndtr(d2))


def closed_form_put(params: MarketParams, spot: float, strike: float, tau: float) -> float:
    """European put from put-call parity."""
    return closed_form_call(params, spot, strike, tau) - spot + strike * math.exp(-params.r * tau)


def gaussian_bump_price(payoff: PayoffSpec, params: MarketParams, tau: float, x_eval) -> np.ndarray:
    """Exact value of a Gaussian-bump claim (Gaussian-Gaussian convolution)."""
    if payoff.kind != "gaussian-bump":
        raise DomainError("gaussian_bump_price needs a gaussian-bump payoff")
    var = params.sigma**2 * tau + payoff.width**2
    z = np.asarray(x_eval) - tau * params.drift_gap - payoff.center
    return payoff.amplitude * math.exp(-params.r * tau) * payoff.width / np.sqrt(var) * np.exp(-0.5 * z * z / var)


def closed_form_digital(params: MarketParams, spot: float, strike: float, tau: float, below: bool = False) -> float:
    """Cash-or-nothing digital paying 1 above (or below) the strike."""
    if not (spot > 0 and strike > 0 and tau > 0):
        raise DomainError("spot, strike and tau must be > 0")
    vol = params.require_volatility().sigma * math.sqrt(tau)
    d2 = (math.log(spot / strike) + (params.r - 0.5 * params.sigma**2) * tau) / vol
    return float(math.exp(-params.r * tau) * special.ndtr(-d2 if below else d2))
