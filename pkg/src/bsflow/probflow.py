"""Probability-flow diagnostics for option values and wavefunctions.

Density is ``rho = |C|^2`` and every spatial derivative uses the same
central stencils as :mod:`bsflow.hamiltonian` (ghost value 0 beyond the
grid), so residuals measure modelling error rather than stencil mismatch.

Two readings of several balance laws are kept side by side:

* the real-time probability budget with bulk coefficient ``2`` as it is
  usually quoted (``"paper-2"``) and ``2 r`` as it follows from
  ``d rho/dt = 2 C H C`` (``"derived-2r"``);
* the non-Hermitian part of the continued-time density rate, in the quoted
  form ``a (C*' C + C* C')`` (``"printed"``) and in the form
  ``-i a (C* C' - C*' C) = 2 a Im(C* C')`` obtained from
  ``dC/dmu = -i H C`` (``"derived"``), with ``a = sigma^2/2 - r``.

Neither is silently preferred; reports carry both.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError
from .evolution import Field
from .hamiltonian import GridSpec, first_difference, second_difference
from .market import MarketParams

__all__ = [
    "QmParams",
    "FlowReport",
    "BUDGET_COEFFICIENTS",
    "density",
    "total_probability",
    "probability_current",
    "hermitian_current",
    "qm_current",
    "continuity_residual",
    "continuity_residual_profile",
    "measured_nonhermitian_rate",
    "budget_terms",
    "probability_budget",
    "exponential_probability_fit",
    "nonhermitian_flow",
    "f_amplitude_sq",
    "nonhermitian_density_rate",
    "nonhermitian_total_rate",
    "free_packet_baseline",
    "free_packet_current",
]

BUDGET_COEFFICIENTS = ("paper-2", "derived-2r")


@dataclass(frozen=True)
class QmParams:
    hbar: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.m > 0):
            raise DomainError("hbar and m must be > 0")


@dataclass
class FlowReport:
    """Probability budget evaluated at one snapshot.

    ``residuals`` holds ``|dP/dt measured - budget|`` for both bulk
    coefficients; ``residual`` repeats the one for ``coefficient``.
    """

    P: float
    time: float
    coefficient: str
    budget_terms: dict[str, float]
    dP_dt_measured: float
    residual: float
    residuals: dict[str, float]
    current_profile: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["current_profile"] = [float(v) for v in self.current_profile]
        return out


def density(f: Field) -> np.ndarray:
    v = f.values
    if not np.iscomplexobj(v):
        return v * v
    return v.real**2 + v.imag**2


def total_probability(f: Field) -> float:
    return float(integrate.trapezoid(density(f), dx=f.grid.dx))


def probability_current(f: Field, prefactor: float) -> np.ndarray:
    """``-i * prefactor * (C* C' - C*' C)``, which is real."""
    c = np.asarray(f.values, dtype=complex)
    dc = first_difference(c, f.grid.dx)
    z = np.conj(c) * dc
    return (-1j * prefactor * (z - np.conj(z))).real


def hermitian_current(f: Field, params: MarketParams) -> np.ndarray:
    """Current of the diffusive part: prefactor sigma^2/2."""
    return probability_current(f, 0.5 * params.sigma**2)


def qm_current(f: Field, qm: QmParams) -> np.ndarray:
    """Schroedinger current with prefactor hbar / (2 m)."""
    return probability_current(f, qm.hbar / (2 * qm.m))


def _check_snapshots(snapshots: Sequence[Field]) -> float:
    if len(snapshots) < 3:
        raise DomainError("need at least 3 snapshots")
    grid = snapshots[0].grid
    if any(s.grid != grid for s in snapshots):
        raise DomainError("snapshots are defined on different grids")
    times = np.array([s.time for s in snapshots])
    steps = np.diff(times)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise DomainError("snapshots must be equally spaced in time and ordered")
    return float(steps[0])


def _current_for(mode: str, f: Field, params):
    if mode == "bs-mu":
        if not isinstance(params, MarketParams):
            raise DomainError("mode bs-mu needs MarketParams")
        return hermitian_current(f, params)
    if mode == "qm-t":
        if not isinstance(params, QmParams):
            raise DomainError("mode qm-t needs QmParams")
        return qm_current(f, params)
    raise DomainError(f"unknown mode {mode!r}")


def continuity_residual_profile(snapshots: Sequence[Field], params, mode: str, k: int) -> np.ndarray:
    """Pointwise ``d rho/dt + d j/dx`` at snapshot ``k`` (central in both)."""
    dt = _check_snapshots(snapshots)
    if not 0 < k < len(snapshots) - 1:
        raise DomainError("k must have a neighbour on each side")
    drho = (density(snapshots[k + 1]) - density(snapshots[k - 1])) / (2 * dt)
    j = _current_for(mode, snapshots[k], params)
    return drho + first_difference(j, snapshots[k].grid.dx)


def continuity_residual(snapshots: Sequence[Field], params, mode: str = "bs-mu", edge: int = 2) -> float:
    """Max-norm of the Hermitian continuity residual.

    Evaluated for every snapshot with a neighbour on each side and over
    all nodes except ``edge`` at each end of the grid.
    """
    worst = 0.0
    for k in range(1, len(snapshots) - 1):
        res = continuity_residual_profile(snapshots, params, mode, k)
        worst = max(worst, float(np.max(np.abs(res[edge:-edge]))))
    return worst


def measured_nonhermitian_rate(snapshots: Sequence[Field], params: MarketParams, k: int) -> np.ndarray:
    """What remains of the measured d rho/dmu after the Hermitian flow.

    This is the continuity residual of the ``bs-mu`` mode, i.e. the
    non-Hermitian part of the density rate as the evolution realises it.
    """
    return continuity_residual_profile(snapshots, params, "bs-mu", k)


def nonhermitian_flow(f: Field, params: MarketParams, form: str = "printed") -> np.ndarray:
    """Non-Hermitian contribution to d rho/dmu.

    ``form="printed"``: ``a (C*' C + C* C')`` = ``a d|C|^2/dx``.
    ``form="derived"``: ``-i a (C* C' - C*' C)`` = ``2 a Im(C* C')``.
    """
    a = params.drift_gap
    c = np.asarray(f.values, dtype=complex)
    dc = first_difference(c, f.grid.dx)
    z = np.conj(c) * dc
    if form == "printed":
        return (a * (np.conj(dc) * c + z)).real
    if form == "derived":
        return (-1j * a * (z - np.conj(z))).real
    raise DomainError(f"unknown form {form!r}; expected 'printed' or 'derived'")


def _bulk_coefficient(coefficient: str, params: MarketParams) -> float:
    if coefficient == "paper-2":
        return 2.0
    if coefficient == "derived-2r":
        return 2.0 * params.r
    raise DomainError(f"unknown budget coefficient {coefficient!r}; expected one of {BUDGET_COEFFICIENTS}")


def budget_terms(f: Field, params: MarketParams, coefficient: str = "derived-2r") -> dict[str, float]:
    """Right-hand side of the real-time budget for dP/dt, term by term."""
    c = np.asarray(f.values)
    if np.iscomplexobj(c):
        if np.any(c.imag):
            raise DomainError("the real-time budget is defined for real fields")
        c = c.real
    dx = f.grid.dx
    P = float(integrate.trapezoid(c * c, dx=dx))
    d2 = second_difference(c, dx)
    return {
        "bulk": _bulk_coefficient(coefficient, params) * P,
        "boundary": params.drift_gap * (c[-1] ** 2 - c[0] ** 2),
        "diffusion": -params.sigma**2 * float(integrate.trapezoid(c * d2, dx=dx)),
    }


def probability_budget(
    snapshots: Sequence[Field],
    params: MarketParams,
    budget_coefficient: str = "derived-2r",
    k: int | None = None,
) -> FlowReport:
    """Compare measured dP/dt with the budget at snapshot ``k``.

    ``snapshots`` come from real-time evolution in ``tau``; since
    ``t = T - tau`` the measured rate is ``-(P[k+1] - P[k-1]) / (2 dtau)``.
    ``k`` defaults to the middle snapshot.
    """
    dtau = _check_snapshots(snapshots)
    if any(s.time_label[0] != "tau" for s in snapshots):
        raise DomainError("budget snapshots must be labelled in tau")
    k = len(snapshots) // 2 if k is None else k
    if not 0 < k < len(snapshots) - 1:
        raise DomainError("k must have a neighbour on each side")
    measured = -(total_probability(snapshots[k + 1]) - total_probability(snapshots[k - 1])) / (2 * dtau)
    residuals = {}
    for name in BUDGET_COEFFICIENTS:
        terms = budget_terms(snapshots[k], params, name)
        residuals[name] = abs(measured - sum(terms.values()))
    terms = budget_terms(snapshots[k], params, budget_coefficient)
    return FlowReport(
        P=total_probability(snapshots[k]),
        time=snapshots[k].time,
        coefficient=budget_coefficient,
        budget_terms=terms,
        dP_dt_measured=measured,
        residual=residuals[budget_coefficient],
        residuals=residuals,
        current_profile=hermitian_current(snapshots[k], params),
    )


def exponential_probability_fit(times, P) -> tuple[float, float]:
    """Least-squares fit of ``ln P = ln M + rate * t``; returns ``(rate, M)``."""
    t = np.asarray(times, dtype=float)
    P = np.asarray(P, dtype=float)
    if t.shape != P.shape or t.size < 4:
        raise DomainError("need at least 4 (time, P) samples")
    if np.any(~(P > 0)):
        raise DomainError("all P samples must be > 0")
    rate, log_m = np.polyfit(t, np.log(P), 1)
    return float(rate), float(math.exp(log_m))


def _tau_mu(tau_mu):
    tau_mu = np.asarray(tau_mu, dtype=float)
    if np.any(~(tau_mu > 0)):
        raise DomainError("tau_mu must be > 0")
    return tau_mu


def _scalar(v):
    return v[()] if np.ndim(v) == 0 else v


def f_amplitude_sq(params: MarketParams, x, x_prime, tau_mu):
    """|F|^2 = exp(-2 (x - x') (r - sigma^2/2) / sigma^2) / (2 pi tau_mu sigma^2)."""
    tau_mu = _tau_mu(tau_mu)
    s2 = params.require_volatility().sigma ** 2
    d = np.asarray(x) - np.asarray(x_prime)
    return _scalar(np.exp(2.0 * d * params.drift_gap / s2) / (2 * np.pi * tau_mu * s2))


def nonhermitian_density_rate(params: MarketParams, x, x_prime, tau_mu):
    """2 (|F| (sigma^2/2 - r) / sigma)^2, non-negative."""
    f2 = f_amplitude_sq(params, x, x_prime, tau_mu)
    return _scalar(2.0 * f2 * params.drift_gap**2 / params.sigma**2)


def nonhermitian_total_rate(params: MarketParams, x, x_prime, tau_mu):
    """(sigma^2/2 - r) e^u / (2 pi sigma^2 tau_mu), u = 2 (x - x')(sigma^2/2 - r)/sigma^2."""
    tau_mu = _tau_mu(tau_mu)
    s2 = params.require_volatility().sigma ** 2
    a = params.drift_gap
    u = 2.0 * (np.asarray(x) - np.asarray(x_prime)) * a / s2
    return _scalar(a * np.exp(u) / (2 * np.pi * s2 * tau_mu))


def _packet_parts(qm: QmParams, packet, t):
    x0, s0, k0 = packet
    if not s0 > 0:
        raise DomainError("packet width must be > 0")
    v0 = qm.hbar * k0 / qm.m
    spread = qm.hbar * t / (2 * qm.m * s0**2)
    return x0, s0, k0, v0, spread


def free_packet_baseline(qm: QmParams, packet: tuple[float, float, float], t: float, grid: GridSpec) -> Field:
    """Analytic free Gaussian wavepacket at time ``t``.

    ``packet = (center, width, momentum)``; ``width`` is the position
    standard deviation at ``t = 0``, so ``|psi|^2`` is a normal density with
    mean ``center + hbar k t / m`` and std ``width sqrt(1 + (hbar t / 2 m w^2)^2)``.
    """
    x0, s0, k0, v0, spread = _packet_parts(qm, packet, t)
    x = grid.x
    q = 1.0 + 1j * spread
    z = x - x0 - v0 * t
    psi = (
        (2 * np.pi * s0**2) ** -0.25
        / np.sqrt(q)
        * np.exp(-(z**2) / (4 * s0**2 * q) + 1j * k0 * (x - x0) - 0.5j * k0 * v0 * t)
    )
    return Field(grid, psi, ("t", t))


def free_packet_current(qm: QmParams, packet: tuple[float, float, float], t: float, grid: GridSpec) -> np.ndarray:
    """Exact current of the free packet: density times velocity field."""
    x0, s0, k0, v0, spread = _packet_parts(qm, packet, t)
    x = grid.x
    st2 = s0**2 * (1 + spread**2)
    xc = x0 + v0 * t
    rho = np.exp(-0.5 * (x - xc) ** 2 / st2) / np.sqrt(2 * np.pi * st2)
    rate = spread * qm.hbar / (2 * qm.m * s0**2) / (1 + spread**2)
    return rho * (v0 + (x - xc) * rate)
