"""Finite-difference Black-Scholes Hamiltonian on a uniform log-price grid.

The operator ``H = -(sigma^2/2) D2 + (sigma^2/2 - r) D1 + r`` uses the
standard stencils ``D2 = (1, -2, 1)/dx^2`` and ``D1 = (-1, 0, 1)/(2 dx)``.
Operators are stored by their three stencil coefficients (diffusion,
drift, rate) so that sums and splits are exact; the tridiagonal bands are
derived from them.

Boundary handling works through one ghost node beyond each end:

``dirichlet-zero``
    ghost value 0. The full ``n x n`` matrix of the drift part is then
    exactly skew-symmetric and the diffusion part exactly symmetric, so
    adjoint relations hold for fields supported inside the grid. On a
    truncated grid ``D1^T = -D1`` is only true in this sense.
``linear-extrapolation``
    ghost value ``2 f_0 - f_1`` (and likewise at the top), i.e. the field
    is continued linearly. Used for payoffs that do not decay.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .kernel import kernel, kernel_tau_derivative
from .market import MarketParams

__all__ = [
    "GridSpec",
    "DiscreteOperator",
    "PecletWarning",
    "BOUNDARY_MODES",
    "build_operator",
    "split_hermitian",
    "apply",
    "first_difference",
    "second_difference",
    "cell_peclet",
    "pde_residual",
]

BOUNDARY_MODES = ("dirichlet-zero", "linear-extrapolation")


class PecletWarning(UserWarning):
    """Central differencing of the drift may oscillate on this grid."""


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise DomainError(f"need x_min < x_max, got {self.x_min}, {self.x_max}")
        if self.n < 3:
            raise DomainError(f"grid needs n >= 3 nodes, got {self.n}")

    @classmethod
    def centered(cls, center: float, half_width: float, n: int) -> "GridSpec":
        return cls(center - half_width, center + half_width, n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def refined(self) -> "GridSpec":
        """Same interval with the spacing halved (old nodes are kept)."""
        return GridSpec(self.x_min, self.x_max, 2 * self.n - 1)


@dataclass(frozen=True)
class DiscreteOperator:
    """Tridiagonal operator ``-diffusion D2 + drift D1 + rate I``."""

    grid: GridSpec
    diffusion: float
    drift: float
    rate: float
    boundary_mode: str = "dirichlet-zero"

    def __post_init__(self):
        if self.boundary_mode not in BOUNDARY_MODES:
            raise DomainError(f"unknown boundary_mode {self.boundary_mode!r}")

    def __add__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        if other.grid != self.grid or other.boundary_mode != self.boundary_mode:
            raise DomainError("operators live on different grids or boundary modes")
        return DiscreteOperator(
            self.grid,
            self.diffusion + other.diffusion,
            self.drift + other.drift,
            self.rate + other.rate,
            self.boundary_mode,
        )

    @property
    def bands(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(sub, diag, sup)``, each of length n.

        ``sub[i]`` multiplies ``f[i-1]`` in row ``i`` (``sub[0] == 0``) and
        ``sup[i]`` multiplies ``f[i+1]`` (``sup[-1] == 0``).
        """
        n, dx = self.grid.n, self.grid.dx
        lo = -self.diffusion / dx**2 - self.drift / (2 * dx)
        mid = 2 * self.diffusion / dx**2 + self.rate
        hi = -self.diffusion / dx**2 + self.drift / (2 * dx)
        sub = np.full(n, lo)
        diag = np.full(n, mid)
        sup = np.full(n, hi)
        if self.boundary_mode == "linear-extrapolation":
            # ghost f_{-1} = 2 f_0 - f_1 folded into row 0, mirrored at the top
            diag[0] += 2 * lo
            sup[0] -= lo
            diag[-1] += 2 * hi
            sub[-1] -= hi
        sub[0] = 0.0
        sup[-1] = 0.0
        return sub, diag, sup

    def to_dense(self) -> np.ndarray:
        sub, diag, sup = self.bands
        return np.diag(diag) + np.diag(sub[1:], -1) + np.diag(sup[:-1], 1)

    def to_banded(self) -> np.ndarray:
        """Bands in the ``(1, 1)`` layout of ``scipy.linalg.solve_banded``."""
        sub, diag, sup = self.bands
        ab = np.zeros((3, self.grid.n))
        ab[0, 1:] = sup[:-1]
        ab[1] = diag
        ab[2, :-1] = sub[1:]
        return ab

    def matvec(self, values: np.ndarray) -> np.ndarray:
        f = np.asarray(values)
        dx = self.grid.dx
        d2 = second_difference(f, dx, self.boundary_mode)
        d1 = first_difference(f, dx, self.boundary_mode)
        return -self.diffusion * d2 + self.drift * d1 + self.rate * f


def _ghosts(f: np.ndarray, boundary_mode: str):
    if boundary_mode == "dirichlet-zero":
        return 0.0 * f[0], 0.0 * f[-1]
    if boundary_mode == "linear-extrapolation":
        return 2 * f[0] - f[1], 2 * f[-1] - f[-2]
    raise DomainError(f"unknown boundary_mode {boundary_mode!r}")


def first_difference(f: np.ndarray, dx: float, boundary_mode: str = "dirichlet-zero") -> np.ndarray:
    """Central first difference with ghost-node boundary handling."""
    f = np.asarray(f)
    g_lo, g_hi = _ghosts(f, boundary_mode)
    out = np.empty_like(f)
    out[1:-1] = f[2:] - f[:-2]
    out[0] = f[1] - g_lo
    out[-1] = g_hi - f[-2]
    return out / (2 * dx)


def second_difference(f: np.ndarray, dx: float, boundary_mode: str = "dirichlet-zero") -> np.ndarray:
    f = np.asarray(f)
    g_lo, g_hi = _ghosts(f, boundary_mode)
    out = np.empty_like(f)
    out[1:-1] = f[2:] - 2 * f[1:-1] + f[:-2]
    out[0] = f[1] - 2 * f[0] + g_lo
    out[-1] = g_hi - 2 * f[-1] + f[-2]
    return out / dx**2


def cell_peclet(grid: GridSpec, params: MarketParams) -> float:
    """|sigma^2/2 - r| dx / sigma^2; central drift differencing wants < 1."""
    return abs(params.drift_gap) * grid.dx / params.sigma**2


def build_operator(
    grid: GridSpec,
    params: MarketParams,
    boundary_mode: str = "dirichlet-zero",
) -> DiscreteOperator:
    params.require_volatility()
    pe = cell_peclet(grid, params)
    if pe >= 1:
        warnings.warn(f"cell Peclet number {pe:.3g} >= 1; refine the grid", PecletWarning, stacklevel=2)
    return DiscreteOperator(grid, 0.5 * params.sigma**2, params.drift_gap, params.r, boundary_mode)


def split_hermitian(
    grid: GridSpec,
    params: MarketParams,
    boundary_mode: str = "dirichlet-zero",
) -> tuple[DiscreteOperator, DiscreteOperator]:
    """Return ``(H_H, H_NH)``: the symmetric diffusion-plus-rate part and the
    skew drift part. ``H_H + H_NH`` reproduces :func:`build_operator`."""
    params.require_volatility()
    h_herm = DiscreteOperator(grid, 0.5 * params.sigma**2, 0.0, params.r, boundary_mode)
    h_skew = DiscreteOperator(grid, 0.0, params.drift_gap, 0.0, boundary_mode)
    return h_herm, h_skew


def apply(op: DiscreteOperator, f):
    """Apply ``op`` to a :class:`~bsflow.evolution.Field` (or a plain array)."""
    from .evolution import Field

    if isinstance(f, Field):
        if f.grid != op.grid:
            raise DomainError("field and operator are defined on different grids")
        return f.with_values(op.matvec(f.values))
    values = np.asarray(f)
    if values.shape != (op.grid.n,):
        raise DomainError(f"expected {op.grid.n} samples, got shape {values.shape}")
    return op.matvec(values)


def pde_residual(
    params: MarketParams,
    grid: GridSpec,
    tau: float,
    x_prime: float,
    dtau: float | None = None,
    sign: int = 1,
    margin_sd: float = 6.0,
) -> float:
    """Max-norm of ``dp/dtau + sign * H p`` for the closed-form kernel.

    ``p(x) = kernel(x, tau; x_prime)`` is sampled on ``grid`` and ``H`` is
    the finite-difference operator. The kernel satisfies
    ``dp/dtau = -H p``, so ``sign=1`` converges to zero at O(dx^2) and
    ``sign=-1`` is a negative control. ``dp/dtau`` is analytic unless
    ``dtau`` is given, in which case a central difference in tau is used.
    Only nodes at least ``margin_sd`` kernel widths from either boundary
    enter the norm.
    """
    if not tau > 0:
        raise DomainError("tau must be > 0")
    if dtau is not None and not 0 < dtau < tau:
        raise DomainError("need 0 < dtau < tau")
    x = grid.x
    sd = params.require_volatility().sigma * math.sqrt(tau)
    center = x_prime + tau * params.drift_gap
    margin = margin_sd * sd
    mask = (x >= grid.x_min + margin) & (x <= grid.x_max - margin)
    if not (grid.x_min + margin < center - 3 * sd and center + 3 * sd < grid.x_max - margin):
        raise DomainError("grid too narrow to contain the kernel support")
    p = kernel(params, x, x_prime, tau)
    if dtau is None:
        dp = kernel_tau_derivative(params, x, x_prime, tau)
    else:
        dp = (kernel(params, x, x_prime, tau + dtau) - kernel(params, x, x_prime, tau - dtau)) / (2 * dtau)
    op = DiscreteOperator(grid, 0.5 * params.sigma**2, params.drift_gap, params.r)
    res = dp + sign * op.matvec(p)
    return float(np.max(np.abs(res[mask])))
