"""Stock-price dynamics: geometric Brownian motion and its deterministic limit.

Paths are integrated exactly in log space,

    x_{k+1} = x_k + (drift - sigma^2/2) dt + sigma sqrt(dt) Z_k,

so terminal prices are always positive and carry no time-discretisation
bias. Random numbers come from numpy's PCG64 generator seeded with the
caller's integer seed; one block of ``n_paths`` normals is drawn per time
step, so the output depends only on ``(seed, params, sizes)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import DomainError

__all__ = [
    "MarketParams",
    "PathEnsemble",
    "simulate_gbm",
    "deterministic_price",
    "terminal_log_density",
    "ks_distance",
]


@dataclass(frozen=True)
class MarketParams:
    """Rate ``r``, volatility ``sigma`` and expected return ``phi``.

    ``sigma == 0`` is allowed here so the deterministic limit can be
    simulated; the kernel and PDE code call :meth:`require_volatility`.
    """

    r: float
    sigma: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ("r", "sigma", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")

    def require_volatility(self) -> "MarketParams":
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        return self

    @property
    def drift_gap(self) -> float:
        """sigma^2/2 - r, the coefficient of the first-derivative term.

        Exactly zero in the Hermitian case, so that r = 0.02, sigma = 0.2
        is not spoiled by 0.5 * 0.2**2 rounding to 0.020000000000000004.
        """
        return 0.0 if self.is_hermitian else 0.5 * self.sigma**2 - self.r

    @property
    def is_hermitian(self) -> bool:
        return math.isclose(self.r, 0.5 * self.sigma**2, rel_tol=1e-12, abs_tol=1e-15)

    @property
    def linear_branch(self) -> bool:
        """r = -sigma^2/2, where the stationarity condition becomes linear."""
        return math.isclose(self.r, -0.5 * self.sigma**2, rel_tol=1e-12, abs_tol=1e-15)

    @property
    def nonnegative_rate(self) -> bool:
        """Whether r >= 0, the rate restriction of the Black-Scholes setting."""
        return self.r >= 0


@dataclass(frozen=True)
class PathEnsemble:
    s0: float
    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    terminal_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.terminal_values) != self.n_paths:
            raise DomainError("terminal_values length must equal n_paths")

    @property
    def log_terminal(self) -> np.ndarray:
        return np.log(self.terminal_values)


def simulate_gbm(
    params: MarketParams,
    s0: float,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    drift_mode: str = "physical",
) -> PathEnsemble:
    """Sample terminal prices of GBM paths.

    Parameters
    ----------
    params : MarketParams
        ``phi`` is the drift when ``drift_mode == "physical"``, ``r`` when
        ``drift_mode == "risk-neutral"``.
    s0, horizon : float
        Initial price and time horizon, both strictly positive.
    n_steps, n_paths : int
        Time steps per path and number of paths.
    seed : int
        Seed for ``numpy.random.Generator(PCG64(seed))``.
    """
    if s0 <= 0 or not math.isfinite(s0):
        raise DomainError(f"s0 must be > 0, got {s0}")
    if horizon <= 0 or not math.isfinite(horizon):
        raise DomainError(f"horizon must be > 0, got {horizon}")
    if n_steps < 1 or n_paths < 1:
        raise DomainError("n_steps and n_paths must be >= 1")
    if drift_mode == "physical":
        drift = params.phi
    elif drift_mode == "risk-neutral":
        drift = params.r
    else:
        raise DomainError(f"unknown drift_mode {drift_mode!r}")

    rng = np.random.Generator(np.random.PCG64(seed))
    dt = horizon / n_steps
    step_drift = (drift - 0.5 * params.sigma**2) * dt
    step_vol = params.sigma * math.sqrt(dt)
    x = np.full(n_paths, math.log(s0))
    for _ in range(n_steps):
        x += step_drift + step_vol * rng.standard_normal(n_paths)
    return PathEnsemble(s0, horizon, n_steps, n_paths, seed, np.exp(x))


def deterministic_price(s0: float, phi: float, t: float) -> float:
    """Price path with the noise switched off: s0 * exp(phi * t)."""
    if s0 <= 0:
        raise DomainError(f"s0 must be > 0, got {s0}")
    return s0 * math.exp(phi * t)


def terminal_log_density(ensemble: PathEnsemble, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of ln S(T), returned as ``(edges, frequencies)``.

    Frequencies are bin counts divided by the number of paths, so they sum
    to one.
    """
    if bins < 2:
        raise DomainError(f"bins must be >= 2, got {bins}")
    if ensemble.n_paths == 0 or len(ensemble.terminal_values) == 0:
        raise DomainError("empty ensemble")
    x = ensemble.log_terminal
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return edges, counts / counts.sum()


def ks_distance(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between the sample law and ``cdf``."""
    return float(stats.kstest(np.asarray(samples), cdf).statistic)
