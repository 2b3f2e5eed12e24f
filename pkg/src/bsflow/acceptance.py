"""Built-in acceptance suite, criteria 1 to 10.

``run_acceptance`` evaluates every criterion at its stated parameters and
tolerance and writes ``acceptance.csv`` plus the scenario outputs behind
criteria 5 to 9. Wall-clock time is reported on screen but never written
to a CSV, so two runs with the same seed give byte-identical tables.
Criterion 10 checks exactly that by repeating criteria 1 to 9 in a
scratch directory and comparing every CSV byte for byte.
"""

from __future__ import annotations

import logging
import math
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import default_config
from .hamiltonian import GridSpec, pde_residual
from .kernel import (
    asymptotic_root,
    center_shift,
    kernel,
    kernel_log_tau_derivative,
    kernel_mass,
    semigroup_compose,
    stationarity_roots,
)
from .market import MarketParams
from .report import write_csv
from .scenarios import mu_flow_study, mu_grid_half_width, observed_orders, run_scenario

log = logging.getLogger(__name__)

__all__ = ["Criterion", "run_acceptance", "BUDGET_PARAMETER_SETS", "DEFAULT_SEED"]

DEFAULT_SEED = 20240521

# (r, sigma) pairs for the budget study; one has r = 0 so that the two
# bulk coefficients differ by a full 2P.
BUDGET_PARAMETER_SETS = ((0.05, 0.2), (0.0, 0.3), (0.1, 0.4))


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    value: float
    threshold: str
    runtime: float = 0.0
    runtime_limit: float | None = None
    detail: str = ""

    @property
    def within_runtime(self) -> bool:
        return self.runtime_limit is None or self.runtime < self.runtime_limit

    @property
    def ok(self) -> bool:
        return self.passed and self.within_runtime

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        limit = "" if self.runtime_limit is None else f" / limit {self.runtime_limit:g}s"
        text = f"[{status}] criterion {self.number:2d} {self.name}: value={self.value:.6g} ({self.threshold}) time={self.runtime:.1f}s{limit}"
        return text + (f" | {self.detail}" if self.detail else "")


def _random_market(rng: np.random.Generator) -> MarketParams:
    sigma = float(rng.uniform(0.05, 0.8))
    return MarketParams(float(rng.uniform(-0.5 * sigma**2, 0.2)), sigma)


def criterion_mass(seed: int, out: Path) -> Criterion:
    rng = np.random.default_rng([seed, 1])
    rows = []
    for _ in range(50):
        p = _random_market(rng)
        tau = float(rng.uniform(0.01, 10.0))
        xp = float(rng.uniform(-1.0, 1.0))
        err = abs(kernel_mass(p, xp, tau) - math.exp(-p.r * tau))
        rows.append([p.r, p.sigma, tau, xp, err])
    write_csv(out / "c01_mass.csv", ["r", "sigma", "tau", "x_prime", "abs_error"], rows)
    worst = max(r[-1] for r in rows)
    return Criterion(1, "kernel mass law", worst < 1e-8, worst, "< 1e-8", runtime_limit=5)


def criterion_semigroup(seed: int, out: Path) -> Criterion:
    rng = np.random.default_rng([seed, 2])
    rows = []
    for i in range(20):
        p = _random_market(rng)
        t1, t2 = (float(v) for v in rng.uniform(0.01, 5.0, size=2))
        xp = float(rng.uniform(-1.0, 1.0))
        c = xp + center_shift(p, t1 + t2)
        sd = p.sigma * math.sqrt(t1 + t2)
        for x in np.linspace(c - 3 * sd, c + 3 * sd, 11):
            err = abs(semigroup_compose(p, t1, t2, float(x), xp) - kernel(p, x, xp, t1 + t2))
            rows.append([i, p.r, p.sigma, t1, t2, xp, float(x), err])
    write_csv(out / "c02_semigroup.csv", ["draw", "r", "sigma", "tau1", "tau2", "x_prime", "x", "abs_error"], rows)
    worst = max(r[-1] for r in rows)
    return Criterion(2, "semigroup property", worst < 1e-6, worst, "< 1e-6 pointwise", runtime_limit=10)


def criterion_pde(seed: int, out: Path) -> Criterion:
    p = MarketParams(0.05, 0.2)
    tau, xp = 1.0, 0.0
    c = xp + center_shift(p, tau)
    half = 12 * p.sigma * math.sqrt(tau)
    ns = (401, 801, 1601)
    res = [pde_residual(p, GridSpec.centered(c, half, n), tau, xp) for n in ns]
    orders = observed_orders(res)
    write_csv(out / "c03_pde.csv", ["n", "residual", "observed_order"],
              [[n, e, o] for n, e, o in zip(ns, res, [float("nan")] + orders)])
    ok = all(abs(o - 2) <= 0.2 for o in orders)
    worst = max(orders, key=lambda o: abs(o - 2))
    return Criterion(3, "kernel solves the pricing PDE", ok, worst, "order 2.0 +/- 0.2", runtime_limit=10)


def criterion_stationarity(seed: int, out: Path) -> Criterion:
    rng = np.random.default_rng([seed, 4])
    rows = []
    for _ in range(100):
        p = _random_market(rng)
        d = float(rng.uniform(0.01, 10.0)) * (1 if rng.random() < 0.5 else -1)
        for root in stationarity_roots(p, d).roots:
            rows.append([p.r, p.sigma, d, root, abs(kernel_log_tau_derivative(p, d, 0.0, root))])
    write_csv(out / "c04_stationarity_sweep.csv", ["r", "sigma", "d", "tau_root", "rel_dp_dtau"], rows)
    worst = max(r[-1] for r in rows)

    s = 0.2
    cases = [
        ("r=0 root", stationarity_roots(MarketParams(0.0, s), 1.0).roots[0], 20.7107, 1e-3),
        ("r=sigma^2/2 root", stationarity_roots(MarketParams(s * s / 2, s), 1.0).roots[0], 15.4508, 1e-3),
        ("r=-sigma^2/2 root", stationarity_roots(MarketParams(-s * s / 2, s), 1.0).roots[0], 25.0, 0.0),
    ]
    d_big = 1e3
    asym = [
        ("r=0 asymptote", MarketParams(0.0, s), 2 * d_big / s**2),
        ("r=sigma^2/2 asymptote", MarketParams(s * s / 2, s), d_big / s**2),
    ]
    special = []
    for name, got, want, tol in cases:
        special.append([name, got, want, abs(got - want), abs(got - want) <= tol])
    for name, p, want in asym:
        root = stationarity_roots(p, d_big).roots[0]
        special.append([name, root, want, abs(root - want) / want, abs(root - want) <= 0.01 * want])
        special.append([name + " (library)", asymptotic_root(p, d_big), want, abs(asymptotic_root(p, d_big) - want) / want,
                        math.isclose(asymptotic_root(p, d_big), want, rel_tol=1e-12)])
    write_csv(out / "c04_special_cases.csv", ["case", "value", "expected", "deviation", "ok"],
              [r[:4] + [int(r[4])] for r in special])
    ok = worst < 1e-9 and all(r[4] for r in special)
    failed = [r[0] for r in special if not r[4]]
    detail = f"{len(rows)} roots back-substituted; special cases " + ("all reproduced" if not failed else "failed: " + ", ".join(failed))
    return Criterion(4, "stationarity roots", ok, worst, "back-substitution < 1e-9 p, special cases", detail=detail)


def _scenario_criterion(number, name, cfg, out, checks, limit=None, figures=False):
    res = run_scenario(cfg, out, figures=figures)
    picked = [c for c in res.checks if c.name in checks]
    ok = all(c.passed for c in picked)
    first_bad = next((c for c in picked if not c.passed), picked[0])
    detail = "; ".join(f"{c.name}={c.value:.4g}" for c in picked)
    return Criterion(number, name, ok, first_bad.value, first_bad.threshold, runtime_limit=limit, detail=detail), res


def criterion_pricing(seed: int, out: Path, figures=False) -> Criterion:
    cfg = default_config("pricing-crosscheck", seed=seed)
    cfg.market.r, cfg.market.sigma = 0.05, 0.2
    cfg.payoff.kind, cfg.payoff.strike, cfg.payoff.spot = "call", 100.0, 100.0
    cfg.time.tau, cfg.grid.n, cfg.time.n_steps = 1.0, 1601, 2000
    crit, _ = _scenario_criterion(5, "pricing oracle triangle", cfg, out / "c05_pricing",
                                  {"kernel-vs-closed-form", "fd-vs-closed-form", "fd-order"}, 30, figures)
    return crit


def criterion_mc(seed: int, out: Path, figures=False) -> Criterion:
    cfg = default_config("mc-oracle", seed=seed)
    cfg.mc.n_paths, cfg.mc.drift_mode = 100_000, "risk-neutral"
    crit, _ = _scenario_criterion(6, "Monte Carlo kernel oracle", cfg, out / "c06_mc", {"ks-vs-kernel"}, 20, figures)
    return crit


def criterion_mu(seed: int, out: Path) -> Criterion:
    sigma, width, mu_t, n, steps = 0.2, 0.2, 1.0, 1601, 1000
    rows, results = [], {}
    for label, r in (("hermitian", 0.5 * sigma**2), ("r-zero", 0.0)):
        p = MarketParams(r, sigma)
        grid = GridSpec.centered(0.0, mu_grid_half_width(p, width, mu_t), n)
        st = mu_flow_study(p, grid, 0.0, width, mu_t, steps)
        results[label] = st
        rows.append([label, r, sigma, st["drift_per_mu"], st["agreement_printed"], st["agreement_derived"]])
    write_csv(out / "c07_mu_dichotomy.csv", ["case", "r", "sigma", "norm_drift_per_mu", "sign_agreement_printed", "sign_agreement_derived"], rows)
    h, z = results["hermitian"], results["r-zero"]
    parts = {
        "hermitian drift < 1e-10": h["drift_per_mu"] < 1e-10,
        "r=0 drift > 1e-4": z["drift_per_mu"] > 1e-4,
        "r=0 sign agreement > 0.95": z["agreement_printed"] > 0.95,
    }
    detail = (
        f"hermitian drift={h['drift_per_mu']:.3g}, r=0 drift={z['drift_per_mu']:.3g}, "
        f"sign agreement printed={z['agreement_printed']:.3f}, derived={z['agreement_derived']:.3f}; "
        + ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in parts.items())
    )
    return Criterion(7, "mu-conservation dichotomy", all(parts.values()), z["agreement_printed"],
                     "> 0.95 sign agreement (plus both drift bounds)", detail=detail)


def criterion_budget(seed: int, out: Path, figures=False) -> Criterion:
    ok, worst_order, worst_ratio, details = True, math.inf, 0.0, []
    for i, (r, sigma) in enumerate(BUDGET_PARAMETER_SETS):
        cfg = default_config("budget", seed=seed)
        cfg.market.r, cfg.market.sigma = r, sigma
        res = run_scenario(cfg, out / f"c08_budget_set{i + 1}", figures=figures)
        ok &= res.passed and (res.out_dir / "discrepancy_ledger.txt").exists()
        order, ratio = min(res.metrics["derived_orders"]), res.metrics["paper_residual_over_gap"][-1]
        worst_order = min(worst_order, order)
        worst_ratio = max(worst_ratio, abs(ratio - 1))
        details.append(f"(r={r:g}, sigma={sigma:g}) order={order:.3f} bulk-2 residual/gap={ratio:.4f}")
    return Criterion(8, "budget coefficient determination", ok, worst_order, "order >= 1.8, bulk-2 residual = |2-2r|P +/- 10%",
                     detail="; ".join(details))


def criterion_qm(seed: int, out: Path, figures=False) -> Criterion:
    cfg = default_config("qm-baseline", seed=seed)
    crit, _ = _scenario_criterion(9, "QM free-packet baseline", cfg, out / "c09_qm", {"norm-conserved", "continuity-order"}, None, figures)
    return crit


def _timed(func, *args, **kw) -> Criterion:
    t0 = time.perf_counter()
    crit = func(*args, **kw)
    crit.runtime = time.perf_counter() - t0
    log.info(crit.line())
    return crit


def _criteria_1_to_9(seed: int, out: Path, figures: bool) -> list[Criterion]:
    out.mkdir(parents=True, exist_ok=True)
    return [
        _timed(criterion_mass, seed, out),
        _timed(criterion_semigroup, seed, out),
        _timed(criterion_pde, seed, out),
        _timed(criterion_stationarity, seed, out),
        _timed(criterion_pricing, seed, out, figures),
        _timed(criterion_mc, seed, out, figures),
        _timed(criterion_mu, seed, out),
        _timed(criterion_budget, seed, out, figures),
        _timed(criterion_qm, seed, out, figures),
    ]


def _csv_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


def write_summary(path: Path, criteria: list[Criterion]) -> Path:
    return write_csv(path, ["criterion", "name", "passed", "value", "threshold"],
                     [[c.number, c.name, int(c.passed), c.value, c.threshold] for c in criteria])


def run_acceptance(out_dir: str | Path, seed: int = DEFAULT_SEED, figures: bool = False, repeat: bool = True) -> list[Criterion]:
    """Evaluate all criteria, write ``acceptance.csv`` and return the results.

    With ``repeat=False`` criterion 10 is skipped, which halves the runtime.
    """
    out = Path(out_dir)
    criteria = _criteria_1_to_9(seed, out, figures)
    write_summary(out / "acceptance.csv", criteria)
    if repeat:
        t0 = time.perf_counter()
        scratch = Path(tempfile.mkdtemp(prefix="bsflow-repeat-"))
        try:
            again = _criteria_1_to_9(seed, scratch, figures=False)
            write_summary(scratch / "acceptance.csv", again)
            first, second = _csv_bytes(out), _csv_bytes(scratch)
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
        differing = sorted(k for k in second if first.get(k) != second[k])
        crit = Criterion(10, "reproducibility", not differing, float(len(differing)), "0 differing CSV files",
                         runtime=time.perf_counter() - t0,
                         detail=f"{len(first)} CSV files compared" + (f"; differ: {', '.join(differing)}" if differing else ""))
        log.info(crit.line())
        criteria.append(crit)
    return criteria
