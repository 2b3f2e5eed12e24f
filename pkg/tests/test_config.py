from __future__ import annotations

import pytest

from bsflow.config import EXPERIMENTS, default_config, parse_config
from bsflow.errors import ConfigError


def problems(text, **kw):
    with pytest.raises(ConfigError) as err:
        parse_config(text, **kw)
    return dict(err.value.problems)


def test_minimal_kernel_scan_gets_defaults():
    cfg = parse_config('experiment = "kernel-scan"\n')
    assert cfg.market.sigma == 0.2 and cfg.grid.n == 801 and cfg.seed == 12345
    assert cfg.time.tau_values == [0.25, 0.5, 1.0, 2.0]
    assert cfg.grid.x_min is None


def test_experiment_defaults_layered():
    cfg = default_config("mu-conservation")
    assert cfg.market.r == 0.02 and cfg.payoff.kind == "gaussian-bump" and cfg.grid.n == 1601
    assert default_config("stationarity").market.r == 0.0


def test_values_override_defaults():
    cfg = parse_config('experiment = "budget"\nseed = 3\n[market]\nr = 0\nsigma = 0.3\n[grid]\nn = 401\n')
    assert (cfg.market.r, cfg.market.sigma, cfg.grid.n, cfg.seed) == (0.0, 0.3, 401, 3)
    assert isinstance(cfg.market.r, float)


def test_negative_sigma_names_field_and_constraint():
    found = problems('experiment = "kernel-scan"\n[market]\nsigma = -0.1\n')
    assert "market.sigma" in found and "> 0" in found["market.sigma"]


def test_unknown_key_suggests_sigma():
    found = problems('experiment = "kernel-scan"\n[market]\nvol = 0.2\n')
    assert "sigma" in found["market.vol"]


def test_near_miss_key_suggestion():
    found = problems('experiment = "kernel-scan"\n[grid]\nxmin = -1.0\n')
    assert "x_min" in found["grid.xmin"]


def test_all_problems_reported_together():
    found = problems('experiment = "budget"\n[market]\nvol = 1\nsigma = -1\n[grid]\nn = 1.5\n[payoff]\nkind = "swap"\n')
    assert set(found) == {"market.vol", "market.sigma", "grid.n", "payoff.kind"}


def test_type_mismatch():
    found = problems('experiment = "budget"\n[time]\ntau = "one"\n')
    assert "expected float" in found["time.tau"]


def test_unknown_section_and_experiment():
    assert "mystery" in problems('experiment = "budget"\n[mystery]\na = 1\n')
    assert "experiment" in problems('experiment = "warp-drive"\n')


def test_grid_bounds_come_in_pairs():
    assert "grid" in problems('experiment = "budget"\n[grid]\nx_min = -1.0\n')
    assert "grid.x_max" in problems('experiment = "budget"\n[grid]\nx_min = 1.0\nx_max = 0.0\n')


def test_experiment_from_subcommand():
    assert parse_config("[market]\nr = 0.01\n", experiment="budget").experiment == "budget"
    assert "experiment" in problems('experiment = "budget"\n', experiment="mc-oracle")


def test_malformed_toml():
    assert "<document>" in problems("experiment = \n")


def test_reads_files(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text('experiment = "qm-baseline"\n[qm]\nmomentum = 2.0\n', encoding="utf-8")
    assert parse_config(path).qm.momentum == 2.0
    assert parse_config(str(path)).qm.momentum == 2.0
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.toml")


@pytest.mark.parametrize("kind", EXPERIMENTS)
def test_every_experiment_has_valid_defaults(kind):
    assert default_config(kind).to_dict()["experiment"] == kind
