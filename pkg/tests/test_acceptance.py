"""Acceptance gate: one PASS/FAIL line per criterion at its stated tolerance."""

from __future__ import annotations

import pytest

from bsflow.acceptance import DEFAULT_SEED, run_acceptance
from bsflow.cli import main


@pytest.fixture(scope="module")
def criteria(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    return out, {c.number: c for c in run_acceptance(out, seed=DEFAULT_SEED)}


def report(capsys, crit):
    with capsys.disabled():
        print("\n" + crit.line())
    assert crit.passed, crit.detail
    assert crit.within_runtime, f"runtime {crit.runtime:.1f}s over {crit.runtime_limit}s"


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(criteria, capsys, number):
    report(capsys, criteria[1][number])


def test_check_flag_reruns_byte_identical(criteria, tmp_path, capsys):
    first, _ = criteria
    status = main(["--check", "--no-repeat", "--no-figures", "--out", str(tmp_path), "--seed", str(DEFAULT_SEED)])
    capsys.readouterr()
    assert status in (0, 1)
    names = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*.csv"))
    assert names
    for name in names:
        assert (first / name).read_bytes() == (tmp_path / name).read_bytes(), name
