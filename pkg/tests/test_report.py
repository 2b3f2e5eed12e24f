from __future__ import annotations

import json

import numpy as np
import pytest

from bsflow.report import (
    Check,
    Finding,
    emit_discrepancy_ledger,
    format_number,
    render_figure,
    write_csv,
    write_manifest,
    write_plot_data,
)


@pytest.mark.parametrize(
    "value,text",
    [(0.0, "0"), (1.5, "1.5"), (10.4505835721856, "10.4505835722"), (5e-5, "5.00000000000e-05"),
     (2.5e6, "2.50000000000e+06"), (1e-4, "0.0001"), (3, "3"), (np.int64(7), "7"), (True, "true"), ("x", "x"),
     (float("nan"), "nan"), (float("-inf"), "-inf")],
)
def test_number_format(value, text):
    assert format_number(value) == text


def test_csv_roundtrip(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, 0.5], [2, 1e-9]])
    assert path.read_text() == "a,b\n1,0.5\n2,1.00000000000e-09\n"


def test_plot_data_two_columns(tmp_path):
    path = write_plot_data(tmp_path / "p.dat", [0, 1], [0.25, 2e7], ("tau", "P"))
    lines = path.read_text().splitlines()
    assert lines[0] == "# tau P" and lines[1:] == ["0 0.25", "1 2.00000000000e+07"]


def test_manifest_keeps_timestamp_out_of_tables(tmp_path):
    path = write_manifest(tmp_path / "m.json", {"value": np.float64(1.0), "arr": np.arange(2), "bad": float("inf")})
    body = json.loads(path.read_text())
    assert body["arr"] == [0, 1] and body["bad"] == "inf"
    assert {"timestamp", "versions"} <= set(body)


def test_empty_ledger_is_header_only():
    text = emit_discrepancy_ledger([])
    assert text.splitlines() == ["DISCREPANCY LEDGER", "formula | anchor | verdict | numbers", "--------+--------+---------+--------"]


def test_ledger_rows():
    row = Finding("dP/dt = 2 P + ...", "probability budget", "2r matches", {"residual": 1e-7})
    text = emit_discrepancy_ledger([row])
    assert text.splitlines()[-1] == "dP/dt = 2 P + ... | probability budget | 2r matches | residual=1.00000000000e-07"
    assert Check("c", True, 1.0, "< 2").to_dict()["passed"] is True


def test_figure_written(tmp_path):
    x = np.linspace(0, 1, 20)
    path = render_figure(tmp_path / "f.png", [("a", x, x**2), ("b", x, x, "--")], "t", "x", "y", logy=False)
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
