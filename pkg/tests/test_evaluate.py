import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmimpute.dataset import MaskedDataset
from swarmimpute.errors import DimensionMismatch, EmptyReport, RowSetMismatch
from swarmimpute.evaluate import (
    TIMING_HEADER,
    VALUE_HEADER,
    ImputationReport,
    ValueRow,
    aggregate,
    compare,
    mean_imputation_baseline,
    read_timing_csv,
    read_values_csv,
    value_metrics,
    write_comparison_csv,
    write_timing_csv,
    write_values_csv,
)
from swarmimpute.plots import emit_plots, scatter_svg

ACTUAL = [0, 0.3216, 0, 0.9725, 0, 0.9961, 0.0509, 0.5765]
DEEP = [0, 0.3824, 0, 1, 0, 0.9039, 0.0500, 0.6048]
MLP = [0.0246, 0.5862, 0.0149, 0.8082, 0, 0.7979, 0, 0.5292]


def report_of(actual, estimate, method, times=None):
    rows = []
    for k, (a, e) in enumerate(zip(actual, estimate)):
        eps, sq = value_metrics(a, e)
        rows.append(ValueRow(k, 0, a, e, eps, sq))
    return ImputationReport(rows, times or [(k, 1.0) for k in range(len(rows))], method)


def test_table_rows():
    eps, sq = value_metrics(0.3216, 0.3824)
    assert round(eps, 4) == 0.0608 and round(sq, 4) == 0.0037
    eps, sq = value_metrics(0.3216, 0.5862)
    assert round(eps, 4) == 0.2646 and round(sq, 4) == 0.0700
    assert value_metrics(0.4, 0.4) == (0.0, 0.0)


@given(st.floats(0, 1), st.floats(0, 1))
def test_metric_identities(a, e):
    eps, sq = value_metrics(a, e)
    assert eps == abs(a - e) and sq == eps * eps


def test_aggregate_examples():
    assert aggregate(report_of([0.9725], [1.0], "x")).mean_squared_error == pytest.approx(0.000756, abs=5e-7)
    perfect = aggregate(report_of([0.1, 0.7], [0.1, 0.7], "x"))
    assert perfect.mean_epsilon == 0 and perfect.mean_squared_error == 0
    two = aggregate(report_of([0.3216, 0.3216], [0.3216, 0.3216 + np.sqrt(0.07)], "x"))
    assert two.mean_squared_error == pytest.approx(0.0350)
    timed = aggregate(report_of([0, 0, 0], [0, 0, 0], "x", times=[(0, 1.0), (1, 2.0), (2, 6.0)]))
    assert timed.mean_seconds == 3.0 and timed.median_seconds == 2.0
    with pytest.raises(EmptyReport):
        aggregate(ImputationReport([], method="x"))


def test_compare_table_rows():
    deep, mlp = report_of(ACTUAL, DEEP, "deep"), report_of(ACTUAL, MLP, "mlp")
    assert all(d.squared_error <= m.squared_error for d, m in zip(deep.rows, mlp.rows))
    result = compare([mlp, deep])
    assert result.winners["mean_squared_error"] == ["deep"]
    assert result.winners["mean_epsilon"] == ["deep"]
    assert [s.method for s in result.summaries] == ["deep", "mlp"]
    assert repr(compare([deep, mlp])) == repr(result)


def test_compare_self_ties():
    deep = report_of(ACTUAL, DEEP, "deep")
    twin = report_of(ACTUAL, DEEP, "twin")
    result = compare([deep, twin])
    assert all(result.is_tie(metric) for metric in result.winners)


def test_compare_faster_tolerance_run():
    slow = report_of(ACTUAL, DEEP, "none", times=[(k, 5.0) for k in range(8)])
    fast = report_of(ACTUAL, DEEP, "tol", times=[(k, 1.0) for k in range(8)])
    assert compare([slow, fast]).winners["mean_seconds"] == ["tol"]


def test_compare_rejects_different_entries():
    with pytest.raises(RowSetMismatch):
        compare([report_of(ACTUAL, DEEP, "a"), report_of(ACTUAL[:7], DEEP[:7], "b")])


def test_mean_baseline():
    train = np.array([[0.3, 0.0, 1.0], [0.3, 1.0, 0.0], [0.3, 0.0, 0.5], [0.3, 1.0, 0.5]])
    data = np.array([[0.9, 0.2, 0.4], [0.1, 0.8, 0.6]])
    mask = np.array([[True, True, False], [True, False, False]])
    report = mean_imputation_baseline(train, MaskedDataset(data, mask, "MCAR", 0.5, 0))
    assert {(r.sample, r.feature): r.estimate for r in report.rows} == {(0, 0): 0.3, (0, 1): 0.5, (1, 0): 0.3}
    assert report.keys() == {(0, 0), (0, 1), (1, 0)}
    empty = mean_imputation_baseline(train, MaskedDataset(data, np.zeros_like(mask), "MCAR", 0.0, 0))
    assert empty.rows == []
    with pytest.raises(DimensionMismatch):
        mean_imputation_baseline(train[:, :2], MaskedDataset(data, mask, "MCAR", 0.5, 0))


def test_value_csv_round_trip(tmp_path):
    report = report_of(ACTUAL, DEEP, "deep")
    path = tmp_path / "deep-values.csv"
    write_values_csv(report, path)
    assert path.read_text().splitlines()[0] == ",".join(VALUE_HEADER)
    back = read_values_csv(path)
    assert back.rows == report.rows and back.method == "deep-values"
    write_timing_csv(report, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == ",".join(TIMING_HEADER)
    assert read_timing_csv(tmp_path / "t.csv") == report.per_sample_times


def test_comparison_csv(tmp_path):
    path = tmp_path / "cmp.csv"
    write_comparison_csv(compare([report_of(ACTUAL, DEEP, "deep"), report_of(ACTUAL, MLP, "mlp")]), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3 and lines[1].startswith("deep,8,")


# -- plots -------------------------------------------------------------------

def _points(svg):
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    return [(float(c.get("cx")), float(c.get("cy"))) for c in root.iter(ns + "circle")]


def test_scatter_perfect_estimates_on_diagonal():
    values = [0.0, 0.25, 0.5, 1.0]
    pts = _points(scatter_svg(values, values))
    # the diagonal runs from (50, 350) to (350, 50): x + y is constant
    assert all(x + y == pytest.approx(400.0) for x, y in pts)


def test_scatter_table_rows():
    pts = _points(scatter_svg(ACTUAL, DEEP))
    assert len(pts) == 8
    x, y = pts[3]  # (0.9725, 1.0)
    assert x + y < 400.0  # above the diagonal in screen coordinates


def test_emit_plots(tmp_path):
    report = report_of(ACTUAL, DEEP, "deep", times=[(k, 0.1 * k) for k in range(8)])
    paths = emit_plots(report, tmp_path)
    assert [p.name for p in paths] == ["deep-scatter.svg", "deep-times.svg"]
    for p in paths:
        assert ET.parse(p).getroot().tag.endswith("svg")
    with pytest.raises(EmptyReport):
        emit_plots(ImputationReport([], method="none"), tmp_path / "empty")
    assert not (tmp_path / "empty").exists()
