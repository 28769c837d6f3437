import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltsf_dnode.data import (Panel, SplitSpec, WindowPair, load_csv, split, window_arrays,
                             windows, zscore_fit_transform)
from ltsf_dnode.errors import IngestError, SplitError, WindowError


def make_panel(values, start="2020-01-01", step="h"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    ts = np.datetime64(start) + np.arange(values.shape[0]) * np.timedelta64(1, step)
    return Panel(ts, values, tuple(f"c{i}" for i in range(values.shape[1])))


def test_load_three_row_csv(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("date,x\n2020-01-01 00:00:00,1\n2020-01-01 01:00:00,2\n"
                 "2020-01-01 02:00:00,3\n")
    panel = load_csv(p)
    assert panel.n_steps == 3 and panel.n_features == 1
    assert panel.values[:, 0].tolist() == [1.0, 2.0, 3.0]
    assert panel.feature_names == ("x",)


def test_load_preserves_row_order_and_columns(tmp_path):
    p = tmp_path / "multi.csv"
    p.write_text("date,a,b\n2020-01-01,1,10\n2020-01-02,2,20\n2020-01-03,3,30\n")
    panel = load_csv(p)
    np.testing.assert_array_equal(panel.values, [[1, 10], [2, 20], [3, 30]])
    assert panel.feature_names == ("a", "b")


def test_blank_cell_raises(tmp_path):
    p = tmp_path / "blank.csv"
    p.write_text("date,x,y\n2020-01-01,1,2\n2020-01-02,,3\n")
    with pytest.raises(IngestError):
        load_csv(p)


def test_non_monotone_timestamps_raise(tmp_path):
    p = tmp_path / "order.csv"
    p.write_text("date,x\n2020-01-02,1\n2020-01-01,2\n2020-01-03,3\n")
    with pytest.raises(IngestError):
        load_csv(p)


def test_irregular_granularity_raises():
    ts = np.array(["2020-01-01", "2020-01-02", "2020-01-04"], dtype="datetime64[ns]")
    with pytest.raises(IngestError):
        Panel(ts, np.ones((3, 1)), ("x",))


def test_non_numeric_and_missing_file(tmp_path):
    p = tmp_path / "text.csv"
    p.write_text("date,x\n2020-01-01,a\n2020-01-02,b\n")
    with pytest.raises(IngestError):
        load_csv(p)
    with pytest.raises(IngestError):
        load_csv(tmp_path / "absent.csv")


def test_panel_is_read_only():
    panel = make_panel(np.arange(4.0))
    with pytest.raises(ValueError):
        panel.values[0, 0] = 5.0


@pytest.mark.parametrize("n, fracs, sizes", [
    (100, (0.7, 0.1, 0.2), (70, 10, 20)),
    (10, (0.6, 0.2, 0.2), (6, 2, 2)),
])
def test_split_sizes(n, fracs, sizes):
    parts = split(make_panel(np.arange(float(n))), SplitSpec(*fracs))
    assert tuple(p.n_steps for p in parts) == sizes


def test_split_too_short_for_windows():
    with pytest.raises(SplitError):
        split(make_panel(np.arange(5.0)), SplitSpec(), L=4, H=4)


@pytest.mark.parametrize("fracs", [(0.5, 0.5, 0.5), (0.0, 0.5, 0.5), (1.0, 0.0, 0.0)])
def test_split_spec_validation(fracs):
    with pytest.raises(SplitError):
        SplitSpec(*fracs)


@given(st.integers(20, 400), st.sampled_from([(0.7, 0.1, 0.2), (0.6, 0.2, 0.2)]))
@settings(max_examples=50, deadline=None)
def test_split_concat_reconstructs(n, fracs):
    panel = make_panel(np.random.default_rng(n).standard_normal((n, 2)))
    parts = split(panel, SplitSpec(*fracs))
    rebuilt = Panel.concat(parts)
    np.testing.assert_array_equal(rebuilt.values, panel.values)
    np.testing.assert_array_equal(rebuilt.timestamps, panel.timestamps)


def test_zscore_constant_feature_goes_to_zero():
    train = make_panel(np.column_stack([np.full(10, 3.0), np.arange(10.0)]))
    (out,), mean, std = zscore_fit_transform(train)
    np.testing.assert_array_equal(out.values[:, 0], 0.0)
    assert std[0] == 1e-8


def test_zscore_uses_train_statistics_only():
    rng = np.random.default_rng(0)
    train = make_panel(2.0 + rng.standard_normal((500, 2)))
    test = make_panel(100.0 + rng.standard_normal((50, 2)), start="2021-01-01")
    (tr, te), mean, std = zscore_fit_transform(train, [test])
    assert np.all(np.abs(tr.values.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose(tr.values.std(axis=0), 1.0, atol=1e-6)
    np.testing.assert_allclose(te.values, (test.values - mean) / std)
    assert te.values.mean() > 50


def test_window_examples():
    panel = make_panel(np.arange(10.0))
    ws = windows(panel, 3, 2)
    assert len(ws) == 6
    assert isinstance(ws[0], WindowPair)
    assert ws[0].x[:, 0].tolist() == [0, 1, 2]
    assert ws[0].y[:, 0].tolist() == [3, 4]
    with pytest.raises(WindowError):
        windows(make_panel(np.arange(5.0)), 3, 3)
    with pytest.raises(WindowError):
        window_arrays(np.zeros((5, 1)), 0, 1)


def test_window_count_exhaustive():
    for n in range(1, 51):
        values = np.arange(float(n))[:, None]
        for L in range(1, n + 1):
            for H in range(1, n - L + 1):
                x, y = window_arrays(values, L, H)
                assert x.shape[0] == n - L - H + 1
                # y starts right after x ends
                assert np.all(y[:, 0, 0] == x[:, -1, 0] + 1)
