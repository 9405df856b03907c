import json

import numpy as np
import pytest

from tsnas.data import (
    DataError,
    Scaler,
    TimeSeriesDataset,
    chrono_split,
    gather_batch,
    iter_batches,
    load_csv,
    load_registry,
    make_synthetic,
    make_trend_seasonal,
    resolve_dataset,
    save_csv,
    split_search_data,
    standardize,
    window_starts,
)
from tsnas.rng import Rng
from tsnas.tensor import ContractError


def write_csv(path, text):
    path.write_text(text)
    return str(path)


def test_load_csv_basic(tmp_path):
    p = write_csv(tmp_path / "a.csv", "a,b\n1,2\n3,4\n5,6\n")
    ds = load_csv(p)
    assert ds.T == 3 and ds.n_vars == 2
    assert ds.names == ["a", "b"]
    assert ds.timestamps is None


def test_load_csv_date_column(tmp_path):
    p = write_csv(tmp_path / "a.csv", "date,x\n2020-01-01 00:00:00,1\n2020-01-01 01:00:00,2\n")
    ds = load_csv(p)
    assert ds.n_vars == 1
    assert ds.timestamps == ["2020-01-01 00:00:00", "2020-01-01 01:00:00"]
    assert ds.time_span() == ["2020-01-01 00:00:00", "2020-01-01 01:00:00"]


def test_load_csv_unparsable_cell_names_row_and_column(tmp_path):
    rows = "\n".join(f"{i},{i}" for i in range(1, 5))
    p = write_csv(tmp_path / "a.csv", f"a,OT\n{rows}\nabc,9\n")
    with pytest.raises(DataError, match=r"row 5.*'OT'|row 5.*'a'"):
        load_csv(p)


def test_load_csv_unparsable_names_column(tmp_path):
    p = write_csv(tmp_path / "a.csv", "a,OT\n1,2\n1,abc\n")
    with pytest.raises(DataError, match=r"row 2, column 'OT'"):
        load_csv(p)


def test_load_csv_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(str(p))


def test_load_csv_nan_rows_dropped_with_count(tmp_path):
    p = write_csv(tmp_path / "a.csv", "a,b\n1,2\n,4\n5,nan\n7,8\n")
    with pytest.warns(UserWarning, match="2 row"):
        ds = load_csv(p)
    assert ds.T == 2
    assert not np.isnan(ds.values).any()


def test_csv_round_trip(tmp_path, rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(20, 3)) * 1e3, names=["x", "y", "z"])
    path = tmp_path / "rt.csv"
    save_csv(path, ds)
    back = load_csv(str(path))
    np.testing.assert_allclose(back.values, ds.values, atol=1e-9)


def test_split_search_equal_halves():
    assert split_search_data(100) == ((0, 50), (50, 100))
    tr, va = split_search_data(101)
    assert tr[1] == va[0] and va[1] == 101


def test_split_search_too_short():
    with pytest.raises(DataError):
        split_search_data(30, L=10, H=6)


def test_split_search_boundary_exact():
    L, H = 10, 6
    tr, va = split_search_data(2 * (L + H), L, H)
    assert len(window_starts(tr, L, H)) == 1
    assert len(window_starts(va, L, H)) == 1


def test_chrono_split_final_ratios(rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(100, 2)), names=["a", "b"])
    parts = chrono_split(ds, "final")
    assert parts == ((0, 70), (70, 80), (80, 100))
    # disjoint, ordered, covering
    assert parts[0][1] == parts[1][0] and parts[1][1] == parts[2][0]
    assert parts[0][0] == 0 and parts[2][1] == 100


def test_chrono_split_search(rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(100, 2)), names=["a", "b"])
    assert chrono_split(ds, "search") == ((0, 50), (50, 100))


def test_chrono_split_too_short(rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(40, 1)), names=["a"])
    with pytest.raises(DataError):
        chrono_split(ds, "final", L=10, H=5)


def test_window_counts():
    assert len(window_starts((0, 16), 10, 6, 1)) == 1
    assert len(window_starts((0, 18), 10, 6, 1)) == 3
    starts = window_starts((5, 40), 10, 6, 3)
    assert starts[0] == 5
    assert all(s + 16 <= 40 for s in starts)
    with pytest.warns(UserWarning):
        assert len(window_starts((0, 10), 10, 6, 1)) == 0


def test_windows_stay_inside_range(rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(60, 2)), names=["a", "b"])
    for batch in iter_batches(ds, (20, 60), 8, 4, batch_size=16):
        assert (batch.starts >= 20).all()
        assert (batch.starts + 12 <= 60).all()
        np.testing.assert_array_equal(
            batch.past_targets[0], ds.values[batch.starts[0] : batch.starts[0] + 8]
        )


def test_shuffle_requires_rng(rng):
    ds = TimeSeriesDataset(values=rng.normal(size=(30, 1)), names=["a"])
    with pytest.raises(ContractError):
        list(iter_batches(ds, (0, 30), 4, 2, 8, shuffle=True))
    b1 = [b.starts.tolist() for b in iter_batches(ds, (0, 30), 4, 2, 8, shuffle=True, rng=Rng(1, "s"))]
    b2 = [b.starts.tolist() for b in iter_batches(ds, (0, 30), 4, 2, 8, shuffle=True, rng=Rng(1, "s"))]
    assert b1 == b2


def test_standardize_uses_train_stats_only(rng):
    vals = np.concatenate([rng.normal(size=(50, 2)), rng.normal(size=(50, 2)) * 10 + 5])
    ds = TimeSeriesDataset(values=vals, names=["a", "b"])
    out, scaler = standardize(ds, (0, 50))
    np.testing.assert_allclose(scaler.mean, vals[:50].mean(axis=0))
    np.testing.assert_allclose(out.values[:50].mean(axis=0), 0.0, atol=1e-9)
    assert abs(out.values[50:].mean()) > 0.1  # tail not centered by construction
    np.testing.assert_allclose(scaler.inverse(out.values), vals, atol=1e-9)


def test_synthetic_determinism():
    a = make_synthetic("sine", T=50, N=2, noise=0.3, seed=9)
    b = make_synthetic("sine", T=50, N=2, noise=0.3, seed=9)
    np.testing.assert_array_equal(a.values, b.values)
    c = make_synthetic("sine", T=50, N=2, noise=0.3, seed=10)
    assert np.abs(a.values - c.values).max() > 0


def test_synthetic_trend_is_ramp():
    ds = make_synthetic("trend", T=5, N=1)
    np.testing.assert_allclose(ds.values[:, 0], [0, 1, 2, 3, 4])


def test_synthetic_sine_bounded():
    ds = make_synthetic("sine", T=500, N=2, noise=0.2, seed=4)
    amp = 1.0 + 0.25 * 1 + 0.4
    assert np.abs(ds.values).max() <= amp + 6 * 0.2


def test_synthetic_piecewise_and_errors():
    ds = make_synthetic("piecewise", T=40, N=2, seed=1)
    assert ds.values.shape == (40, 2)
    with pytest.raises(ContractError):
        make_synthetic("sine", T=0, N=1)
    with pytest.raises(ContractError):
        make_synthetic("nope", T=10, N=1)


def test_trend_seasonal_fixture_smooth():
    ds = make_trend_seasonal(T=200, N=3)
    assert ds.values.shape == (200, 3)
    assert np.isfinite(ds.values).all()


def test_registry_resolution(tmp_path, rng):
    csv_path = tmp_path / "d.csv"
    save_csv(csv_path, TimeSeriesDataset(values=rng.normal(size=(30, 3)), names=["a", "b", "c"]))
    reg_path = tmp_path / "reg.json"
    reg_path.write_text(json.dumps({"mini": {"path": str(csv_path), "targets": ["a", "c"]}}))
    reg = load_registry(str(reg_path))
    ds, entry = resolve_dataset("mini", reg)
    assert ds.n_targets == 2
    assert ds.targets().shape == (30, 2)
    ds2, _ = resolve_dataset(str(csv_path), reg)
    assert ds2.n_targets == 3


def test_size_class_threshold(rng):
    small = TimeSeriesDataset(values=rng.normal(size=(10, 100)), names=[f"v{i}" for i in range(100)])
    assert small.size_class == "small"
    big = TimeSeriesDataset(values=rng.normal(size=(10, 101)), names=[f"v{i}" for i in range(101)])
    assert big.size_class == "big"
    custom = TimeSeriesDataset(
        values=rng.normal(size=(10, 101)), names=[f"v{i}" for i in range(101)], big_threshold=200
    )
    assert custom.size_class == "small"


def test_gather_batch_contiguity(rng):
    ds = TimeSeriesDataset(values=np.arange(40, dtype=float).reshape(40, 1), names=["a"])
    batch = gather_batch(ds, [3, 7], L=4, H=2)
    np.testing.assert_array_equal(batch.past_targets[0].ravel(), [3, 4, 5, 6])
    np.testing.assert_array_equal(batch.future_targets[0].ravel(), [7, 8])
