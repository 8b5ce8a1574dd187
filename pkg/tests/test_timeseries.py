"""Record construction, standardization, window extraction, CSV round trip."""

import numpy as np
import pytest
from scipy import stats

from wavedmd import (
    TimeSeries,
    WindowSpec,
    destandardize,
    extract_window,
    read_csv,
    sample_windows,
    standardize,
    write_csv,
)
from wavedmd.errors import (
    CsvFormatError,
    NoValidWindowError,
    OutOfBoundsError,
    ZeroVarianceError,
)


def make_series(values, dt=0.1, spw=32):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    names = tuple(f"v{i}" for i in range(values.shape[0]))
    return TimeSeries(values=values, dt=dt, names=names, steps_per_wave=spw)


class TestTimeSeries:
    def test_basic_construction(self):
        ts = make_series([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        assert ts.n == 2
        assert ts.m == 3
        assert ts.wave_period == pytest.approx(3.2)

    def test_values_are_read_only(self):
        ts = make_series([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            ts.values[0, 0] = 99.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            make_series([1.0, np.nan])

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            TimeSeries(values=np.zeros((1, 4)), dt=0.0, names=("a",))

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError):
            TimeSeries(values=np.zeros((2, 4)), dt=0.1, names=("a", "a"))

    def test_rejects_wrong_name_count(self):
        with pytest.raises(ValueError):
            TimeSeries(values=np.zeros((2, 4)), dt=0.1, names=("a",))


class TestStandardize:
    def test_affine_normalization(self):
        ts = make_series([2.0, 4.0, 6.0])
        out, record = standardize(ts)
        row = out.values[0]
        assert row[1] == pytest.approx(0.0, abs=1e-12)
        assert row[0] == pytest.approx(-row[2], abs=1e-12)
        assert row.mean() == pytest.approx(0.0, abs=1e-12)
        assert row.var() == pytest.approx(1.0, rel=1e-12)
        assert record.mean[0] == pytest.approx(4.0)

    def test_population_variance_convention(self):
        ts = make_series([2.0, 4.0, 6.0])
        _, record = standardize(ts)
        assert record.std[0] == pytest.approx(np.std([2.0, 4.0, 6.0]), rel=1e-14)

    def test_idempotent_on_normalized_input(self):
        rng = np.random.default_rng(3)
        row = rng.standard_normal(64)
        row = (row - row.mean()) / row.std()
        ts = make_series(row)
        out, record = standardize(ts)
        np.testing.assert_allclose(out.values, ts.values, atol=1e-12)
        assert record.mean[0] == pytest.approx(0.0, abs=1e-12)
        assert record.std[0] == pytest.approx(1.0, rel=1e-12)

    def test_constant_channel_rejected(self):
        ts = make_series([1.0, 1.0, 1.0])
        with pytest.raises(ZeroVarianceError) as err:
            standardize(ts)
        assert err.value.variable == "v0"

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        ts = make_series(rng.normal(3.0, 10.0, size=(3, 200)))
        out, record = standardize(ts, (20, 120))
        back = destandardize(out, record)
        np.testing.assert_allclose(back.values, ts.values, atol=1e-10)

    def test_statistics_from_training_segment_only(self):
        rng = np.random.default_rng(7)
        values = np.concatenate([rng.normal(0, 1, 100), rng.normal(50, 9, 100)])
        ts = make_series(values)
        out, record = standardize(ts, (0, 100))
        seg = out.values[0, :100]
        assert seg.mean() == pytest.approx(0.0, abs=1e-12)
        assert seg.var() == pytest.approx(1.0, rel=1e-12)
        # Steps outside the segment keep the same transform: no leakage of
        # their statistics into the record.
        assert record.mean[0] == pytest.approx(values[:100].mean())
        assert abs(out.values[0, 100:].mean()) > 1.0

    def test_variance_from_segment_not_whole(self):
        values = np.array([0.0, 1.0, 0.0, 1.0, 100.0, -100.0, 50.0, -50.0])
        ts = make_series(values)
        _, record = standardize(ts, (0, 4))
        assert record.std[0] == pytest.approx(0.5)


class TestExtractWindow:
    def test_index_arithmetic(self):
        ts = make_series(np.arange(320, dtype=float))
        w = WindowSpec(start_index=64, niw=4, now=2, lead=0)
        train, test, history = extract_window(ts, w)
        assert train.m == 128
        assert test.m == 64
        assert history.m == 0
        assert train.values[0, 0] == 64.0
        assert train.values[0, -1] == 191.0
        assert test.values[0, 0] == 192.0
        assert test.values[0, -1] == 255.0

    def test_history_slice(self):
        ts = make_series(np.arange(320, dtype=float))
        w = WindowSpec(start_index=64, niw=4, now=2, lead=16)
        _, _, history = extract_window(ts, w)
        assert history.m == 16
        assert history.values[0, 0] == 48.0
        assert history.values[0, -1] == 63.0

    def test_lead_before_record_start(self):
        ts = make_series(np.arange(320, dtype=float))
        w = WindowSpec(start_index=0, niw=4, now=2, lead=1)
        with pytest.raises(OutOfBoundsError):
            extract_window(ts, w)

    def test_partition_property(self):
        ts = make_series(np.arange(640, dtype=float))
        for start, niw, now, lead in [(10, 3, 2, 10), (8, 1, 1, 8), (100, 8, 4, 0)]:
            w = WindowSpec(start_index=start, niw=niw, now=now, lead=lead)
            train, test, history = extract_window(ts, w)
            assert history.m + train.m + test.m == lead + (niw + now) * 32
            joined = np.concatenate(
                [history.values[0], train.values[0], test.values[0]]
            )
            np.testing.assert_array_equal(
                joined, ts.values[0, start - lead:start + (niw + now) * 32]
            )


class TestSampleWindows:
    def test_deterministic(self):
        ts = make_series(np.arange(3200, dtype=float))
        a = sample_windows(ts, 4, 1, 8, 1001, seed=42)
        b = sample_windows(ts, 4, 1, 8, 1001, seed=42)
        assert a == b

    def test_single_valid_start(self):
        lead = 5
        ts = make_series(np.arange(lead + 6 * 32, dtype=float))
        windows = sample_windows(ts, 4, 2, lead, 17, seed=0)
        assert all(w.start_index == lead for w in windows)

    def test_too_short_record(self):
        ts = make_series(np.arange(100, dtype=float))
        with pytest.raises(NoValidWindowError):
            sample_windows(ts, 4, 2, 0, 10, seed=0)

    def test_uniform_start_distribution(self):
        # Chi-square against uniform at 1% significance; oracle is a direct
        # histogram over equal-width bins of the valid start range.
        ts = make_series(np.arange(10_000, dtype=float))
        niw, now, lead = 4, 1, 0
        hi = ts.m - (niw + now) * 32 + 1
        windows = sample_windows(ts, niw, now, lead, 1001, seed=13)
        starts = np.array([w.start_index for w in windows])
        assert starts.min() >= lead and starts.max() < hi
        counts, _ = np.histogram(starts, bins=10, range=(lead, hi))
        result = stats.chisquare(counts)
        assert result.pvalue > 0.01


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        ts = make_series(rng.standard_normal((3, 50)), dt=0.25)
        path = tmp_path / "record.csv"
        write_csv(ts, path)
        back = read_csv(path)
        np.testing.assert_allclose(back.values, ts.values, rtol=0, atol=0)
        assert back.dt == pytest.approx(ts.dt, rel=1e-12)
        assert back.names == ts.names

    def test_non_uniform_spacing_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,a\n0.0,1.0\n0.1,2.0\n0.25,3.0\n0.3,4.0\n")
        with pytest.raises(CsvFormatError, match="non-uniform"):
            read_csv(path)

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.0,1.0\n0.1,2.0\n")
        with pytest.raises(CsvFormatError, match="'t'"):
            read_csv(path)

    def test_duplicate_variable_names_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,a,a\n0.0,1.0,1.0\n0.1,2.0,2.0\n")
        with pytest.raises(CsvFormatError):
            read_csv(path)

    def test_short_file_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,a\n0.0,1.0\n")
        with pytest.raises(CsvFormatError, match="at least 2"):
            read_csv(path)
