import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qarima.series import (
    DiffTable,
    IngestionError,
    SeriesError,
    TimeSeries,
    build_delay_matrix,
    difference_anchors,
    generate_differences,
    invert_difference,
    load_csv,
    synth_ar1,
    synth_ma1,
    synth_random_walk,
)


def sample_acf1(values):
    z = values - values.mean()
    return float(np.dot(z[:-1], z[1:]) / np.dot(z, z))


class TestTimeSeries:
    def test_basic(self):
        ts = TimeSeries(np.array([1.0, 2.0, 3.0]), name="y")
        assert len(ts) == 3 and ts.name == "y"

    def test_nonfinite_rejected(self):
        with pytest.raises(SeriesError):
            TimeSeries(np.array([1.0, np.nan]))
        with pytest.raises(SeriesError):
            TimeSeries(np.array([np.inf]))

    def test_empty_rejected(self):
        with pytest.raises(SeriesError):
            TimeSeries(np.array([]))

    def test_timestamps_must_increase(self):
        with pytest.raises(SeriesError):
            TimeSeries(np.array([1.0, 2.0]), timestamps=np.array([1.0, 1.0]))
        with pytest.raises(SeriesError):
            TimeSeries(np.array([1.0, 2.0]), timestamps=np.array([1.0]))

    def test_values_immutable(self):
        ts = TimeSeries(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            ts.values[0] = 9.0


class TestLoadCsv:
    def test_two_row_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("v\n1\n2\n")
        ts = load_csv(p, "v")
        assert np.allclose(ts.values, [1, 2]) and ts.name == "v"

    def test_column_by_index(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("a,b\n1,10\n2,20\n")
        assert np.allclose(load_csv(p, 1).values, [10, 20])

    def test_head_missing_dropped(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("t,v\n1,\n2,NA\n3,3\n4,4\n")
        assert np.allclose(load_csv(p, "v").values, [3, 4])

    def test_body_missing_rejected_with_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("v\n1\n\n3\n")
        with pytest.raises(IngestionError, match="row 3"):
            load_csv(p, "v")

    def test_malformed_cell_reports_row(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("v\n1\nx\n3\n")
        with pytest.raises(IngestionError, match="row 3"):
            load_csv(p, "v")

    def test_missing_column(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("a\n1\n")
        with pytest.raises(IngestionError):
            load_csv(p, "nope")
        with pytest.raises(IngestionError):
            load_csv(p, 5)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_csv(tmp_path / "ghost.csv", "v")

    def test_all_missing_column(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("v\n\n\n")
        with pytest.raises(IngestionError):
            load_csv(p, "v")


class TestDelayMatrix:
    def test_five_points_p2(self):
        dm = build_delay_matrix(np.array([1.0, 2, 3, 4, 5]), 2)
        assert np.allclose(dm.regressors, [[2, 1], [3, 2], [4, 3]])
        assert np.allclose(dm.targets, [3, 4, 5])

    def test_minimal(self):
        dm = build_delay_matrix(np.array([1.0, 2.0]), 1)
        assert np.allclose(dm.regressors, [[1]]) and np.allclose(dm.targets, [2])

    def test_boundary_error(self):
        with pytest.raises(SeriesError):
            build_delay_matrix(np.array([1.0, 2.0]), 2)
        with pytest.raises(SeriesError):
            build_delay_matrix(np.array([1.0, 2.0, 3.0]), 0)

    def test_lossless_reconstruction(self, rng):
        # every original value with index > p is recoverable from the rows
        y = rng.normal(size=40)
        for p in (1, 3, 5):
            dm = build_delay_matrix(y, p)
            assert np.array_equal(dm.targets, y[p:])
            # lag-1 column shifted by one step matches the target stream
            assert np.array_equal(dm.regressors[1:, 0], dm.targets[:-1])


class TestDifferencing:
    def test_triangular_numbers(self):
        table = generate_differences(np.array([1.0, 3, 6, 10]), 2)
        assert np.allclose(table.levels[1], [2, 3, 4])
        assert np.allclose(table.levels[2], [1, 1])

    def test_constant_series(self):
        table = generate_differences(np.full(6, 7.0), 1)
        assert np.allclose(table.levels[1], 0.0)

    def test_powers_of_two(self):
        table = generate_differences(np.array([1.0, 2, 4, 8, 16]), 3)
        assert np.allclose(table.levels[3], [1, 2])

    def test_length_bookkeeping(self, rng):
        y = rng.normal(size=30)
        table = generate_differences(y, 4)
        for d in range(5):
            assert table.levels[d].size == 30 - d

    def test_too_short(self):
        with pytest.raises(SeriesError):
            generate_differences(np.array([1.0, 2.0]), 2)


class TestInvertDifference:
    def test_identity_at_d0(self):
        out = invert_difference([1.0, 2.0], [], 0)
        assert np.allclose(out, [1, 2])

    def test_cumsum_at_d1(self):
        # Del_1 of [1,3,6,10] plus the level-0 anchor restores the tail
        out = invert_difference([2.0, 3.0, 4.0], [1.0], 1)
        assert np.allclose(out, [3, 6, 10])

    def test_round_trip_d2(self, rng):
        y = rng.normal(size=20)
        ext = rng.normal(size=5)
        full = np.concatenate([y, ext])
        diff2 = np.diff(full, n=2)[-5:]
        anchors = difference_anchors(y, 2)
        out = invert_difference(diff2, anchors, 2)
        assert np.allclose(out, ext, rtol=0, atol=1e-10)

    def test_insufficient_anchors(self):
        with pytest.raises(SeriesError):
            invert_difference([1.0], [5.0], 2)

    @given(st.integers(0, 4), st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, d, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(size=12 + d)
        ext = rng.normal(size=4)
        full = np.concatenate([y, ext])
        diffed = np.diff(full, n=d)[-4:] if d else ext
        anchors = difference_anchors(y, d)
        out = invert_difference(diffed, anchors, d)
        assert np.allclose(out, ext, rtol=0, atol=1e-9)


class TestSynthetic:
    def test_white_noise_acf(self):
        y = synth_ar1(0.0, 2000, 1.0, seed=3)
        assert abs(sample_acf1(y.values)) < 3 / np.sqrt(2000)

    def test_ar1_acf(self):
        y = synth_ar1(0.8, 2000, 1.0, seed=5)
        assert abs(sample_acf1(y.values) - 0.8) < 0.06

    def test_random_walk_difference_is_white(self):
        y = synth_random_walk(500, 1.0, seed=9)
        d = np.diff(y.values)
        assert abs(sample_acf1(d)) < 3 / np.sqrt(d.size)

    def test_stationarity_guard(self):
        with pytest.raises(SeriesError):
            synth_ar1(1.0, 100, 1.0, seed=0)

    def test_reproducible(self):
        a = synth_ar1(0.5, 50, 1.0, seed=7)
        b = synth_ar1(0.5, 50, 1.0, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_ma1_acf(self):
        # theoretical ACF(1) of MA(1) is theta / (1 + theta^2)
        y = synth_ma1(0.6, 4000, 1.0, seed=2)
        want = 0.6 / (1 + 0.36)
        assert abs(sample_acf1(y.values) - want) < 0.05

    def test_min_length(self):
        with pytest.raises(SeriesError):
            synth_random_walk(5, 1.0, seed=0)
