import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subpop_uda.core import (
    Dataset,
    Sample,
    cell_counts,
    load_csv,
    select,
    subset,
    validate,
    write_csv,
)
from subpop_uda.errors import (
    DataError,
    EmptyDatasetError,
    ParseError,
    StructuredMissingnessError,
)


def _ds(rows, q=2, seed=0):
    """rows: list of (r, y, a) with y None for target."""
    rng = np.random.default_rng(seed)
    return Dataset.from_samples(
        [Sample(rng.normal(size=q), a, r, y) for r, y, a in rows]
    )


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


CONFORMING = [(1, 0, 1), (1, 1, 0), (1, 0, 0), (0, None, 1), (0, None, 0)]


class TestLoadCsv:
    def test_two_rows_without_header(self, tmp_path):
        p = _write(tmp_path, "1,0,1,0.2,0.3\n0,,1,0.1,0.4\n")
        ds = load_csv(p, has_header=False)
        assert ds.q == 2 and ds.n == 2
        assert ds[0].r == 1 and ds[0].y == 0 and ds[0].a == 1
        assert ds[1].r == 0 and ds[1].y is None and ds[1].a == 1
        np.testing.assert_array_equal(ds.X, [[0.2, 0.3], [0.1, 0.4]])

    def test_header_autodetected(self, tmp_path):
        p = _write(tmp_path, "r,y,a,x1,x2\n1,0,1,0.2,0.3\n0,,1,0.1,0.4\n")
        assert load_csv(p).n == 2

    def test_empty_file(self, tmp_path):
        with pytest.raises(EmptyDatasetError):
            load_csv(_write(tmp_path, ""))
        with pytest.raises(EmptyDatasetError):
            load_csv(_write(tmp_path, "r,y,a,x1\n", "h.csv"))

    def test_forbidden_cell_rejected_by_default(self, tmp_path):
        p = _write(tmp_path, "1,1,1,0.5,0.5\n")
        with pytest.raises(StructuredMissingnessError) as err:
            load_csv(p, has_header=False)
        assert err.value.rows == [0]
        assert load_csv(p, has_header=False, allow_forbidden_cell=True).n == 1

    @pytest.mark.parametrize(
        "text, row",
        [
            ("1,0,1,0.2\n1,0,1,0.2,0.3\n", 2),        # wrong column count
            ("1,0,1,abc,0.3\n", 1),                    # non-numeric feature
            ("0,1,1,0.1,0.1\n", 1),                    # label on target row
            ("1,0,1,0.1,0.1\n1,,0,0.1,0.1\n", 2),      # missing source label
            ("2,0,1,0.1,0.1\n", 1),                    # bad domain flag
            ("1,0,1,nan,0.1\n", 1),                    # non-finite feature
        ],
    )
    def test_malformed_rows_report_row_number(self, tmp_path, text, row):
        with pytest.raises(ParseError) as err:
            load_csv(_write(tmp_path, text), has_header=False)
        assert err.value.row == row


class TestValidate:
    def test_conforming_dataset_passes(self):
        rep = validate(_ds(CONFORMING))
        assert rep.ok
        assert rep.counts[(1, 0, 1)] == 1 and rep.counts[(0, None, 0)] == 1

    def test_forbidden_row_fails_without_flag(self):
        ds = _ds(CONFORMING + [(1, 1, 1)])
        with pytest.raises(StructuredMissingnessError) as err:
            validate(ds)
        assert err.value.rows == [5]

    def test_forbidden_row_warns_with_flag(self):
        rep = validate(_ds(CONFORMING + [(1, 1, 1)]), allow_forbidden_cell=True)
        assert rep.forbidden_rows == [5]
        assert any("(y=1, a=1)" in w for w in rep.warnings)

    def test_empty_required_cell_warns(self):
        rep = validate(_ds([(1, 0, 1), (1, 1, 0), (0, None, 1)]))
        assert any("source (y=0, a=0)" in w for w in rep.warnings)
        assert any("target a=0" in w for w in rep.warnings)


class TestCellCounts:
    def test_direct_counting(self):
        rows = ([(1, 1, 0)] * 30 + [(1, 0, 1)] * 50 + [(1, 0, 0)] * 20
                + [(0, None, 1)] * 60 + [(0, None, 0)] * 40)
        c = cell_counts(_ds(rows))
        assert (c.n110, c.n101, c.n100, c.n1, c.n0_dot1, c.n0_dot0, c.n0, c.n) == (
            30, 50, 20, 100, 60, 40, 100, 200)

    def test_empty(self):
        c = cell_counts(Dataset.empty(3))
        assert c.n == c.n1 == c.n0 == c.n110 == 0

    def test_single_target_row(self):
        c = cell_counts(_ds([(0, None, 0)]))
        assert (c.n0_dot0, c.n0, c.n) == (1, 1, 1)
        assert c.n110 == c.n101 == c.n100 == c.n0_dot1 == c.n1 == 0


class TestSubset:
    def test_source_land_rows(self):
        ds = _ds(CONFORMING * 3)
        sub = subset(ds, lambda r, y, a: r == 1 and a == 0)
        assert sub.n == 6
        assert np.all(sub.r == 1) and np.all(sub.a == 0)
        # order preserved
        np.testing.assert_array_equal(sub.X, ds.X[np.flatnonzero((ds.r == 1) & (ds.a == 0))])

    def test_matches_nothing(self):
        assert subset(_ds(CONFORMING), lambda r, y, a: False).n == 0

    def test_target_rows_unlabeled(self):
        sub = subset(_ds(CONFORMING), lambda r, y, a: r == 0)
        assert sub.n == 2 and all(s.y is None for s in sub)


def test_dataset_is_immutable():
    ds = _ds(CONFORMING)
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


def test_label_presence_invariant():
    with pytest.raises(DataError):
        Sample(np.zeros(2), a=0, r=0, y=1)
    with pytest.raises(DataError):
        Dataset(np.zeros((1, 2)), [1], [-1], [0])


cells = st.sampled_from([(1, 0, 1), (1, 1, 0), (1, 0, 0), (0, None, 1), (0, None, 0)])


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(cells, min_size=1, max_size=40), seed=st.integers(0, 2**31))
def test_partition_into_cells_reassembles(rows, seed):
    ds = _ds(rows, seed=seed)
    parts = [select(ds, r=1, y=y, a=a) for y, a in ((1, 0), (0, 1), (0, 0))]
    parts += [select(ds, r=0, a=a) for a in (0, 1)]
    assert sum(p.n for p in parts) == ds.n
    whole = sorted(map(tuple, ds.X.tolist()))
    assert sorted(map(tuple, np.vstack([p.X for p in parts]).tolist())) == whole


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(cells, min_size=1, max_size=40), seed=st.integers(0, 2**31))
def test_counts_invariant_under_reordering(rows, seed):
    ds = _ds(rows, seed=seed)
    perm = np.random.default_rng(seed).permutation(ds.n)
    assert cell_counts(ds) == cell_counts(ds.take(perm))
    c = cell_counts(ds)
    assert c.n1 == c.n110 + c.n101 + c.n100 and c.n0 == c.n0_dot1 + c.n0_dot0 and c.n == c.n1 + c.n0


@settings(max_examples=30, deadline=None)
@given(
    rows=st.lists(cells, min_size=1, max_size=20),
    values=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=60, max_size=60),
)
def test_csv_round_trip_is_bit_exact(tmp_path_factory, rows, values):
    X = np.array(values[: 3 * len(rows)]).reshape(len(rows), 3)
    ds = Dataset(X, [r for r, _, _ in rows], [-1 if y is None else y for _, y, _ in rows],
                 [a for _, _, a in rows])
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(ds, p)
    back = load_csv(p)
    assert back.X.tobytes() == ds.X.tobytes()
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.r, ds.r)
    np.testing.assert_array_equal(back.a, ds.a)
