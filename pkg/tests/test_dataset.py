import json

import numpy as np
import pytest

from ddssp.dataset import (
    Attribute,
    DatasetError,
    DiscreteDataset,
    Domain,
    discretize_numeric,
    load_csv,
    split,
    split_indices,
    write_csv,
)


@pytest.fixture
def dom23():
    return Domain.from_sizes([2, 3], names=["a", "b"])


def test_load_csv_basic(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n0,2\n1,0\n")
    ds = load_csv(p, dom23)
    assert ds.records.tolist() == [[0, 2], [1, 0]]


def test_load_csv_reorders_columns_and_ignores_extras(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("extra,b,a\nzz,2,0\nqq,0,1\n")
    assert load_csv(p, dom23).records.tolist() == [[0, 2], [1, 0]]


def test_out_of_range_strict(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n0,5\n")
    with pytest.raises(DatasetError, match="out of range"):
        load_csv(p, dom23)


def test_lenient_drops_rows_and_warns(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n0,5\n1,1\n,2\nx,0\n")
    with pytest.warns(UserWarning, match="dropped 3"):
        ds = load_csv(p, dom23, strict=False)
    assert ds.records.tolist() == [[1, 1]]


def test_empty_body(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n")
    ds = load_csv(p, dom23)
    assert ds.n == 0 and ds.records.shape == (0, 2)


def test_unknown_column(tmp_path, dom23):
    p = tmp_path / "d.csv"
    p.write_text("a,c\n0,1\n")
    with pytest.raises(DatasetError, match="not found"):
        load_csv(p, dom23)


def test_labels_round_trip(tmp_path):
    dom = Domain((Attribute("c", 3, labels=["lo", "mid", "hi"]), Attribute("n", 2, kind="numeric")))
    ds = DiscreteDataset(dom, [[2, 1], [0, 0]])
    p = tmp_path / "d.csv"
    write_csv(ds, p)
    assert p.read_text().splitlines()[1] == "hi,1"
    assert load_csv(p, dom).records.tolist() == [[2, 1], [0, 0]]


def test_label_takes_precedence_over_integer(tmp_path):
    dom = Domain((Attribute("c", 2, labels=["1", "0"]),))
    p = tmp_path / "d.csv"
    p.write_text("c\n1\n")
    assert load_csv(p, dom).records.tolist() == [[0]]


def test_domain_json_round_trip(tmp_path):
    dom = Domain((Attribute("c", 3, labels=["x", "y", "z"]), Attribute("n", 4, kind="numeric")))
    p = tmp_path / "dom.json"
    dom.save(p)
    assert Domain.load(p) == dom
    assert json.loads(p.read_text())[0]["labels"] == ["x", "y", "z"]


def test_domain_invariants():
    with pytest.raises(DatasetError):
        Domain.from_sizes([2, 0])
    with pytest.raises(DatasetError):
        Domain.from_sizes([2, 2], names=["a", "a"])
    big = Domain.from_sizes([1000] * 10)
    assert big.size() == 1000**10  # exact, no int64 overflow


def test_dataset_range_check(dom23):
    with pytest.raises(DatasetError):
        DiscreteDataset(dom23, [[0, 3]])
    with pytest.raises(DatasetError):
        DiscreteDataset(dom23, [[-1, 0]])


def test_discretize_equal_width():
    levels, edges = discretize_numeric([0, 1, 2, 3], 2)
    assert levels.tolist() == [0, 0, 1, 1]
    np.testing.assert_allclose(edges, [0, 1.5, 3])


def test_discretize_degenerate():
    levels, _ = discretize_numeric([10.0], 20)
    assert levels.tolist() == [0]


def test_discretize_equal_frequency_against_sort_oracle():
    rng = np.random.default_rng(3)
    for n in (100, 401, 1000):
        x = rng.uniform(size=n)
        levels, _ = discretize_numeric(x, 4, "equal-frequency")
        counts = np.bincount(levels, minlength=4)
        assert np.all(np.abs(counts - n / 4) <= 1)
        # oracle: rank order determines the bin
        ranks = np.argsort(np.argsort(x))
        expected = np.minimum(ranks * 4 // n, 3)
        assert np.mean(expected == levels) > 0.99


def test_split_sizes():
    tr, te = split_indices(1100, 1000, 50_000, 0)
    assert (len(tr), len(te)) == (100, 1000)
    tr, te = split_indices(60_000, 1000, 50_000, 0)
    assert (len(tr), len(te)) == (50_000, 1000)
    assert not set(tr) & set(te)


def test_split_deterministic(dom23):
    ds = DiscreteDataset(dom23, np.random.default_rng(0).integers(0, 2, size=(50, 2)))
    a = split(ds, 10, 100, seed=7)
    b = split(ds, 10, 100, seed=7)
    assert np.array_equal(a[0].records, b[0].records) and np.array_equal(a[1].records, b[1].records)
