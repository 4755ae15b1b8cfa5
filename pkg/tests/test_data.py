import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deql.data import (GramBundle, IdMap, InteractionMatrix, SplitSpec, check_no_zero_columns,
                       gram, load_interactions, load_split, save_split, split)
from deql.errors import DataError, ParseError
from deql.synthetic import random_interactions

from conftest import brute_gram


def write(tmp_path, text, name="r.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_three_pairs(tmp_path):
    ds = load_interactions(write(tmp_path, "u1\ti1\nu1\ti2\nu2\ti1\n"))
    assert ds.matrix.shape == (2, 2)
    assert ds.matrix.nnz == 3
    assert ds.user_ids.ids == ["u1", "u2"]
    assert ds.item_ids.ids == ["i1", "i2"]


def test_duplicates_collapse(tmp_path):
    ds = load_interactions(write(tmp_path, "u1\ti1\nu1\ti1\nu2\ti2\n"))
    assert ds.matrix.nnz == 2
    assert (0, 0) in ds.matrix.entries


def test_comments_and_blank_lines_skipped(tmp_path):
    ds = load_interactions(write(tmp_path, "# header\nu1\ti1\n\nu2\ti1\n"))
    assert ds.matrix.nnz == 2


def test_one_field_line_names_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_interactions(write(tmp_path, "u1\ti1\nu1\n"))
    assert exc.value.lineno == 2
    assert ":2:" in str(exc.value)


def test_empty_file_rejected(tmp_path):
    with pytest.raises(DataError):
        load_interactions(write(tmp_path, ""))


def test_idmap_roundtrip(tmp_path):
    ids = IdMap()
    for key in ("b", "a", "b", "c"):
        ids.add(key)
    ids.save(tmp_path / "ids.tsv")
    back = IdMap.load(tmp_path / "ids.tsv")
    assert back.ids == ["b", "a", "c"]


def test_out_of_bounds_rejected():
    with pytest.raises(DataError):
        InteractionMatrix(2, 2, [0, 2], [0, 1])


def test_weak_split_cardinality():
    R = InteractionMatrix.from_pairs([(0, 0), (0, 1), (1, 0), (1, 1)], 2, 2)
    s = split(R, SplitSpec("weak", 0.5, seed=7))
    assert s.test_target.nnz == 2
    assert s.train.nnz == 2
    assert s.test_input is s.train


def test_strong_split_holdout_half():
    R = InteractionMatrix.from_pairs([(0, i) for i in range(4)], 1, 4)
    s = split(R, SplitSpec("strong", 0.5, holdout_fraction=0.5, seed=3))
    assert s.test_input.nnz == 2
    assert s.test_target.nnz == 2
    assert s.train.nnz == 0


def test_strong_split_skips_singletons():
    R = InteractionMatrix.from_pairs([(0, 0), (1, 0), (1, 1)], 2, 2)
    s = split(R, SplitSpec("strong", 0.99, seed=0))
    assert s.skipped_users == 1
    assert s.metadata()["skipped_users"] == 1


@pytest.mark.parametrize("mode", ["strong", "weak"])
def test_split_conserves_and_is_disjoint(mode):
    R = random_interactions(40, 25, 0.2, seed=5)
    s = split(R, SplitSpec(mode, 0.3, 0.25, seed=11))
    tr, ti, tt = s.train.entries, s.test_input.entries, s.test_target.entries
    assert not tr & tt
    assert not ti & tt
    side = tr | ti | tt
    assert side == R.entries
    if mode == "strong":
        assert len(tr) + len(ti) + len(tt) == R.nnz


@pytest.mark.parametrize("mode", ["strong", "weak"])
def test_split_deterministic(tmp_path, mode):
    R = random_interactions(40, 25, 0.2, seed=5)
    users = IdMap([f"u{i}" for i in range(40)])
    items = IdMap([f"i{i}" for i in range(25)])
    for run in ("a", "b"):
        save_split(tmp_path / run, split(R, SplitSpec(mode, 0.3, 0.25, seed=11)), users, items)
    for name in ("train.tsv", "test_input.tsv", "test_target.tsv", "split.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_split_seed_matters():
    R = random_interactions(40, 25, 0.2, seed=5)
    a = split(R, SplitSpec("weak", 0.3, seed=1)).test_target.entries
    b = split(R, SplitSpec("weak", 0.3, seed=2)).test_target.entries
    assert a != b


def test_save_load_split(tmp_path):
    R = random_interactions(30, 12, 0.3, seed=2)
    users = IdMap([f"u{i}" for i in range(30)])
    items = IdMap([f"i{i}" for i in range(12)])
    s = split(R, SplitSpec("strong", 0.3, 0.4, seed=9))
    save_split(tmp_path, s, users, items)
    back, _, _ = load_split(tmp_path)
    assert back.train.entries == s.train.entries
    assert back.test_target.entries == s.test_target.entries
    assert back.spec == s.spec


@pytest.mark.parametrize("kwargs", [dict(mode="both", test_fraction=0.2),
                                    dict(mode="weak", test_fraction=1.0),
                                    dict(mode="strong", test_fraction=0.2, holdout_fraction=0.0)])
def test_bad_split_spec(kwargs):
    with pytest.raises(DataError):
        SplitSpec(**kwargs)


def test_gram_identity_pattern():
    g = gram(InteractionMatrix.from_pairs([(0, 0), (1, 1)], 2, 2))
    np.testing.assert_array_equal(g.gram, np.eye(2))


def test_gram_small_example():
    g = gram(InteractionMatrix.from_pairs([(0, 0), (0, 1), (1, 0)], 2, 2))
    np.testing.assert_array_equal(g.gram, [[2, 1], [1, 1]])
    np.testing.assert_array_equal(g.item_counts, [2, 1])


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 8), n=st.integers(1, 6), density=st.floats(0.0, 1.0),
       seed=st.integers(0, 2**32 - 1))
def test_gram_matches_brute_force(m, n, density, seed):
    R = random_interactions(m, n, density, seed=seed, ensure_item_coverage=False)
    g = gram(R)
    np.testing.assert_array_equal(g.gram, brute_gram(R).astype(float))
    assert np.array_equal(g.gram, g.gram.T)
    np.testing.assert_array_equal(np.diag(g.gram), R.item_counts())
    np.testing.assert_array_equal(g.item_counts, R.item_counts())


def test_gram_is_read_only(small_gram):
    with pytest.raises(ValueError):
        small_gram.gram[0, 0] = 5.0


def test_gram_from_matrix_symmetrizes():
    g = GramBundle.from_matrix([[2.0, 1.0], [0.0, 1.0]])
    np.testing.assert_array_equal(g.gram, [[2, 1], [1, 1]])


def test_zero_columns():
    R = InteractionMatrix.from_pairs([(0, 0), (1, 1), (1, 3)], 2, 4)
    assert check_no_zero_columns(R) == [2]
    assert check_no_zero_columns(InteractionMatrix.from_pairs([(0, 0), (0, 1)], 1, 2)) == []
    assert check_no_zero_columns(InteractionMatrix(1, 3, [], [])) == [0, 1, 2]


def test_select_items_remaps():
    R = InteractionMatrix.from_pairs([(0, 0), (0, 2), (1, 2)], 2, 3)
    sub = R.select_items(np.array([0, 2]))
    assert sub.shape == (2, 2)
    assert sub.entries == {(0, 0), (0, 1), (1, 1)}
