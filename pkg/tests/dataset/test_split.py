import numpy as np
import pandas as pd
import pytest

from kmanb_toolkit import DataError, stratified_holdout, stratified_split

from tests.conftest import SMALL_FRIDGE


def test_split_is_stratified(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=1)
    assert train.class_counts() == {
        c: round(n * 0.7) for c, n in SMALL_FRIDGE.items()
    }
    assert len(train) + len(test) == len(small_fridge)
    assert test.class_counts() == {
        c: n - round(n * 0.7) for c, n in SMALL_FRIDGE.items()
    }


def test_split_partitions_rows(small_fridge):
    train, test = stratified_split(small_fridge, 0.7, seed=1)
    both = pd.concat([train.frame, test.frame])
    key = list(both.columns)
    merged = both.sort_values(key).reset_index(drop=True)
    original = small_fridge.frame.sort_values(key).reset_index(drop=True)
    pd.testing.assert_frame_equal(merged, original)


def test_split_is_seeded(small_fridge):
    a, _ = stratified_split(small_fridge, 0.7, seed=3)
    b, _ = stratified_split(small_fridge, 0.7, seed=3)
    c, _ = stratified_split(small_fridge, 0.7, seed=4)
    pd.testing.assert_frame_equal(a.frame, b.frame)
    assert not a.frame.equals(c.frame)


def test_every_class_keeps_a_test_row(toy):
    train, test = stratified_split(toy.take([0, 1, 3, 4]), 0.99)
    assert train.class_counts() == test.class_counts() == {
        "normal": 1,
        "ddos": 1,
    }


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
def test_split_rejects_fraction(toy, fraction):
    with pytest.raises(DataError):
        stratified_split(toy, fraction)


def test_split_rejects_singleton_class(toy):
    with pytest.raises(DataError, match="ddos"):
        stratified_split(toy.take([0, 1, 2, 3]))


def test_holdout_takes_a_floor_share_per_class(small_fridge):
    kept, held = stratified_holdout(small_fridge, 0.2, seed=2)
    assert np.intersect1d(kept, held).size == 0
    assert len(kept) + len(held) == len(small_fridge)
    assert small_fridge.take(held).class_counts() == {
        c: int(n * 0.2) for c, n in SMALL_FRIDGE.items()
    }


def test_holdout_never_empties_a_class(toy):
    kept, held = stratified_holdout(toy.take([0, 1, 2, 3]), 0.9, seed=1)
    assert held.tolist() != []
    assert toy.take([0, 1, 2, 3]).take(kept).class_counts() == {
        "normal": 1,
        "ddos": 1,
    }


def test_holdout_of_singletons_is_empty(toy):
    kept, held = stratified_holdout(toy.take([0, 3]), 0.5)
    assert kept.tolist() == [0, 1]
    assert held.size == 0


@pytest.mark.parametrize("fraction", [0.0, 1.0])
def test_holdout_rejects_fraction(toy, fraction):
    with pytest.raises(DataError):
        stratified_holdout(toy, fraction)
