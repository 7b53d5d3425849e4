import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from malliavin_sgd.errors import UsageError
from malliavin_sgd.rng import (
    NORMAL_METHOD,
    iter_blocks,
    philox_key,
    sample_increments,
    standard_normals,
)


def test_same_seed_same_batch():
    a = sample_increments(7, 0, 0, 2, 3, 1, 0.5)
    b = sample_increments(7, 0, 0, 2, 3, 1, 0.5)
    assert a.shape == (2, 3, 1)
    np.testing.assert_array_equal(a.data, b.data)
    assert a.meta.dt == 0.5 and a.meta.normal_method == NORMAL_METHOD


def test_distinct_keys_differ():
    base = sample_increments(7, 0, 0, 64, 2, 2, 1.0).data
    for key in [(8, 0, 0), (7, 1, 0), (7, 0, 1)]:
        other = sample_increments(*key, 64, 2, 2, 1.0).data
        assert not np.array_equal(base, other)
    assert not np.array_equal(philox_key(7, 0, 1), philox_key(7, 1, 0))


def test_moments_of_a_million_draws():
    z = sample_increments(2024, 0, 0, 1_000_000, 1, 1, 1.0).data.ravel()
    assert abs(z.mean()) < 4e-3
    w = sample_increments(2024, 1, 0, 1_000_000, 1, 1, 0.25).data.ravel()
    assert abs(w.var() - 0.25) < 0.002


def test_trials_are_uncorrelated():
    a = sample_increments(5, 0, 0, 200_000, 1, 1, 1.0).data.ravel()
    b = sample_increments(5, 1, 0, 200_000, 1, 1, 1.0).data.ravel()
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(200_000)


@given(
    st.integers(1, 40),
    st.integers(1, 5),
    st.integers(1, 7),
    st.integers(0, 39),
)
def test_blocks_concatenate_bit_identically(M, n, d, split):
    split = min(split, M)
    whole = standard_normals(99, 2, 3, M, n, d)
    parts = [standard_normals(99, 2, 3, s, n, d, path_offset=o) for o, s in [(0, split), (split, M - split)] if s]
    np.testing.assert_array_equal(np.concatenate(parts), whole)


@pytest.mark.parametrize("bad", [(0, 1, 1, 1.0), (1, 0, 1, 1.0), (1, 1, 0, 1.0), (1, 1, 1, 0.0), (1, 1, 1, -1.0)])
def test_invalid_requests(bad):
    M, n, d, dt = bad
    with pytest.raises(UsageError):
        sample_increments(1, 0, 0, M, n, d, dt)


def test_iter_blocks_covers_range():
    assert list(iter_blocks(10, 4)) == [(0, 4), (4, 4), (8, 2)]
    assert list(iter_blocks(0, 4)) == []
