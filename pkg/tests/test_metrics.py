import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidmem.errors import DimensionError, DomainError, UndefinedMetricError
from vidmem.metrics import average_ranks, mean_summary_f1, spearman_rc, summary_f1

from .oracles import pearson_of_ranks, rank_oracle


def test_spearman_worked_example():
    # ranks (1,3,2,4) vs (1,2,3,4): sum d^2 = 2, rho = 1 - 6*2/(4*15) = 0.8
    assert spearman_rc([0.1, 0.4, 0.3, 0.9], [0.2, 0.3, 0.5, 0.6]) == 0.8


def test_spearman_worked_example_concordance():
    # Kendall-style pair count gives an independent check of the ordering
    pred, gt = [0.1, 0.4, 0.3, 0.9], [0.2, 0.3, 0.5, 0.6]
    discordant = sum(
        (pred[i] - pred[j]) * (gt[i] - gt[j]) < 0 for i, j in itertools.combinations(range(4), 2)
    )
    assert discordant == 1


def test_spearman_extremes():
    x = [0.3, 0.1, 0.7, 0.2]
    assert spearman_rc(x, x) == 1.0
    assert spearman_rc(x, [-v for v in x]) == -1.0


def test_average_ranks_matches_quadratic_oracle():
    values = [3.0, 1.0, 3.0, 2.0, 3.0, 0.5]
    np.testing.assert_array_equal(average_ranks(values), rank_oracle(values))
    np.testing.assert_array_equal(average_ranks(values), [5, 2, 5, 3, 5, 1])


def test_spearman_matches_oracle_on_tie_free_vectors():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 65))
        a, b = rng.permutation(n) + rng.random(), rng.standard_normal(n)
        assert abs(spearman_rc(a, b) - pearson_of_ranks(a, b)) < 1e-12


def test_spearman_with_ties_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.integers(0, 4, 20).astype(float)
        b = rng.integers(0, 6, 20).astype(float)
        if len(set(a)) > 1 and len(set(b)) > 1:
            assert abs(spearman_rc(a, b) - pearson_of_ranks(a, b)) < 1e-12


@settings(max_examples=100)
@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=30, unique=True), st.randoms(use_true_random=False))
def test_spearman_invariant_under_monotone_transform(xs, rnd):
    x = np.array(xs, dtype=float)
    y = np.array(rnd.sample(range(100), len(xs)), dtype=float)
    base = spearman_rc(x, y)
    assert spearman_rc(np.exp(x / 100), y) == pytest.approx(base, abs=1e-12)
    assert spearman_rc(x, 3 * y + 7) == pytest.approx(base, abs=1e-12)
    assert -1.0 <= base <= 1.0


def test_spearman_undefined_cases():
    with pytest.raises(UndefinedMetricError):
        spearman_rc([0.5], [0.5])
    with pytest.raises(UndefinedMetricError):
        spearman_rc([1.0, 1.0, 1.0], [0.1, 0.2, 0.3])
    with pytest.raises(DimensionError):
        spearman_rc([1.0, 2.0], [1.0, 2.0, 3.0])


def test_summary_f1_examples():
    assert summary_f1({1, 2, 3}, {1, 2, 3}, 10).f1 == 1.0
    assert summary_f1({1, 2}, {3, 4}, 10).f1 == 0.0
    ev = summary_f1(range(50), range(30, 70), 100)
    assert (ev.precision, ev.recall) == (0.4, 0.5)
    assert ev.f1 == pytest.approx(4 / 9, abs=1e-15)


def test_summary_f1_empty_prediction_is_flagged():
    ev = summary_f1(set(), {1, 2}, 5, "v")
    assert ev.f1 == 0.0 and ev.per_video[0]["empty_summary"]


def test_summary_f1_frames_out_of_range():
    with pytest.raises(DomainError):
        summary_f1({10}, {1}, 10)


@settings(max_examples=100)
@given(st.sets(st.integers(0, 29), min_size=1), st.sets(st.integers(0, 29), min_size=1))
def test_summary_f1_symmetry_when_sizes_match(a, b):
    forward, backward = summary_f1(a, b, 30), summary_f1(b, a, 30)
    if len(a) == len(b):
        assert forward.f1 == backward.f1
    assert forward.precision == backward.recall


def test_mean_summary_f1():
    evs = [summary_f1({0}, {0}, 2, "a"), summary_f1({0}, {1}, 2, "b")]
    mean = mean_summary_f1(evs)
    assert mean.f1 == 0.5
    assert [e["video_id"] for e in mean.per_video] == ["a", "b"]
    with pytest.raises(DomainError):
        mean_summary_f1([])
