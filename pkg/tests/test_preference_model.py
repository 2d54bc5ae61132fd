import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from banditpref.errors import ConfigurationError
from banditpref.preference_model import (ComparisonDistribution, MultiwiseDataset, PairwiseDataset,
                                         RewardVector, btl_prob, hard_instance, pl_permutation_prob,
                                         sample_multiwise_dataset, sample_pairwise_dataset,
                                         uniform_tuples)

rewards = arrays(float, st.integers(2, 6), elements=st.floats(-20, 20))


class TestRewardVector:
    def test_normalized_pins_reference(self):
        r = RewardVector([3.0, 1.0, 2.0]).normalized()
        np.testing.assert_array_equal(r.values, [1.0, -1.0, 0.0])
        assert r.reference_arm == 2

    def test_rejects_short_or_nonfinite(self):
        with pytest.raises(ConfigurationError):
            RewardVector([1.0])
        with pytest.raises(ConfigurationError):
            RewardVector([0.0, np.inf])


class TestBtlProb:
    def test_examples(self):
        r = [1.0, 0.0, 0.0]
        assert round(btl_prob(r, 0, 2), 4) == 0.7311
        assert round(btl_prob(r, 0, 2), 2) == 0.73
        assert btl_prob([0.0, 0.0], 0, 1) == 0.5
        np.testing.assert_allclose(btl_prob(r, 2, 0), 1 / (1 + math.e), rtol=1e-14)
        np.testing.assert_allclose(btl_prob(r, 2, 0), 1 - btl_prob(r, 0, 2), rtol=1e-14)

    def test_bad_index(self):
        with pytest.raises(IndexError):
            btl_prob([0.0, 1.0], 0, 5)

    def test_large_rewards_do_not_overflow(self):
        assert btl_prob([1000.0, -1000.0], 0, 1) == 1.0
        assert btl_prob([1000.0, -1000.0], 1, 0) == 0.0

    @given(rewards, st.data())
    def test_complement_and_shift(self, r, data):
        a, b = data.draw(st.lists(st.integers(0, r.size - 1), min_size=2, max_size=2, unique=True))
        c = data.draw(st.floats(-50, 50))
        assert abs(btl_prob(r, a, b) + btl_prob(r, b, a) - 1) <= 1e-12
        assert abs(btl_prob(r, a, b) - btl_prob(r + c, a, b)) <= 1e-12


class TestPlackettLuce:
    def test_two_arms_is_btl(self):
        r = [0.3, -1.2, 0.5]
        assert abs(pl_permutation_prob(r, [0, 2], [0, 1]) - btl_prob(r, 0, 2)) < 1e-15
        assert abs(pl_permutation_prob(r, [0, 2], [1, 0]) - btl_prob(r, 2, 0)) < 1e-15

    def test_uniform(self):
        for sigma in itertools.permutations(range(3)):
            np.testing.assert_allclose(pl_permutation_prob([0, 0, 0], [0, 1, 2], sigma), 1 / 6, rtol=1e-14)

    def test_identity_by_hand(self):
        # arm 0 picked among three, then arm 1 between the remaining two
        e = math.e
        expected = e / (e + 2) * 0.5
        np.testing.assert_allclose(pl_permutation_prob([1, 0, 0], [0, 1, 2], [0, 1, 2]), expected, rtol=1e-14)
        total = sum(pl_permutation_prob([1, 0, 0], [0, 1, 2], s) for s in itertools.permutations(range(3)))
        assert abs(total - 1) < 1e-14

    @given(arrays(float, 6, elements=st.floats(-10, 10)), st.integers(2, 5))
    def test_sums_to_one(self, r, M):
        acts = list(range(M))
        total = sum(pl_permutation_prob(r, acts, s) for s in itertools.permutations(range(M)))
        assert abs(total - 1) <= 1e-10

    def test_invalid_sigma(self):
        with pytest.raises(ConfigurationError):
            pl_permutation_prob([0, 0, 0], [0, 1, 2], [0, 0, 1])


def _check_counts(d: PairwiseDataset):
    w = d.wins
    np.testing.assert_array_equal(d.counts, d.counts.T)
    np.testing.assert_array_equal(d.counts, w + w.T)
    assert np.triu(d.counts, 1).sum() == d.n
    np.testing.assert_array_equal(d.n_plus, w.sum(axis=1))
    np.testing.assert_array_equal(d.n_minus, w.sum(axis=0))


class TestPairwiseSampler:
    def test_n_bounds(self):
        r, mu = hard_instance(3, 60)
        with pytest.raises(ConfigurationError):
            sample_pairwise_dataset(mu, r, 0, 0)
        assert sample_pairwise_dataset(mu, r, 1, 0).n == 1

    def test_degenerate_distribution(self):
        with pytest.raises(ConfigurationError):
            ComparisonDistribution(np.zeros((3, 3)))

    def test_reproducible(self):
        r, mu = hard_instance(4, 100)
        a = sample_pairwise_dataset(mu, r, 100, 7)
        b = sample_pairwise_dataset(mu, r, 100, 7)
        c = sample_pairwise_dataset(mu, r, 100, 8)
        np.testing.assert_array_equal(a.first, b.first)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y) or not np.array_equal(a.first, c.first)

    @given(st.integers(0, 2**32), st.integers(3, 8), st.integers(1, 200))
    def test_count_identities(self, seed, K, n):
        mu = ComparisonDistribution.uniform(K)
        _check_counts(sample_pairwise_dataset(mu, np.linspace(0, 1, K), n, seed))

    def test_tail_pair_frequency(self):
        r, mu = hard_instance(3, 500)
        hits = sum(sample_pairwise_dataset(mu, r, 500, s).counts[0, 2] == 1 for s in range(10_000))
        expected = 500 * (1 - 1 / 500) ** 499 * (1 / 500)
        assert abs(expected - 0.3686) < 1e-3
        assert abs(hits / 10_000 - expected) < 0.015

    def test_win_rate(self):
        m = np.zeros((3, 3))
        m[0, 1] = m[1, 0] = 1.0
        d = sample_pairwise_dataset(ComparisonDistribution(m), [1.0, 0.0, 0.0], 100_000, 3)
        assert abs(d.wins[0, 1] / d.counts[0, 1] - 0.7311) < 0.01

    def test_dataset_validation(self):
        with pytest.raises(IndexError):
            PairwiseDataset([0, 3], [1, 0], [1, 0], 3)
        with pytest.raises(ConfigurationError):
            PairwiseDataset([0], [0], [1], 3)
        with pytest.raises(ConfigurationError):
            PairwiseDataset([0], [1], [0.5], 3)


class TestMultiwiseSampler:
    def test_two_wise_reduces(self):
        tuples, probs = uniform_tuples(4, 2)
        d = sample_multiwise_dataset(tuples, probs, [1.0, 0.2, 0.0, -0.5], 500, 4)
        p = d.to_pairwise()
        _check_counts(p)
        winners = d.ranked[:, 0]
        np.testing.assert_array_equal(p.n_plus, np.bincount(winners, minlength=4))

    def test_uniform_permutations(self):
        d = sample_multiwise_dataset([[0, 1, 2]], [1.0], [0.0, 0.0, 0.0], 100_000, 1)
        _, freq = np.unique(d.sigma, axis=0, return_counts=True)
        assert freq.size == 6
        np.testing.assert_allclose(freq / d.n, 1 / 6, atol=0.01)

    def test_first_place_frequency(self):
        r = [1.0, 0.0, 0.0]
        d = sample_multiwise_dataset([[0, 1, 2]], [1.0], r, 100_000, 2)
        expected = sum(pl_permutation_prob(r, [0, 1, 2], s)
                       for s in itertools.permutations(range(3)) if s[0] == 0)
        assert abs(np.mean(d.ranked[:, 0] == 0) - expected) < 0.01

    def test_arity_exceeds_arms(self):
        with pytest.raises(ConfigurationError):
            uniform_tuples(2, 3)
        with pytest.raises(ConfigurationError):
            sample_multiwise_dataset([[0, 1, 2]], [1.0], [0.0, 0.0], 5, 0)

    def test_sigma_must_be_permutation(self):
        with pytest.raises(ConfigurationError):
            MultiwiseDataset([[0, 1, 2]], [[0, 0, 1]], 3)


class TestHardInstance:
    def test_three_arms(self):
        r, mu = hard_instance(3, 500)
        np.testing.assert_array_equal(r.values, [1, 0, 0])
        assert mu.pair_mass[0, 1] == pytest.approx(0.998, abs=1e-15)
        assert mu.pair_mass[0, 2] == pytest.approx(0.002, abs=1e-15)
        assert mu.pair_mass[1, 2] == 0

    def test_sixty_samples(self):
        _, mu = hard_instance(3, 60)
        assert mu.pair_mass[0, 2] == pytest.approx(1 / 60)

    def test_ten_arms(self):
        _, mu = hard_instance(10, 60)
        np.testing.assert_allclose(mu.pair_mass[0, 2:], 1 / 60)
        assert mu.pair_mass[0, 1] == pytest.approx(52 / 60)
        assert abs(np.triu(mu.pair_mass, 1).sum() - 1) < 1e-12
        np.testing.assert_allclose(mu.marginals[0], 1.0)

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            hard_instance(2, 10)
        with pytest.raises(ConfigurationError):
            hard_instance(10, 7)
