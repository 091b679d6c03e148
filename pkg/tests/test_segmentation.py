import itertools

import numpy as np
import pytest

from vjmht.segmentation import (
    KtsConfig,
    ScatterTable,
    check_cuts,
    from_one_based_ranges,
    gram_matrix,
    kts,
    kts_dp,
    penalty,
    segment_cost,
    shot_lengths,
    to_one_based_ranges,
)


def direct_cost(K, a, b):
    """Scatter straight from the definition, no prefix sums."""
    block = K[a:b, a:b]
    return np.trace(block) - block.sum() / (b - a)


def exhaustive(K, m):
    M = len(K)
    best, best_cuts = np.inf, None
    for inner in itertools.combinations(range(1, M), m - 1):
        cuts = [0, *inner, M]
        c = sum(direct_cost(K, a, b) for a, b in zip(cuts[:-1], cuts[1:]))
        if c < best - 1e-12:
            best, best_cuts = c, cuts
    return best, best_cuts


class TestCuts:
    def test_valid(self):
        assert check_cuts([0, 3, 5], 5) == [0, 3, 5]
        np.testing.assert_array_equal(shot_lengths([0, 3, 5]), [3, 2])

    @pytest.mark.parametrize("cuts", [[0], [1, 4], [0, 2, 2, 4], [0, 3, 2]])
    def test_invalid(self, cuts):
        with pytest.raises(ValueError):
            check_cuts(cuts)

    def test_frame_count_mismatch(self):
        with pytest.raises(ValueError):
            check_cuts([0, 4], 5)

    def test_one_based_round_trip(self):
        assert to_one_based_ranges([0, 3, 5]) == [(1, 3), (4, 5)]
        assert from_one_based_ranges([(1, 3), (4, 5)]) == [0, 3, 5]
        with pytest.raises(ValueError):
            from_one_based_ranges([(1, 3), (5, 6)])


class TestGram:
    def test_orthonormal_is_identity(self):
        np.testing.assert_array_equal(gram_matrix(np.eye(4)), np.eye(4))

    def test_rbf_identical_frames(self):
        np.testing.assert_array_equal(gram_matrix(np.ones((3, 2)), "rbf"), 1.0)

    def test_loop_oracle(self, rng):
        x = rng.normal(size=(5, 3))
        K = np.zeros((5, 5))
        for i in range(5):
            for j in range(5):
                K[i, j] = sum(x[i, t] * x[j, t] for t in range(3))
        np.testing.assert_allclose(gram_matrix(x), K, rtol=0, atol=1e-12)
        Kr = gram_matrix(x, "rbf", sigma=1.5)
        i, j = 1, 3
        assert abs(Kr[i, j] - np.exp(-((x[i] - x[j]) ** 2).sum() / (2 * 1.5 ** 2))) < 1e-12
        np.testing.assert_allclose(Kr, Kr.T)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gram_matrix(np.zeros((0, 3)))


class TestSegmentCost:
    def test_single_frame(self, rng):
        K = gram_matrix(rng.normal(size=(6, 3)))
        for a in range(6):
            assert abs(segment_cost(K, a, a + 1)) < 1e-12

    def test_identical_frames(self):
        K = gram_matrix(np.tile([[1.0, 2.0, -1.0]], (5, 1)))
        assert abs(segment_cost(K, 0, 5)) < 1e-12
        assert abs(segment_cost(K, 1, 4)) < 1e-12

    def test_two_orthonormal_frames(self):
        assert segment_cost(np.eye(2), 0, 2) == 1.0

    def test_prefix_sums_match_definition(self, rng):
        K = gram_matrix(rng.normal(size=(9, 4)))
        table = ScatterTable(K)
        J = table.matrix()
        for a in range(9):
            for b in range(a + 1, 10):
                assert abs(table.cost(a, b) - direct_cost(K, a, b)) < 1e-9
                assert J[a, b] == table.cost(a, b)
        assert np.isinf(J[3, 3]) and np.isinf(J[5, 2])

    def test_empty_range(self):
        with pytest.raises(ValueError):
            segment_cost(np.eye(3), 2, 2)


class TestKts:
    def test_constant_sequence(self):
        assert kts(np.ones((10, 3))) == [0, 10]

    def test_forced_two_segments(self):
        x = np.array([0, 0, 0, 5, 5, 5], dtype=float)[:, None]
        assert kts(x, n_segments=2) == [0, 3, 6]

    def test_step_signal_found_unforced(self):
        x = np.repeat(np.eye(3) * 10, [7, 5, 8], axis=0)
        assert kts(x, KtsConfig(max_segments=6)) == [0, 7, 12, 20]

    @pytest.mark.parametrize("M", [2, 5, 8, 11])
    def test_exhaustive(self, M, rng):
        x = rng.normal(size=(M, 3))
        K = gram_matrix(x)
        costs, cuts = kts_dp(K, 4)
        for m in range(1, min(4, M) + 1):
            c, best = exhaustive(K, m)
            assert abs(costs[m - 1] - c) < 1e-9
            assert cuts[m - 1] == best

    def test_costs_non_increasing(self, rng):
        costs, _ = kts_dp(gram_matrix(rng.normal(size=(30, 4))), 12)
        assert np.all(np.diff(costs) <= 1e-9)

    def test_earliest_cut_on_ties(self):
        # every placement has zero cost, so the smallest indices must win
        _, cuts = kts_dp(gram_matrix(np.ones((6, 2))), 3)
        assert cuts == [[0, 6], [0, 1, 6], [0, 1, 2, 6]]

    def test_output_is_valid(self, rng):
        for M in (1, 3, 17):
            cuts = kts(rng.normal(size=(M, 2)), KtsConfig(max_segments=5))
            check_cuts(cuts, M)

    def test_appending_last_frame_is_stable(self, rng):
        for _ in range(10):
            x = np.repeat(rng.normal(size=(4, 3)) * 3, rng.integers(2, 6, size=4), axis=0)
            x = x + rng.normal(scale=0.1, size=x.shape)
            cfg = KtsConfig(max_segments=8, penalty_coefficient=0.5)
            m0 = len(kts(x, cfg)) - 1
            m1 = len(kts(np.vstack([x, x[-1:]]), cfg)) - 1
            assert m1 >= m0 - 1

    def test_penalty(self):
        assert penalty(1, np.e) == 2.0
        assert penalty(2, 8, 0.5) == 0.5 * 2 * (np.log(4) + 1)

    def test_errors(self):
        with pytest.raises(ValueError):
            kts(np.zeros((0, 2)))
        with pytest.raises(ValueError):
            kts(np.zeros((3, 2)), n_segments=4)
        with pytest.raises(ValueError):
            KtsConfig(max_segments=0)

    def test_rbf_kernel_runs(self, rng):
        x = np.repeat(np.eye(2) * 3, [5, 5], axis=0) + rng.normal(scale=0.05, size=(10, 2))
        assert kts(x, KtsConfig(max_segments=4, kernel="rbf", penalty_coefficient=0.1)) == [0, 5, 10]
