import numpy as np
import pytest

from trajdim import (
    Barcode0,
    DistanceOracle,
    LossMatrix,
    WeightTrajectory,
    minimum_spanning_tree,
    total_persistence,
    vietoris_rips_barcode0,
)

from bruteforce import (
    exhaustive_minimum_spanning_weight,
    naive_euclidean,
    naive_loss_distance,
    naive_matrix,
)


def euclid_oracle(points):
    return DistanceOracle.euclidean(WeightTrajectory(points))


class TestMst:
    def test_collinear_hand_case(self):
        # all 3 spanning trees of {0,1,3}: {1,2}=3, {1,3}=4, {2,3}=5
        result = minimum_spanning_tree(euclid_oracle(np.array([[0.0], [1.0], [3.0]])), [0, 1, 2])
        assert sorted(result.edge_lengths) == [1.0, 2.0]
        assert result.total_weight == 3.0

    def test_two_points(self):
        result = minimum_spanning_tree(
            euclid_oracle(np.array([[0.0, 0.0], [0.6, 0.8]])), [0, 1]
        )
        assert result.edge_lengths.tolist() == [1.0]
        assert result.edges == [(0, 1)]

    def test_identical_points(self):
        pts = np.ones((6, 3))
        result = minimum_spanning_tree(euclid_oracle(pts), np.arange(6))
        assert np.all(result.edge_lengths == 0.0)
        assert result.total_weight == 0.0

    def test_subset_of_indices(self):
        pts = np.array([[0.0], [100.0], [1.0], [3.0]])
        result = minimum_spanning_tree(euclid_oracle(pts), [0, 2, 3])
        assert sorted(result.edge_lengths) == [1.0, 2.0]

    def test_duplicate_loss_rows_give_zero_length_edges(self):
        # distinct iterates at pseudometric distance zero are legitimate
        rows = np.array([[1.0, 2.0], [1.0, 2.0], [4.0, 8.0]])
        oracle = DistanceOracle.loss_based(LossMatrix(rows))
        result = minimum_spanning_tree(oracle, [0, 1, 2])
        lengths = sorted(result.edge_lengths)
        assert lengths[0] == 0.0 and lengths[1] > 0.0
        assert total_persistence(result.barcode(), 1.0) == lengths[1]

    def test_too_few_indices(self):
        with pytest.raises(ValueError):
            minimum_spanning_tree(euclid_oracle(np.zeros((3, 1))), [0])

    def test_duplicate_indices(self):
        with pytest.raises(ValueError):
            minimum_spanning_tree(euclid_oracle(np.zeros((3, 1))), [0, 0, 1])

    def test_non_finite_distance_names_pair(self):
        # only the squared distance between iterates 1 and 2 overflows
        pts = np.zeros((3, 1))
        pts[1, 0] = 8e153
        pts[2, 0] = -8e153
        with pytest.raises(ValueError, match=r"iterates (1 and 2|2 and 1)"):
            minimum_spanning_tree(euclid_oracle(pts), [0, 1, 2])

    def test_matches_exhaustive_enumeration(self):
        # mixed Euclidean / loss oracles, sizes 2..8, exact agreement
        rng = np.random.default_rng(11)
        for trial in range(200):
            n = 2 + trial % 7
            if trial % 2 == 0:
                pts = rng.random((n, 3))
                oracle = euclid_oracle(pts)
                matrix = naive_matrix(pts, naive_euclidean)
            else:
                rows = rng.random((n, 4))
                oracle = DistanceOracle.loss_based(LossMatrix(rows))
                matrix = naive_matrix(rows, naive_loss_distance)
            result = minimum_spanning_tree(oracle, np.arange(n))
            best_total, best_edges = exhaustive_minimum_spanning_weight(matrix)
            got = np.sort(result.edge_lengths)
            assert np.array_equal(got, best_edges)
            assert np.sum(got) == best_total


class TestTotalPersistence:
    def test_hand_sums(self):
        bars = Barcode0(np.array([1.0, 2.0]), point_count=3)
        assert total_persistence(bars, 1.0) == 3.0
        assert total_persistence(bars, 2.0) == 5.0

    def test_zero_bars(self):
        bars = Barcode0(np.zeros(4), point_count=5)
        assert total_persistence(bars, 1.0) == 0.0
        assert total_persistence(bars, 0.5) == 0.0

    def test_alpha_must_be_positive(self):
        bars = Barcode0(np.array([1.0]), point_count=2)
        with pytest.raises(ValueError):
            total_persistence(bars, 0.0)
        with pytest.raises(ValueError):
            total_persistence(bars, -1.0)

    def test_scaling_law(self):
        rng = np.random.default_rng(3)
        lengths = rng.random(20)
        bars = Barcode0(lengths, point_count=21)
        for alpha in (0.5, 1.0, 2.0, 2.5):
            for c in (0.25, 3.0, 17.0):
                scaled = Barcode0(c * lengths, point_count=21)
                expected = c**alpha * total_persistence(bars, alpha)
                assert total_persistence(scaled, alpha) == pytest.approx(
                    expected, rel=1e-12
                )


class TestBruteForceBarcode:
    def test_unit_square(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        bars = vietoris_rips_barcode0(naive_matrix(pts, naive_euclidean))
        assert bars.lengths.tolist() == [1.0, 1.0, 1.0]

    def test_two_points(self):
        bars = vietoris_rips_barcode0(np.array([[0.0, 2.5], [2.5, 0.0]]))
        assert bars.lengths.tolist() == [2.5]

    def test_rejects_asymmetric(self):
        m = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            vietoris_rips_barcode0(m)

    def test_rejects_nonzero_diagonal(self):
        m = np.array([[0.1, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError, match="diagonal"):
            vietoris_rips_barcode0(m)

    def test_rejects_oversize(self):
        with pytest.raises(ValueError, match="capped"):
            vietoris_rips_barcode0(np.zeros((513, 513)))


class TestBijection:
    def test_random_clouds_both_metrics(self):
        rng = np.random.default_rng(23)
        for trial in range(200):
            n = int(rng.integers(2, 65))
            if trial % 2 == 0:
                pts = rng.normal(size=(n, int(rng.integers(1, 5))))
                oracle = euclid_oracle(pts)
            else:
                oracle = DistanceOracle.loss_based(
                    LossMatrix(rng.random((n, int(rng.integers(1, 6)))))
                )
            mst_sorted = np.sort(
                minimum_spanning_tree(oracle, np.arange(n)).edge_lengths
            )
            bars = vietoris_rips_barcode0(oracle.pairwise_matrix()).lengths
            np.testing.assert_allclose(mst_sorted, bars, rtol=0.0, atol=1e-12)

    def test_barcode_accessor_matches(self):
        rng = np.random.default_rng(5)
        oracle = euclid_oracle(rng.random((30, 2)))
        result = minimum_spanning_tree(oracle, np.arange(30))
        assert np.array_equal(result.barcode().lengths, np.sort(result.edge_lengths))


class TestPermutationInvariance:
    def test_point_order_shuffle(self):
        rng = np.random.default_rng(9)
        pts = rng.random((40, 2))
        perm = rng.permutation(40)
        a = minimum_spanning_tree(euclid_oracle(pts), np.arange(40))
        b = minimum_spanning_tree(euclid_oracle(pts[perm]), np.arange(40))
        np.testing.assert_allclose(
            np.sort(a.edge_lengths), np.sort(b.edge_lengths), rtol=0.0, atol=1e-12
        )
        assert total_persistence(a.barcode(), 1.5) == pytest.approx(
            total_persistence(b.barcode(), 1.5), rel=1e-12
        )


class TestBarcodeInvariants:
    def test_bar_count_must_match(self):
        with pytest.raises(ValueError):
            Barcode0(np.array([1.0, 2.0]), point_count=2)

    def test_negative_bars_rejected(self):
        with pytest.raises(ValueError):
            Barcode0(np.array([-0.5]), point_count=2)
