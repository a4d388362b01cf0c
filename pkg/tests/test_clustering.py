"""Seeding, soft-set partitioning, CL local search, and the full pipeline."""

import numpy as np
import pytest

from conftest import make_dataset
from oracles import (
    ALG1_TRACE_MERGE_WM,
    ALG1_TRACE_STAY_SPLIT_WM,
    ALG2_TRACE_COMMIT_WCL,
    ALG2_TRACE_GAINS,
    ALG2_TRACE_RELEASE_WCL,
)
from setclust.clustering import (
    Convergence,
    Group,
    Penalties,
    _partition_soft_set,
    cl_local_search,
    kmeans_baseline,
    kmeanspp_seed,
    lsck,
    lsck_hc,
    ml_penalty_cluster,
    resolve_penalties,
)
from setclust.constraints import CLSet, ConstraintCollection, MLSet


class TestKmeansppSeed:
    def test_k_equals_points(self):
        coords = np.array([[0.0], [3.0], [7.0]])
        centers, degenerate = kmeanspp_seed(coords, np.ones(3), 3, seed=0)
        assert sorted(centers[:, 0].tolist()) == [0.0, 3.0, 7.0]
        assert not degenerate

    def test_heavy_point_dominates_first_draw(self):
        coords = np.array([[0.0], [100.0]])
        weights = np.array([1.0, 1000.0])
        hits = sum(
            kmeanspp_seed(coords, weights, 1, seed=s)[0][0, 0] == 100.0
            for s in range(1000)
        )
        assert hits > 985  # expected ~999

    def test_degenerate_when_fewer_distinct_points(self):
        centers, degenerate = kmeanspp_seed(np.zeros((3, 2)), np.ones(3), 3, seed=0)
        assert degenerate
        assert centers.shape == (3, 2)

    def test_insufficient_weight(self):
        with pytest.raises(ValueError):
            kmeanspp_seed(np.zeros((2, 1)), np.ones(2), 3, seed=0)

    def test_deterministic(self, rng):
        coords = rng.normal(size=(30, 2))
        a, _ = kmeanspp_seed(coords, np.ones(30), 4, seed=9)
        b, _ = kmeanspp_seed(coords, np.ones(30), 4, seed=9)
        assert np.array_equal(a, b)


class TestSoftSetPartition:
    # 1-D instance: centers {0, 10}, soft set {1, 9}; split costs 1 + 1,
    # merged block (mass center 5) costs 82 at center 0
    POINTS = np.array([[1.0], [9.0]])
    CENTERS = np.array([[0.0], [10.0]])

    def test_stays_split_at_zero_penalty(self):
        parts = _partition_soft_set(self.POINTS, [0, 1], self.CENTERS,
                                    ALG1_TRACE_STAY_SPLIT_WM, squared=True)
        assert sorted(sorted(p) for p in parts) == [[0], [1]]

    def test_merges_above_break_even(self):
        parts = _partition_soft_set(self.POINTS, [0, 1], self.CENTERS,
                                    ALG1_TRACE_MERGE_WM, squared=True)
        assert sorted(sorted(p) for p in parts) == [[0, 1]]

    def test_huge_penalty_always_single_block(self, rng):
        points = rng.normal(size=(8, 2)) * 5
        centers = rng.normal(size=(3, 2)) * 5
        parts = _partition_soft_set(points, list(range(8)), centers,
                                    1e12, squared=True)
        assert sorted(sorted(p) for p in parts) == [list(range(8))]

    def test_tight_set_near_one_center_untouched(self):
        points = np.array([[0.1], [-0.1]])
        parts = _partition_soft_set(points, [0, 1], self.CENTERS, 0.0, squared=True)
        assert sorted(sorted(p) for p in parts) == [[0, 1]]

    def test_partition_preserves_members(self, rng):
        points = rng.normal(size=(10, 2)) * 3
        centers = rng.normal(size=(4, 2)) * 3
        for w_ml in (0.0, 1.0, 50.0):
            parts = _partition_soft_set(points, list(range(10)), centers,
                                        w_ml, squared=True)
            assert sorted(m for p in parts for m in p) == list(range(10))


def singleton_elements(coords):
    return [Group(members=(i,), centroid=np.asarray(c, dtype=float), weight=1)
            for i, c in enumerate(coords)]


class TestCLLocalSearch:
    # 1-D instance: centers {0, 10}, CL elements at {1, 2}; the min-cost
    # matching is 1->0 (cost 1), 2->10 (cost 64); both release gains are 60
    CENTERS = np.array([[0.0], [10.0]])
    ELEMENTS = singleton_elements([[1.0], [2.0]])

    def test_commit_keeps_matching(self):
        got = cl_local_search(self.ELEMENTS, [[0, 1]], self.CENTERS,
                              ALG2_TRACE_COMMIT_WCL)
        assert got == {0: 0, 1: 1}

    def test_release_collapses_to_nearest(self):
        got = cl_local_search(self.ELEMENTS, [[0, 1]], self.CENTERS,
                              ALG2_TRACE_RELEASE_WCL)
        assert got == {0: 0, 1: 0}

    def test_gain_trace_matches_hand_values(self):
        trace: list[float] = []
        cl_local_search(self.ELEMENTS, [[0, 1]], self.CENTERS,
                        ALG2_TRACE_COMMIT_WCL, gain_trace=trace)
        assert trace[:2] == [ALG2_TRACE_GAINS[1], ALG2_TRACE_GAINS[2]]

    def test_zero_penalty_gives_nearest_assignment(self):
        got = cl_local_search(self.ELEMENTS, [[0, 1]], self.CENTERS, 0.0)
        assert got == {0: 0, 1: 0}

    def test_single_element_set_goes_nearest(self):
        got = cl_local_search(singleton_elements([[7.0]]), [[0]], self.CENTERS, 5.0)
        assert got == {0: 1}

    def test_huge_penalty_pins_distinct_centers(self, rng):
        coords = rng.normal(size=(3, 2))
        centers = rng.normal(size=(4, 2)) * 10
        got = cl_local_search(singleton_elements(coords), [[0, 1, 2]],
                              centers, 1e12)
        assert len(set(got.values())) == 3

    def test_more_blocks_than_centers_rejected(self):
        with pytest.raises(ValueError, match="blocks"):
            cl_local_search(singleton_elements([[0.0], [1.0], [2.0]]),
                            [[0, 1, 2]], self.CENTERS, 1.0)

    def test_gains_never_negative(self, rng):
        # the invariant check would raise; assert the traced values directly
        for trial in range(20):
            coords = rng.normal(size=(4, 3))
            centers = rng.normal(size=(5, 3))
            trace: list[float] = []
            cl_local_search(singleton_elements(coords), [[0, 1, 2, 3]],
                            centers, float(rng.random()), gain_trace=trace)
            assert all(g >= -1e-9 for g in trace)


class TestMlPenaltyCluster:
    def test_hard_sets_become_blocks(self):
        data = make_dataset([[0.0], [0.1], [10.0], [10.1]])
        ml = [MLSet(members=(0, 1), hard=True), MLSet(members=(2, 3), hard=True)]
        groups, centers = ml_penalty_cluster(data, ml, Penalties(1.0, 1.0),
                                             k=2, seed=0)
        assert sorted(g.members for g in groups) == [(0, 1), (2, 3)]
        assert centers.shape == (2, 1)

    def test_overlapping_hard_sets_merge(self):
        data = make_dataset([[0.0], [0.1], [0.2]])
        ml = [MLSet(members=(0, 1), hard=True), MLSet(members=(1, 2), hard=True)]
        groups, _ = ml_penalty_cluster(data, ml, Penalties(1.0, 1.0), k=1, seed=0)
        assert groups[0].members == (0, 1, 2)
        assert groups[0].weight == 3


class TestFullPipeline:
    def _blobs(self, seed=0, n_per=20, sep=40.0):
        rng = np.random.default_rng(seed)
        pts, labels = [], []
        for c in range(3):
            pts.append(rng.normal(size=(n_per, 2)) + [c * sep, 0.0])
            labels += [c] * n_per
        return make_dataset(np.vstack(pts), labels=labels)

    def test_empty_constraints_match_baseline(self):
        data = self._blobs()
        constrained = lsck_hc(data, ConstraintCollection(), Penalties(1.0, 1.0),
                              k=3, seed=5)
        baseline = kmeans_baseline(data, k=3, seed=5)
        assert np.array_equal(constrained.labels, baseline.labels)
        assert constrained.objective == pytest.approx(baseline.objective)

    def test_hard_ml_always_co_clustered(self):
        data = self._blobs(seed=1)
        ml = [MLSet(members=(0, 1, 2), hard=True), MLSet(members=(20, 21), hard=True)]
        res = lsck_hc(data, ConstraintCollection(ml_sets=ml), Penalties(1.0, 1.0),
                      k=3, seed=2)
        assert len(set(res.labels[[0, 1, 2]])) == 1
        assert res.labels[20] == res.labels[21]

    def test_huge_cl_penalty_separates(self):
        data = self._blobs(seed=2)
        cl = [CLSet(members=(0, 20, 40))]
        res = lsck_hc(data, ConstraintCollection(cl_sets=cl),
                      Penalties(1.0, 1e12), k=3, seed=3)
        assert len(set(res.labels[[0, 20, 40]])) == 3

    def test_lsck_equals_lsck_hc_without_hard_sets(self):
        data = self._blobs(seed=3)
        coll = ConstraintCollection(
            ml_sets=[MLSet(members=(0, 1), hard=False)],
            cl_sets=[CLSet(members=(0, 20))])
        a = lsck(data, coll, Penalties(1.0, 1.0), k=3, seed=4)
        b = lsck_hc(data, coll, Penalties(1.0, 1.0), k=3, seed=4)
        assert np.array_equal(a.labels, b.labels)

    def test_min_gain_seen_nonnegative(self):
        data = self._blobs(seed=4)
        coll = ConstraintCollection(cl_sets=[CLSet(members=(0, 20, 40))])
        res = lsck_hc(data, coll, Penalties(1.0, 1.0), k=3, seed=0)
        assert res.min_gain_seen >= -1e-9

    def test_deterministic(self):
        data = self._blobs(seed=5)
        coll = ConstraintCollection(
            ml_sets=[MLSet(members=(0, 1), hard=True)],
            cl_sets=[CLSet(members=(0, 20))])
        a = lsck_hc(data, coll, Penalties(1.0, 1.0), k=3, seed=6)
        b = lsck_hc(data, coll, Penalties(1.0, 1.0), k=3, seed=6)
        assert np.array_equal(a.labels, b.labels)
        assert a.objective == b.objective

    def test_k_out_of_range(self):
        data = self._blobs()
        with pytest.raises(ValueError):
            lsck_hc(data, ConstraintCollection(), Penalties(1.0, 1.0),
                    k=0, seed=0)


class TestKmeansBaseline:
    def test_k1_is_global_mean(self, rng):
        pts = rng.normal(size=(15, 3))
        data = make_dataset(pts)
        res = kmeans_baseline(data, k=1, seed=0)
        assert np.allclose(res.centers[0], pts.mean(axis=0))
        assert res.objective == pytest.approx(((pts - pts.mean(axis=0)) ** 2).sum())

    def test_more_iterations_never_worse(self, rng):
        data = make_dataset(rng.normal(size=(40, 2)) * 5)
        short = kmeans_baseline(data, k=3, seed=1,
                                convergence=Convergence(max_iters=1))
        long = kmeans_baseline(data, k=3, seed=1,
                               convergence=Convergence(max_iters=100))
        assert long.objective <= short.objective + 1e-9

    def test_converged_flag(self, rng):
        data = make_dataset(rng.normal(size=(30, 2)))
        res = kmeans_baseline(data, k=2, seed=0)
        assert res.converged


class TestPenalties:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Penalties(-1.0, 0.0)

    def test_auto_resolution_squared(self, rng):
        data = make_dataset(rng.normal(size=(25, 2)) * 3)
        base = kmeans_baseline(data, k=4, seed=2)
        pen = resolve_penalties(data, k=4, seed=2)
        assert pen.w_ml == pytest.approx(base.objective / 25)
        assert pen.w_cl == pytest.approx(base.objective / 4)
