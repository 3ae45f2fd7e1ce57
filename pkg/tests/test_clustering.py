"""Linkage, cuts, and silhouette selection.

The linkage oracle recomputes every merge height from first principles
(exact rational arithmetic over the original point distances) instead
of Lance-Williams updates, so implementation and oracle share no code
path. Silhouette is checked against a textbook per-point recompute and
scipy/sklearn as secondary references.
"""

import random
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
import scipy.cluster.hierarchy as sch
from sklearn.metrics import adjusted_rand_score, silhouette_score

from wpnmine.clustering import (
    Dendrogram,
    cut,
    default_k_schedule,
    cluster_wpns,
    linkage,
    load_clusters,
    save_clusters,
    scan_cuts,
    select_cut,
    silhouette,
)
from wpnmine.embeddings import SgnsParams, TermSimilarityMatrix, build_vocab, term_similarity, train_skipgram
from wpnmine.errors import ConfigError, PipelineError
from wpnmine.similarity import DistanceMatrix

from conftest import small_synthetic


def dm_from_square(square: np.ndarray) -> DistanceMatrix:
    n = square.shape[0]
    condensed = np.array(
        [square[i, j] for i in range(n) for j in range(i + 1, n)], dtype=np.float64
    )
    return DistanceMatrix(ids=tuple(f"p{i}" for i in range(n)), condensed=condensed)


def random_square(rng: random.Random, n: int) -> np.ndarray:
    square = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            square[i, j] = square[j, i] = rng.random()
    return square


def naive_linkage(square: np.ndarray, method: str):
    """O(n^3) recompute-from-scratch oracle with exact arithmetic."""
    n = square.shape[0]
    original = [[Fraction(float(square[i, j])) for j in range(n)] for i in range(n)]
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    steps = []
    next_id = n
    for _ in range(n - 1):
        best = None
        for i, j in combinations(sorted(clusters), 2):
            cross = [original[p][q] for p in clusters[i] for q in clusters[j]]
            if method == "average":
                height = sum(cross) / len(cross)
            else:
                height = max(cross)
            candidate = (height, i, j)
            if best is None or candidate < best:
                best = candidate
        height, i, j = best
        members = clusters.pop(i) + clusters.pop(j)
        clusters[next_id] = members
        steps.append((i, j, height, len(members)))
        next_id += 1
    return steps


class TestLinkageOracle:
    @pytest.mark.parametrize("method", ["average", "complete"])
    def test_100_random_matrices_exact(self, method):
        rng = random.Random(2024 if method == "average" else 4048)
        for trial in range(100):
            n = rng.randint(3, 20)
            square = random_square(rng, n)
            dendrogram = linkage(dm_from_square(square), method=method)
            expected = naive_linkage(square, method)
            assert len(dendrogram.steps) == n - 1
            for step, (i, j, height, count) in zip(dendrogram.steps, expected):
                assert (step.left, step.right) == (i, j), f"trial {trial}"
                assert step.height == float(height), f"trial {trial}"
                assert step.size == count

    @pytest.mark.parametrize("method", ["average", "complete"])
    def test_scipy_agrees(self, method):
        rng = random.Random(55)
        for _ in range(10):
            n = rng.randint(4, 16)
            square = random_square(rng, n)
            dendrogram = linkage(dm_from_square(square), method=method)
            z = sch.linkage(dm_from_square(square).condensed, method=method)
            for step, row in zip(dendrogram.steps, z):
                assert {step.left, step.right} == {int(row[0]), int(row[1])}
                assert step.height == pytest.approx(float(row[2]), rel=1e-9)
                assert step.size == int(row[3])

    def test_exact_tie_breaks_lexicographically(self):
        square = np.ones((4, 4)) - np.eye(4)
        square[0, 1] = square[1, 0] = 0.5
        square[2, 3] = square[3, 2] = 0.5
        dendrogram = linkage(dm_from_square(square), method="average")
        first, second = dendrogram.steps[0], dendrogram.steps[1]
        assert (first.left, first.right) == (0, 1)
        assert (second.left, second.right) == (2, 3)

    @pytest.mark.parametrize("method", ["average", "complete"])
    def test_heights_monotone(self, method):
        rng = random.Random(8)
        for _ in range(20):
            square = random_square(rng, rng.randint(3, 15))
            steps = linkage(dm_from_square(square), method=method).steps
            for a, b in zip(steps, steps[1:]):
                assert a.height <= b.height

    def test_rejects_nan(self):
        square = random_square(random.Random(1), 5)
        square[0, 1] = square[1, 0] = float("nan")
        with pytest.raises(PipelineError):
            linkage(dm_from_square(square))

    def test_rejects_unknown_method(self):
        with pytest.raises(ConfigError):
            linkage(dm_from_square(random_square(random.Random(1), 4)), method="single")

    def test_deterministic(self):
        square = random_square(random.Random(3), 12)
        assert linkage(dm_from_square(square)) == linkage(dm_from_square(square))


class TestCut:
    def setup_dendrogram(self):
        square = random_square(random.Random(10), 9)
        return linkage(dm_from_square(square))

    def test_k_equals_n(self):
        d = self.setup_dendrogram()
        assert cut(d, 9) == list(range(9))

    def test_k_equals_one(self):
        d = self.setup_dendrogram()
        assert cut(d, 1) == [0] * 9

    def test_labels_dense_and_ordered_by_min_member(self):
        d = self.setup_dendrogram()
        for k in range(2, 9):
            labels = cut(d, k)
            assert sorted(set(labels)) == list(range(k))
            firsts = {}
            for idx, lab in enumerate(labels):
                firsts.setdefault(lab, idx)
            # label order tracks first appearance
            assert [firsts[lab] for lab in range(k)] == sorted(firsts.values())

    def test_out_of_range(self):
        d = self.setup_dendrogram()
        with pytest.raises(ConfigError):
            cut(d, 0)
        with pytest.raises(ConfigError):
            cut(d, 10)

    def test_merge_replay_consistency(self):
        # cutting at k then k-1 merges exactly one pair of clusters
        d = self.setup_dendrogram()
        for k in range(3, 9):
            coarse = cut(d, k - 1)
            fine = cut(d, k)
            merged_pairs = set()
            for fine_label in range(k):
                points = [i for i, lab in enumerate(fine) if lab == fine_label]
                coarse_labels = {coarse[p] for p in points}
                assert len(coarse_labels) == 1
                merged_pairs.add(coarse_labels.pop())
            assert len(merged_pairs) == k - 1


def silhouette_oracle(square: np.ndarray, labels) -> float:
    """Textbook per-point formula, no shared code with the kernel."""
    n = len(labels)
    values = []
    for i in range(n):
        own = labels[i]
        same = [j for j in range(n) if labels[j] == own and j != i]
        if not same:
            values.append(0.0)
            continue
        a = float(np.mean([square[i, j] for j in same]))
        b = min(
            float(np.mean([square[i, j] for j in range(n) if labels[j] == c]))
            for c in set(labels)
            if c != own
        )
        m = max(a, b)
        values.append(0.0 if m == 0.0 else (b - a) / m)
    return float(np.mean(values))


class TestSilhouette:
    def test_per_point_oracle_random(self):
        rng = random.Random(77)
        for _ in range(60):
            n = rng.randint(4, 30)
            square = random_square(rng, n)
            k = rng.randint(2, n - 1)
            labels = [rng.randrange(k) for _ in range(n)]
            while len(set(labels)) < 2:
                labels = [rng.randrange(k) for _ in range(n)]
            got = silhouette(dm_from_square(square), labels)
            want = silhouette_oracle(square, labels)
            assert abs(got - want) < 1e-9

    def test_sklearn_agrees(self):
        rng = random.Random(13)
        for _ in range(10):
            n = rng.randint(6, 25)
            square = random_square(rng, n)
            labels = [rng.randrange(3) for _ in range(n)]
            while len(set(labels)) < 2:
                labels = [rng.randrange(3) for _ in range(n)]
            got = silhouette(dm_from_square(square), labels)
            want = float(silhouette_score(square, np.asarray(labels), metric="precomputed"))
            assert abs(got - want) < 1e-9

    def test_singleton_scores_zero(self):
        square = np.array(
            [
                [0.0, 0.1, 0.9],
                [0.1, 0.0, 0.9],
                [0.9, 0.9, 0.0],
            ]
        )
        # {0,1} vs singleton {2}: the singleton contributes zero
        value = silhouette(dm_from_square(square), [0, 0, 1])
        s0 = (0.9 - 0.1) / 0.9
        assert value == pytest.approx((s0 + s0 + 0.0) / 3, abs=1e-12)

    def test_single_cluster_rejected(self):
        square = random_square(random.Random(5), 4)
        with pytest.raises(ConfigError):
            silhouette(dm_from_square(square), [0, 0, 0, 0])

    def test_assignment_length_checked(self):
        square = random_square(random.Random(5), 4)
        with pytest.raises(ConfigError):
            silhouette(dm_from_square(square), [0, 1])


class TestScanCuts:
    def blob_square(self) -> np.ndarray:
        # three tight blobs of 4, far apart
        n = 12
        square = np.full((n, n), 0.9)
        for start in (0, 4, 8):
            for i in range(start, start + 4):
                for j in range(start, start + 4):
                    square[i, j] = 0.0 if i == j else 0.05
        return square

    def test_finds_planted_k(self):
        matrix = dm_from_square(self.blob_square())
        dendrogram = linkage(matrix)
        best_k, scores = scan_cuts(dendrogram, matrix, range(2, 11))
        assert best_k == 3
        assert max(scores, key=lambda k: scores[k]) == 3
        labels = select_cut(dendrogram, matrix, range(2, 11))
        assert labels == [0] * 4 + [1] * 4 + [2] * 4

    def test_all_ties_pick_smallest_k(self):
        # equidistant points: silhouette 0 for every k
        square = np.ones((5, 5)) - np.eye(5)
        matrix = dm_from_square(square)
        dendrogram = linkage(matrix)
        best_k, scores = scan_cuts(dendrogram, matrix, [2, 3, 4])
        assert set(scores.values()) == {0.0}
        assert best_k == 2

    def test_k_range_validated(self):
        matrix = dm_from_square(self.blob_square())
        dendrogram = linkage(matrix)
        with pytest.raises(ConfigError):
            scan_cuts(dendrogram, matrix, [1])
        with pytest.raises(ConfigError):
            scan_cuts(dendrogram, matrix, [12])
        with pytest.raises(ConfigError):
            scan_cuts(dendrogram, matrix, [])


class TestDefaultSchedule:
    def test_grid_shape(self):
        ks, ratio = default_k_schedule(100)
        assert ratio == 1.5
        assert ks[0] == 2
        assert ks[-1] == 50
        assert all(a < b for a, b in zip(ks, ks[1:]))

    def test_tiny_n(self):
        ks, _ = default_k_schedule(3)
        assert ks == [2]
        assert default_k_schedule(2)[0] == []


class TestClusterWpns:
    def test_recovers_synthetic_campaigns(self):
        result = small_synthetic(seed=21, n_noise=1)
        records = result.dataset.clusterable
        vocab = build_vocab(records, min_count=2)
        table = train_skipgram(records, vocab, SgnsParams())
        sim = term_similarity(table)
        clustering = cluster_wpns(records, sim, vocab)
        truth = [result.truth[r.id] for r in records]
        assert adjusted_rand_score(truth, list(clustering.assignment)) == 1.0
        assert clustering.k == 4

    def test_explicit_k_values(self):
        result = small_synthetic(seed=22, n_noise=0)
        records = result.dataset.clusterable
        vocab = build_vocab(records, min_count=2)
        table = train_skipgram(records, vocab, SgnsParams())
        sim = term_similarity(table)
        clustering = cluster_wpns(records, sim, vocab, k_values=[2, 3, 4])
        assert set(clustering.scores) == {2, 3, 4}
        assert clustering.k == 3

    def test_two_records(self):
        result = small_synthetic(seed=23)
        records = result.dataset.clusterable[:2]
        vocab = build_vocab(result.dataset.clusterable, min_count=2)
        table = train_skipgram(result.dataset.clusterable, vocab, SgnsParams())
        sim = term_similarity(table)
        clustering = cluster_wpns(records, sim, vocab)
        assert clustering.k == 1
        assert clustering.assignment == (0, 0)

    def test_cluster_domain_sets(self):
        result = small_synthetic(seed=24)
        records = result.dataset.clusterable
        vocab = build_vocab(records, min_count=2)
        table = train_skipgram(records, vocab, SgnsParams())
        sim = term_similarity(table)
        clustering = cluster_wpns(records, sim, vocab)
        by_size = sorted(clustering.clusters, key=lambda c: -len(c.members))
        assert len(by_size[0].source_domains) == 6  # giveaway plants
        assert len(by_size[0].landing_domains) == 2

    def test_roundtrip(self, tmp_path):
        result = small_synthetic(seed=25)
        records = result.dataset.clusterable
        vocab = build_vocab(records, min_count=2)
        table = train_skipgram(records, vocab, SgnsParams())
        sim = term_similarity(table)
        clustering = cluster_wpns(records, sim, vocab)
        path = tmp_path / "clusters.json"
        save_clusters(clustering, path)
        loaded = load_clusters(path)
        assert loaded.k == clustering.k
        assert loaded.assignment == clustering.assignment
        assert loaded.record_ids == clustering.record_ids
        assert loaded.clusters == clustering.clusters
        assert loaded.scores == clustering.scores
