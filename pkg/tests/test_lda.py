import numpy as np
import pytest

from mcel.data import LabeledDataset, gen_blobs
from mcel.errors import DataFormatError
from mcel.lda import (
    LdaModel,
    SimilarityMatrix,
    build_similarity_matrix,
    class_means,
    fit_lda,
    load_similarity,
    save_similarity,
    scatter_matrices,
    uniform_similarity,
)


def make_model(means, projection=None):
    """LdaModel wrapper around explicit projected class means."""
    k = len(means)
    lam = len(means[0])
    proj = projection if projection is not None else np.eye(lam, lam)
    return LdaModel(
        projection=proj,
        eigenvalues=np.arange(lam, 0, -1, dtype=float),
        class_means=tuple(np.asarray(m, dtype=float) for m in means),
        num_components=lam,
        num_classes=k,
    )


class TestClassMeans:
    def test_singleton_classes(self):
        feats = np.array([[1.0, 2.0], [3.0, 4.0]])
        data = LabeledDataset(feats, np.array([0, 1]), 2)
        means = class_means(data)
        assert np.array_equal(means[0], [1, 2])
        assert np.array_equal(means[1], [3, 4])

    def test_midpoint(self):
        feats = np.array([[0.0, 0.0], [2.0, 2.0], [9.0, 9.0]])
        data = LabeledDataset(feats, np.array([0, 0, 1]), 2)
        assert np.array_equal(class_means(data)[0], [1.0, 1.0])

    def test_streaming_sum_oracle(self):
        data = gen_blobs(3, 40, 4, seed=3)
        means = class_means(data)
        for c in range(3):
            acc = np.zeros(4)
            count = 0
            for x, y in zip(data.features, data.labels):
                if y == c:
                    acc = acc + x
                    count += 1
            assert np.allclose(means[c], acc / count, atol=1e-12)

    def test_empty_class(self):
        feats = np.array([[0.0], [1.0]])
        data = LabeledDataset(feats, np.array([0, 2]), 3)
        with pytest.raises(ValueError, match="class 1"):
            class_means(data)


class TestFitLda:
    def test_two_class_fisher_closed_form(self):
        centers = np.array([[0.0, 0.0], [3.0, 1.0]])
        data = gen_blobs(2, 300, 2, centers=centers, spread=0.7, seed=1)
        model = fit_lda(data)
        sw, _, means = scatter_matrices(data)
        fisher = np.linalg.solve(sw, means[1] - means[0])
        direction = model.projection[0]
        cosine = np.dot(direction, fisher) / (
            np.linalg.norm(direction) * np.linalg.norm(fisher)
        )
        assert abs(cosine) >= 0.999

    def test_coincident_means(self):
        rng = np.random.default_rng(0)
        block = rng.standard_normal((200, 3))
        feats = np.vstack([block, block])
        labels = np.array([0] * 200 + [1] * 200)
        model = fit_lda(LabeledDataset(feats, labels, 2))
        assert model.eigenvalues[0] <= 1e-9

    def test_shape_contract(self):
        data = gen_blobs(3, 50, 4, seed=2)
        model = fit_lda(data, num_components=2)
        assert model.projection.shape == (2, 4)
        assert model.num_components == 2
        assert np.all(np.diff(model.eigenvalues) <= 1e-12)
        assert len(model.class_means) == 3
        assert all(v.shape == (2,) for v in model.class_means)

    def test_too_many_components(self):
        data = gen_blobs(3, 20, 4, seed=2)
        with pytest.raises(ValueError, match="num_components"):
            fit_lda(data, num_components=3)


class TestSimilarityMatrix:
    def test_two_class_forced_normalization(self):
        sim = build_similarity_matrix(make_model([[2.0], [-1.0]]))
        assert np.allclose(sim.a, [[0, 1], [1, 0]], atol=1e-15)

    def test_three_symmetric_directions(self):
        angles = [0.0, 2 * np.pi / 3, 4 * np.pi / 3]
        means = [[np.cos(t), np.sin(t)] for t in angles]
        sim = build_similarity_matrix(make_model(means))
        off = sim.a[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.5, atol=1e-12)

    def test_literal_formula_oracle(self):
        means = [[1.0, 0.0], [0.0, 1.0], [1 / np.sqrt(2), 1 / np.sqrt(2)]]
        sim = build_similarity_matrix(make_model(means))
        expected = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                vi, vj = np.array(means[i]), np.array(means[j])
                d = 1 - vi.dot(vj) / (np.linalg.norm(vi) * np.linalg.norm(vj))
                expected[i, j] = 1 / (1 + np.exp(d))
            expected[i] /= expected[i].sum()
        assert np.allclose(sim.a, expected, atol=1e-12)

    def test_zero_mean_rejected(self):
        with pytest.raises(ValueError, match="class 1"):
            build_similarity_matrix(make_model([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))

    def test_invariants_on_fitted_data(self):
        for k in (3, 10):
            data = gen_blobs(k, 60, 5, seed=k)
            sim = build_similarity_matrix(fit_lda(data))
            assert np.all(np.diag(sim.a) == 0.0)
            assert np.all(sim.a[~np.eye(k, dtype=bool)] > 0.0)
            assert np.allclose(sim.a.sum(axis=1), 1.0, atol=1e-12)

    def test_sign_flip_invariance(self):
        data = gen_blobs(4, 80, 5, seed=9)
        model = fit_lda(data)
        sim = build_similarity_matrix(model)
        flip = np.array([1.0, -1.0, 1.0])[: model.num_components]
        flipped = LdaModel(
            projection=model.projection * flip[:, None],
            eigenvalues=model.eigenvalues,
            class_means=tuple(v * flip for v in model.class_means),
            num_components=model.num_components,
            num_classes=model.num_classes,
        )
        assert np.max(np.abs(build_similarity_matrix(flipped).a - sim.a)) <= 1e-10

    def test_permutation_equivariance(self):
        data = gen_blobs(4, 80, 5, seed=10)
        model = fit_lda(data)
        sim = build_similarity_matrix(model)
        perm = np.array([2, 0, 3, 1])
        permuted = LdaModel(
            projection=model.projection,
            eigenvalues=model.eigenvalues,
            class_means=tuple(model.class_means[i] for i in np.argsort(perm)),
            num_components=model.num_components,
            num_classes=model.num_classes,
        )
        sim_p = build_similarity_matrix(permuted)
        for i in range(4):
            for j in range(4):
                assert abs(sim_p.a[perm[i], perm[j]] - sim.a[i, j]) <= 1e-12

    def test_raw_scores_symmetric_normalized_need_not_be(self):
        data = gen_blobs(5, 60, 4, seed=11)
        model = fit_lda(data)
        means = model.class_means
        k = len(means)
        s = np.zeros((k, k))
        for i in range(k):
            for j in range(k):
                if i != j:
                    d = 1 - means[i].dot(means[j]) / (
                        np.linalg.norm(means[i]) * np.linalg.norm(means[j])
                    )
                    s[i, j] = 1 / (1 + np.exp(d))
        assert np.allclose(s, s.T, atol=1e-12)
        sim = build_similarity_matrix(model)
        assert sim.asymmetry() >= 0.0


class TestSimilarityFile:
    def test_round_trip(self, tmp_path):
        data = gen_blobs(6, 40, 4, seed=12)
        sim = build_similarity_matrix(fit_lda(data))
        path = tmp_path / "sim.txt"
        save_similarity(sim, path)
        loaded = load_similarity(path)
        assert np.max(np.abs(loaded.a - sim.a)) <= 1e-15

    def test_comments_allowed(self, tmp_path):
        path = tmp_path / "sim.txt"
        path.write_text("# similarity for a toy problem\n2\n0 1\n1 0\n")
        sim = load_similarity(path)
        assert np.array_equal(sim.a, [[0, 1], [1, 0]])

    def test_nonzero_diagonal_rejected(self, tmp_path):
        path = tmp_path / "sim.txt"
        path.write_text("2\n0.1 0.9\n1 0\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_similarity(path)

    def test_bad_row_sum_rejected(self, tmp_path):
        data = gen_blobs(3, 30, 3, seed=13)
        sim = build_similarity_matrix(fit_lda(data))
        path = tmp_path / "sim.txt"
        save_similarity(sim, path)
        lines = path.read_text().splitlines()
        cells = lines[2].split()
        cells[0] = repr(float(cells[0]) - 0.1)
        lines[2] = " ".join(cells)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataFormatError, match="line 3.*sums"):
            load_similarity(path)

    def test_malformed_value_rejected(self, tmp_path):
        path = tmp_path / "sim.txt"
        path.write_text("2\n0 junk\n1 0\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_similarity(path)


def test_uniform_similarity():
    sim = uniform_similarity(5)
    assert np.allclose(sim.a.sum(axis=1), 1.0)
    assert np.all(np.diag(sim.a) == 0)
    assert np.allclose(sim.a[0, 1], 0.25)
