import numpy as np
import pytest

from forensic_eval import oracle
from forensic_eval.cleanse import (
    SimilarityMatrix,
    cleanse_dataset,
    group,
    heatmap_csv_rows,
    similarity_matrix,
    ssim,
)
from forensic_eval.synth import base_image

from conftest import write_manifest_corpus


def gray(rng, h=64, w=64):
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)


def rgb(rng, h=48, w=48):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


class TestSsim:
    def test_self_similarity(self, rng):
        x = gray(rng)
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-6)

    def test_symmetry_exact(self, rng):
        for _ in range(5):
            a, b = gray(rng), gray(rng)
            assert ssim(a, b) == ssim(b, a)

    def test_inverted_checkerboard_negative(self):
        board = ((np.indices((32, 32)).sum(axis=0) % 2) * 255).astype(np.uint8)
        assert ssim(board, 255 - board) < 0.0

    def test_constant_offset_close_to_one(self):
        a = np.full((32, 32), 100, dtype=np.uint8)
        b = np.full((32, 32), 101, dtype=np.uint8)
        value = ssim(a, b)
        assert value < 1.0
        assert value == pytest.approx(oracle.ssim_windowed(a, b), abs=1e-9)
        # closed form: mus constant, variances zero
        c1 = (0.01 * 255) ** 2
        expected = (2 * 100 * 101 + c1) / (100**2 + 101**2 + c1)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_windowed_oracle_agreement(self, rng):
        for _ in range(3):
            a, b = gray(rng), gray(rng)
            assert ssim(a, b) == pytest.approx(oracle.ssim_windowed(a, b), abs=1e-9)

    def test_dimension_checks(self, rng):
        with pytest.raises(ValueError):
            ssim(gray(rng, 16, 16), gray(rng, 16, 17))
        with pytest.raises(ValueError):
            ssim(gray(rng, 8, 8), gray(rng, 8, 8))


class TestSimilarityMatrix:
    def test_identical_images(self, rng):
        img = gray(rng, 40, 40)
        matrix = similarity_matrix([("a", img), ("b", img.copy())], resize_to=(32, 32))
        assert matrix.values[0, 1] == pytest.approx(1.0, abs=1e-6)

    def test_symmetric_unit_diagonal(self, rng):
        items = [(f"i{k}", gray(rng, 30, 30)) for k in range(3)]
        matrix = similarity_matrix(items, resize_to=(24, 24))
        assert matrix.values.shape == (3, 3)
        assert np.array_equal(matrix.values, matrix.values.T)
        assert np.allclose(np.diag(matrix.values), 1.0, atol=1e-6)

    def test_entries_match_pairwise_ssim(self, rng):
        items = [(f"i{k}", base_image(k, f"i{k}", (48, 36))) for k in range(5)]
        matrix = similarity_matrix(items, resize_to=(32, 32))
        from forensic_eval.corpus import luma_u8, resize_bilinear

        for i in range(5):
            for j in range(i + 1, 5):
                planes = []
                for _, img in (items[i], items[j]):
                    resized = resize_bilinear(luma_u8(img).astype(np.float64), 32, 32)
                    planes.append(np.clip(np.floor(resized + 0.5), 0, 255))
                assert matrix.values[i, j] == pytest.approx(ssim(*planes), abs=1e-12)

    def test_worker_invariance(self, rng):
        items = [(f"i{k}", gray(rng, 40, 40)) for k in range(6)]
        base = similarity_matrix(items, resize_to=(24, 24), workers=1)
        multi = similarity_matrix(items, resize_to=(24, 24), workers=4)
        assert np.array_equal(base.values, multi.values)

    def test_needs_two(self, rng):
        with pytest.raises(ValueError):
            similarity_matrix([("one", gray(rng))])


def matrix_from_edges(n, edges, low=0.1, high=0.95):
    values = np.full((n, n), low)
    np.fill_diagonal(values, 1.0)
    for i, j in edges:
        values[i, j] = values[j, i] = high
    return SimilarityMatrix(ids=[f"n{k}" for k in range(n)], values=values)


class TestGroup:
    def test_chain_components(self):
        matrix = matrix_from_edges(5, [(0, 1), (1, 2)])
        groups = group(matrix, 0.9)
        assert groups.components == [["n0", "n1", "n2"], ["n3"], ["n4"]]
        assert groups.representatives == ["n0", "n3", "n4"]

    def test_no_edges_all_singletons(self):
        groups = group(matrix_from_edges(4, []), 0.9)
        assert len(groups.components) == 4

    def test_complete_graph_single_component(self):
        edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        groups = group(matrix_from_edges(4, edges), 0.9)
        assert len(groups.components) == 1
        assert groups.representatives == ["n0"]

    def test_matches_warshall_closure_classes(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 40))
            adjacency = rng.random((n, n)) < 0.08
            adjacency |= adjacency.T
            np.fill_diagonal(adjacency, False)
            values = np.where(adjacency, 0.95, 0.2)
            np.fill_diagonal(values, 1.0)
            matrix = SimilarityMatrix(ids=[f"n{k}" for k in range(n)], values=values)
            groups = group(matrix, 0.9)
            ours = {frozenset(int(m[1:]) for m in comp) for comp in groups.components}
            theirs = set(oracle.closure_classes(adjacency))
            assert ours == theirs

    def test_threshold_monotonicity(self, rng):
        n = 24
        values = rng.random((n, n))
        values = (values + values.T) / 2
        np.fill_diagonal(values, 1.0)
        matrix = SimilarityMatrix(ids=[f"n{k}" for k in range(n)], values=values)
        prev = None
        for threshold in (0.95, 0.8, 0.6, 0.4, 0.2):
            count = len(group(matrix, threshold).components)
            if prev is not None:
                assert count <= prev
            prev = count

    def test_threshold_validation(self):
        matrix = matrix_from_edges(2, [])
        with pytest.raises(ValueError):
            group(matrix, 0.0)
        with pytest.raises(ValueError):
            group(matrix, 1.5)


class TestCleanseDataset:
    def _corpus(self, tmp_path):
        dup = base_image(1, "dup", (48, 48))
        imgs = {
            "a0": dup,
            "a1": dup.copy(),
            "a2": dup.copy(),
            "b0": base_image(2, "b0", (48, 48)),
            "c0": base_image(3, "c0", (48, 48)),
        }
        masks = {k: np.ones((48, 48), dtype=bool) for k in imgs}
        return write_manifest_corpus(tmp_path, masks, images=imgs)

    def test_duplicates_collapse(self, tmp_path):
        manifest = self._corpus(tmp_path)
        result = cleanse_dataset(manifest, 0.9, resize_to=(32, 32))
        assert len(result.manifest) == 3
        kept = {s.id for s in result.manifest.samples}
        assert kept == {"a0", "b0", "c0"}
        assert result.manifest.dataset == "fixture-C"

    def test_all_distinct_passthrough(self, tmp_path, rng):
        imgs = {f"u{k}": rgb(rng) for k in range(4)}
        masks = {k: np.ones((48, 48), dtype=bool) for k in imgs}
        manifest = write_manifest_corpus(tmp_path, masks, images=imgs)
        result = cleanse_dataset(manifest, 0.9, resize_to=(32, 32))
        assert [s.id for s in result.manifest.samples] == [s.id for s in manifest.samples]

    def test_idempotent(self, tmp_path):
        manifest = self._corpus(tmp_path)
        first = cleanse_dataset(manifest, 0.9, resize_to=(32, 32))
        second = cleanse_dataset(first.manifest, 0.9, resize_to=(32, 32))
        assert [s.id for s in second.manifest.samples] == [
            s.id for s in first.manifest.samples
        ]

    def test_report_structure(self, tmp_path):
        manifest = self._corpus(tmp_path)
        result = cleanse_dataset(manifest, 0.9, resize_to=(32, 32))
        assert result.report["threshold"] == 0.9
        assert result.report["resize"] == [32, 32]
        dup_component = next(
            c for c in result.report["components"] if len(c["members"]) == 3
        )
        assert dup_component["representative"] == "a0"
        assert len(dup_component["pairwise"]) == 3
        for _, _, value in dup_component["pairwise"]:
            assert value >= 0.9
        rows = heatmap_csv_rows(result.matrix)
        assert len(rows) == 5 and len(rows[0]) == 5

    def test_requires_two_manipulated(self, tmp_path, rng):
        masks = {"solo": np.ones((48, 48), dtype=bool)}
        imgs = {"solo": rgb(rng)}
        manifest = write_manifest_corpus(tmp_path, masks, images=imgs)
        with pytest.raises(ValueError, match="at least 2"):
            cleanse_dataset(manifest)

    def test_authentic_samples_pass_through(self, tmp_path):
        from forensic_eval.corpus import Manifest, SampleRecord, encode_image

        manifest = self._corpus(tmp_path)
        encode_image(base_image(9, "plain", (48, 48)), tmp_path / "images" / "plain.png")
        samples = manifest.samples + [
            SampleRecord(id="plain", image="images/plain.png", mask=None, label=0)
        ]
        mixed = Manifest(dataset="fixture", samples=samples, root=tmp_path)
        result = cleanse_dataset(mixed, 0.9, resize_to=(32, 32))
        kept = {s.id for s in result.manifest.samples}
        assert "plain" in kept
        assert kept == {"a0", "b0", "c0", "plain"}
