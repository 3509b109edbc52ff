import numpy as np
import pytest

from forensic_eval import oracle
from forensic_eval.corpus import decode_mask, decode_scoremap, load_manifest
from forensic_eval.metrics_pixel import evaluate_pixel
from forensic_eval.synth import (
    ImageTooSmallError,
    TamperSpec,
    base_image,
    build_test_corpus,
    copy_move,
    inpaint,
)


def spec(kind="copy_move", seed=7, area=(0.01, 0.15)):
    return TamperSpec(kind=kind, area_fraction_range=area, seed=seed)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            TamperSpec(kind="splice", seed=1)
        with pytest.raises(ValueError):
            TamperSpec(kind="inpaint", area_fraction_range=(0.5, 0.2), seed=1)
        with pytest.raises(ValueError):
            TamperSpec(kind="inpaint", area_fraction_range=(0.0, 0.2), seed=1)


class TestBaseImage:
    def test_deterministic(self):
        a = base_image(3, "x", (32, 24))
        b = base_image(3, "x", (32, 24))
        assert np.array_equal(a, b)
        c = base_image(4, "x", (32, 24))
        assert not np.array_equal(a, c)

    def test_shape_and_dtype(self):
        img = base_image(0, "y", (20, 10))
        assert img.shape == (10, 20, 3) and img.dtype == np.uint8


class TestCopyMove:
    def test_mask_popcount_is_rectangle_area(self):
        img = base_image(1, "a", (64, 64))
        _, mask = copy_move(img, spec(), "a")
        ys, xs = np.nonzero(mask)
        h = ys.max() - ys.min() + 1
        w = xs.max() - xs.min() + 1
        assert int(mask.sum()) == h * w
        assert h == w  # square regions

    def test_destination_equals_source_bytes(self):
        img = base_image(2, "b", (64, 64))
        out, mask = copy_move(img, spec(), "b")
        ys, xs = np.nonzero(mask)
        y0, x0, side = ys.min(), xs.min(), ys.max() - ys.min() + 1
        dst = out[y0 : y0 + side, x0 : x0 + side]
        # destination content exists somewhere in the original image
        found = any(
            np.array_equal(dst, img[sy : sy + side, sx : sx + side])
            for sy in range(img.shape[0] - side + 1)
            for sx in range(img.shape[1] - side + 1)
        )
        assert found
        assert np.array_equal(out[~mask], img[~mask])

    def test_deterministic(self):
        img = base_image(5, "c", (48, 48))
        out1, mask1 = copy_move(img, spec(seed=11), "c")
        out2, mask2 = copy_move(img, spec(seed=11), "c")
        assert np.array_equal(out1, out2) and np.array_equal(mask1, mask2)
        out3, _ = copy_move(img, spec(seed=12), "c")
        assert not np.array_equal(out1, out3)

    def test_too_small(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(ImageTooSmallError):
            copy_move(img, spec(area=(0.97, 0.99)), "tiny")


class TestInpaint:
    def test_outside_unchanged_and_mask_exact(self):
        img = base_image(6, "d", (64, 64))
        out, mask = inpaint(img, spec(kind="inpaint"), "d")
        assert np.array_equal(out[~mask], img[~mask])
        ys, xs = np.nonzero(mask)
        assert int(mask.sum()) == (ys.max() - ys.min() + 1) * (xs.max() - xs.min() + 1)

    def test_constant_image_fill_is_constant(self):
        img = np.full((32, 32, 3), 77, dtype=np.uint8)
        out, mask = inpaint(img, spec(kind="inpaint"), "e")
        assert np.array_equal(out, img)
        assert mask.any()

    def test_fill_matches_border_ring_oracle(self):
        img = base_image(9, "f", (48, 48))
        out, mask = inpaint(img, spec(kind="inpaint"), "f")
        ys, xs = np.nonzero(mask)
        y0, x0 = int(ys.min()), int(xs.min())
        side = int(ys.max() - ys.min() + 1)
        expected = oracle.border_ring_mean(img, y0, x0, side)
        filled = out[y0, x0]
        assert tuple(int(v) for v in filled) == expected
        assert (out[mask] == np.array(expected, dtype=np.uint8)).all()


class TestCorpus:
    def test_build_and_outcomes(self, tmp_path):
        manifest = build_test_corpus(6, (40, 40), spec(seed=21), tmp_path)
        assert len(manifest) == 6
        loaded = load_manifest(tmp_path / "manifest.json")
        assert loaded == manifest

        perfect = evaluate_pixel(loaded, tmp_path / "preds_perfect")
        assert perfect.aggregate["f1"] == 1.0
        assert perfect.aggregate["iou"] == 1.0

        empty = evaluate_pixel(loaded, tmp_path / "preds_empty")
        assert empty.aggregate["f1"] == 0.0
        for result in empty.per_sample:
            gt = decode_mask(tmp_path / "masks" / f"{result.id}.png")
            w = gt.mean()
            assert result.metrics.invert_f1 == pytest.approx(2 * w / (1 + w), abs=1e-9)

        complement = evaluate_pixel(loaded, tmp_path / "preds_complement")
        for result in complement.per_sample:
            assert result.metrics.f1 == 0.0
            assert result.metrics.permute_f1 == 1.0

    def test_masks_nontrivial(self, tmp_path):
        build_test_corpus(3, (32, 32), spec(kind="inpaint", seed=2), tmp_path)
        for i in range(3):
            mask = decode_mask(tmp_path / "masks" / f"synth_{i:04d}.png")
            assert 0 < int(mask.sum()) < mask.size

    def test_prediction_files_are_valid_scoremaps(self, tmp_path):
        build_test_corpus(1, (32, 32), spec(seed=3), tmp_path)
        scores = decode_scoremap(tmp_path / "preds_perfect" / "synth_0000.png")
        assert set(np.unique(scores)) <= {0.0, 1.0}

    def test_invalid_count(self, tmp_path):
        with pytest.raises(ValueError):
            build_test_corpus(0, (32, 32), spec(), tmp_path)
