import numpy as np
import pytest

from forensic_eval.corpus import Manifest, SampleRecord, encode_mask, save_manifest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_mask(rng, height, width, density=0.5):
    return rng.random((height, width)) < density


def write_manifest_corpus(root, masks, images=None):
    """Write gt masks (and optional images) plus a manifest; all label 1."""
    (root / "masks").mkdir(parents=True, exist_ok=True)
    samples = []
    for sample_id, mask in masks.items():
        encode_mask(mask, root / "masks" / f"{sample_id}.png")
        image_rel = f"images/{sample_id}.png"
        if images is not None and sample_id in images:
            (root / "images").mkdir(parents=True, exist_ok=True)
            from forensic_eval.corpus import encode_image

            encode_image(images[sample_id], root / image_rel)
        samples.append(
            SampleRecord(id=sample_id, image=image_rel, mask=f"masks/{sample_id}.png", label=1)
        )
    manifest = Manifest(dataset="fixture", samples=samples, root=root)
    save_manifest(manifest, root / "manifest.json")
    return manifest
