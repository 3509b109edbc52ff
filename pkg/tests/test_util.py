import pytest

from forensic_eval.util import (
    BatchItemError,
    parallel_map,
    resolve_workers,
    sha256_file,
    stable_rng,
)


class TestStableRng:
    def test_same_inputs_same_stream(self):
        a = stable_rng(7, "sample", 3).integers(0, 1 << 30, size=8)
        b = stable_rng(7, "sample", 3).integers(0, 1 << 30, size=8)
        assert (a == b).all()

    def test_any_part_changes_stream(self):
        base = stable_rng(7, "sample", 3).integers(0, 1 << 30, size=8)
        for args in ((8, "sample", 3), (7, "other", 3), (7, "sample", 4)):
            assert not (stable_rng(*args).integers(0, 1 << 30, size=8) == base).all()


class TestResolveWorkers:
    def test_explicit(self):
        assert resolve_workers(3) == 3

    def test_env_default(self, monkeypatch):
        monkeypatch.setenv("FORENSIC_EVAL_WORKERS", "5")
        assert resolve_workers() == 5

    def test_invalid(self):
        with pytest.raises(ValueError):
            resolve_workers(0)


class TestParallelMap:
    def test_preserves_order(self):
        items = list(range(50))
        assert parallel_map(lambda x: x * x, items, workers=4) == [x * x for x in items]

    def test_empty(self):
        assert parallel_map(lambda x: x, [], workers=4) == []

    def test_error_index(self):
        def boom(x):
            if x == 3:
                raise RuntimeError("boom")
            return x

        with pytest.raises(BatchItemError) as excinfo:
            parallel_map(boom, range(6), workers=2)
        assert excinfo.value.index == 3
        assert isinstance(excinfo.value.cause, RuntimeError)


def test_sha256_file(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"abc")
    assert sha256_file(path) == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    )
