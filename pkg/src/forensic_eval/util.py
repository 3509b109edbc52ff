"""Shared helpers: deterministic seeding, worker pools, file digests."""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

WORKERS_ENV = "FORENSIC_EVAL_WORKERS"


def stable_rng(seed: int, *parts) -> np.random.Generator:
    """Generator seeded by (seed, *parts); stable across runs and platforms.

    Python's built-in hash() is salted per process, so the mix goes through
    sha256 instead.
    """
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    entropy = int.from_bytes(h.digest(), "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def resolve_workers(workers: int | None = None) -> int:
    """Explicit count, else FORENSIC_EVAL_WORKERS, else the CPU count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


class BatchItemError(RuntimeError):
    """Failure while processing one batch item; carries the item index."""

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"batch item {index}: {cause}")
        self.index = index
        self.cause = cause


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Map fn over items, preserving input order in the result.

    Results land in pre-assigned slots, so the output is independent of the
    worker count. The first failing item (by input index) is re-raised as
    BatchItemError.
    """
    workers = resolve_workers(workers)
    items = list(items)
    if not items:
        return []
    if workers == 1 or len(items) == 1:
        out = []
        for i, item in enumerate(items):
            try:
                out.append(fn(item))
            except Exception as exc:
                raise BatchItemError(i, exc) from exc
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
    out = []
    for i, fut in enumerate(futures):
        try:
            out.append(fut.result())
        except Exception as exc:
            raise BatchItemError(i, exc) from exc
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
