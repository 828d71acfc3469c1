"""Dense vector algebra, Rand-K masks, and the keyed random-number substrate.

Model state throughout this package is a 1-D float64 numpy array.  All
reductions use a fixed ascending-index summation order, and every random
draw goes through a keyed :class:`RngStream`, so two runs with the same
root seed are bit-identical regardless of how callers interleave their
draws.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError

__all__ = [
    "Mask",
    "RngStream",
    "as_model_vector",
    "check_finite",
    "axpy",
    "project_mask",
    "sample_rand_k",
    "full_mask",
    "average",
]


def as_model_vector(values, dim: int | None = None) -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float64 array of length ``dim``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigurationError(f"model vector must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise ConfigurationError(f"model vector has length {arr.size}, expected {dim}")
    check_finite(arr)
    return arr


def check_finite(arr: np.ndarray, context: str = "vector") -> None:
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(f"non-finite values in {context}")


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``y + a * x`` elementwise; inputs are not modified."""
    if x.shape != y.shape:
        raise ConfigurationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = y + a * x
    check_finite(out, "axpy result")
    return out


@dataclass(frozen=True)
class Mask:
    """A set of ``k`` distinct coordinate indices out of ``d``.

    ``indices`` is strictly increasing; projecting onto a mask keeps the
    listed coordinates and zeroes the rest.
    """

    indices: tuple[int, ...]
    k: int
    d: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not 1 <= self.k <= self.d:
            raise ConfigurationError(f"mask size k={self.k} outside [1, {self.d}]")
        if len(idx) != self.k:
            raise ConfigurationError(f"mask has {len(idx)} indices, expected k={self.k}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigurationError("mask indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.d:
            raise ConfigurationError(f"mask indices out of range [0, {self.d})")

    @classmethod
    def from_indices(cls, indices, d: int) -> "Mask":
        idx = tuple(sorted(int(i) for i in indices))
        return cls(indices=idx, k=len(idx), d=d)

    def complement(self) -> "Mask":
        if self.k == self.d:
            raise ConfigurationError("complement of a full mask is empty")
        chosen = set(self.indices)
        return Mask.from_indices([i for i in range(self.d) if i not in chosen], self.d)

    def bool_array(self) -> np.ndarray:
        out = np.zeros(self.d, dtype=bool)
        out[list(self.indices)] = True
        return out


def full_mask(d: int) -> Mask:
    return Mask(indices=tuple(range(d)), k=d, d=d)


def project_mask(x: np.ndarray, s: Mask) -> np.ndarray:
    """Full-length vector equal to ``x`` on the mask and 0 elsewhere."""
    if x.size != s.d:
        raise ConfigurationError(f"mask dimension {s.d} does not match vector length {x.size}")
    out = np.zeros_like(x)
    idx = list(s.indices)
    out[idx] = x[idx]
    return out


@dataclass(frozen=True)
class RngStream:
    """A replayable random stream addressed by ``(root_seed, key)``.

    ``key`` is a tuple of strings and integers naming the consumer, e.g.
    ``("sample", worker, round, step)`` or ``("mask", round)``.  The key is
    hashed into a Philox counter-based generator, so distinct keys give
    independent streams and the same key always replays the same stream,
    on every platform.
    """

    root_seed: int
    key: tuple

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self._philox_key()))

    def child(self, *suffix) -> "RngStream":
        return RngStream(self.root_seed, self.key + tuple(suffix))

    def _philox_key(self) -> np.ndarray:
        h = hashlib.sha256()
        h.update(struct.pack("<Q", self.root_seed & 0xFFFFFFFFFFFFFFFF))
        for part in self.key:
            if isinstance(part, str):
                raw = part.encode("utf-8")
                h.update(b"s")
                h.update(struct.pack("<I", len(raw)))
                h.update(raw)
            elif isinstance(part, (int, np.integer)):
                h.update(b"i")
                h.update(struct.pack("<q", int(part)))
            else:
                raise ConfigurationError(f"stream key parts must be str or int, got {type(part)!r}")
        digest = h.digest()
        words = [int.from_bytes(digest[o : o + 8], "little") for o in (0, 8)]
        return np.array(words, dtype=np.uint64)


def stream(root_seed: int, *key) -> RngStream:
    return RngStream(root_seed, tuple(key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ConfigurationError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def sample_rand_k(d: int, k: int, rng) -> Mask:
    """Uniformly random size-``k`` subset of ``[0, d)``.

    Partial Fisher-Yates over ``[0, d)``: exactly uniform over all C(d, k)
    subsets, O(d) worst case.
    """
    if not isinstance(d, (int, np.integer)) or not isinstance(k, (int, np.integer)):
        raise ConfigurationError("d and k must be integers")
    if not 1 <= k <= d:
        raise ConfigurationError(f"mask size k={k} outside [1, {d}]")
    gen = _as_generator(rng)
    pool = np.arange(d)
    for i in range(k):
        j = i + int(gen.integers(0, d - i))
        pool[i], pool[j] = pool[j], pool[i]
    return Mask.from_indices(pool[:k], d)


def average(vs: list[np.ndarray]) -> np.ndarray:
    """Arithmetic mean with an ascending-index summation order.

    The fold order is part of the reproducibility contract; callers must
    not replace this with a parallel reduction.
    """
    if len(vs) == 0:
        raise ValueError("average of an empty list")
    first = vs[0]
    for v in vs[1:]:
        if v.shape != first.shape:
            raise ConfigurationError(f"dimension mismatch: {v.shape} vs {first.shape}")
    total = np.array(first, dtype=np.float64, copy=True)
    for v in vs[1:]:
        total += v
    out = total / len(vs)
    check_finite(out, "average")
    return out
