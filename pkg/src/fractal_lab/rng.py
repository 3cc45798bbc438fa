"""Seeded random streams.

Every random quantity in the package is drawn from a stream keyed by a
master seed plus a tuple of labels, so independent parts of a computation
(replicates, refinement levels, substeps) never share state and results do
not depend on execution order or thread count.
"""
from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream keys must be nonnegative, got {part}")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *keys) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(seed, *keys)``."""
    entropy = [int(seed) & _MASK64] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def uniforms(gen: np.random.Generator, shape) -> np.ndarray:
    """Open-interval uniforms on (0, 1) built from the top 53 bits of raw 64-bit draws."""
    size = int(np.prod(shape)) if np.ndim(shape) else int(shape)
    raw = gen.bit_generator.random_raw(size)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return u.reshape(shape)


def normals(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard Gaussians by inverse CDF, bit-reproducible for a given stream."""
    return ndtri(uniforms(gen, shape))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for a named sub-computation of ``seed``."""
    entropy = [int(seed) & _MASK64] + [_key(k) for k in keys]
    hi, lo = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(hi) << 31) ^ int(lo)
