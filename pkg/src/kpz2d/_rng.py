"""Counter-based random streams.

Every stream in the package is a Philox generator keyed on
``(seed, purpose | index)``.  Distinct keys give statistically independent
streams, and a stream's content depends only on its key, never on how many
other streams were consumed first.  That makes noise slices, path bundles
and resampling draws reproducible bit-for-bit under any execution order or
worker count.
"""

import os

import numpy as np
from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1

# purpose tags occupy the top byte of the second key word so that slice
# indices, path streams and auxiliary draws can never collide
KIND_NOISE = 0
KIND_PATH = 1
KIND_RESAMPLE = 2
KIND_MISC = 3


def stream(seed, kind, index=0):
    """Generator for stream ``index`` of the given purpose under ``seed``."""
    if index < 0 or index >= (1 << 56):
        raise ValueError("stream index out of range")
    key = np.array([seed & _MASK64, ((kind << 56) | index) & _MASK64],
                   dtype=np.uint64)
    return Generator(Philox(key=key))


def normals(seed, kind, index, shape):
    """Standard Gaussians for one keyed stream, filled in a fixed order."""
    return stream(seed, kind, index).standard_normal(shape)


def mix_seed(seed, rep):
    """Derive an independent 64-bit seed for repetition ``rep``.

    splitmix64 finalizer over seed^rep-block; purely arithmetic so the
    mapping is stable across platforms.
    """
    z = (int(seed) + 0x9E3779B97F4A7C15 * (int(rep) + 1)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def thread_count():
    """Worker cap from the THREADS environment variable (>=1)."""
    raw = os.environ.get("THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)
