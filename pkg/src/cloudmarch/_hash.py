"""32-bit integer hashing shared by the noise lattice and the jitter generator.

Every function here is written so it runs unchanged both on numpy uint64
arrays and, compiled by numba, on scalars. Values are carried in uint64 and
masked back to 32 bits after each multiply, which keeps results bit-identical
across platforms and between the two execution paths.

The avalanche step is the "lowbias32" mixer:

    x ^= x >> 16; x *= 0x7FEB352D
    x ^= x >> 15; x *= 0x846CA68B
    x ^= x >> 16

Multi-argument hashes are nested, ``h(a, b, c, s) = mix(a + mix(b + mix(c + mix(s))))``
(all mod 2**32), which avoids the axis-aligned correlations of xor-of-products.
"""

import numba
import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_S16 = np.uint64(16)
_S15 = np.uint64(15)
_M1 = np.uint64(0x7FEB352D)
_M2 = np.uint64(0x846CA68B)
INV_2_24 = 1.0 / 16777216.0
_S8 = np.uint64(8)


def mix32(x):
    x = x ^ (x >> _S16)
    x = (x * _M1) & MASK32
    x = x ^ (x >> _S15)
    x = (x * _M2) & MASK32
    return x ^ (x >> _S16)


def hash4(a, b, c, seed):
    """Hash four 32-bit words (already reduced to uint64 in [0, 2**32))."""
    h = mix32(seed)
    h = mix32((c + h) & MASK32)
    h = mix32((b + h) & MASK32)
    return mix32((a + h) & MASK32)


def to_unit(h):
    """Map a 32-bit hash to a float in [0, 1) using its top 24 bits."""
    return (h >> _S8).astype(np.float64) * INV_2_24


def as_u32(values) -> np.ndarray:
    """Reduce (possibly negative) integers to uint64 words in [0, 2**32)."""
    return (np.asarray(values, dtype=np.int64) & 0xFFFFFFFF).astype(np.uint64)


mix32_jit = numba.njit(mix32, inline="always")


@numba.njit(inline="always")
def hash4_jit(a, b, c, seed):
    h = mix32_jit(seed)
    h = mix32_jit((c + h) & MASK32)
    h = mix32_jit((b + h) & MASK32)
    return mix32_jit((a + h) & MASK32)
