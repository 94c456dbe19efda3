"""Counter-based random streams (Philox-4x32 with 10 rounds).

Each (path, step) pair owns one block of four 32-bit words obtained by
applying the keyed Philox permutation to the counter

    (step_lo, step_hi, path_lo, path_hi)      key = (seed_lo, seed_hi)

so draws never depend on scheduling, chunking, or worker count.  Block layout
used by the simulator:

    step 0      -> uniform u0 drives the hypothesis draw
    step k >= 1 -> four uniforms, Box-Muller pairs -> up to 4 normals

All arithmetic is done in 64-bit integers masked to 32 bits; the same
formulas run on Python ints, numpy uint64 arrays, and (re-implemented
verbatim in the kernel module) under the JIT backend, and agree bit for bit.
Known-answer vectors from the published algorithm pin the permutation in the
test-suite.
"""

from __future__ import annotations

import math

import numpy as np

MASK32 = 0xFFFFFFFF
PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
WEYL_0 = 0x9E3779B9
WEYL_1 = 0xBB67AE85
_INV_2_32 = 2.0**-32
_TWO_PI = 2.0 * math.pi


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds. Inputs are 32-bit values held in Python ints or
    numpy uint64 (scalars or arrays); outputs are of the same kind."""
    for r in range(10):
        if r:
            k0 = (k0 + WEYL_0) & MASK32
            k1 = (k1 + WEYL_1) & MASK32
        p0 = PHILOX_M0 * c0  # < 2^64, exact in uint64 and in Python ints
        p1 = PHILOX_M1 * c2
        hi0 = p0 >> 32
        lo0 = p0 & MASK32
        hi1 = p1 >> 32
        lo1 = p1 & MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


def split_seed(seed: int) -> tuple[int, int]:
    """64-bit seed -> (key_lo, key_hi)."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return s & MASK32, (s >> 32) & MASK32


def raw_block(seed: int, path: int, step: int) -> tuple[int, int, int, int]:
    """The four raw 32-bit words of block (path, step) under ``seed``."""
    k0, k1 = split_seed(seed)
    return philox4x32(
        step & MASK32, (step >> 32) & MASK32, path & MASK32, (path >> 32) & MASK32, k0, k1
    )


def block_uniforms(seed: int, path: int, step: int) -> tuple[float, float, float, float]:
    # (x + 1/2) / 2^32 lies strictly inside (0, 1), so log() stays safe.
    x0, x1, x2, x3 = raw_block(seed, path, step)
    return (
        (x0 + 0.5) * _INV_2_32,
        (x1 + 0.5) * _INV_2_32,
        (x2 + 0.5) * _INV_2_32,
        (x3 + 0.5) * _INV_2_32,
    )


def block_normals(seed: int, path: int, step: int) -> tuple[float, float, float, float]:
    """Four standard normals from block (path, step) via Box-Muller pairs."""
    u0, u1, u2, u3 = block_uniforms(seed, path, step)
    r0 = math.sqrt(-2.0 * math.log(u0))
    r1 = math.sqrt(-2.0 * math.log(u2))
    return (
        r0 * math.cos(_TWO_PI * u1),
        r0 * math.sin(_TWO_PI * u1),
        r1 * math.cos(_TWO_PI * u3),
        r1 * math.sin(_TWO_PI * u3),
    )


def raw_block_array(seed: int, paths: np.ndarray, step: int):
    """Vectorized raw blocks for many paths at one step: four uint64 arrays."""
    k0, k1 = split_seed(seed)
    p = np.asarray(paths, dtype=np.uint64)
    c0 = np.full(p.shape, step & MASK32, dtype=np.uint64)
    c1 = np.full(p.shape, (step >> 32) & MASK32, dtype=np.uint64)
    c2 = p & np.uint64(MASK32)
    c3 = p >> np.uint64(32)
    return philox4x32(c0, c1, c2, c3, np.uint64(k0), np.uint64(k1))


def block_uniform0_array(seed: int, paths: np.ndarray, step: int) -> np.ndarray:
    """First uniform of each block; used for the hypothesis draw at step 0."""
    x0, _, _, _ = raw_block_array(seed, paths, step)
    return (x0.astype(np.float64) + 0.5) * _INV_2_32


def block_normals_array(seed: int, paths: np.ndarray, step: int) -> np.ndarray:
    """(n, 4) standard normals for many paths at one step."""
    x0, x1, x2, x3 = raw_block_array(seed, paths, step)
    u0 = (x0.astype(np.float64) + 0.5) * _INV_2_32
    u1 = (x1.astype(np.float64) + 0.5) * _INV_2_32
    u2 = (x2.astype(np.float64) + 0.5) * _INV_2_32
    u3 = (x3.astype(np.float64) + 0.5) * _INV_2_32
    out = np.empty(u0.shape + (4,), dtype=np.float64)
    r0 = np.sqrt(-2.0 * np.log(u0))
    r1 = np.sqrt(-2.0 * np.log(u2))
    out[..., 0] = r0 * np.cos(_TWO_PI * u1)
    out[..., 1] = r0 * np.sin(_TWO_PI * u1)
    out[..., 2] = r1 * np.cos(_TWO_PI * u3)
    out[..., 3] = r1 * np.sin(_TWO_PI * u3)
    return out
