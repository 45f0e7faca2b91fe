"""Counter-based deterministic random number generation.

Every random quantity in this package is a pure function of a 64-bit master
seed and a tuple of integer stream words (replica index, lattice coordinates,
bond axis, channel, ...).  There is no generator state: the draw for a given
key is always the same, across runs, platforms and worker counts.

The generator is the SplitMix64 finalizer (Steele, Lea and Flood 2014; also
the Murmur3 fmix64 constants) applied to a running 64-bit accumulator:

    h_0 = (seed + GOLDEN) mixed once
    h_i = mix64(h_{i-1} + GOLDEN * w_i)        for each key word w_i
    mix64(z): z ^= z >> 33; z *= 0xff51afd7ed558ccd;
              z ^= z >> 33; z *= 0xc4ceb9fe1a85ec53; z ^= z >> 33

all arithmetic modulo 2**64.  Uniforms take the top 53 bits, centered on the
half-grid so they never hit 0 or 1:

    u = ((h >> 11) + 0.5) * 2**-53      in (0, 1)

Standard normals use Box-Muller on two uniforms drawn with salt words 0, 1.
The exact algorithm is spelled out here (and in the README) so results can be
reproduced in any language.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xFF51AFD7ED558CCD)
_MIX2 = np.uint64(0xC4CEB9FE1A85EC53)
_S33 = np.uint64(33)
_TWO_NEG53 = 2.0 ** -53


def _mix64(z):
    """SplitMix64/Murmur3 finalizer, vectorized over uint64 arrays."""
    z = z ^ (z >> _S33)
    z = z * _MIX1
    z = z ^ (z >> _S33)
    z = z * _MIX2
    return z ^ (z >> _S33)


def _as_u64(w):
    """Reinterpret integers (possibly negative, possibly arrays) as uint64."""
    if isinstance(w, (int, np.integer)):
        return np.uint64(int(w) & 0xFFFFFFFFFFFFFFFF)
    a = np.asarray(w)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).astype(np.uint64)


def hash_words(seed, *words):
    """64-bit hash of (seed, words...).  Words may be scalars or broadcastable
    integer arrays; negative values are taken as two's complement."""
    with np.errstate(over="ignore"):
        h = _mix64(_as_u64(seed) + _GOLDEN)
        for w in words:
            h = _mix64(h + _GOLDEN * _as_u64(w))
    return h


def uniform(seed, *words):
    """Deterministic uniform draw in the open interval (0, 1)."""
    h = hash_words(seed, *words)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG53


def normal(seed, *words):
    """Deterministic standard normal draw (Box-Muller, salt words 0 and 1)."""
    u1 = uniform(seed, *words, 0)
    u2 = uniform(seed, *words, 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def derive_seed(master, index):
    """Child seed for an independent stream (replica, experiment stage, ...)."""
    return int(hash_words(master, index, 0x5EED))
