"""Portable 64-bit random number generation.

Every random draw in this package comes from the splitmix64 generator run in
counter mode, so corrupted pixels are identical across operating systems,
processes, and thread counts.  The generator is fully specified by its
recurrence (all arithmetic mod 2^64):

    word(seed, i) = mix(seed + (i + 1) * 0x9E3779B97F4A7C15)

    mix(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

Because word(i) depends only on (seed, i), any slice of the stream can be
produced independently of any other, which keeps parallel corruption
deterministic.  Independent substreams are derived by hashing a label into a
new seed (see ``Stream.derive``).

String hashing uses FNV-1a (offset 0xCBF29CE484222325, prime 0x100000001B3)
followed by the mix() finalizer above.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def hash64(*parts: int | str | bytes) -> int:
    """Combine parts into one 64-bit value, stable across runs and platforms.

    Integers are folded as 8 little-endian bytes, strings as UTF-8.  Used to
    derive per-sample and per-site seeds, e.g. hash64(run_seed, sample_id).
    """
    h = _GAMMA
    for part in parts:
        if isinstance(part, int):
            data = (part & _MASK).to_bytes(8, "little")
        elif isinstance(part, str):
            data = part.encode("utf-8")
        else:
            data = bytes(part)
        h = mix64(h ^ fnv1a64(data))
    return h


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class Stream:
    """Counter-mode splitmix64 stream with a movable cursor.

    Draw methods consume consecutive counter positions; ``derive`` forks an
    independent stream so call sites that draw a data-dependent number of
    words cannot shift each other.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._pos = 0

    def derive(self, label: str) -> "Stream":
        return Stream(hash64(self.seed, label))

    def words(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as uint64."""
        idx = np.arange(self._pos + 1, self._pos + n + 1, dtype=np.uint64)
        self._pos += n
        with np.errstate(over="ignore"):
            state = np.uint64(self.seed) + idx * np.uint64(_GAMMA)
        return _mix_array(state)

    def uniform(self, shape) -> np.ndarray:
        """Floats in [0, 1) with 53-bit resolution."""
        n = int(np.prod(shape)) if not isinstance(shape, int) else shape
        u = (self.words(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape)

    def normal(self, shape, sigma: float = 1.0) -> np.ndarray:
        """Standard Box-Muller normals scaled by sigma."""
        n = int(np.prod(shape)) if not isinstance(shape, int) else shape
        m = (n + 1) // 2
        # u1 shifted into (0, 1] so the log is finite
        u1 = (self.words(m) >> np.uint64(11)).astype(np.float64)
        u1 = (u1 + 1.0) * (2.0 ** -53)
        u2 = (self.words(m) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return (sigma * out[:n]).reshape(shape)

    def poisson(self, lam: np.ndarray) -> np.ndarray:
        """Poisson variates via per-element inverse-CDF search.

        Consumes exactly one uniform per element regardless of rate, so the
        stream layout does not depend on the data.  Rates above ~700 would
        underflow exp(-lam) in float64; corruption photon counts stay far
        below that.
        """
        lam = np.asarray(lam, dtype=np.float64)
        u = self.uniform(lam.shape)
        pmf = np.exp(-lam)
        cdf = pmf.copy()
        out = np.zeros(lam.shape, dtype=np.float64)
        done = u < cdf
        lam_max = float(lam.max()) if lam.size else 0.0
        k_cap = int(lam_max + 12.0 * math.sqrt(lam_max) + 25.0)
        k = 0
        while not done.all() and k < k_cap:
            k += 1
            pmf = pmf * lam / k
            cdf = cdf + pmf
            newly = (~done) & (u < cdf)
            out[newly] = k
            done |= newly
        out[~done] = k_cap
        return out
