"""Counter-based Gaussian streams keyed by (seed, replication, step, particle).

Philox4x32-10 is evaluated directly on numpy arrays of counters, so any
increment can be regenerated without replaying the stream that precedes it.
"""
from __future__ import annotations

from collections import Counter

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function.

    ``counter`` is a sequence of four broadcastable uint32-valued arrays and
    ``key`` a pair of ints. Returns the four output words as uint64 arrays
    holding 32-bit values.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    # 53-bit uniform strictly inside (0, 1)
    bits = (hi >> np.uint64(5)) * np.uint64(1 << 26) + (lo >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def gaussian_block(seed, replication, step, block):
    """Box-Muller pair from Philox block ``block`` (a 64-bit index).

    Vectorized numpy reference for the compiled kernel used by BrownianDriver.
    """
    key = (seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)
    block = np.asarray(block, dtype=np.uint64)
    w0, w1, w2, w3 = philox4x32((block & _MASK32, block >> _SHIFT32, step, replication), key)
    u1 = _to_unit(w0, w1)
    u2 = _to_unit(w2, w3)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


@numba.njit(cache=True, inline="always")
def _philox_scalar(c0, c1, c2, c3, k0, k1):
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * c0
        p1 = np.uint64(0xCD9E8D57) * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & np.uint64(0xFFFFFFFF)
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & np.uint64(0xFFFFFFFF)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + np.uint64(0x9E3779B9)) & np.uint64(0xFFFFFFFF)
        k1 = (k1 + np.uint64(0xBB67AE85)) & np.uint64(0xFFFFFFFF)
    return c0, c1, c2, c3


@numba.njit(cache=True, nogil=True)
def _gaussian_fill(seed_lo, seed_hi, reps, step, ids, n_components, out):
    # Slot q = id * n_components + c reads output (q & 1) of Philox block q >> 1,
    # so consecutive slots share one Box-Muller pair.
    two_pi = 2.0 * np.pi
    scale = 1.0 / 9007199254740992.0
    mask = np.uint64(0xFFFFFFFF)
    m = np.uint64(n_components)
    for r in range(reps.shape[0]):
        last = np.uint64(0xFFFFFFFFFFFFFFFF)
        z0 = 0.0
        z1 = 0.0
        for i in range(ids.shape[0]):
            for c in range(n_components):
                q = ids[i] * m + np.uint64(c)
                block = q >> np.uint64(1)
                if block != last:
                    w0, w1, w2, w3 = _philox_scalar(
                        block & mask, block >> np.uint64(32), step, reps[r], seed_lo, seed_hi
                    )
                    u1 = (float((w0 >> np.uint64(5)) * np.uint64(67108864) + (w1 >> np.uint64(6))) + 0.5) * scale
                    u2 = (float((w2 >> np.uint64(5)) * np.uint64(67108864) + (w3 >> np.uint64(6))) + 0.5) * scale
                    rad = np.sqrt(-2.0 * np.log(u1))
                    z0 = rad * np.cos(two_pi * u2)
                    z1 = rad * np.sin(two_pi * u2)
                    last = block
                out[r, i, c] = z0 if (q & np.uint64(1)) == 0 else z1


class BrownianDriver:
    """Replayable per-particle Gaussian source.

    The value for (particle_id, step_index, component) depends only on the
    master seed and the replication index, never on how many particles are
    requested together or in which order. Step index 0 is reserved for
    initial conditions; integrators use steps 1, 2, ...

    With ``replications`` set, every draw carries a leading axis over those
    replication indices.
    """

    def __init__(self, seed, replications=None, track=False):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.replications = None if replications is None else tuple(int(r) for r in replications)
        self.track = track
        self.draws = Counter()

    def for_replications(self, replications, track=None):
        return BrownianDriver(self.seed, replications, self.track if track is None else track)

    @property
    def batch_shape(self):
        return () if self.replications is None else (len(self.replications),)

    def normals(self, step_index, particle_ids, n_components):
        """Standard normals of shape ``batch_shape + (len(particle_ids), n_components)``."""
        ids = np.asarray(particle_ids, dtype=np.uint64).reshape(-1)
        if self.track:
            for pid in ids.tolist():
                self.draws[(pid, int(step_index))] += 1
        if self.replications is None:
            reps = np.zeros(1, dtype=np.uint64)
        else:
            reps = np.asarray(self.replications, dtype=np.uint64)
        out = np.empty((len(reps), len(ids), n_components))
        _gaussian_fill(
            np.uint64(self.seed & 0xFFFFFFFF),
            np.uint64(self.seed >> 32),
            reps,
            np.uint64(step_index),
            ids,
            n_components,
            out,
        )
        return out[0] if self.replications is None else out

    def increments(self, step_index, particle_ids, dt, n_components):
        return np.sqrt(dt) * self.normals(step_index, particle_ids, n_components)


class CoarsenedDriver:
    """Brownian increments on a grid ``factor`` times coarser than ``base``.

    Coarse step k sums fine steps (k-1)*factor+1 .. k*factor, so paths
    generated at different resolutions share one underlying Brownian path.
    """

    def __init__(self, base, factor):
        if factor < 1:
            raise ValueError("factor must be >= 1")
        self.base = base
        self.factor = int(factor)

    @property
    def batch_shape(self):
        return self.base.batch_shape

    def normals(self, step_index, particle_ids, n_components):
        return self.base.normals(step_index, particle_ids, n_components)

    def increments(self, step_index, particle_ids, dt, n_components):
        if step_index == 0:
            return self.base.increments(0, particle_ids, dt, n_components)
        fine_dt = dt / self.factor
        first = (step_index - 1) * self.factor + 1
        total = 0.0
        for s in range(first, first + self.factor):
            total = total + self.base.increments(s, particle_ids, fine_dt, n_components)
        return total
