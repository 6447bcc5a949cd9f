"""Counter-based random words keyed by (seed, stream, replica, step).

Every replica owns an independent SplitMix64 sequence whose state is derived
from ``(seed, stream, replica)``.  Word ``t`` of a replica is a pure function of
those keys and ``t``, so trajectories do not depend on how replicas are
batched or spread across threads.
"""

import numpy as np

GENERATOR_NAME = "splitmix64-counter/v1"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / (1 << 53)

# Stream ids keep unrelated uses of one seed statistically separate.
STREAM_WALK = 0
STREAM_START = 1
STREAM_LAMPS = 2
STREAM_MARKING = 3


def mix64(z):
    """SplitMix64 output function applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def replica_keys(seed, replicas, stream=STREAM_WALK):
    """Per-replica SplitMix64 states for replica indices ``replicas``."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    idx = np.asarray(replicas, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix64(np.uint64(seed) ^ mix64(np.uint64(stream + 1) * _GAMMA))
        return mix64(base + (idx + np.uint64(1)) * _GAMMA)


def words(keys, step):
    """Random 64-bit word number ``step`` for every replica key."""
    with np.errstate(over="ignore"):
        return mix64(keys + np.uint64(step + 1) * _GAMMA)


def uniform_index(word, size):
    """Map words to integers in ``[0, size)`` using the top 53 bits.

    ``size`` may be an array (per-replica ranges).
    """
    frac = (word >> _S11).astype(np.float64) * _INV53
    out = (frac * np.asarray(size, dtype=np.float64)).astype(np.int64)
    return np.minimum(out, np.asarray(size, dtype=np.int64) - 1)


def uniform01(word):
    return (word >> _S11).astype(np.float64) * _INV53


class CounterRNG:
    """Scalar convenience wrapper for a single replica's word sequence."""

    def __init__(self, seed, replica=0, stream=STREAM_WALK):
        self.key = replica_keys(seed, [replica], stream)
        self.counter = 0

    def next_word(self):
        w = words(self.key, self.counter)[0]
        self.counter += 1
        return int(w)

    def bit(self):
        return self.next_word() & 1

    def integer(self, size):
        return int(uniform_index(np.array([self.next_word()], dtype=np.uint64), size)[0])
