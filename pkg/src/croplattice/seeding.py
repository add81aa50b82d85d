"""Deterministic RNG substream derivation.

Every random draw in a simulation descends from one root seed. Purpose- and
channel-specific substreams are derived through ``numpy.random.SeedSequence``
spawn keys, so results do not depend on evaluation order or thread count.

Fixed stream offsets (first spawn-key element):

=============  ====================================================
``STREAM_INIT``   initial-condition field generation, key ``(0, channel)``
``STREAM_CVM``    distribution-shift tests, key ``(1, channel)``;
                  the joint three-channel test uses ``(1, 3)``
``STREAM_MORAN``  spatial autocorrelation test, key ``(2, 0)``
=============  ====================================================

Permutation replicates append the replicate index to the key, so each
replicate owns an independent stream identified by (seed, replicate).
"""

from __future__ import annotations

import numpy as np

STREAM_INIT = 0
STREAM_CVM = 1
STREAM_MORAN = 2

_U64 = 0xFFFFFFFFFFFFFFFF


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the substream identified by (seed, key)."""
    ss = np.random.SeedSequence(entropy=int(seed) & _U64, spawn_key=tuple(key))
    return np.random.default_rng(ss)


def subseed(seed: int, *key: int) -> int:
    """Derive a 64-bit child seed for (seed, key).

    Used where an API takes an integer seed rather than a generator; the
    child seed fully identifies the substream.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _U64, spawn_key=tuple(key))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)
