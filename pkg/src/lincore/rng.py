"""Deterministic counter-based random streams.

All stochastic code in the library draws from Philox-4x64 generators keyed
through :class:`numpy.random.SeedSequence`.  The derivation rule is
normative: the stream for a given purpose is

    ``Generator(Philox(SeedSequence(seed, spawn_key=(domain, iteration, slot))))``

where ``domain`` is one of the constants below, and ``iteration``/``slot``
identify the draw site (both 0 where the purpose has no such structure).
Any counter-based generator exposing the same interface could be
substituted, but the ``(seed, domain, iteration, slot)`` keying is what
makes runs reproducible, so it must be preserved.
"""

from __future__ import annotations

import numpy as np

# Stream domains.  Values are arbitrary but frozen: changing them changes
# every seeded artifact.
DOMAIN_HMM_DATA = 1
DOMAIN_IDN_DATA = 2
DOMAIN_TRAIN_INSTANCE = 3
DOMAIN_TRAIN_SAMPLE = 4
DOMAIN_NOISE_TRAIN = 5
DOMAIN_DIAGNOSTIC = 6


def stream_rng(seed: int, domain: int, iteration: int = 0, slot: int = 0) -> np.random.Generator:
    """Return the Philox generator for ``(seed, domain, iteration, slot)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(domain), int(iteration), int(slot)))
    return np.random.Generator(np.random.Philox(ss))
