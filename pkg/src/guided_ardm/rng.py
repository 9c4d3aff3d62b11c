"""Keyed random-number streams.

A root seed plus a tuple of small integers (purpose, step, ...) pins down
an independent PCG64 substream via SeedSequence spawn keys. Samplers draw
one block of uniforms per (purpose, step); element i of the block belongs
to particle i. Because element i is the i-th sequential draw of that
stream regardless of the block size, runs with different particle counts
share their low-index draws, and a single-particle run consumes exactly
the same values as the corresponding unweighted sampler.

Purpose codes:

* PROPAGATE: per-step per-particle proposal draws
* RESAMPLE: exactly one uniform per triggered resampling event at step t
* SELECT: the final draw picking one particle from the last weights
* ORDER / DIMENSION: per-sample generation order and dimension draws
* FIT: dataset generation (rejection sampling, synthetic data)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROPAGATE = 0
RESAMPLE = 1
SELECT = 2
ORDER = 3
DIMENSION = 4
FIT = 5


@dataclass(frozen=True, slots=True)
class KeyedRng:
    """Deterministic factory of independent substreams under one root seed."""

    seed: int
    prefix: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "prefix", tuple(int(k) for k in self.prefix))

    def child(self, *key: int) -> "KeyedRng":
        """Namespaced sub-factory; its streams never collide with ours."""
        return KeyedRng(self.seed, self.prefix + tuple(int(k) for k in key))

    def stream(self, *key: int) -> np.random.Generator:
        """Fresh generator for (prefix + key); same key, same stream."""
        ss = np.random.SeedSequence(
            self.seed, spawn_key=self.prefix + tuple(int(k) for k in key)
        )
        return np.random.Generator(np.random.PCG64(ss))

    def uniform(self, *key: int) -> float:
        """The first uniform of the keyed stream."""
        return float(self.stream(*key).random())

    def uniforms(self, *key: int, count: int) -> np.ndarray:
        """The first `count` uniforms of the keyed stream."""
        return self.stream(*key).random(count)
