"""Seeded random sub-streams.

Every random quantity of a run is drawn from a generator derived from the
master seed and a spawn key ``(purpose, *index)``. Adding draws or running
indices in another order never perturbs the values of an existing index.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    ENVIRONMENT = 0      # (draw,) scattering PathSet shared by tag and reader area
    TAG_POSITIONS = 1    # (draw, tag)
    DEVICE = 2           # (draw,) legacy device channel
    LEGACY_GEOMETRY = 3  # (draw,) environment and placements of the legacy sweep
    MAP_ENSEMBLE = 4     # (draw,) F^O map ensemble
    SELFCHECK = 5        # (draw,)


def substream(master_seed: int, purpose: Stream, *index: int) -> np.random.Generator:
    key = (int(purpose),) + tuple(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(master_seed), spawn_key=key))
