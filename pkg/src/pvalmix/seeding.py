"""Named random sub-streams derived from one integer seed.

Each consumer asks for ``stream(seed, name, *index)``; the stream depends only
on those arguments, so serial and parallel callers draw identical numbers.
"""

import zlib

import numpy as np


def stream(seed, name, *index):
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
