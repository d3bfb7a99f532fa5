"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
``(seed, (index << 8) | purpose)``.  Path ``p`` of a batch therefore sees the
same numbers whatever the batch size, and the switching chain and the
Brownian motion never share a stream.
"""

import numpy as np

SWITCHING = 0
DIFFUSION = 1
INITIAL = 2
PROJECTION = 3

_MASK64 = (1 << 64) - 1


def stream(seed, index=0, purpose=SWITCHING):
    """Return the generator for (seed, index, purpose)."""
    seed = int(seed)
    index = int(index)
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    if index >= 1 << 56:
        raise ValueError("stream index too large")
    key = np.array([seed & _MASK64, (index << 8) | int(purpose)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def path_streams(seed, path):
    """Switching and diffusion generators for one path."""
    return stream(seed, path, SWITCHING), stream(seed, path, DIFFUSION)
