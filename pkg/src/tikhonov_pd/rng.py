"""Seeded random streams for the test-problem generators.

Uniform doubles come from numpy's PCG64 bit generator (a 64-bit permuted
congruential generator). Gaussians are produced from those uniforms with the
Box-Muller transform, so the normal stream depends only on the uniform
stream and not on numpy's ziggurat implementation.
"""

import numpy as np


class SeededStream:
    """Deterministic uniform/Gaussian source for one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size) -> np.ndarray:
        """Uniform doubles on [0, 1)."""
        return self._gen.random(size)

    def normal(self, size) -> np.ndarray:
        """Standard Gaussians via Box-Muller (both outputs of each pair are used)."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape))
        pairs = (count + 1) // 2
        u1 = 1.0 - self._gen.random(pairs)  # in (0, 1], keeps log finite
        u2 = self._gen.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count].reshape(shape)
