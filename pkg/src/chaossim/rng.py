"""Seeded, counter-based random numbers.

All randomness flows through numpy's Philox4x64 bit generator, keyed by a
64-bit seed, with the counter starting at zero. Uniform doubles are taken
from ``Generator.random`` (53 high bits of each 64-bit output). Gaussians are
produced by an explicit polar (Box-Muller) transform rather than numpy's
ziggurat so that the mapping from bits to variates is fixed and documented:

    u1, u2 uniform on [0, 1)
    radius  = sqrt(-log(1 - u1))          # radius**2 ~ Exp(1)
    X       = radius * exp(2*pi*i*u2)     # standard complex Gaussian

For a standard complex Gaussian E|X|^2 = 1 and the real and imaginary parts
are independent N(0, 1/2). Real standard normals are sqrt(2) times the real
and imaginary parts of such an X, so one uniform pair yields two normals.

Per-trial seeds are derived from ``(master_seed, index)`` by two rounds of
the SplitMix64 finalizer::

    derive_seed(master, index) = splitmix64((splitmix64(master) + index) mod 2**64)
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for trial (or block) ``index`` of an experiment keyed by ``master_seed``."""
    if index < 0:
        raise ValueError("index must be non-negative")
    return splitmix64((splitmix64(master_seed & MASK64) + index) & MASK64)


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


def complex_normals(gen: np.random.Generator, count: int) -> np.ndarray:
    """``count`` standard complex Gaussians; prefix-stable in ``count``."""
    u = gen.random((count, 2))
    radius = np.sqrt(-np.log1p(-u[:, 0]))
    return radius * np.exp(2j * np.pi * u[:, 1])


def standard_normals(gen: np.random.Generator, shape) -> np.ndarray:
    """Real N(0, 1) variates of the given shape."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    size = int(np.prod(shape))
    z = complex_normals(gen, (size + 1) // 2) * np.sqrt(2.0)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out[:size].reshape(shape)
