"""Random coefficients A(n) of exp(sum_k X(k) z^k / sqrt(k)).

The production path is the derivative recurrence

    n c(n) = sum_{k <= min(n, K)} sqrt(k) X(k) c(n - k),     c(0) = 1,

which follows from F' = G' F with G(z) = sum_{k <= K} X(k) z^k / sqrt(k).
The partition sum and circle quadrature are independent routes to the same
numbers and exist mainly to check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numba
import numpy as np

from . import rng
from .errors import DomainError, EmptyStreamError, EnumerationLimitError, EvaluationOverflow, InputError, SpecError

# k <= e^m is decided as k <= floor(e^m + TIE_EPS) everywhere.
TIE_EPS = 1e-12
DEFAULT_ENUMERATION_LIMIT = 40
# exp() overflows a double just above this.
EXP_OVERFLOW = 709.0


def cap_index(cap: float) -> int:
    """Largest integer k with k <= cap, using the package tie rule."""
    if math.isinf(cap):
        raise ValueError("cap_index of an infinite cap is undefined")
    return int(math.floor(cap + TIE_EPS))


@dataclass(frozen=True, eq=False)
class GaussianStream:
    """The sequence X(1), ..., X(count) of standard complex Gaussians.

    ``values[k - 1]`` holds X(k). ``master_seed`` is None for streams built by
    deterministic injection.
    """

    master_seed: Optional[int]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def x(self, k: int) -> complex:
        return complex(self.values[k - 1])

    def head(self, count: int) -> np.ndarray:
        if count > len(self):
            raise InputError(f"stream holds {len(self)} values, {count} required")
        return self.values[:count]

    @classmethod
    def from_values(cls, values: Sequence[complex]) -> "GaussianStream":
        """Deterministic injection: prescribe X(1), X(2), ... directly."""
        return cls(None, np.asarray(values, dtype=np.complex128))

    @classmethod
    def zeros(cls, count: int) -> "GaussianStream":
        return cls(None, np.zeros(count, dtype=np.complex128))


def sample_stream(master_seed: int, count: int) -> GaussianStream:
    if count < 1:
        raise EmptyStreamError("a Gaussian stream needs count >= 1")
    gen = rng.generator(master_seed)
    return GaussianStream(master_seed, rng.complex_normals(gen, count))


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """Coefficients c(0..degree) of F_K; equal to A(n) whenever n <= K."""

    coeffs: np.ndarray
    smoothness_cap: float
    degree: int

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __getitem__(self, n):
        return self.coeffs[n]

    def __len__(self) -> int:
        return self.degree + 1


@numba.njit(cache=True)
def _exp_recurrence(weights, degree):
    # weights[k] = sqrt(k) X(k) for 1 <= k <= kmax; weights[0] unused.
    kmax = weights.shape[0] - 1
    c = np.zeros(degree + 1, dtype=np.complex128)
    c[0] = 1.0
    for n in range(1, degree + 1):
        acc = 0j
        top = n if n < kmax else kmax
        for k in range(1, top + 1):
            acc += weights[k] * c[n - k]
        c[n] = acc / n
    return c


def _effective_cap(degree: int, cap: float) -> int:
    if cap < 0:
        raise SpecError("smoothness cap must be non-negative")
    if math.isinf(cap):
        return degree
    return min(degree, cap_index(cap))


def coeffs_by_recurrence(stream: GaussianStream, degree: int, cap: float = math.inf) -> CoefficientSeries:
    """c(0..degree) of exp(sum_{k <= cap} X(k) z^k / sqrt(k)) in O(degree * min(degree, cap))."""
    if degree < 0:
        raise SpecError("degree must be >= 0")
    kmax = _effective_cap(degree, cap)
    weights = np.zeros(kmax + 1, dtype=np.complex128)
    if kmax:
        ks = np.arange(1, kmax + 1)
        weights[1:] = np.sqrt(ks) * stream.head(kmax)
    return CoefficientSeries(_exp_recurrence(weights, degree), cap, degree)


@dataclass(frozen=True)
class Partition:
    """A partition of an integer, parts in weakly decreasing order."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 1 for p in parts) or any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"not a partition: {parts}")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def multiplicities(self) -> dict:
        """m_j: number of parts equal to j, for each j that occurs."""
        out: dict = {}
        for p in self.parts:
            out[p] = out.get(p, 0) + 1
        return out


def _partitions(n: int, max_part: int) -> Iterator[tuple]:
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def enumerate_partitions(n: int, max_part: int, limit: int = DEFAULT_ENUMERATION_LIMIT) -> list:
    """Every partition of ``n`` with parts <= ``max_part``, each exactly once."""
    if n < 0 or max_part < 1:
        raise SpecError("need n >= 0 and max_part >= 1")
    if n > limit:
        raise EnumerationLimitError(n, limit)
    return [Partition(p) for p in _partitions(n, max_part)]


def partition_weight(partition: Partition, stream: GaussianStream) -> complex:
    """a(lambda) = prod_j (X(j)/sqrt(j))^{m_j} / m_j!."""
    w = 1 + 0j
    for j, mj in partition.multiplicities.items():
        w *= (stream.x(j) / math.sqrt(j)) ** mj / math.factorial(mj)
    return w


def coeffs_by_partitions(
    stream: GaussianStream, n: int, cap: float = math.inf, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> complex:
    """Brute-force partition sum for the n-th coefficient of F_cap. Test oracle only."""
    if n < 0:
        raise SpecError("n must be >= 0")
    if n > limit:
        raise EnumerationLimitError(n, limit)
    max_part = _effective_cap(n, cap)
    if n == 0:
        return 1 + 0j
    if max_part < 1:
        return 0j
    if len(stream) < max_part:
        raise InputError(f"stream holds {len(stream)} values, {max_part} required")
    return complex(sum(partition_weight(p, stream) for p in enumerate_partitions(n, max_part, limit)))


def log_euler_on_nodes(stream: GaussianStream, cap: float, damping: float, points: int, offset: float = 0.0) -> np.ndarray:
    """sum_{k <= cap} X(k) (damping e^{i t})^k / sqrt(k) at t_q = 2 pi q / points + offset.

    Coefficients are folded mod ``points`` before the FFT, which is exact
    because e^{i k t_q} only depends on k mod points.
    """
    kc = cap_index(cap)
    ks = np.arange(1, kc + 1)
    b = stream.head(kc) / np.sqrt(ks) * damping ** ks
    if offset:
        b = b * np.exp(1j * ks * offset)
    folded = np.zeros(points, dtype=np.complex128)
    np.add.at(folded, ks % points, b)
    return np.fft.ifft(folded) * points


def default_cauchy_points(radius: float, n: int, cap: float, target: float = 1e-8) -> int:
    """Smallest power of two Q with radius**Q <= target and Q > max(n, cap)."""
    need = max(n, cap_index(cap)) + 1
    if radius < 1:
        need = max(need, math.ceil(math.log(target) / math.log(radius)))
    return 1 << max(need - 1, 0).bit_length()


def cauchy_recover(
    stream: GaussianStream, n: int, cap: float, radius: float = 0.98, points: Optional[int] = None
) -> complex:
    """n-th coefficient of F_cap by the trapezoid rule on |z| = radius.

    Returns (1 / (Q r^n)) sum_q F(r e^{2 pi i q/Q}) e^{-2 pi i n q/Q}. Against
    the exact coefficients c this equals c(n) + sum_{j >= 1} c(n + jQ) r^{jQ}
    (aliasing) up to rounding, so for r < 1 the error decays like r^Q.
    """
    if not 0 < radius <= 1:
        raise DomainError(f"radius must lie in (0, 1], got {radius}")
    if n < 0:
        raise SpecError("n must be >= 0")
    if points is None:
        points = default_cauchy_points(radius, n, cap)
    if points < 1:
        raise SpecError("points must be >= 1")
    log_f = log_euler_on_nodes(stream, cap, radius, points)
    worst = int(np.argmax(log_f.real))
    if log_f.real[worst] > EXP_OVERFLOW:
        raise EvaluationOverflow(2 * math.pi * worst / points, float(log_f.real[worst]))
    values = np.exp(log_f)
    return complex(np.fft.fft(values)[n % points] / points / radius**n)


@dataclass(frozen=True)
class ModelScale:
    """Scale parameters N, K, W, C, sigma with derived N_sigma and M."""

    N: float
    K: float = math.e
    W: float = 1.0
    C: float = 0.0
    sigma: float = 0.0
    log_N_sigma: int = field(init=False)
    M: int = field(init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise SpecError("sigma must be >= 0")
        bound = math.log(self.N)
        if self.sigma > 0:
            bound = min(bound, -math.log(self.sigma))
        shift = self.W + self.C
        if abs(shift - round(shift)) > 1e-9:
            raise SpecError(f"W + C must be an integer, got {shift}")
        object.__setattr__(self, "log_N_sigma", int(math.floor(bound + TIE_EPS)))
        object.__setattr__(self, "M", self.log_N_sigma - int(round(shift)))

    @property
    def N_sigma(self) -> float:
        return math.exp(self.log_N_sigma)

    @property
    def log_K(self) -> int:
        return int(round(math.log(self.K)))


def theorem_window(N: int) -> range:
    """Integers n with 8N/7 <= n <= 4N/3."""
    return range(-((-8 * N) // 7), (4 * N) // 3 + 1)
