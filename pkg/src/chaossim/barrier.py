"""Ballot-type barrier probabilities for Gaussian walks, and barrier events on
simulated block walks.

Walk simulations run in fixed blocks of ``BLOCK`` trials; block ``b`` is seeded
with ``rng.derive_seed(seed, b)`` so counts do not depend on the worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import rng
from .engine import parallel_map
from .errors import InputError, SpecError
from .estimates import BallotEstimate, digest
from .walk import WalkIncrements

BLOCK = 4096
VARIANCE_RANGE = (1 / 20, 20.0)

ArrayLike = Union[float, Sequence[float], np.ndarray, Callable[[int], float], None]


def _profile(values: ArrayLike, n: int, default: float) -> np.ndarray:
    """Tabulate a constant, sequence or function of j = 1..n."""
    if values is None:
        return np.full(n, default, dtype=float)
    if callable(values):
        return np.array([float(values(j)) for j in range(1, n + 1)])
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise SpecError(f"profile has length {arr.size}, horizon is {n}")
    return arr.copy()


@dataclass(frozen=True, eq=False)
class BarrierSpec:
    """Walk S_j = G_1 + ... + G_j, j <= n, with independent G_m ~ N(0, variances[m-1]).

    Upper barrier: S_j <= cap_j + upper_shift[j-1], where cap_j = upper_cap, or
    min(upper_cap, slope_B * j) when ``slope_B`` is set. Optional lower
    barrier S_j >= lower[j-1] and endpoint window upper_cap - window <= S_n <= upper_cap.
    """

    n: int
    upper_cap: float
    variances: np.ndarray = None
    upper_shift: np.ndarray = None
    lower: Optional[np.ndarray] = None
    slope_B: Optional[float] = None
    window: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise SpecError("horizon n must be >= 1")
        var = _profile(self.variances, self.n, 1.0)
        lo, hi = VARIANCE_RANGE
        if np.any(var < lo) or np.any(var > hi):
            raise SpecError(f"variances must lie in [{lo}, {hi}]")
        shift = _profile(self.upper_shift, self.n, 0.0)
        j = np.arange(1, self.n + 1)
        # |h(j)| <= 10 log j; forces h(1) = 0
        if np.any(np.abs(shift) > 10 * np.log(j) + 1e-12):
            raise SpecError("upper shift must satisfy |h(j)| <= 10 log j")
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "upper_shift", shift)
        if self.lower is not None:
            object.__setattr__(self, "lower", _profile(self.lower, self.n, -math.inf))
        if self.window is not None and self.window <= 0:
            raise SpecError("endpoint window b must be > 0")

    def upper_profile(self, use_slope: bool = True) -> np.ndarray:
        cap = np.full(self.n, float(self.upper_cap))
        if use_slope and self.slope_B is not None:
            cap = np.minimum(cap, self.slope_B * np.arange(1, self.n + 1))
        return cap + self.upper_shift

    def digest(self) -> str:
        return digest(
            {
                "n": self.n,
                "a": self.upper_cap,
                "variances": self.variances,
                "h": self.upper_shift,
                "g": self.lower,
                "B": self.slope_B,
                "b": self.window,
            }
        )


def _walk_block(args) -> int:
    seed, size, sd, upper, lower, window_lo, window_hi = args
    steps = rng.standard_normals(rng.generator(seed), (size, sd.size)) * sd
    walks = np.cumsum(steps, axis=1)
    ok = np.all(walks <= upper, axis=1)
    if lower is not None:
        ok &= np.all(walks >= lower, axis=1)
    if window_lo is not None:
        ok &= (walks[:, -1] >= window_lo) & (walks[:, -1] <= window_hi)
    return int(np.count_nonzero(ok))


def _simulate(spec: BarrierSpec, trials: int, seed: int, workers: int, upper, lower, window) -> BallotEstimate:
    if trials < 1:
        raise SpecError("trials must be >= 1")
    sd = np.sqrt(spec.variances)
    lo, hi = (None, None) if window is None else window
    jobs = [
        (rng.derive_seed(seed, b), min(BLOCK, trials - b * BLOCK), sd, upper, lower, lo, hi)
        for b in range(math.ceil(trials / BLOCK))
    ]
    hits = sum(parallel_map(_walk_block, jobs, workers))
    return BallotEstimate.from_count(hits, trials, spec.digest())


def simulate_ballot(spec: BarrierSpec, trials: int, seed: int, workers: int = 1) -> BallotEstimate:
    """P[S_j <= a + h(j) for all j <= n]."""
    return _simulate(spec, trials, seed, workers, spec.upper_profile(use_slope=False), None, None)


def simulate_two_sided(spec: BarrierSpec, trials: int, seed: int, workers: int = 1) -> BallotEstimate:
    """P[g(j) <= S_j <= min(a, B j) + h(j) for all j <= n]."""
    if spec.lower is None and spec.slope_B is None:
        raise SpecError("two-sided barrier needs a lower profile or a slope B")
    return _simulate(spec, trials, seed, workers, spec.upper_profile(), spec.lower, None)


def simulate_endpoint_window(spec: BarrierSpec, trials: int, seed: int, workers: int = 1) -> BallotEstimate:
    """P[S_j <= a + h(j) for all j, and a - b <= S_n <= a]."""
    if spec.window is None:
        raise SpecError("endpoint window b must be set")
    a = spec.upper_cap
    return _simulate(spec, trials, seed, workers, spec.upper_profile(use_slope=False), None, (a - spec.window, a))


def pr3_envelope(a: float, b: float, n: int, constant: float = 30.0) -> float:
    s = math.sqrt(n)
    return constant * min(1.0, a / s) * min(1.0, b / s) ** 2


# -- maxima of nearly independent Gaussians ------------------------------------------


def _max_trial(args) -> float:
    seed, n, eps = args
    g = rng.standard_normals(rng.generator(seed), n + 1)
    if eps:
        return float(math.sqrt(eps) * g[0] + math.sqrt(1 - eps) * g[1:].max())
    return float(g[1:].max())


def sample_maxima(n: int, eps: float, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-trial max of n unit Gaussians with common pairwise correlation eps.

    The correlated family is G_i = sqrt(eps) G_0 + sqrt(1 - eps) G_i'.
    """
    if n < 2:
        raise SpecError("need n >= 2")
    if not 0 <= eps < 1:
        raise SpecError("correlation eps must lie in [0, 1)")
    if trials < 1:
        raise SpecError("trials must be >= 1")
    jobs = [(rng.derive_seed(seed, i), n, eps) for i in range(trials)]
    return np.array(parallel_map(_max_trial, jobs, workers))


def max_threshold(n: int, delta: float) -> float:
    return math.sqrt((2 - delta) * math.log(n))


def simulate_max_correlated(
    n: int,
    eps: float = 0.0,
    delta: Optional[float] = None,
    trials: int = 1000,
    seed: int = 0,
    workers: int = 1,
    threshold: Optional[float] = None,
) -> BallotEstimate:
    """P[max_i G_i <= sqrt((2 - delta) log n)], or <= ``threshold`` when given."""
    if threshold is None:
        if delta is None or not 0 < delta < 2:
            raise SpecError("delta must lie in (0, 2)")
        threshold = max_threshold(n, delta)
    maxima = sample_maxima(n, eps, trials, seed, workers)
    key = digest({"n": n, "eps": eps, "threshold": threshold})
    return BallotEstimate.from_count(int(np.count_nonzero(maxima <= threshold)), trials, key)


# -- barrier events on block walks ----------------------------------------------------


def event_L(walk: WalkIncrements, C: float, M: int, log_coefficient: float = 3.0) -> bool:
    """-C j <= sum_{m<=j} (Z(m) - 2 sigma_m^2) <= C - 3 log j for all j <= M.

    ``walk`` should be the shifted walk (shift = W + C) so its variances are sigma_{m,W}^2.
    """
    if M > len(walk):
        raise InputError(f"walk has {len(walk)} blocks, M={M} requested")
    if M < 1:
        return True
    s = walk.centred_partial_sums()[:M]
    j = np.arange(1, M + 1)
    return bool(np.all(s >= -C * j) and np.all(s <= C - log_coefficient * np.log(j)))


def _log_cap(K: float) -> int:
    L = math.log(K)
    if abs(L - round(L)) > 1e-9:
        raise SpecError(f"log K must be an integer, got {L}")
    return int(round(L))


def _unshifted_sums(walk: WalkIncrements, L: int) -> np.ndarray:
    if walk.shift != 0:
        raise InputError("barrier events D and A need an unshifted walk")
    if L > len(walk):
        raise InputError(f"walk has {len(walk)} blocks, log K={L} requested")
    return walk.centred_partial_sums()[:L]


def event_D(walk: WalkIncrements, N: float, K: float, level: float = 12.0) -> bool:
    """sum_{m<=j} (Z_t(m) - 2 sigma_m^2) <= level * log log N for all j <= log K."""
    L = _log_cap(K)
    return bool(np.all(_unshifted_sums(walk, L) <= level * math.log(math.log(N))))


def event_A(
    walk: WalkIncrements,
    N: float,
    K: float,
    level: float = 12.0,
    strong_level: float = 2000.0,
    start_fraction: float = 0.01,
) -> bool:
    """event_D and, for start_fraction log K <= j <= log K, partial sums <= -strong_level log log N."""
    if not event_D(walk, N, K, level):
        return False
    L = _log_cap(K)
    s = _unshifted_sums(walk, L)
    first = max(1, math.ceil(start_fraction * L - 1e-12))
    return bool(np.all(s[first - 1 :] <= -strong_level * math.log(math.log(N))))
