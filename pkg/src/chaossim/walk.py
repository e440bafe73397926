"""The log-Euler sum on circles and its block increments Z_{t,sigma}(m).

Block m collects e^{m-1} < k <= e^m, with k = 1 folded into block 1, so
block 1 is {1, 2}, block 2 is {3, ..., 7}, block 3 is {8, ..., 20}, and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import rng
from .engine import parallel_map
from .errors import InputError, SpecError
from .estimates import EstimateWithError, estimate_from_values
from .model import TIE_EPS, GaussianStream, cap_index

TWO_PI = 2 * math.pi
MC_BLOCK = 4096


def circle_norm(t: float) -> float:
    """Distance from t to the nearest integer multiple of 2 pi."""
    return abs(math.remainder(t, TWO_PI))


@lru_cache(maxsize=None)
def block_range(m: int) -> tuple:
    """Inclusive (first, last) k of block m."""
    if m < 1:
        raise SpecError("block index must be >= 1")
    hi = int(math.floor(math.exp(m) + TIE_EPS))
    lo = 1 if m == 1 else int(math.floor(math.exp(m - 1) + TIE_EPS)) + 1
    return lo, hi


def _ks(m: int) -> np.ndarray:
    lo, hi = block_range(m)
    return np.arange(lo, hi + 1)


def _phases(ks: np.ndarray, t: float) -> np.ndarray:
    # reduce k t mod 2 pi so t and t + 2 pi give the same angles
    return np.exp(1j * np.fmod(ks * math.remainder(t, TWO_PI), TWO_PI))


@dataclass(frozen=True)
class EulerPoint:
    t: float
    sigma: float
    cap: float
    log_value: complex

    @property
    def modulus(self) -> float:
        """|F_K(e^{-sigma + it})|."""
        return math.exp(self.log_value.real)


def eval_log_euler(stream: GaussianStream, cap: float, sigma: float, t: float) -> complex:
    """sum_{k <= cap} X(k) e^{ikt} e^{-k sigma} / sqrt(k)."""
    if sigma < 0:
        raise SpecError("sigma must be >= 0")
    ks = np.arange(1, cap_index(cap) + 1)
    terms = stream.head(ks.size) * _phases(ks, t) * np.exp(-ks * sigma) / np.sqrt(ks)
    return complex(terms.sum())


def euler_point(stream: GaussianStream, cap: float, sigma: float, t: float) -> EulerPoint:
    return EulerPoint(t, sigma, cap, eval_log_euler(stream, cap, sigma, t))


def sigma_m_sq(sigma: float, m: int) -> float:
    ks = _ks(m)
    return float(np.sum(np.exp(-2 * ks * sigma) / (2 * ks)))


def rho_m_t(sigma: float, m: int, t: float) -> float:
    """Correlation of Z(m) and Z_t(m); exactly 1 at multiples of 2 pi."""
    if circle_norm(t) == 0.0:
        return 1.0
    ks = _ks(m)
    # weights relative to the first k of the block, so large sigma cannot underflow to 0/0
    w = np.exp(-2 * (ks - ks[0]) * sigma) / (2 * ks)
    return float(np.sum(w * _phases(ks, t).real) / np.sum(w))


@dataclass(frozen=True, eq=False)
class WalkIncrements:
    """Z_t(shift + m) for m = 1..M with their exact variances and correlations to t = 0."""

    t: float
    sigma: float
    shift: int
    values: np.ndarray
    variances: np.ndarray
    correlations: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def centred_partial_sums(self, drift: float = 2.0) -> np.ndarray:
        """sum_{m <= j} (Z(m) - drift * sigma_m^2) for j = 1..M."""
        return np.cumsum(np.asarray(self.values) - drift * np.asarray(self.variances))


def block_increments(stream: GaussianStream, sigma: float, t: float, shift: int, M: int) -> WalkIncrements:
    if M < 0 or shift < 0:
        raise SpecError("shift and M must be non-negative")
    need = block_range(shift + M)[1] if M else 0
    if len(stream) < need:
        raise InputError(f"stream holds {len(stream)} values, blocks up to {shift + M} need {need}")
    values, variances, rhos = [], [], []
    for m in range(shift + 1, shift + M + 1):
        ks = _ks(m)
        terms = (stream.values[ks - 1] * _phases(ks, t)).real / (np.sqrt(ks) * np.exp(ks * sigma))
        values.append(float(terms.sum()))
        variances.append(sigma_m_sq(sigma, m))
        rhos.append(rho_m_t(sigma, m, t))
    return WalkIncrements(t, sigma, shift, np.array(values), np.array(variances), np.array(rhos))


class ExpSum(NamedTuple):
    value: complex
    bound: float
    applicable: bool
    holds: bool


def exp_sum(x: float, y: float, sigma: float, t: float) -> ExpSum:
    """sum_{x < k <= y} e^{itk} / (k e^{2k sigma}) checked against 3 pi / (x ||t||)."""
    if not 0.5 <= x < y:
        raise SpecError("need 1/2 <= x < y")
    ks = np.arange(int(math.floor(x)) + 1, int(math.floor(y + TIE_EPS)) + 1)
    value = complex(np.sum(_phases(ks, t) * np.exp(-2 * ks * sigma) / ks)) if ks.size else 0j
    norm = circle_norm(t)
    if norm == 0.0:
        return ExpSum(value, math.inf, False, True)
    bound = 3 * math.pi / (x * norm)
    return ExpSum(value, bound, True, abs(value) <= bound)


def _pair_weights(ks: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-2 * ks * sigma) / ks


def joint_exp_moment_closed_form(alphas: Sequence[float], ts: Sequence[float], x: float, y: float, sigma: float) -> float:
    """E exp(sum_j 2 a_j sum_{x<k<=y} Re(X(k) e^{ik t_j}) / (sqrt(k) e^{k sigma}))
    = exp(sum_{j1, j2} sum_k a_j1 a_j2 cos(k (t_j2 - t_j1)) / (k e^{2k sigma}))."""
    a = np.asarray(alphas, dtype=float)
    t = np.asarray(ts, dtype=float)
    if a.shape != t.shape:
        raise SpecError("alphas and ts must have equal length")
    ks = np.arange(int(math.floor(x)) + 1, int(math.floor(y + TIE_EPS)) + 1)
    if ks.size == 0 or a.size == 0:
        return 1.0
    diff = t[None, :] - t[:, None]
    cos = np.cos(ks[:, None, None] * diff[None, :, :])
    total = np.einsum("i,j,kij,k->", a, a, cos, _pair_weights(ks, sigma))
    return math.exp(total)


def _mgf_block(args) -> np.ndarray:
    seed, size, ks, coef = args
    gen = rng.generator(seed)
    xs = rng.complex_normals(gen, size * ks.size).reshape(size, ks.size)
    return np.exp((xs @ coef).real)


def joint_exp_moment_mc(
    alphas: Sequence[float], ts: Sequence[float], x: float, y: float, sigma: float, trials: int, seed: int, workers: int = 1
) -> EstimateWithError:
    """Monte Carlo estimate of the same expectation from fresh Gaussians."""
    if trials < 1:
        raise SpecError("Monte Carlo needs trials >= 1")
    ks = np.arange(int(math.floor(x)) + 1, int(math.floor(y + TIE_EPS)) + 1)
    a = np.asarray(alphas, dtype=float)
    coef = np.zeros(ks.size, dtype=np.complex128)
    for aj, tj in zip(a, ts):
        coef += 2 * aj * _phases(ks, tj) / (np.sqrt(ks) * np.exp(ks * sigma))
    if ks.size == 0:
        return EstimateWithError(1.0, 0.0, trials)
    jobs = [
        (rng.derive_seed(seed, b), min(MC_BLOCK, trials - b * MC_BLOCK), ks, coef)
        for b in range(math.ceil(trials / MC_BLOCK))
    ]
    values = np.concatenate(parallel_map(_mgf_block, jobs, workers))
    return estimate_from_values(values)


def pair_moment_envelope(t1: float, t2: float, x: float, y: float) -> float:
    """sqrt(y/x) * min(sqrt(y/x), sqrt(1 / (||t2 - t1|| x)))."""
    ratio = math.sqrt(y / x)
    norm = circle_norm(t2 - t1)
    if norm == 0:
        return ratio * ratio
    return ratio * min(ratio, math.sqrt(1 / (norm * x)))
