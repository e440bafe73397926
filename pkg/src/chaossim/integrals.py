"""Integral and sum identities on realisations of the coefficients.

Two deliberately separate evaluation paths are used. ``parseval_mass`` works
on a truncated polynomial where the trapezoid rule is exact. ``low_moment_mass``
evaluates |F_N|^2 pointwise as exp(2 Re log F_N) and refines the rule until
it settles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .engine import collect_trials
from .errors import SpecError
from .estimates import BallotEstimate, digest
from .model import (
    CoefficientSeries,
    EXP_OVERFLOW,
    EvaluationOverflow,
    GaussianStream,
    cap_index,
    coeffs_by_recurrence,
    log_euler_on_nodes,
    sample_stream,
    theorem_window,
)


@dataclass(frozen=True)
class QuadratureRule:
    """Uniform nodes t_q = 2 pi q / points + offset with weights 2 pi / points."""

    points: int
    radius: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.points < 1:
            raise SpecError("quadrature needs points >= 1")
        if not 0 < self.radius <= 1:
            raise SpecError("radius must lie in (0, 1]")

    @property
    def nodes(self) -> np.ndarray:
        return 2 * math.pi * np.arange(self.points) / self.points + self.offset


class ParsevalCheck(NamedTuple):
    integral: float
    coefficient_sum: float

    @property
    def relative_gap(self) -> float:
        return abs(self.integral - self.coefficient_sum) / max(abs(self.coefficient_sum), 1e-300)


def parseval_mass(series: CoefficientSeries, rule: QuadratureRule, radius: Optional[float] = None) -> ParsevalCheck:
    """(1/2pi) int |sum_{k<=D} c(k) r^k e^{ikt}|^2 dt against sum_k r^{2k} |c(k)|^2.

    The polynomial is evaluated at the nodes by Horner's rule, independently
    of any FFT.
    """
    r = rule.radius if radius is None else radius
    D = series.degree
    if rule.points <= 2 * D:
        raise SpecError(f"quadrature with {rule.points} points is not exact for degree {D}; need points > {2 * D}")
    scaled = series.coeffs * r ** np.arange(D + 1)
    z = np.exp(1j * rule.nodes)
    values = np.polyval(scaled[::-1], z)
    integral = float(np.mean(np.abs(values) ** 2))
    return ParsevalCheck(integral, float(np.sum(np.abs(scaled) ** 2)))


class LowMomentMass(NamedTuple):
    value: float
    points: int
    converged: bool


def _mass_on_rule(stream: GaussianStream, N: int, sigma: float, points: int, offset: float) -> float:
    log_f = log_euler_on_nodes(stream, N, math.exp(-sigma), points, offset)
    two_re = 2 * log_f.real
    worst = int(np.argmax(two_re))
    if two_re[worst] > EXP_OVERFLOW:
        raise EvaluationOverflow(2 * math.pi * worst / points + offset, float(log_f.real[worst]))
    return float(2 * math.pi * np.mean(np.exp(two_re)))


def low_moment_mass(
    stream: GaussianStream,
    N: int,
    sigma: float = 0.0,
    rule: Optional[QuadratureRule] = None,
    rtol: float = 0.01,
    max_points: int = 1 << 22,
) -> LowMomentMass:
    """int_0^{2pi} |F_N(e^{-sigma + it})|^2 dt by the trapezoid rule.

    Starts from ``rule.points`` (default: the power of two >= 4N) and doubles
    until two successive values agree to ``rtol``; stops at ``max_points`` with
    ``converged=False``.
    """
    if sigma < 0:
        raise SpecError("sigma must be >= 0")
    if rule is None:
        rule = QuadratureRule(1 << max(4 * cap_index(N) - 1, 1).bit_length())
    q = rule.points
    prev = _mass_on_rule(stream, N, sigma, q, rule.offset)
    while q < max_points:
        q *= 2
        cur = _mass_on_rule(stream, N, sigma, q, rule.offset)
        if abs(cur - prev) <= rtol * abs(cur):
            return LowMomentMass(cur, q, True)
        prev = cur
    return LowMomentMass(prev, q, False)


def mcr4_threshold(N: int, sigma: float, W: float) -> float:
    scale = N if sigma == 0 else min(N, 1 / sigma)
    return math.exp(-21 * W / 10) * scale / math.sqrt(math.log(N))


def _mass_trial(params: dict, seed: int) -> float:
    N = params["N"]
    return low_moment_mass(sample_stream(seed, N), N, params["sigma"]).value


def mcr4_masses(N: int, sigma: float, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-trial low-moment masses; trials are shared across W so scans over W are paired."""
    if sigma < 0:
        raise SpecError("sigma must be >= 0")
    res = collect_trials(_mass_trial, {"N": int(N), "sigma": float(sigma)}, seed, trials, workers)
    return res.ok[:, 0]


def check_W_range(W: float, N: int) -> bool:
    """Raise below 1; warn and return True above (log N)^{1/3}."""
    if W < 1:
        raise SpecError(f"W must be >= 1, got {W}")
    upper = math.log(N) ** (1 / 3)
    if W > upper:
        warnings.warn(f"W={W} exceeds (log N)^(1/3)={upper:.3f} for N={N}; outside the stated regime", stacklevel=3)
        return True
    return False


def mcr4_event_frequency(
    N: int, sigma: float, W: float, trials: int, seed: int, workers: int = 1, masses: Optional[np.ndarray] = None
) -> BallotEstimate:
    """Frequency of {low_moment_mass >= e^{-21W/10} min(N, 1/sigma) / sqrt(log N)}."""
    check_W_range(W, N)
    if masses is None:
        masses = mcr4_masses(N, sigma, trials, seed, workers)
    threshold = mcr4_threshold(N, sigma, W)
    key = digest({"experiment": "mcr4", "N": N, "sigma": sigma, "W": W, "seed": seed, "trials": trials})
    return BallotEstimate.from_count(int(np.count_nonzero(masses >= threshold)), masses.size, key)


# -- rough / smooth decomposition -----------------------------------------------------


def smooth_tail(stream: GaussianStream, n: int, N: int) -> complex:
    """N-smooth part of A(n): the degree-n coefficient of F_N."""
    return complex(coeffs_by_recurrence(stream, n, N)[n])


def rough_part(stream: GaussianStream, n: int, N: int, coeffs: Optional[np.ndarray] = None) -> complex:
    """sum_{N < k <= n} X(k) A(n - k) / sqrt(k). Valid as A(n) - smooth part for N < n < 2N."""
    if n <= N:
        return 0j
    if coeffs is None:
        coeffs = coeffs_by_recurrence(stream, n - N - 1, n).coeffs
    ks = np.arange(N + 1, n + 1)
    return complex(np.sum(stream.head(n)[ks - 1] / np.sqrt(ks) * coeffs[n - ks]))


def _check_window(N: int, *ns: int) -> None:
    w = theorem_window(N)
    for n in ns:
        if n not in w:
            raise SpecError(f"n={n} outside [8N/7, 4N/3] = [{w.start}, {w.stop - 1}] for N={N}")


def _low_coeffs(stream: GaussianStream, N: int) -> np.ndarray:
    # A(j) for j < N/3 is all the window ever needs
    top = (4 * N) // 3 - N - 1
    return coeffs_by_recurrence(stream, max(top, 0), max(top, 0)).coeffs


def variance_sum(stream: GaussianStream, n: int, N: int, coeffs: Optional[np.ndarray] = None) -> float:
    """sum_{N < k <= n} |A(n - k)|^2 / k (twice the conditional variance of the rough part)."""
    _check_window(N, n)
    if coeffs is None:
        coeffs = _low_coeffs(stream, N)
    ks = np.arange(N + 1, n + 1)
    return float(np.sum(np.abs(coeffs[n - ks]) ** 2 / ks))


@dataclass(frozen=True)
class CovarianceRecord:
    n: int
    m: int
    N: int
    value: complex


def covariance_pair(stream: GaussianStream, n: int, m: int, N: int, coeffs: Optional[np.ndarray] = None) -> CovarianceRecord:
    """sum_{N < k <= 4N/3} A(n - k) conj(A(m - k)) / k, with A(j) = 0 for j < 0."""
    _check_window(N, n, m)
    if coeffs is None:
        coeffs = _low_coeffs(stream, N)
    total = 0j
    for k in range(N + 1, (4 * N) // 3 + 1):
        if n - k >= 0 and m - k >= 0:
            total += coeffs[n - k] * np.conj(coeffs[m - k]) / k
    return CovarianceRecord(n, m, N, complex(total))


def covariance_matrix(coeffs: np.ndarray, N: int) -> np.ndarray:
    """All covariance_pair values on the window at once, as B B^H."""
    window = np.array(theorem_window(N))
    ks = np.arange(N + 1, (4 * N) // 3 + 1)
    idx = window[:, None] - ks[None, :]
    B = np.where(idx >= 0, coeffs[np.clip(idx, 0, None)], 0) / np.sqrt(ks)
    return B @ B.conj().T


@dataclass(frozen=True)
class CensusResult:
    window: range
    counts: np.ndarray
    threshold: float

    @property
    def max_count(self) -> int:
        return int(self.counts.max())


def bn_census(stream: GaussianStream, N: int, threshold: Optional[float] = None, exponent: float = 0.8) -> CensusResult:
    """|B_n| = #{m in window : |covariance(n, m)| >= threshold} for every n in the window."""
    if threshold is None:
        threshold = math.log(N) ** -exponent
    cov = covariance_matrix(_low_coeffs(stream, N), N)
    counts = np.count_nonzero(np.abs(cov) >= threshold, axis=1)
    return CensusResult(theorem_window(N), counts, threshold)


def census_bound(N: int, exponent: float = 0.7) -> float:
    return math.log(N) ** exponent


def variance_threshold(N: int, W: float) -> float:
    return math.exp(-11 * W / 5) / math.sqrt(math.log(N))


def _variance_trial(params: dict, seed: int) -> np.ndarray:
    N = params["N"]
    stream = sample_stream(seed, N)
    coeffs = _low_coeffs(stream, N)
    return np.array([variance_sum(stream, n, N, coeffs) for n in theorem_window(N)])


def variance_sums(N: int, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """(trials, window) matrix of variance_sum over the whole window."""
    return collect_trials(_variance_trial, {"N": int(N)}, seed, trials, workers).ok


def _census_trial(params: dict, seed: int) -> float:
    N = params["N"]
    return float(bn_census(sample_stream(seed, N), N, params.get("threshold")).max_count)


def census_maxima(N: int, trials: int, seed: int, workers: int = 1, threshold: Optional[float] = None) -> np.ndarray:
    return collect_trials(_census_trial, {"N": int(N), "threshold": threshold}, seed, trials, workers).ok[:, 0]
