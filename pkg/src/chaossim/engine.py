"""Reproducible Monte Carlo orchestration and the headline experiments.

Trial ``i`` of an experiment always receives ``rng.derive_seed(master_seed, i)``;
workers only decide where a trial runs, never what it computes, and results are
merged in trial-index order. Vectorised simulations use the same scheme with
fixed-size blocks of trials in place of single trials.
"""

from __future__ import annotations

import math
import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .errors import SpecError, TrialFailureAbort
from .estimates import BallotEstimate, EstimateWithError, digest, estimate_from_values
from .model import coeffs_by_recurrence, sample_stream, theorem_window

MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    params: dict
    master_seed: int
    workers: int = 1

    def to_dict(self) -> dict:
        return {"experiment": self.name, "params": dict(self.params), "master_seed": self.master_seed, "workers": self.workers}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(data["experiment"], dict(data["params"]), int(data["master_seed"]), int(data.get("workers", 1)))


def _pool(workers: int) -> ProcessPoolExecutor:
    ctx = multiprocessing.get_context("fork" if "fork" in multiprocessing.get_all_start_methods() else None)
    return ProcessPoolExecutor(max_workers=workers, mp_context=ctx)


def parallel_map(func: Callable, items: Sequence, workers: int = 1) -> list:
    """``[func(x) for x in items]``, optionally spread over processes, order kept."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with _pool(workers) as pool:
        return list(pool.map(func, items, chunksize=chunk))


def _guarded(per_trial: Callable, params: dict, master_seed: int, index: int):
    try:
        out = np.atleast_1d(np.asarray(per_trial(params, rng.derive_seed(master_seed, index)), dtype=float))
    except (ArithmeticError, FloatingPointError):
        return None
    if not np.all(np.isfinite(out)):
        return None
    return out


@dataclass(frozen=True)
class TrialResults:
    """Per-trial outputs in trial order; failed trials hold NaN rows."""

    values: np.ndarray
    failed: tuple = ()

    @property
    def ok(self) -> np.ndarray:
        mask = np.ones(self.values.shape[0], dtype=bool)
        mask[list(self.failed)] = False
        return self.values[mask]


def collect_trials(
    per_trial: Callable,
    params: dict,
    master_seed: int,
    trials: int,
    workers: int = 1,
    max_failure_fraction: float = MAX_FAILURE_FRACTION,
) -> TrialResults:
    """Run ``per_trial(params, trial_seed)`` for every trial index.

    ``per_trial`` must be a picklable module-level callable when ``workers > 1``.
    Overflowing or non-finite trials are recorded as failures; more than
    ``max_failure_fraction`` of them raises TrialFailureAbort.
    """
    if trials < 1:
        raise SpecError("trials must be >= 1")
    outs = parallel_map(partial(_guarded, per_trial, params, master_seed), range(trials), workers)
    failed = tuple(i for i, o in enumerate(outs) if o is None)
    if len(failed) > max_failure_fraction * trials:
        raise TrialFailureAbort(failed, trials, max_failure_fraction)
    width = next((o.size for o in outs if o is not None), 1)
    values = np.full((trials, width), np.nan)
    for i, o in enumerate(outs):
        if o is not None:
            values[i] = o
    return TrialResults(values, failed)


def run_trials(config: ExperimentConfig, per_trial: Callable, reducer: str = "mean"):
    """EstimateWithError for a scalar per-trial output, else a list, one per column."""
    res = collect_trials(per_trial, config.params, config.master_seed, int(config.params["trials"]), config.workers)
    ok = res.ok
    ests = [estimate_from_values(ok[:, j], reducer) for j in range(ok.shape[1])]
    return ests[0] if len(ests) == 1 else ests


# -- moment scan ---------------------------------------------------------------


def _moment_trial(params: dict, seed: int) -> np.ndarray:
    grid = params["n_grid"]
    top = max(grid)
    series = coeffs_by_recurrence(sample_stream(seed, max(top, 1)), top, top)
    mods = np.abs(series.coeffs[list(grid)])
    return np.concatenate([mods, mods**2])


@dataclass(frozen=True)
class MomentRow:
    n: int
    mean_abs: EstimateWithError
    mean_sq: EstimateWithError

    @property
    def scaled_first_moment(self) -> float:
        """mean|A(n)| * (log n)^{1/4}."""
        return self.mean_abs.estimate * math.log(self.n) ** 0.25 if self.n > 1 else float("nan")


def moment_scan(n_grid: Sequence[int], trials: int, seed: int, workers: int = 1) -> list:
    """First and second absolute moments of A(n) on an ascending grid.

    Every trial draws one stream and reads all grid points off a single
    recurrence, so rows share trials.
    """
    grid = [int(n) for n in n_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
        raise SpecError("n_grid must be non-empty, non-negative and strictly ascending")
    res = collect_trials(_moment_trial, {"n_grid": grid}, seed, trials, workers)
    ok = res.ok
    g = len(grid)
    return [
        MomentRow(n, estimate_from_values(ok[:, i]), estimate_from_values(ok[:, g + i]))
        for i, n in enumerate(grid)
    ]


# -- Theorem 2 frequency ----------------------------------------------------------


def theorem2_threshold(N: int, W: float) -> float:
    return math.log(N) ** 0.25 / math.exp(6 * W / 5)


def _window_max_trial(params: dict, seed: int) -> float:
    window = theorem_window(params["N"])
    top = window[-1]
    series = coeffs_by_recurrence(sample_stream(seed, top), top, top)
    return float(np.max(np.abs(series.coeffs[window.start :])))


@dataclass(frozen=True)
class Theorem2Result:
    estimate: BallotEstimate
    maxima: np.ndarray
    threshold: float
    outside_regime: bool
    failed: tuple = field(default=())


def theorem2_frequency(
    N: int, W: float, trials: int, seed: int, workers: int = 1, threshold_factor: float = 1.0
) -> Theorem2Result:
    """Frequency of max_{8N/7 <= n <= 4N/3} |A(n)| >= threshold_factor (log N)^{1/4} / e^{6W/5}.

    The stated regime 1 <= W <= log(log N)/10 is empty at desk scale; runs above
    the upper end go ahead with a warning and ``outside_regime`` set.
    """
    N = int(N)
    if W < 1:
        raise SpecError(f"W must be >= 1, got {W}")
    if N < 2 or len(theorem_window(N)) == 0:
        raise SpecError(f"no integer n with 8N/7 <= n <= 4N/3 for N={N}")
    outside = W > 0.1 * math.log(math.log(N))
    if outside:
        warnings.warn(f"W={W} exceeds log(log N)/10 for N={N}; outside the stated regime", stacklevel=2)
    res = collect_trials(_window_max_trial, {"N": N}, seed, trials, workers)
    maxima = res.values[:, 0]
    threshold = threshold_factor * theorem2_threshold(N, W)
    ok = res.ok[:, 0]
    est = BallotEstimate.from_count(
        int(np.count_nonzero(ok >= threshold)),
        ok.size,
        digest({"experiment": "theorem2", "N": N, "W": W, "threshold_factor": threshold_factor, "seed": seed, "trials": trials}),
    )
    return Theorem2Result(est, maxima, threshold, outside, res.failed)
