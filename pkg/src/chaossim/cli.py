"""Command-line entry point: one subcommand per experiment, plus ``rerun``.

Every run writes CSV tables and a ``manifest.json`` into ``--out`` (default:
``$CHAOSSIM_OUT`` or ``./chaossim-out``). Parameters resolve as built-in
defaults, then ``--config`` file (key=value lines), then explicit flags.

Exit status: 0 on success, 2 on a usage or spec error, 3 when too many Monte
Carlo trials failed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import __version__, rng
from .barrier import (
    BarrierSpec,
    max_threshold,
    pr3_envelope,
    sample_maxima,
    simulate_ballot,
    simulate_endpoint_window,
    simulate_two_sided,
)
from .engine import moment_scan, theorem2_frequency
from .errors import ChaosSimError, SpecError, TrialFailureAbort
from .estimates import BallotEstimate, digest
from .integrals import (
    QuadratureRule,
    census_bound,
    census_maxima,
    check_W_range,
    low_moment_mass,
    mcr4_event_frequency,
    mcr4_masses,
    mcr4_threshold,
    parseval_mass,
    variance_sums,
    variance_threshold,
)
from .io import RunWriter, read_config, read_manifest, utc_now
from .model import cauchy_recover, coeffs_by_partitions, coeffs_by_recurrence, sample_stream, theorem_window
from .walk import block_range, joint_exp_moment_closed_form, joint_exp_moment_mc, rho_m_t, sigma_m_sq

OUT_ENV = "CHAOSSIM_OUT"


def int_list(text) -> list:
    return [int(float(x)) for x in str(text).split(",") if x.strip()]


def float_list(text) -> list:
    return [float(x) for x in str(text).split(",") if x.strip()]


def count(text) -> int:
    # accepts 1e5 style counts
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text}")
    return int(value)


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable
    default: object
    help: str = ""


@dataclass
class Outcome:
    summary: str
    notes: dict


# -- experiment runners: (params, seed, workers, writer) -> Outcome --------------


def run_sample_coeffs(p, seed, workers, out: RunWriter) -> Outcome:
    series = coeffs_by_recurrence(sample_stream(seed, max(1, p["degree"])), p["degree"], p["cap"])
    out.add_table("coeffs.csv", ["n", "re", "im"], ((n, c.real, c.imag) for n, c in enumerate(series.coeffs)))
    return Outcome(f"wrote {series.degree + 1} coefficients", {})


def run_oracle_check(p, seed, workers, out) -> Outcome:
    rows, worst = [], 0.0
    top = p["max_n"]
    cap = p["cap"] if p["cap"] is not None else top
    for i in range(p["streams"]):
        stream = sample_stream(rng.derive_seed(seed, i), max(top, 1))
        rec = coeffs_by_recurrence(stream, top, cap)
        for n in range(top + 1):
            part = coeffs_by_partitions(stream, n, cap)
            diff = abs(rec[n] - part) / max(1.0, abs(part))
            worst = max(worst, diff)
            rows.append((i, n, rec[n].real, rec[n].imag, part.real, part.imag, diff))
    out.add_table("oracle.csv", ["stream", "n", "recurrence_re", "recurrence_im", "partition_re", "partition_im", "rel_diff"], rows)
    return Outcome(f"max relative difference {worst:.3e}", {"max_rel_diff": worst})


def run_cauchy_check(p, seed, workers, out) -> Outcome:
    rows, worst = [], 0.0
    for i in range(p["streams"]):
        stream = sample_stream(rng.derive_seed(seed, i), max(1, int(p["cap"])))
        rec = coeffs_by_recurrence(stream, p["max_n"], p["cap"])
        for n in range(p["max_n"] + 1):
            val = cauchy_recover(stream, n, p["cap"], p["radius"], p["points"])
            err = abs(val - rec[n])
            worst = max(worst, err)
            rows.append((i, n, val.real, val.imag, rec[n].real, rec[n].imag, err))
    out.add_table("cauchy.csv", ["stream", "n", "cauchy_re", "cauchy_im", "recurrence_re", "recurrence_im", "abs_err"], rows)
    return Outcome(f"max abs error {worst:.3e}", {"max_abs_err": worst})


def run_parseval_check(p, seed, workers, out) -> Outcome:
    series = coeffs_by_recurrence(sample_stream(seed, max(1, p["degree"])), p["degree"], p["degree"])
    rows = []
    for r in p["radii"]:
        chk = parseval_mass(series, QuadratureRule(p["points"], r))
        rows.append((r, p["points"], chk.integral, chk.coefficient_sum, chk.relative_gap))
    out.add_table("parseval.csv", ["radius", "points", "integral", "coefficient_sum", "rel_gap"], rows)
    return Outcome(f"max relative gap {max(r[-1] for r in rows):.3e}", {})


def mgf_grid(blocks, angles) -> list:
    """(label, m, alphas, ts): a single-angle point per block, plus angle pairs (0, t)."""
    grid = []
    for m in blocks:
        grid.append((f"single m={m}", m, (0.5,), (0.0,)))
        for t in angles:
            grid.append((f"pair m={m} t={t!r}", m, (0.5, 0.5), (0.0, t)))
    return grid


def block_bounds(m: int) -> tuple:
    lo, hi = block_range(m)
    return (0.5 if lo == 1 else lo - 1.0), float(hi)


def run_walk_stats(p, seed, workers, out) -> Outcome:
    sig = p["sigma"]
    rows = []
    for m in p["blocks"]:
        lo, hi = block_range(m)
        for t in p["angles"]:
            rows.append((m, lo, hi, sig, sigma_m_sq(sig, m), t, rho_m_t(sig, m, t)))
    out.add_table("blocks.csv", ["m", "k_first", "k_last", "sigma", "sigma_m_sq", "t", "rho"], rows)
    mrows, worst = [], 0.0
    for i, (label, m, alphas, ts) in enumerate(mgf_grid(p["blocks"], p["angles"])):
        x, y = block_bounds(m)
        exact = joint_exp_moment_closed_form(alphas, ts, x, y, sig)
        est = joint_exp_moment_mc(alphas, ts, x, y, sig, p["trials"], rng.derive_seed(seed, i), workers)
        z = (est.estimate - exact) / est.std_error
        worst = max(worst, abs(z))
        mrows.append((label, m, x, y, exact, est.estimate, est.std_error, est.trials, z))
    out.add_table("mgf.csv", ["point", "m", "x", "y", "closed_form", "mc_estimate", "mc_se", "trials", "z"], mrows)
    return Outcome(f"{len(mrows)} MGF grid points, max |z| {worst:.2f}", {"max_abs_z": worst})


def run_ballot_scan(p, seed, workers, out) -> Outcome:
    kind = p["kind"]
    if kind not in ("pr1", "pr2", "pr3"):
        raise SpecError(f"unknown ballot kind {kind!r}")
    rows, i = [], 0
    widths = p["windows"] if kind == "pr3" else [None]
    for n in p["horizons"]:
        for a in p["caps"]:
            for b in widths:
                lower = (lambda j, s=p["lower_slope"]: -s * j) if kind == "pr2" else None
                spec = BarrierSpec(n, a, variances=p["variance"], lower=lower, slope_B=p["B"] if kind == "pr2" else None, window=b)
                s = rng.derive_seed(seed, i)
                i += 1
                if kind == "pr1":
                    est = simulate_ballot(spec, p["trials"], s, workers)
                elif kind == "pr2":
                    est = simulate_two_sided(spec, p["trials"], s, workers)
                else:
                    est = simulate_endpoint_window(spec, p["trials"], s, workers)
                env = pr3_envelope(a, b, n) if kind == "pr3" else None
                rows.append((kind, n, a, b, est.probability, est.std_error, est.trials, est.probability * math.sqrt(n) / a, env))
    out.add_table("ballot.csv", ["kind", "n", "a", "b", "probability", "std_error", "trials", "scaled", "envelope"], rows)
    scaled = [r[7] for r in rows if r[7] > 0]
    ratio = max(scaled) / min(scaled) if scaled else float("nan")
    return Outcome(f"{len(rows)} cells, scaled band ratio {ratio:.3f}", {"band_ratio": ratio})


def run_max_gauss(p, seed, workers, out) -> Outcome:
    maxima = sample_maxima(p["n"], p["eps"], p["trials"], seed, workers)
    thr = max_threshold(p["n"], p["delta"])
    below = BallotEstimate.from_count(int(np.count_nonzero(maxima <= thr)), maxima.size)
    band = float(np.mean((maxima >= p["band_lo"]) & (maxima <= p["band_hi"])))
    out.add_table(
        "maxgauss.csv",
        ["n", "eps", "delta", "threshold", "p_below", "std_error", "trials", "band_lo", "band_hi", "band_frequency"],
        [(p["n"], p["eps"], p["delta"], thr, below.probability, below.std_error, below.trials, p["band_lo"], p["band_hi"], band)],
    )
    out.add_table("maxima.csv", ["trial", "max"], enumerate(maxima))
    return Outcome(f"P[max <= {thr:.4f}] = {below.probability:.4f}, band frequency {band:.3f}", {})


def run_lowmoment_mass(p, seed, workers, out) -> Outcome:
    N = p["N"]
    mass = low_moment_mass(sample_stream(seed, N), N, p["sigma"], QuadratureRule(p["points"]) if p["points"] else None)
    out.add_table("lowmoment.csv", ["N", "sigma", "points", "converged", "mass"], [(N, p["sigma"], mass.points, mass.converged, mass.value)])
    return Outcome(f"mass {mass.value:.6g} with {mass.points} points (converged={mass.converged})", {"converged": mass.converged})


def run_mcr4_freq(p, seed, workers, out) -> Outcome:
    N, sig = p["N"], p["sigma"]
    outside = [check_W_range(W, N) for W in p["W"]]
    masses = mcr4_masses(N, sig, p["trials"], seed, workers)
    rows = []
    for W, flag in zip(p["W"], outside):
        est = mcr4_event_frequency(N, sig, W, p["trials"], seed, masses=masses)
        rows.append((W, mcr4_threshold(N, sig, W), est.probability, est.std_error, est.trials, flag))
    out.add_table("mcr4.csv", ["W", "threshold", "frequency", "std_error", "trials", "outside_regime"], rows)
    out.add_table("masses.csv", ["trial", "mass"], enumerate(masses))
    return Outcome("frequencies " + ", ".join(f"W={r[0]:g}: {r[2]:.3f}" for r in rows), {"outside_regime": any(outside)})


def run_variance_scan(p, seed, workers, out) -> Outcome:
    N, W = p["N"], p["W"]
    outside = check_W_range(W, N)
    sums = variance_sums(N, p["trials"], seed, workers)
    thr = variance_threshold(N, W)
    rows = []
    for i, n in enumerate(theorem_window(N)):
        est = BallotEstimate.from_count(int(np.count_nonzero(sums[:, i] >= thr)), sums.shape[0])
        rows.append((n, float(np.mean(sums[:, i])), est.probability, est.std_error))
    out.add_table("variance.csv", ["n", "mean_variance_sum", "frequency", "std_error"], rows)
    mins = sums.min(axis=1)
    out.add_table("window_min.csv", ["trial", "min_variance_sum", "event"], ((i, v, bool(v >= thr)) for i, v in enumerate(mins)))
    freq = float(np.mean(mins >= thr))
    return Outcome(f"threshold {thr:.4g}; whole-window frequency {freq:.3f}", {"outside_regime": outside, "window_frequency": freq})


def run_covariance_census(p, seed, workers, out) -> Outcome:
    N = p["N"]
    maxima = census_maxima(N, p["trials"], seed, workers, p["threshold"])
    bound = census_bound(N)
    out.add_table("census.csv", ["trial", "max_count", "within_bound"], ((i, int(m), bool(m <= bound)) for i, m in enumerate(maxima)))
    freq = float(np.mean(maxima <= bound))
    return Outcome(f"frequency of max |B_n| <= {bound:.3f}: {freq:.3f}", {"frequency": freq, "bound": bound})


def run_moment_scan(p, seed, workers, out) -> Outcome:
    rows = moment_scan(p["grid"], p["trials"], seed, workers)
    out.add_table(
        "moments.csv",
        ["n", "mean_abs", "se_abs", "mean_sq", "se_sq", "scaled_mean_abs", "trials"],
        ((r.n, r.mean_abs.estimate, r.mean_abs.std_error, r.mean_sq.estimate, r.mean_sq.std_error, r.scaled_first_moment, r.mean_abs.trials) for r in rows),
    )
    scaled = [r.scaled_first_moment for r in rows if r.n > 1]
    ratio = max(scaled) / min(scaled) if scaled else float("nan")
    return Outcome(f"{len(rows)} grid points, scaled first-moment max/min {ratio:.3f}", {"scaled_ratio": ratio})


def run_theorem2_freq(p, seed, workers, out) -> Outcome:
    res = theorem2_frequency(p["N"], p["W"], p["trials"], seed, workers, p["threshold_factor"])
    e = res.estimate
    out.add_table(
        "theorem2.csv",
        ["N", "W", "threshold", "frequency", "std_error", "trials", "failed", "outside_regime"],
        [(p["N"], p["W"], res.threshold, e.probability, e.std_error, e.trials, len(res.failed), res.outside_regime)],
    )
    out.add_table("maxima.csv", ["trial", "max_abs"], enumerate(res.maxima))
    return Outcome(f"frequency {e.probability:.3f} +- {e.std_error:.3f} (threshold {res.threshold:.4g})", {"outside_regime": res.outside_regime, "failed_trials": list(res.failed)})


def _opt_float(text):
    return None if text in (None, "", "none", "None") else float(text)


COMMON = [Param("seed", int, 7, "master seed")]

EXPERIMENTS = {
    "sample-coeffs": (run_sample_coeffs, [Param("degree", int, 64), Param("cap", float, 64.0)]),
    "oracle-check": (run_oracle_check, [Param("streams", int, 3), Param("max_n", int, 12), Param("cap", _opt_float, None)]),
    "cauchy-check": (
        run_cauchy_check,
        [Param("streams", int, 3), Param("cap", float, 64.0), Param("max_n", int, 64), Param("radius", float, 0.98), Param("points", int, 4096)],
    ),
    "parseval-check": (run_parseval_check, [Param("degree", int, 256), Param("points", int, 1024), Param("radii", float_list, [0.5, 0.99])]),
    "walk-stats": (
        run_walk_stats,
        [Param("blocks", int_list, [1, 3, 6]), Param("angles", float_list, [0.0, 0.3, 2.0]), Param("sigma", float, 0.0), Param("trials", count, 100000)],
    ),
    "ballot-scan": (
        run_ballot_scan,
        [
            Param("kind", str, "pr1", "pr1, pr2 or pr3"),
            Param("horizons", int_list, [25, 100, 400]),
            Param("caps", float_list, [1.0, 2.0, 4.0]),
            Param("windows", float_list, [1.0, 2.0]),
            Param("variance", float, 0.5),
            Param("B", float, 10.0),
            Param("lower_slope", float, 10.0),
            Param("trials", count, 100000),
        ],
    ),
    "max-gauss": (
        run_max_gauss,
        [Param("n", count, 100000), Param("eps", float, 0.0), Param("delta", float, 0.5), Param("trials", count, 500), Param("band_lo", float, 3.6), Param("band_hi", float, 5.6)],
    ),
    "lowmoment-mass": (run_lowmoment_mass, [Param("N", int, 1024), Param("sigma", float, 0.0), Param("points", int, 0)]),
    "mcr4-freq": (run_mcr4_freq, [Param("N", int, 4096), Param("sigma", float, 0.0), Param("W", float_list, [1.0, 2.0, 3.0]), Param("trials", count, 200)]),
    "variance-scan": (run_variance_scan, [Param("N", int, 1024), Param("W", float, 3.0), Param("trials", count, 100)]),
    "covariance-census": (run_covariance_census, [Param("N", int, 512), Param("trials", count, 50), Param("threshold", _opt_float, None)]),
    "moment-scan": (run_moment_scan, [Param("grid", int_list, [64, 256, 1024]), Param("trials", count, 5000)]),
    "theorem2-freq": (run_theorem2_freq, [Param("N", int, 8192), Param("W", float, 3.0), Param("trials", count, 200), Param("threshold_factor", float, 1.0)]),
}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaossim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"chaossim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, params) in EXPERIMENTS.items():
        sp = sub.add_parser(name)
        for prm in COMMON + params:
            sp.add_argument(_flag(prm.name), dest=prm.name, default=None, help=f"{prm.help} (default {prm.default!r})".strip())
        sp.add_argument("--config", help="key=value file; explicit flags win")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None)
    rr = sub.add_parser("rerun", help="re-execute the run described by a manifest")
    rr.add_argument("manifest")
    rr.add_argument("--workers", type=int, default=None)
    rr.add_argument("--out", default=None)
    return parser


def resolve_params(name: str, flags: dict, config: Optional[dict] = None) -> dict:
    """Defaults, then config file entries, then explicit flags; all parsed."""
    _, params = EXPERIMENTS[name]
    config = config or {}
    known = {prm.name for prm in COMMON + params}
    unknown = set(config) - known
    if unknown:
        raise ValueError(f"unknown config keys for {name}: {sorted(unknown)}")
    out = {}
    for prm in COMMON + params:
        raw = flags.get(prm.name)
        if raw is None:
            raw = config.get(prm.name)
        out[prm.name] = prm.default if raw is None else prm.parse(raw)
    return out


def execute(name: str, params: dict, workers: int, out_dir) -> dict:
    runner, _ = EXPERIMENTS[name]
    params = dict(params)
    seed = int(params.pop("seed"))
    writer = RunWriter(out_dir)
    started = utc_now()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        outcome = runner(params, seed, workers, writer)
    manifest = {
        "tool_version": __version__,
        "experiment": name,
        "params": params,
        "master_seed": seed,
        "workers": workers,
        "started": started,
        "finished": utc_now(),
        "config_digest": digest({"experiment": name, "params": params, "master_seed": seed}),
        "summary": outcome.summary,
        "notes": dict(outcome.notes, warnings=[str(w.message) for w in caught]),
    }
    manifest = writer.finalize(manifest)
    print(f"{name}: {outcome.summary} -> {out_dir}")
    return manifest


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "chaossim-out")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            m = read_manifest(args.manifest)
            params = dict(m["params"], seed=m["master_seed"])
            workers = args.workers if args.workers is not None else int(m.get("workers", 1))
            execute(m["experiment"], params, workers, args.out or _default_out())
            return 0
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "workers", "out")}
        config = read_config(args.config) if args.config else None
        try:
            params = resolve_params(args.command, flags, config)
        except ValueError as exc:
            parser.error(str(exc))
        execute(args.command, params, args.workers, args.out or _default_out())
        return 0
    except TrialFailureAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ChaosSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        # unreadable config or manifest
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
