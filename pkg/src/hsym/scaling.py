"""Lifetime extraction and power-law scaling fits.

A lifetime is the first crossing of a sampled series below a threshold,
interpolated linearly in log-time between the bracketing samples.  Runs
that never cross report :class:`Censored` carrying the horizon instead
of a number; censoring is data, not an error, and downstream fits must
account for it explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedFit

#: thresholds used when probing how stable a lifetime is to its definition
STABILITY_THRESHOLDS = (math.exp(-0.3), math.exp(-0.45), math.exp(-1.0))


@dataclass(frozen=True)
class Censored:
    """Series stayed above the threshold for the whole run."""

    threshold: float
    horizon: float
    last_value: float

    def __float__(self):
        raise TypeError("censored lifetime has no numeric value")


@dataclass(frozen=True)
class PowerLawFit:
    """Slope of log(lifetime) against log(1/T)."""

    alpha: float
    alpha_stderr: float
    log_prefactor: float
    n_used: int
    n_censored: int
    n_windowed: int

    def predicted(self, T):
        return math.exp(self.log_prefactor) * float(T) ** (-self.alpha)


def lifetime(times, values, threshold):
    """First crossing below ``threshold``, interpolated in log-time.

    The bracket ending at t=0 falls back to linear time interpolation
    since log-time is undefined there.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1 or times.size == 0:
        raise ValueError("times and values must be matching 1-d arrays")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    threshold = float(threshold)
    below = values < threshold
    if below[0]:
        return float(times[0])
    hits = np.flatnonzero(below)
    if hits.size == 0:
        return Censored(
            threshold=threshold,
            horizon=float(times[-1]),
            last_value=float(values[-1]),
        )
    j = int(hits[0])
    t0, t1 = times[j - 1], times[j]
    v0, v1 = values[j - 1], values[j]
    frac = (v0 - threshold) / (v0 - v1)
    if t0 <= 0.0:
        return float(t0 + frac * (t1 - t0))
    log_t = math.log(t0) + frac * (math.log(t1) - math.log(t0))
    return float(math.exp(log_t))


def decay_rate(times, values, threshold=math.exp(-0.45)):
    """Rate Gamma with exp(-Gamma t) crossing the threshold where the data does."""
    life = lifetime(times, values, threshold)
    if isinstance(life, Censored):
        return life
    if life <= 0.0:
        raise ValueError("crossing at non-positive time has no rate")
    return -math.log(threshold) / life


def threshold_stability(times, values, thresholds=STABILITY_THRESHOLDS):
    """Lifetimes for a set of thresholds, reported without judgement."""
    return {float(th): lifetime(times, values, th) for th in thresholds}


def lifetime_with_bootstrap(times, realization_values, threshold, n_boot=200,
                            seed=0):
    """Ensemble-mean lifetime with a bootstrap standard error.

    ``realization_values`` has one row per realization.  Resamples whose
    mean never crosses are dropped from the spread and counted.
    """
    stack = np.asarray(realization_values, dtype=float)
    if stack.ndim != 2 or stack.shape[0] < 1:
        raise ValueError("need a (realizations, samples) array")
    center = lifetime(times, stack.mean(axis=0), threshold)
    n_real = stack.shape[0]
    if n_real == 1 or isinstance(center, Censored):
        return center, math.nan, 0
    rng = np.random.default_rng(seed)
    draws = []
    censored = 0
    for _ in range(int(n_boot)):
        pick = rng.integers(0, n_real, size=n_real)
        life = lifetime(times, stack[pick].mean(axis=0), threshold)
        if isinstance(life, Censored):
            censored += 1
        else:
            draws.append(life)
    spread = float(np.std(draws, ddof=1)) if len(draws) > 1 else math.nan
    return center, spread, censored


def fit_power_law(pairs, max_lifetime=None):
    """Fit lifetime = c * T^(-alpha) from (T, lifetime) pairs.

    Censored entries are excluded and counted, as are finite lifetimes
    beyond ``max_lifetime`` (the usual fit window keeps lifetimes below
    a third of the simulated horizon so the crossing is well inside the
    run).  At least four surviving points are required.
    """
    kept_T, kept_tau = [], []
    n_censored = 0
    n_windowed = 0
    for T, tau in pairs:
        if isinstance(tau, Censored):
            n_censored += 1
            continue
        tau = float(tau)
        if tau <= 0.0:
            raise ValueError("lifetimes must be positive")
        if max_lifetime is not None and tau > max_lifetime:
            n_windowed += 1
            continue
        kept_T.append(float(T))
        kept_tau.append(tau)
    if len(kept_T) < 4:
        raise IllConditionedFit(
            f"power-law fit needs >= 4 points, got {len(kept_T)} "
            f"({n_censored} censored, {n_windowed} beyond window)"
        )
    x = np.log(1.0 / np.asarray(kept_T))
    y = np.log(np.asarray(kept_tau))
    n = x.size
    x_bar = x.mean()
    sxx = float(((x - x_bar) ** 2).sum())
    if sxx == 0.0:
        raise IllConditionedFit("all fit points share one period")
    slope = float(((x - x_bar) * (y - y.mean())).sum() / sxx)
    intercept = float(y.mean() - slope * x_bar)
    resid = y - (slope * x + intercept)
    if n > 2:
        sigma2 = float((resid ** 2).sum() / (n - 2))
        stderr = math.sqrt(sigma2 / sxx)
    else:
        stderr = 0.0
    return PowerLawFit(
        alpha=slope,
        alpha_stderr=stderr,
        log_prefactor=intercept,
        n_used=n,
        n_censored=n_censored,
        n_windowed=n_windowed,
    )


def fgr_exponent(n, q):
    """Golden-rule lifetime exponent 2(n - q + 1) for the q-th rung.

    ``n`` labels the deepest imprinted group, ``q`` the rung whose
    generator decays; rungs above the ladder are meaningless.
    """
    n, q = int(n), int(q)
    if q < 1 or q > n:
        raise ValueError(f"rung q={q} outside 1..{n}")
    return 2 * (n - q + 1)
