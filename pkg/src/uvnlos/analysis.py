"""Distribution fitting and measured-signal statistics.

Covers two jobs: fitting reference laws (log-normal, Gaussian) to gridded
densities produced by the engine, and reducing recorded receiver samples
to scintillation statistics with a Gaussian fit of the normalized
amplitude distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize
from scipy.special import erf
from scipy.stats import kstest

__all__ = [
    "MeasurementLog",
    "MeasurementStats",
    "analyze_measurements",
    "fit_gaussian_to_grid",
    "fit_lognormal_to_grid",
    "grid_cdf",
    "grid_moments",
    "load_measurements",
    "scintillation_index",
]

MIN_SAMPLES = 100


def grid_cdf(x, pdf) -> np.ndarray:
    """CDF of a gridded density, normalized to end at 1."""
    cdf = cumulative_trapezoid(np.asarray(pdf, float), np.asarray(x, float), initial=0.0)
    return cdf / cdf[-1]


def grid_moments(x, pdf) -> tuple[float, float]:
    """(mean, variance) of a gridded density by trapezoid integration."""
    x = np.asarray(x, float)
    pdf = np.asarray(pdf, float)
    norm = np.trapezoid(pdf, x)
    mean = np.trapezoid(pdf * x, x) / norm
    var = np.trapezoid(pdf * x * x, x) / norm - mean * mean
    return float(mean), float(var)


def _lognormal_cdf(x, mu, sigma2):
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = 0.5 * (1.0 + erf((np.log(x[pos]) - mu) / math.sqrt(2.0 * sigma2)))
    return out


def _gaussian_cdf(x, mean, std):
    return 0.5 * (1.0 + erf((x - mean) / (std * math.sqrt(2.0))))


def _ks_grid(cdf_a, cdf_b) -> float:
    return float(np.max(np.abs(cdf_a - cdf_b)))


def fit_lognormal_to_grid(x, pdf) -> tuple[float, float, float]:
    """Best-fit log-normal to a gridded density: (log-mean, log-variance, KS).

    Starts from the moment-matched parameters, then refines them by
    minimizing the KS distance between the gridded CDF and the candidate
    log-normal CDF.
    """
    x = np.asarray(x, float)
    cdf = grid_cdf(x, pdf)
    mean, var = grid_moments(x, pdf)
    s2 = math.log1p(var / mean**2)
    mu = math.log(mean) - 0.5 * s2

    def cost(p):
        m, log_s2 = p
        return _ks_grid(cdf, _lognormal_cdf(x, m, math.exp(log_s2)))

    res = minimize(cost, x0=[mu, math.log(s2)], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 400})
    mu_fit, s2_fit = res.x[0], math.exp(res.x[1])
    return float(mu_fit), float(s2_fit), float(res.fun)


def fit_gaussian_to_grid(x, pdf) -> tuple[float, float, float]:
    """Best-fit Gaussian to a gridded density: (mean, std, KS distance)."""
    x = np.asarray(x, float)
    cdf = grid_cdf(x, pdf)
    mean, var = grid_moments(x, pdf)

    def cost(p):
        m, log_s = p
        return _ks_grid(cdf, _gaussian_cdf(x, m, math.exp(log_s)))

    res = minimize(cost, x0=[mean, 0.5 * math.log(var)], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 400})
    return float(res.x[0]), float(math.exp(res.x[1])), float(res.fun)


@dataclass(frozen=True)
class MeasurementLog:
    """Recorded receiver samples (voltages), optionally time-stamped."""

    values: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < MIN_SAMPLES:
            raise ValueError(
                f"need at least {MIN_SAMPLES} samples for statistics, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("measurement log contains non-finite samples")
        object.__setattr__(self, "values", v)


def load_measurements(path) -> MeasurementLog:
    """Read a measurement log: one value per line, or (index/time, value) pairs."""
    rows = np.loadtxt(path, ndmin=2)
    if rows.shape[1] == 1:
        return MeasurementLog(values=rows[:, 0])
    if rows.shape[1] == 2:
        return MeasurementLog(values=rows[:, 1], timestamps=rows[:, 0])
    raise ValueError(f"expected 1 or 2 columns in {path}, got {rows.shape[1]}")


def scintillation_index(values) -> float:
    """Normalized intensity variance E[R^2]/E[R]^2 - 1."""
    v = np.asarray(values, dtype=float)
    mean = v.mean()
    if mean == 0.0:
        raise ValueError("scintillation index undefined for zero-mean signal")
    return float(np.mean(v * v) / mean**2 - 1.0)


@dataclass(frozen=True)
class MeasurementStats:
    """Summary of a measurement log and the Gaussian fit of its fluctuations."""

    samples: int
    mean_voltage: float
    scintillation_index: float
    gauss_mean: float     # of the mean-normalized samples
    gauss_std: float
    ks_distance: float    # KS statistic of the Gaussian fit
    hist_centers: np.ndarray
    hist_density: np.ndarray


def analyze_measurements(log: MeasurementLog, *, bins: int = 50) -> MeasurementStats:
    """Scintillation statistics of recorded samples.

    Samples are normalized by their mean before histogramming and
    fitting, so the Gaussian fit describes the fading factor around 1.
    """
    v = log.values
    mean = float(v.mean())
    normalized = v / mean
    density, edges = np.histogram(normalized, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    g_mean = float(normalized.mean())
    g_std = float(normalized.std(ddof=1))
    ks = float(kstest(normalized, "norm", args=(g_mean, g_std)).statistic)
    return MeasurementStats(
        samples=v.size,
        mean_voltage=mean,
        scintillation_index=scintillation_index(v),
        gauss_mean=g_mean,
        gauss_std=g_std,
        ks_distance=ks,
        hist_centers=centers,
        hist_density=density,
    )
