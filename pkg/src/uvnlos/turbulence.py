"""Turbulent fading statistics for a single propagation leg.

Fading coefficients are normalized to unit mean.  Three families are
supported for the per-leg law:

* ``LN``      log-normal, log-variance equal to the Rytov variance of the
              leg (so the second moment is exp(sigma_r^2) exactly);
* ``GG``      Gamma-Gamma with the standard Rytov-variance mapping of the
              shape parameters;
* ``HYBRID``  log-normal whose log-variance is moment-matched to the GG
              variance, ln(1 + Var_GG); usable at any turbulence strength
              because Var_GG stays bounded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, kve

from .atmosphere import TurbulenceOpticalParams

__all__ = [
    "FadingFamily",
    "FadingMoments",
    "TurbulenceModel",
    "draw_fading",
    "gg_params",
    "gg_pdf",
    "gg_variance",
    "hybrid_sigma_ln2",
    "leg_sigma_ln2",
    "ln_pdf",
    "rytov_variance",
    "second_moment",
]

_LOG_TINY = -690.0  # exp() underflows to subnormals below this; flush to 0

LN_PARAM_RYTOV = "rytov"
LN_PARAM_SCINTILLATION = "scintillation-index"


class FadingFamily(enum.Enum):
    LN = "ln"
    GG = "gg"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class TurbulenceModel:
    """Fading family selection on top of the optical turbulence parameters.

    ``ln_parameterization`` controls which quantity sits in the LN
    log-variance slot: the Rytov variance (default, keeps the second
    moment at exp(sigma_r^2)) or the scintillation index
    exp(sigma_r^2) - 1 (kept available for comparison).
    """

    optical: TurbulenceOpticalParams
    regime: FadingFamily = FadingFamily.LN
    ln_parameterization: str = LN_PARAM_RYTOV

    def __post_init__(self):
        if self.ln_parameterization not in (LN_PARAM_RYTOV, LN_PARAM_SCINTILLATION):
            raise ValueError(
                f"unknown ln_parameterization {self.ln_parameterization!r}"
            )


@dataclass(frozen=True)
class FadingMoments:
    """Second moment of the leg fading and its log-normal representation."""

    m2: float         # E[eta^2], >= 1
    sigma_ln2: float  # log-variance with m2 = exp(sigma_ln2)


def rytov_variance(d, model: TurbulenceModel):
    """Plane-wave Rytov variance 1.23 * Cn^2 * k^(7/6) * d^(11/6)."""
    d = np.asarray(d, dtype=float)
    if d.size and d.min() < 0.0:
        raise ValueError("propagation distance must be >= 0")
    k = model.optical.wavenumber
    return 1.23 * model.optical.cn2 * k ** (7.0 / 6.0) * d ** (11.0 / 6.0)


def ln_pdf(eta, sigma_ln2):
    """Unit-mean log-normal density: log-mean -sigma_ln2/2, log-variance sigma_ln2."""
    if sigma_ln2 <= 0.0:
        raise ValueError(f"sigma_ln2 must be > 0, got {sigma_ln2}")
    e = np.asarray(eta, dtype=float)
    out = np.zeros_like(e)
    pos = e > 0.0
    x = e[pos]
    logf = (
        -np.log(x)
        - 0.5 * math.log(2.0 * math.pi * sigma_ln2)
        - (np.log(x) + 0.5 * sigma_ln2) ** 2 / (2.0 * sigma_ln2)
    )
    out[pos] = np.where(logf > _LOG_TINY, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def gg_params(sigma_r2: float) -> tuple[float, float]:
    """Gamma-Gamma shape parameters (alpha, beta) from the Rytov variance."""
    if sigma_r2 <= 0.0:
        raise ValueError(
            "gg_params diverges at sigma_r2 <= 0; use the turbulence-free path"
        )
    s65 = sigma_r2 ** 1.2  # sigma_r^(12/5)
    alpha = 1.0 / math.expm1(0.49 * sigma_r2 / (1.0 + 1.11 * s65) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * sigma_r2 / (1.0 + 0.69 * s65) ** (5.0 / 6.0))
    return alpha, beta


def gg_variance(alpha: float, beta: float) -> float:
    """Variance of the unit-mean Gamma-Gamma law: 1/a + 1/b + 1/(ab)."""
    return 1.0 / alpha + 1.0 / beta + 1.0 / (alpha * beta)


def gg_pdf(eta, alpha: float, beta: float):
    """Unit-mean Gamma-Gamma density (modified Bessel K of the second kind).

    Assembled in log space with the scaled Bessel function so that large
    shape parameters neither overflow the Gamma factors nor underflow K.
    The density can diverge toward eta = 0 for small shapes; evaluation is
    clamped to eta >= 1e-12, and eta = 0 itself maps to 0.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("alpha and beta must be > 0")
    e = np.asarray(eta, dtype=float)
    out = np.zeros_like(e)
    pos = e > 0.0
    x = np.maximum(e[pos], 1e-12)
    ab = alpha * beta
    arg = 2.0 * np.sqrt(ab * x)
    logf = (
        math.log(2.0)
        + 0.5 * (alpha + beta) * math.log(ab)
        + (0.5 * (alpha + beta) - 1.0) * np.log(x)
        - gammaln(alpha)
        - gammaln(beta)
        + np.log(kve(alpha - beta, arg))
        - arg
    )
    out[pos] = np.where(logf > _LOG_TINY, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def _gg_log_m2(sigma_r2):
    """ln of the GG second moment; equals ln(1 + Var_GG), computed directly.

    With 1/alpha = expm1(A) and 1/beta = expm1(B) the second moment is
    (1 + 1/alpha)(1 + 1/beta) = exp(A + B), so A + B is both ln(M2) and
    ln(1 + Var); evaluating the exponents avoids the expm1/log round trip
    and stays exact as sigma_r2 -> 0.
    """
    s = np.asarray(sigma_r2, dtype=float)
    s65 = s ** 1.2
    a_exp = 0.49 * s / (1.0 + 1.11 * s65) ** (7.0 / 6.0)
    b_exp = 0.51 * s / (1.0 + 0.69 * s65) ** (5.0 / 6.0)
    return a_exp + b_exp


def leg_sigma_ln2(d, model: TurbulenceModel):
    """Log-variance parameter of the per-leg fading, per the active family.

    Chosen so that the leg second moment is exp(leg_sigma_ln2) for every
    family, which keeps moment products across a path exact.
    """
    s_r2 = rytov_variance(d, model)
    if model.regime is FadingFamily.LN:
        if model.ln_parameterization == LN_PARAM_SCINTILLATION:
            return np.expm1(s_r2)
        return s_r2
    return _gg_log_m2(s_r2)


def second_moment(d, model: TurbulenceModel) -> FadingMoments:
    """Second moment of the leg fading coefficient for a leg of length d."""
    sigma_ln2 = float(leg_sigma_ln2(d, model))
    return FadingMoments(m2=math.exp(sigma_ln2), sigma_ln2=sigma_ln2)


def hybrid_sigma_ln2(d, model: TurbulenceModel):
    """LN log-variance moment-matched to the GG variance: ln(Var_GG + 1).

    Bounded for all turbulence strengths (Var_GG never exceeds 2) and
    falls back to 0 when the Rytov variance is 0.
    """
    return _gg_log_m2(rytov_variance(d, model))


def draw_fading(rng: np.random.Generator, d, model: TurbulenceModel, size=None):
    """Random unit-mean fading draw(s) for leg length(s) d.

    LN and HYBRID sample a log-normal by inverse transform of a normal
    draw; GG samples the product of two Gamma draws (exact, no Bessel
    inversion).  Legs with zero Rytov variance return exactly 1.
    """
    d = np.asarray(d, dtype=float)
    shape = d.shape if size is None else size
    if model.regime is FadingFamily.GG:
        s_r2 = np.broadcast_to(rytov_variance(d, model), shape).ravel()
        out = np.ones(s_r2.shape)
        live = s_r2 > 0.0
        if np.any(live):
            alpha = 1.0 / np.expm1(0.49 * s_r2[live] / (1.0 + 1.11 * s_r2[live] ** 1.2) ** (7.0 / 6.0))
            beta = 1.0 / np.expm1(0.51 * s_r2[live] / (1.0 + 0.69 * s_r2[live] ** 1.2) ** (5.0 / 6.0))
            x = rng.gamma(alpha, 1.0 / alpha)
            y = rng.gamma(beta, 1.0 / beta)
            out[live] = x * y
        out = out.reshape(shape)
        return out if out.ndim else float(out)
    s_ln2 = np.broadcast_to(leg_sigma_ln2(d, model), shape)
    z = rng.standard_normal(shape)
    out = np.where(s_ln2 > 0.0, np.exp(np.sqrt(s_ln2) * z - 0.5 * s_ln2), 1.0)
    return out if out.ndim else float(out)
