"""Scattering and absorption physics of the particulate, turbulent atmosphere.

Coefficients are stored in 1/m throughout.  Phase functions are densities
per steradian of the scattering angle theta in [0, pi]: for each of them
the spherical integral of 2*pi*p(theta)*sin(theta) over [0, pi] equals 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

__all__ = [
    "AIR_CONDUCTIVITY",
    "RELATIVE_PERMITTIVITY_AIR",
    "AtmosphereModel",
    "ScatteringParams",
    "TurbulenceOpticalParams",
    "mie_phase",
    "rayleigh_phase",
    "sphere_integral",
    "total_phase",
    "turbulence_absorption",
    "turbulence_phase",
    "turbulence_phase_mass",
    "turbulence_scatter_coefficient",
]

# Dielectric properties of air close to the ground.
RELATIVE_PERMITTIVITY_AIR = 1.00059
AIR_CONDUCTIVITY = 2.2e-14  # S/m


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if t.size and (t.min() < -1e-12 or t.max() > math.pi + 1e-12):
        raise ValueError("scattering angle must lie in [0, pi]")
    return np.clip(t, 0.0, math.pi)


@dataclass(frozen=True)
class ScatteringParams:
    """Shape parameters of the particle phase functions."""

    gamma: float  # Rayleigh anisotropy parameter
    g: float      # Mie asymmetry factor
    f: float      # weight of the secondary Mie lobe

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not -1.0 < self.g < 1.0:
            raise ValueError(f"asymmetry g must satisfy -1 < g < 1, got {self.g}")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError(f"f must lie in [0, 1], got {self.f}")


@dataclass(frozen=True)
class TurbulenceOpticalParams:
    """Optical description of the turbulent medium."""

    cn2: float          # refractive-index structure parameter, m^(-2/3)
    outer_scale: float  # largest eddy size L0, m
    eddy_size: float    # average eddy size d0, m
    wavelength: float   # carrier wavelength, m

    def __post_init__(self):
        if self.cn2 < 0.0:
            raise ValueError(f"cn2 must be >= 0, got {self.cn2}")
        if self.outer_scale <= 0.0:
            raise ValueError(f"outer_scale must be > 0, got {self.outer_scale}")
        if self.eddy_size <= 0.0:
            raise ValueError(f"eddy_size must be > 0, got {self.eddy_size}")
        if self.wavelength <= 0.0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def index_variance(self) -> float:
        """Refractive-index fluctuation variance of isotropic turbulence."""
        return self.cn2 * self.outer_scale ** (2.0 / 3.0) / 1.91


@dataclass(frozen=True)
class AtmosphereModel:
    """Scattering/absorption coefficients plus phase-function parameters.

    Eddy scattering is reportable through ``turbulence_scatter_coefficient``
    but excluded from the totals by default: it is concentrated so far
    forward that it amounts to rectilinear propagation.  Set
    ``include_turbulence_scatter`` (requires ``optics``) to fold it into
    ``k_s_tot`` and ``total_phase`` for sensitivity studies.
    """

    k_s_ray: float  # Rayleigh scattering coefficient, 1/m
    k_s_mie: float  # Mie scattering coefficient, 1/m
    k_a_par: float  # particle absorption coefficient, 1/m
    scattering: ScatteringParams
    optics: TurbulenceOpticalParams | None = None
    include_turbulence_scatter: bool = False

    def __post_init__(self):
        for name in ("k_s_ray", "k_s_mie", "k_a_par"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.include_turbulence_scatter and self.optics is None:
            raise ValueError("include_turbulence_scatter requires optics")
        if self.k_e_tot <= 0.0:
            raise ValueError("total extinction coefficient must be positive")

    # Derived coefficients are recomputed on access so they can never go
    # stale when a model is rebuilt with dataclasses.replace.

    @property
    def k_s_par(self) -> float:
        return self.k_s_ray + self.k_s_mie

    @property
    def k_s_tur(self) -> float:
        if self.optics is None:
            return 0.0
        return turbulence_scatter_coefficient(self.optics)

    @property
    def k_s_tot(self) -> float:
        total = self.k_s_par
        if self.include_turbulence_scatter:
            total += self.k_s_tur
        return total

    @property
    def k_e_tot(self) -> float:
        return self.k_s_tot + self.k_a_par

    @property
    def albedo(self) -> float:
        return self.k_s_tot / self.k_e_tot


def rayleigh_phase(theta, params: ScatteringParams):
    """Rayleigh phase function: nearly isotropic with a cos^2 modulation."""
    t = _check_theta(theta)
    c2 = np.cos(t) ** 2
    gam = params.gamma
    return 3.0 * (1.0 + 3.0 * gam + (1.0 - gam) * c2) / (16.0 * math.pi * (1.0 + 2.0 * gam))


def mie_phase(theta, params: ScatteringParams):
    """Mie phase function: a Henyey-Greenstein lobe plus an f-weighted term.

    The secondary term integrates to zero over the sphere, so the whole
    density stays normalized for any f in [0, 1].
    """
    t = _check_theta(theta)
    g = params.g
    c = np.cos(t)
    lobe = 1.0 / (1.0 + g * g - 2.0 * g * c) ** 1.5
    corr = params.f * (3.0 * c * c - 1.0) / (2.0 * (1.0 + g * g) ** 1.5)
    return (1.0 - g * g) / (4.0 * math.pi) * (lobe + corr)


def turbulence_phase(theta, params: TurbulenceOpticalParams):
    """Phase function of eddy scattering for a Booker-Gordon spectrum.

    p(theta) = (1 + 4 k^2 d0^2) / (4 pi (1 + 4 k^2 d0^2 sin^2(theta/2))^2).
    With d0 much larger than the wavelength the density is an extreme
    forward spike.
    """
    t = _check_theta(theta)
    a = 4.0 * (params.wavenumber * params.eddy_size) ** 2
    s2 = np.sin(0.5 * t) ** 2
    return (1.0 + a) / (4.0 * math.pi * (1.0 + a * s2) ** 2)


def turbulence_phase_mass(theta, params: TurbulenceOpticalParams):
    """Closed-form spherical mass of ``turbulence_phase`` inside [0, theta]."""
    t = _check_theta(theta)
    a = 4.0 * (params.wavenumber * params.eddy_size) ** 2
    u = np.sin(0.5 * t) ** 2
    return (1.0 + a) * u / (1.0 + a * u)


def total_phase(theta, model: AtmosphereModel):
    """Mixture of the scattering phase functions, weighted by coefficients."""
    k_tot = model.k_s_tot
    if k_tot <= 0.0:
        raise ValueError("total scattering coefficient must be positive")
    p = model.k_s_ray * rayleigh_phase(theta, model.scattering)
    p = p + model.k_s_mie * mie_phase(theta, model.scattering)
    if model.include_turbulence_scatter:
        p = p + model.k_s_tur * turbulence_phase(theta, model.optics)
    return p / k_tot


def turbulence_absorption(wavelength: float) -> float:
    """Absorption coefficient of the turbulent air itself, in 1/m.

    Plane-wave attenuation in a weakly conducting dielectric with
    eps = eps_r + i*eps_i and eps_i = 60*lambda*delta:
    alpha = 0.5 * k * eps_i / sqrt(eps_r).  Because k*eps_i = 120*pi*delta
    the value is independent of wavelength (about 4.15e-12 1/m near the
    ground), many orders below particle absorption, hence always ignored
    in the extinction budget.
    """
    if wavelength <= 0.0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    k = 2.0 * math.pi / wavelength
    eps_i = 60.0 * wavelength * AIR_CONDUCTIVITY
    return 0.5 * k * eps_i / math.sqrt(RELATIVE_PERMITTIVITY_AIR)


def turbulence_scatter_coefficient(params: TurbulenceOpticalParams) -> float:
    """Total eddy scattering coefficient, 1/m.

    Spherical integral of the Booker-Gordon differential cross section
    2*pi*k^4*Phi_n(2k sin(theta/2)), which reduces to
    8 k^4 <n1^2> d0^3 / (1 + 4 k^2 d0^2).
    """
    k = params.wavenumber
    d0 = params.eddy_size
    a = 4.0 * (k * d0) ** 2
    return 8.0 * k**4 * params.index_variance * d0**3 / (1.0 + a)


def sphere_integral(phase, *, forward_refined=False, nodes=20001,
                    forward_cut=1e-2, forward_nodes=4001):
    """Spherical integral of a phase function by composite Simpson rule.

    Integrates 2*pi*phase(theta)*sin(theta) over [0, pi] on a uniform
    grid.  With ``forward_refined`` the range [1e-12, forward_cut] is
    integrated first on a logarithmic grid; required for phase functions
    that vary over many decades within microradians of zero (the part
    below 1e-12 rad carries mass below 1e-15 and is dropped).
    """
    total = 0.0
    lo = 0.0
    if forward_refined:
        log_t = np.linspace(math.log(1e-12), math.log(forward_cut), forward_nodes)
        t = np.exp(log_t)
        y = 2.0 * math.pi * np.asarray(phase(t), dtype=float) * np.sin(t) * t
        total += simpson(y, x=log_t)
        lo = forward_cut
    t = np.linspace(lo, math.pi, nodes)
    y = 2.0 * math.pi * np.asarray(phase(t), dtype=float) * np.sin(t)
    total += simpson(y, x=t)
    return float(total)
