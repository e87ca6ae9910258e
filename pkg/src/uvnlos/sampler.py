"""Random variates for the importance-sampling path generator.

Streams are counter-based: a Philox generator keyed by (seed, stream_id).
The same pair always reproduces the same sequence, distinct pairs are
statistically independent, and a stream can be handed to any worker
without coordination, so a parallel partition never changes the sample
set, only which worker evaluates it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .atmosphere import AtmosphereModel, total_phase
from .errors import NumericalError

__all__ = [
    "PhaseCdfTable",
    "RandomStream",
    "build_cdf_table",
    "derive_seed",
    "invert_distance",
    "invert_theta",
    "invert_theta0",
    "pack_stream_id",
    "sample_distance",
    "sample_phi",
    "sample_theta",
    "sample_theta0",
]

_MASK64 = (1 << 64) - 1
_U_MAX = float(np.nextafter(1.0, 0.0))  # keeps -log(1-u) finite if u == 1 sneaks in


def derive_seed(seed: int, *indices: int) -> int:
    """Stable 64-bit sub-seed for nested experiments (sweep rows, repetitions)."""
    text = "/".join(str(int(x)) for x in (seed, *indices))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def pack_stream_id(*, order: int = 0, chunk: int = 0, tag: int = 0) -> int:
    """Stream-id layout tag:8 | order:8 | chunk:48, so ids never collide."""
    if not 0 <= tag < 256:
        raise ValueError(f"tag out of range: {tag}")
    if not 0 <= order < 256:
        raise ValueError(f"order out of range: {order}")
    if not 0 <= chunk < 1 << 48:
        raise ValueError(f"chunk out of range: {chunk}")
    return (tag << 56) | (order << 48) | chunk


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random stream identified by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def invert_distance(u, k_e: float):
    """Inverse CDF of the exponential free-path law, d = -ln(1-u)/k_e."""
    if k_e <= 0.0:
        raise ValueError(f"extinction coefficient must be > 0, got {k_e}")
    u = np.minimum(np.asarray(u, dtype=float), _U_MAX)
    return -np.log1p(-u) / k_e


def sample_distance(rng: np.random.Generator, k_e: float, size=None):
    """Exponential leg length with rate k_e (mean free path 1/k_e)."""
    return invert_distance(rng.random(size), k_e)


def invert_theta0(u, beta_t: float):
    """Inverse CDF of the uniform-cone source zenith, support [0, beta_t/2]."""
    if not 0.0 < beta_t < math.pi:
        raise ValueError(f"beta_t must lie in (0, pi), got {beta_t}")
    u = np.asarray(u, dtype=float)
    return np.arccos(1.0 - u * (1.0 - math.cos(0.5 * beta_t)))


def sample_theta0(rng: np.random.Generator, beta_t: float, size=None):
    """Source zenith angle of a uniform cone source, density prop. to sin."""
    return invert_theta0(rng.random(size), beta_t)


def sample_phi(rng: np.random.Generator, size=None):
    """Uniform azimuth on [0, 2*pi)."""
    return 2.0 * math.pi * rng.random(size)


@dataclass(frozen=True)
class PhaseCdfTable:
    """Tabulated CDF of the scattering zenith, F(theta) on a monotone grid.

    ``raw_norm`` records the spherical integral of the phase function
    before normalization; it must come out within 1e-4 of 1 or the table
    build fails (a broken phase function).
    """

    theta: np.ndarray
    cdf: np.ndarray
    raw_norm: float

    @property
    def resolution(self) -> int:
        return self.theta.size


def _cdf_nodes(resolution: int, forward_refined: bool) -> np.ndarray:
    # Cosine spacing clusters nodes quadratically toward theta = 0 where
    # forward-peaked phase functions vary fastest.
    t = np.linspace(0.0, 0.5 * math.pi, resolution)
    nodes = math.pi * (1.0 - np.cos(t))
    if forward_refined:
        # Eddy scattering spikes within microradians of zero; splice in a
        # logarithmic sub-grid so the cumulative trapezoid still sees it.
        log_nodes = np.logspace(-9.0, -2.0, 4096)
        nodes = np.unique(np.concatenate([nodes, log_nodes]))
    return nodes


def build_cdf_table(model: AtmosphereModel, resolution: int = 4096, *, phase=None) -> PhaseCdfTable:
    """Tabulate F(theta) = integral of 2*pi*p(t)*sin(t) dt for inversion.

    The table is built once per atmosphere and amortizes the per-draw
    numerical inversion.  ``phase`` overrides the model mixture (any
    normalized density per steradian).
    """
    if resolution < 256:
        raise ValueError(f"resolution must be >= 256, got {resolution}")
    refined = phase is None and model.include_turbulence_scatter
    if phase is None:
        def phase(t):
            return total_phase(t, model)
    nodes = _cdf_nodes(resolution, refined)
    density = 2.0 * math.pi * np.asarray(phase(nodes), dtype=float) * np.sin(nodes)
    cdf = cumulative_trapezoid(density, nodes, initial=0.0)
    raw = float(cdf[-1])
    if not math.isfinite(raw) or abs(raw - 1.0) > 1e-4:
        raise NumericalError(
            f"phase function integrates to {raw!r} over the sphere, expected 1"
        )
    cdf /= raw
    cdf[-1] = 1.0
    if np.any(np.diff(cdf) <= 0.0):
        raise NumericalError("phase-function CDF is not strictly increasing")
    return PhaseCdfTable(theta=nodes, cdf=cdf, raw_norm=raw)


def invert_theta(u, table: PhaseCdfTable):
    """Inverse of the tabulated CDF: binary search plus linear interpolation."""
    return np.interp(np.asarray(u, dtype=float), table.cdf, table.theta)


def sample_theta(rng: np.random.Generator, table: PhaseCdfTable, size=None):
    """Scattering zenith distributed as 2*pi*p(theta)*sin(theta)."""
    return invert_theta(rng.random(size), table)
