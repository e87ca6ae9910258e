"""Photon trajectories in the link frame, receiver-side angles, FOV test.

Frame convention: the receiver sits at the origin and the transmitter at
(0, r, 0) on the y-axis.  Zenith angles are measured from +z, azimuths in
the x-y plane from +x.  With the baseline pointing (zenith 45 deg,
azimuth -90 deg at the transmitter, +90 deg at the receiver) the two
units tilt toward each other and their cones intersect above the midpoint
of the baseline.

Scattering azimuths are measured in a right-handed local frame whose pole
is the incoming direction; the perpendicular pair completing the frame is
arbitrary but fixed, and when the incoming direction is within 1e-9 of
the +/-z pole the frame is seeded from the global x-axis.  Since the
azimuth is always sampled uniformly, the seed choice cannot bias any
estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryConfig",
    "PathSample",
    "build_path",
    "fov_indicator",
    "initial_direction",
    "initial_directions",
    "pointing_vector",
    "rotate_directions",
    "scatter_direction",
    "solid_angle",
    "trace_paths",
]


def pointing_vector(zenith: float, azimuth: float) -> np.ndarray:
    """Unit vector at the given zenith (from +z) and azimuth (from +x)."""
    sz = math.sin(zenith)
    return np.array([sz * math.cos(azimuth), sz * math.sin(azimuth), math.cos(zenith)])


@dataclass(frozen=True)
class GeometryConfig:
    """Transceiver placement, pointing, beam widths and aperture."""

    range_m: float      # Tx-Rx baseline along +y, m
    tx_zenith: float    # rad
    tx_azimuth: float   # rad
    rx_zenith: float    # rad
    rx_azimuth: float   # rad
    tx_beam: float      # full divergence angle of the source cone, rad
    rx_fov: float       # full field-of-view angle of the receiver, rad
    aperture_area: float  # m^2

    def __post_init__(self):
        if self.range_m <= 0.0:
            raise ValueError(f"range_m must be > 0, got {self.range_m}")
        if not 0.0 < self.tx_beam < math.pi:
            raise ValueError(f"tx_beam must lie in (0, pi), got {self.tx_beam}")
        if not 0.0 < self.rx_fov < math.pi:
            raise ValueError(f"rx_fov must lie in (0, pi), got {self.rx_fov}")
        if self.aperture_area <= 0.0:
            raise ValueError(f"aperture_area must be > 0, got {self.aperture_area}")

    @property
    def tx_position(self) -> np.ndarray:
        return np.array([0.0, self.range_m, 0.0])

    @property
    def mu_t(self) -> np.ndarray:
        return pointing_vector(self.tx_zenith, self.tx_azimuth)

    @property
    def mu_r(self) -> np.ndarray:
        return pointing_vector(self.rx_zenith, self.rx_azimuth)

    @property
    def aperture_radius(self) -> float:
        return math.sqrt(self.aperture_area / math.pi)

    @property
    def cos_half_fov(self) -> float:
        return math.cos(0.5 * self.rx_fov)


@dataclass(frozen=True)
class PathSample:
    """One sampled photon trajectory of a given scattering order."""

    order: int
    d: np.ndarray           # sampled leg lengths d_0 .. d_{n-1}, m
    theta: np.ndarray       # scattering zeniths, rad
    phi: np.ndarray         # scattering azimuths, rad
    directions: np.ndarray  # (n, 3) unit direction after each scattering
    positions: np.ndarray   # (n, 3) scatterer positions, m
    d_n: float              # last scatterer to receiver distance, m
    theta_rn: float         # angle between the last direction and -r_n, rad
    phi_r: float            # angle between the receiver axis and r_n, rad
    accepted: bool          # last scatterer inside the receiver FOV


def _local_frame(mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (e1, e2) completing each row of mu, batch of (N, 3)."""
    seed = np.empty_like(mu)
    degenerate = np.abs(mu[:, 2]) > 1.0 - 1e-9
    seed[:, 0] = np.where(degenerate, 1.0, -mu[:, 1])
    seed[:, 1] = np.where(degenerate, 0.0, mu[:, 0])
    seed[:, 2] = 0.0
    e2 = np.cross(mu, seed)
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    e1 = np.cross(e2, mu)
    return e1, e2


def rotate_directions(mu, theta, phi) -> np.ndarray:
    """Rotate each unit row of mu by zenith theta and azimuth phi about itself."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    e1, e2 = _local_frame(mu)
    st = np.sin(theta)[:, None]
    out = st * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    out += np.cos(theta)[:, None] * mu
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def initial_directions(theta0, phi0, mu_t: np.ndarray) -> np.ndarray:
    """Batch of emission directions at zenith theta0, azimuth phi0 about mu_t."""
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    base = np.broadcast_to(mu_t, (theta0.size, 3))
    return rotate_directions(base, theta0, phi0)


def initial_direction(theta0: float, phi0: float, config: GeometryConfig) -> np.ndarray:
    """Emission direction making angle theta0 with the transmitter axis."""
    return initial_directions([theta0], [phi0], config.mu_t)[0]


def scatter_direction(mu_prev, theta_s: float, phi_s: float) -> np.ndarray:
    """Direction after scattering by zenith theta_s off direction mu_prev."""
    return rotate_directions(np.asarray(mu_prev, dtype=float)[None, :], [theta_s], [phi_s])[0]


def fov_indicator(r_n, config: GeometryConfig) -> bool:
    """True iff the last scatterer lies in the receiver cone.

    The boundary is inclusive (dot >= |r_n| cos(fov/2)), and the origin
    itself counts as accepted: a photon scattered at the aperture is seen.
    """
    r = np.asarray(r_n, dtype=float)
    return bool(r @ config.mu_r >= np.linalg.norm(r) * config.cos_half_fov)


def solid_angle(d_n: float, config: GeometryConfig) -> float:
    """Solid angle of the receive aperture seen from distance d_n."""
    if d_n < 0.0:
        raise ValueError(f"d_n must be >= 0, got {d_n}")
    r_a = config.aperture_radius
    return 2.0 * math.pi * (1.0 - d_n / math.hypot(d_n, r_a))


def trace_paths(config: GeometryConfig, d, theta, phi):
    """Chain (M, n) sampled legs into trajectories; batch core of build_path.

    Returns (d_n, cos_theta_rn, cos_phi_r, accepted, last_mu, last_pos)
    arrays.  At d_n = 0 the receiver-side cosines are defined as 1.
    """
    d = np.atleast_2d(np.asarray(d, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    if not d.shape == theta.shape == phi.shape:
        raise ValueError("d, theta, phi must have identical shapes")
    m, n = d.shape
    if n < 1:
        raise ValueError("at least one scattering leg is required")
    if d.size and d.min() < 0.0:
        raise ValueError("leg lengths must be >= 0")

    mu = initial_directions(theta[:, 0], phi[:, 0], config.mu_t)
    pos = config.tx_position + d[:, 0, None] * mu
    for i in range(1, n):
        mu = rotate_directions(mu, theta[:, i], phi[:, i])
        pos = pos + d[:, i, None] * mu

    d_n = np.linalg.norm(pos, axis=1)
    safe = np.where(d_n > 0.0, d_n, 1.0)
    cos_theta_rn = np.where(d_n > 0.0, -np.einsum("ij,ij->i", mu, pos) / safe, 1.0)
    cos_phi_r = np.where(d_n > 0.0, (pos @ config.mu_r) / safe, 1.0)
    np.clip(cos_theta_rn, -1.0, 1.0, out=cos_theta_rn)
    np.clip(cos_phi_r, -1.0, 1.0, out=cos_phi_r)
    accepted = (pos @ config.mu_r) >= d_n * config.cos_half_fov
    return d_n, cos_theta_rn, cos_phi_r, accepted, mu, pos


def build_path(config: GeometryConfig, d, theta, phi) -> PathSample:
    """Assemble a PathSample from sampled (d, theta, phi) vectors.

    Positions chain as r_1 = tx + d_0 mu_0 and r_{i+1} = r_i + d_i mu_i;
    the receiver leg d_n, the receiver-side angles and the FOV flag are
    derived from the final position.  Deterministic: identical inputs
    produce bit-identical samples.
    """
    d = np.asarray(d, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not d.shape == theta.shape == phi.shape or d.ndim != 1:
        raise ValueError("d, theta, phi must be 1-d vectors of equal length")
    n = d.size
    if n < 1:
        raise ValueError("at least one scattering leg is required")
    if d.min() < 0.0:
        raise ValueError("leg lengths must be >= 0")

    directions = np.empty((n, 3))
    positions = np.empty((n, 3))
    directions[0] = initial_directions(theta[:1], phi[:1], config.mu_t)[0]
    positions[0] = config.tx_position + d[0] * directions[0]
    for i in range(1, n):
        directions[i] = rotate_directions(directions[i - 1][None, :], theta[i : i + 1], phi[i : i + 1])[0]
        positions[i] = positions[i - 1] + d[i] * directions[i]

    r_n = positions[-1]
    d_n = float(np.linalg.norm(r_n))
    if d_n > 0.0:
        theta_rn = math.acos(float(np.clip(-(directions[-1] @ r_n) / d_n, -1.0, 1.0)))
        phi_r = math.acos(float(np.clip((config.mu_r @ r_n) / d_n, -1.0, 1.0)))
    else:
        theta_rn = 0.0
        phi_r = 0.0
    return PathSample(
        order=n,
        d=d,
        theta=theta,
        phi=phi,
        directions=directions,
        positions=positions,
        d_n=d_n,
        theta_rn=theta_rn,
        phi_r=phi_r,
        accepted=fov_indicator(r_n, config),
    )
