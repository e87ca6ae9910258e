"""Monte-Carlo-integration estimators for the multiple-scattering channel.

For each scattering order n the engine draws M paths from the importance
density f(d, theta, phi) = prod f_D(d_i) f_Theta(theta_i) f_Phi(phi_i)
and reduces three things at once:

* the average received power P_n as the sample mean of the objective
  O_n = albedo^n exp(-k_e d_n) cos(phi_r) min(1, p_tot(theta_rn) Omega_r)
  restricted to paths whose last scatterer falls inside the receiver FOV;
* the turbulent variance sigma2_n as the mean, over accepted paths only,
  of prod_i M2(d_i) - 1 across the n sampled legs plus the receiver leg;
* the per-path sums S = sum_i sigma_ln2(d_i) over the same n+1 legs,
  which determine the equivalent-fading PDF as an equal-weight mixture of
  unit-mean log-normals LN(eta; S).

Work is split into fixed-size chunks whose random streams depend only on
(seed, order, chunk index), never on the worker count, and chunk results
are reduced in index order; estimates are therefore bit-identical for a
fixed seed regardless of how many workers run them.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import linregress

from .atmosphere import AtmosphereModel, total_phase
from .errors import GridOverflowError, NumericalError
from .geometry import GeometryConfig, PathSample, solid_angle, trace_paths
from .sampler import (
    PhaseCdfTable,
    RandomStream,
    build_cdf_table,
    invert_distance,
    invert_theta,
    invert_theta0,
    pack_stream_id,
    derive_seed,
)
from .turbulence import TurbulenceModel, leg_sigma_ln2, ln_pdf, draw_fading

__all__ = [
    "ChannelEstimate",
    "DEFAULT_CHUNK",
    "McsCompareResult",
    "OrderEstimate",
    "PdfAccumulator",
    "conditional_prob",
    "estimate_channel",
    "estimate_order",
    "mcs_variance_experiment",
    "order_pdf",
    "path_loss_db",
    "pdf_convolve",
]

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 16384
EXACT_PDF_CAP = 100_000  # exact mixture storage up to this many samples
PDF_BINS = 512

# Fading-draw streams (conventional-MCS experiment only) get their own tag
# so they can never collide with the path-sampling streams.
_TAG_PATHS = 0
_TAG_FADING = 1


@dataclass(frozen=True)
class PdfAccumulator:
    """Per-order record of the accepted-path sums S = sum_i sigma_ln2(d_i).

    The fading PDF depends on a path only through this scalar, so either
    the exact values are kept (small runs) or a fixed-width histogram of
    them (bounded memory at any M).
    """

    count: int
    values: np.ndarray | None = None
    bin_centers: np.ndarray | None = None
    bin_weights: np.ndarray | None = None

    @classmethod
    def from_sums(cls, sums: np.ndarray, *, exact: bool, bins: int = PDF_BINS) -> "PdfAccumulator":
        sums = np.asarray(sums, dtype=float)
        if exact or sums.size <= 1:
            return cls(count=sums.size, values=sums)
        weights, edges = np.histogram(sums, bins=bins)
        centers = 0.5 * (edges[:-1] + edges[1:])
        keep = weights > 0
        return cls(count=sums.size, bin_centers=centers[keep], bin_weights=weights[keep].astype(float))

    def components(self) -> tuple[np.ndarray, np.ndarray]:
        """(sigma_ln2 parameters, weights) of the log-normal mixture."""
        if self.values is not None:
            return self.values, np.full(self.values.size, 1.0 / max(self.count, 1))
        return self.bin_centers, self.bin_weights / self.count

    def mixture_pdf(self, eta) -> np.ndarray:
        """Equal-weight log-normal mixture density evaluated on eta."""
        if self.count < 1:
            raise NumericalError("no accepted paths: fading PDF undefined")
        eta = np.asarray(eta, dtype=float)
        params, weights = self.components()
        if np.any(params <= 0.0):
            raise NumericalError(
                "zero-variance legs in the fading mixture (no turbulence?)"
            )
        out = np.zeros_like(eta)
        for s, w in zip(params, weights):
            out += w * ln_pdf(eta, s)
        return out


@dataclass(frozen=True)
class OrderEstimate:
    """Per-order results: power, turbulent variance, PDF statistics."""

    order: int
    samples: int
    p_n: float
    stderr_p: float     # Monte-Carlo standard error of p_n (estimator precision)
    sigma2_n: float     # NaN when no path was accepted
    count: int          # accepted paths
    pdf_sums: PdfAccumulator

    @property
    def degenerate(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class ChannelEstimate:
    """Channel totals over scattering orders 1..N."""

    orders: tuple[OrderEstimate, ...]
    p_tot: float
    sigma2_tot: float
    eta_grid: np.ndarray | None
    pdf_grid: np.ndarray | None
    notes: tuple[str, ...] = ()

    @property
    def stderr_p_tot(self) -> float:
        return math.sqrt(sum(o.stderr_p**2 for o in self.orders))


@dataclass(frozen=True)
class McsCompareResult:
    """Variance of repeated conventional-MCS power estimates per sample count."""

    m_values: tuple[int, ...]
    variances: tuple[float, ...]   # Var across reps, normalized by the squared mean
    slope: float                   # fitted slope of log10(var) vs log10(M)
    slope_stderr: float


@dataclass(frozen=True)
class _ChunkStats:
    n_samples: int
    sum_obj: float
    sum_obj_sq: float
    count: int
    sum_var_term: float
    sigma_sums: np.ndarray


def _sample_legs(rng, n, size, k_e, beta_t, table):
    """Draw (d, theta, phi) blocks for `size` paths of order n."""
    u_d = rng.random((size, n))
    u_t = rng.random((size, n))
    u_p = rng.random((size, n))
    d = invert_distance(u_d, k_e)
    theta = np.empty_like(d)
    theta[:, 0] = invert_theta0(u_t[:, 0], beta_t)
    if n > 1:
        theta[:, 1:] = invert_theta(u_t[:, 1:], table)
    phi = 2.0 * math.pi * u_p
    return d, theta, phi


def _objective(atmosphere, geometry, n, d_n, cos_theta_rn, cos_phi_r, accepted):
    """Vectorized objective on the accepted subset; zero elsewhere."""
    obj = np.zeros(d_n.size)
    idx = np.flatnonzero(accepted)
    if idx.size == 0:
        return obj
    dn = d_n[idx]
    r_a = geometry.aperture_radius
    omega = 2.0 * math.pi * (1.0 - dn / np.hypot(dn, r_a))
    p = total_phase(np.arccos(cos_theta_rn[idx]), atmosphere)
    obj[idx] = (
        atmosphere.albedo**n
        * np.exp(-atmosphere.k_e_tot * dn)
        * cos_phi_r[idx]
        * np.minimum(1.0, p * omega)
    )
    return obj


def _order_chunk(task) -> _ChunkStats:
    (stream, n, size, atmosphere, turbulence, geometry, table) = task
    rng = stream.generator()
    d, theta, phi = _sample_legs(
        rng, n, size, atmosphere.k_e_tot, geometry.tx_beam, table
    )
    d_n, cos_theta_rn, cos_phi_r, accepted, _, _ = trace_paths(geometry, d, theta, phi)
    obj = _objective(atmosphere, geometry, n, d_n, cos_theta_rn, cos_phi_r, accepted)

    idx = np.flatnonzero(accepted)
    legs = np.column_stack([d[idx], d_n[idx]])  # n sampled legs + receiver leg
    sums = leg_sigma_ln2(legs, turbulence).sum(axis=1)
    return _ChunkStats(
        n_samples=size,
        sum_obj=float(obj.sum()),
        sum_obj_sq=float((obj * obj).sum()),
        count=int(idx.size),
        sum_var_term=float(np.expm1(sums).sum()),
        sigma_sums=sums,
    )


def _chunk_plan(samples: int, chunk_size: int) -> list[int]:
    full, rest = divmod(samples, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _run_tasks(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [_order_chunk(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_order_chunk, tasks, chunksize=1))


def estimate_order(
    n: int,
    samples: int,
    seed: int,
    atmosphere: AtmosphereModel,
    turbulence: TurbulenceModel,
    geometry: GeometryConfig,
    *,
    workers: int = 1,
    table: PhaseCdfTable | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    pdf_mode: str = "auto",
) -> OrderEstimate:
    """Estimate power, turbulent variance and PDF statistics of order n.

    ``pdf_mode`` is one of auto / exact / histogram; auto keeps exact
    per-path sums up to 1e5 samples and switches to a 512-bin histogram
    beyond that.
    """
    if n < 1:
        raise ValueError(f"scattering order must be >= 1, got {n}")
    if samples < 1:
        raise ValueError(f"sample count must be >= 1, got {samples}")
    if pdf_mode not in ("auto", "exact", "histogram"):
        raise ValueError(f"unknown pdf_mode {pdf_mode!r}")
    if table is None:
        table = build_cdf_table(atmosphere)

    tasks = [
        (
            RandomStream(seed, pack_stream_id(tag=_TAG_PATHS, order=n, chunk=j)),
            n,
            size,
            atmosphere,
            turbulence,
            geometry,
            table,
        )
        for j, size in enumerate(_chunk_plan(samples, chunk_size))
    ]
    results = _run_tasks(tasks, workers)

    # Reduce in chunk order: float addition is order-dependent, and a
    # fixed order is what makes runs bit-identical across worker counts.
    sum_obj = 0.0
    sum_sq = 0.0
    count = 0
    sum_var = 0.0
    sums_parts = []
    for r in results:
        sum_obj += r.sum_obj
        sum_sq += r.sum_obj_sq
        count += r.count
        sum_var += r.sum_var_term
        sums_parts.append(r.sigma_sums)

    p_n = sum_obj / samples
    if samples > 1:
        var_obj = max(sum_sq - sum_obj * sum_obj / samples, 0.0) / (samples - 1)
        stderr = math.sqrt(var_obj / samples)
    else:
        stderr = float("nan")
    sigma2_n = sum_var / count if count > 0 else float("nan")
    exact = pdf_mode == "exact" or (pdf_mode == "auto" and samples <= EXACT_PDF_CAP)
    acc = PdfAccumulator.from_sums(np.concatenate(sums_parts), exact=exact)
    return OrderEstimate(
        order=n,
        samples=samples,
        p_n=p_n,
        stderr_p=stderr,
        sigma2_n=sigma2_n,
        count=count,
        pdf_sums=acc,
    )


def conditional_prob(path: PathSample, atmosphere: AtmosphereModel, geometry: GeometryConfig) -> float:
    """Receiving probability of one built path; zero when outside the FOV."""
    if not path.accepted:
        return 0.0
    p = float(total_phase(path.theta_rn, atmosphere))
    omega = solid_angle(path.d_n, geometry)
    return (
        atmosphere.albedo ** path.order
        * math.exp(-atmosphere.k_e_tot * path.d_n)
        * math.cos(path.phi_r)
        * min(1.0, p * omega)
    )


def order_pdf(acc: PdfAccumulator, eta_grid) -> np.ndarray:
    """Equivalent-fading density of one order on eta_grid.

    The mixture (1/Count) sum_m LN(eta; S_m) over accepted paths, with S_m
    the per-path sum of leg log-variances.
    """
    return acc.mixture_pdf(eta_grid)


def _rescale(pdf: np.ndarray, weight: float, grid: np.ndarray) -> np.ndarray:
    """Density of w*eta from the gridded density of eta: f(x/w)/w.

    Compression by w <= 1 keeps every within-grid point within the grid,
    so the rescaled samples are renormalized to the input's grid mass:
    without this, a component squeezed below the grid resolution would
    silently lose mass to the sampling of its spike.
    """
    if weight == 1.0:
        return np.array(pdf, dtype=float)
    out = np.interp(grid / weight, grid, pdf, right=0.0) / weight
    got = float(out.sum())
    if got > 0.0:
        out *= float(pdf.sum()) / got
    return out


def pdf_convolve(pdfs, weights, eta_grid, *, overflow_tol: float = 1e-3) -> np.ndarray:
    """Density of sum_n w_n eta_n from per-order densities on a common grid.

    Each input is rescaled to its weighted variable and the results are
    convolved on the grid; the output is renormalized to unit integral.
    Raises GridOverflowError when more than ``overflow_tol`` of the mass
    would land beyond the end of the grid.
    """
    pdfs = [np.asarray(p, dtype=float) for p in pdfs]
    weights = [float(w) for w in weights]
    if len(pdfs) != len(weights) or not pdfs:
        raise ValueError("need one weight per density")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {sum(weights)!r}")
    grid = np.asarray(eta_grid, dtype=float)
    steps = np.diff(grid)
    delta = steps[0]
    if not np.allclose(steps, delta, rtol=1e-9, atol=0.0):
        raise ValueError("eta_grid must be uniform")
    if any(p.shape != grid.shape for p in pdfs):
        raise ValueError("densities must live on eta_grid")

    if len(pdfs) == 1:
        return np.array(pdfs[0], dtype=float)

    out = _rescale(pdfs[0], weights[0], grid)
    for pdf, w in zip(pdfs[1:], weights[1:]):
        full = fftconvolve(out, _rescale(pdf, w, grid)) * delta
        np.clip(full, 0.0, None, out=full)
        out = full[: grid.size]
    # Whatever is missing now is genuine: input tails beyond eta_max plus
    # mass convolved past the end of the grid.
    mass = float(out.sum()) * delta
    if mass < 1.0 - overflow_tol:
        raise GridOverflowError(
            f"{1.0 - mass:.3e} of the fading mass lies beyond eta_max={grid[-1]:g}; "
            "enlarge the eta grid"
        )
    return out / float(np.trapezoid(out, grid))


def estimate_channel(
    orders: int,
    samples: int,
    seed: int,
    atmosphere: AtmosphereModel,
    turbulence: TurbulenceModel,
    geometry: GeometryConfig,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    pdf_mode: str = "auto",
    eta_max: float = 4.0,
    eta_points: int = 4096,
    build_pdf: bool = True,
) -> ChannelEstimate:
    """Estimate the whole channel over scattering orders 1..orders.

    Totals follow from the per-order results: P_tot = sum P_n,
    sigma2_tot = sum (P_n/P_tot)^2 sigma2_n, and the total fading PDF is
    the convolution of the per-order PDFs rescaled by their power shares.
    Orders in which no path was accepted are dropped from the variance
    and PDF with a note (their power contribution is exactly zero).
    """
    if orders < 1:
        raise ValueError(f"orders must be >= 1, got {orders}")
    table = build_cdf_table(atmosphere)
    estimates = tuple(
        estimate_order(
            n,
            samples,
            seed,
            atmosphere,
            turbulence,
            geometry,
            workers=workers,
            table=table,
            chunk_size=chunk_size,
            pdf_mode=pdf_mode,
        )
        for n in range(1, orders + 1)
    )

    notes = []
    kept = [o for o in estimates if not o.degenerate]
    if not kept:
        raise NumericalError(
            "no accepted paths in any scattering order; check the geometry"
        )
    for o in estimates:
        if o.degenerate:
            notes.append(f"order {o.order}: no accepted paths; dropped from totals")
            log.warning("%s", notes[-1])

    p_tot = sum(o.p_n for o in estimates)
    sigma2_tot = sum((o.p_n / p_tot) ** 2 * o.sigma2_n for o in kept)

    eta_grid = None
    pdf_grid = None
    if build_pdf:
        if sigma2_tot > 0.0:
            eta_grid = np.linspace(0.0, eta_max, eta_points)
            pdfs = [order_pdf(o.pdf_sums, eta_grid) for o in kept]
            weights = [o.p_n / p_tot for o in kept]
            pdf_grid = pdf_convolve(pdfs, weights, eta_grid)
        else:
            notes.append("fading PDF omitted: no turbulent fluctuation")
    return ChannelEstimate(
        orders=estimates,
        p_tot=p_tot,
        sigma2_tot=sigma2_tot,
        eta_grid=eta_grid,
        pdf_grid=pdf_grid,
        notes=tuple(notes),
    )


def path_loss_db(p: float) -> float:
    """Path loss -10 log10(P) in dB for a received power fraction P."""
    if p <= 0.0:
        raise NumericalError("path loss undefined: no accepted paths (P = 0)")
    return -10.0 * math.log10(p)


def _conventional_estimate(rep_seed, m, orders, atmosphere, turbulence, geometry, table):
    """One conventional-MCS estimate: fading drawn per leg, then averaged."""
    total = 0.0
    for n in range(1, orders + 1):
        paths = RandomStream(rep_seed, pack_stream_id(tag=_TAG_PATHS, order=n)).generator()
        fading = RandomStream(rep_seed, pack_stream_id(tag=_TAG_FADING, order=n)).generator()
        d, theta, phi = _sample_legs(
            paths, n, m, atmosphere.k_e_tot, geometry.tx_beam, table
        )
        d_n, cos_theta_rn, cos_phi_r, accepted, _, _ = trace_paths(geometry, d, theta, phi)
        obj = _objective(atmosphere, geometry, n, d_n, cos_theta_rn, cos_phi_r, accepted)
        legs = np.column_stack([d, d_n])
        eta = draw_fading(fading, legs, turbulence).prod(axis=1)
        total += float((obj * eta).mean())
    return total


def mcs_variance_experiment(
    m_list,
    reps: int,
    seed: int,
    atmosphere: AtmosphereModel,
    turbulence: TurbulenceModel,
    geometry: GeometryConfig,
    *,
    orders: int = 3,
) -> McsCompareResult:
    """Variance of repeated conventional-MCS power estimates versus M.

    Each estimate multiplies every sampled path's objective by per-leg
    fading draws and averages; the spread of such estimates across
    repetitions mixes sampling noise with turbulence and decays like 1/M,
    which is what makes it unusable as a turbulence measure.  Reported
    variances are normalized by the squared mean so they are directly
    comparable with sigma2_tot.
    """
    m_values = [int(m) for m in m_list]
    if not m_values or min(m_values) < 1:
        raise ValueError("m_list must contain positive sample counts")
    if reps < 30:
        raise ValueError(f"need at least 30 repetitions for a variance, got {reps}")
    table = build_cdf_table(atmosphere)
    variances = []
    for mi, m in enumerate(m_values):
        estimates = np.array(
            [
                _conventional_estimate(
                    derive_seed(seed, mi, rep), m, orders, atmosphere, turbulence, geometry, table
                )
                for rep in range(reps)
            ]
        )
        mean = estimates.mean()
        if mean <= 0.0:
            raise NumericalError(f"no accepted paths at M={m}")
        variances.append(float(estimates.var(ddof=1) / mean**2))
    fit = linregress(np.log10(m_values), np.log10(variances))
    return McsCompareResult(
        m_values=tuple(m_values),
        variances=tuple(variances),
        slope=float(fit.slope),
        slope_stderr=float(fit.stderr),
    )
