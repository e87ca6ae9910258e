"""Monte-Carlo-integration simulator for non-line-of-sight UV links
through a scattering, absorbing, turbulent atmosphere."""

__version__ = "0.1.0"

from .atmosphere import (
    AtmosphereModel,
    ScatteringParams,
    TurbulenceOpticalParams,
    mie_phase,
    rayleigh_phase,
    total_phase,
    turbulence_absorption,
    turbulence_phase,
)
from .config import ScenarioConfig, config_hash, load_config, parse_config, serialize_config
from .engine import (
    ChannelEstimate,
    McsCompareResult,
    OrderEstimate,
    conditional_prob,
    estimate_channel,
    estimate_order,
    mcs_variance_experiment,
    order_pdf,
    path_loss_db,
    pdf_convolve,
)
from .errors import ConfigError, GridOverflowError, NumericalError
from .geometry import GeometryConfig, PathSample, build_path, fov_indicator, solid_angle
from .sampler import PhaseCdfTable, RandomStream, build_cdf_table, derive_seed
from .turbulence import (
    FadingFamily,
    FadingMoments,
    TurbulenceModel,
    draw_fading,
    gg_params,
    gg_pdf,
    hybrid_sigma_ln2,
    ln_pdf,
    rytov_variance,
    second_moment,
)

__all__ = [
    "AtmosphereModel",
    "ChannelEstimate",
    "ConfigError",
    "FadingFamily",
    "FadingMoments",
    "GeometryConfig",
    "GridOverflowError",
    "McsCompareResult",
    "NumericalError",
    "OrderEstimate",
    "PathSample",
    "PhaseCdfTable",
    "RandomStream",
    "ScatteringParams",
    "ScenarioConfig",
    "TurbulenceModel",
    "TurbulenceOpticalParams",
    "build_cdf_table",
    "build_path",
    "conditional_prob",
    "config_hash",
    "derive_seed",
    "draw_fading",
    "estimate_channel",
    "estimate_order",
    "fov_indicator",
    "gg_params",
    "gg_pdf",
    "hybrid_sigma_ln2",
    "ln_pdf",
    "load_config",
    "mcs_variance_experiment",
    "mie_phase",
    "order_pdf",
    "parse_config",
    "path_loss_db",
    "pdf_convolve",
    "rayleigh_phase",
    "rytov_variance",
    "second_moment",
    "serialize_config",
    "solid_angle",
    "total_phase",
    "turbulence_absorption",
    "turbulence_phase",
]
