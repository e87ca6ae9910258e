"""Scenario configuration: flat key-value files with explicit units.

The format is one `key = value` pair per line, `#` starts a comment.
Keys are dotted (section.name) and dimensioned quantities carry their
unit in the key suffix, e.g. ``atmosphere.absorption_per_km`` or
``geometry.tx_zenith_deg``; where alternatives exist exactly one variant
must be present.  Unknown keys are rejected.

``turbulence.regime = auto`` resolves to the log-normal family when the
Rytov variance over the full baseline stays below 0.3 and to the hybrid
family otherwise.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .atmosphere import AtmosphereModel, ScatteringParams, TurbulenceOpticalParams
from .errors import ConfigError
from .geometry import GeometryConfig
from .turbulence import (
    LN_PARAM_RYTOV,
    LN_PARAM_SCINTILLATION,
    FadingFamily,
    TurbulenceModel,
    rytov_variance,
)

__all__ = [
    "RunSettings",
    "ScenarioConfig",
    "config_hash",
    "load_config",
    "parse_config",
    "serialize_config",
]

AUTO_REGIME_LN_LIMIT = 0.3  # sigma_r^2 over the baseline below which auto -> LN


@dataclass(frozen=True)
class RunSettings:
    """Estimator knobs: sample counts, seeding, workers, fading grid."""

    samples: int = 100_000
    orders: int = 3
    seed: int = 1
    workers: int = 1
    eta_max: float = 4.0
    eta_points: int = 4096
    pdf_mode: str = "auto"

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.orders < 1:
            raise ValueError(f"orders must be >= 1, got {self.orders}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.eta_max <= 0.0:
            raise ValueError(f"eta_max must be > 0, got {self.eta_max}")
        if self.eta_points < 16:
            raise ValueError(f"eta_points must be >= 16, got {self.eta_points}")
        if self.pdf_mode not in ("auto", "exact", "histogram"):
            raise ValueError(f"unknown pdf_mode {self.pdf_mode!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: GeometryConfig
    atmosphere: AtmosphereModel
    turbulence: TurbulenceModel
    run: RunSettings = field(default_factory=RunSettings)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# Alternative key spellings, each with a converter to the canonical unit.
_ANGLE = {"_deg": lambda v: math.radians(float(v)), "_rad": float}
_PER_LENGTH = {"_per_km": lambda v: float(v) / 1000.0, "_per_m": float}
_LENGTH = {"_m": float}
_WAVELENGTH = {"_nm": lambda v: float(v) * 1e-9, "_m": float}


def _schema():
    """Mapping field -> (section, base key, {suffix: converter} or converter)."""
    return {
        # geometry
        "range": ("geometry", "range", _LENGTH),
        "tx_zenith": ("geometry", "tx_zenith", _ANGLE),
        "tx_azimuth": ("geometry", "tx_azimuth", _ANGLE),
        "rx_zenith": ("geometry", "rx_zenith", _ANGLE),
        "rx_azimuth": ("geometry", "rx_azimuth", _ANGLE),
        "tx_beam": ("geometry", "tx_beam", _ANGLE),
        "rx_fov": ("geometry", "rx_fov", _ANGLE),
        "aperture": ("geometry", "aperture", {"_m2": float}),
        # atmosphere
        "rayleigh_scatter": ("atmosphere", "rayleigh_scatter", _PER_LENGTH),
        "mie_scatter": ("atmosphere", "mie_scatter", _PER_LENGTH),
        "absorption": ("atmosphere", "absorption", _PER_LENGTH),
        "rayleigh_gamma": ("atmosphere", "rayleigh_gamma", float),
        "mie_g": ("atmosphere", "mie_g", float),
        "mie_f": ("atmosphere", "mie_f", float),
        "include_turbulence_scatter": (
            "atmosphere", "include_turbulence_scatter", _parse_bool, False,
        ),
        # turbulence
        "cn2": ("turbulence", "cn2", float),
        "outer_scale": ("turbulence", "outer_scale", _LENGTH),
        "eddy_size": ("turbulence", "eddy_size", _LENGTH),
        "wavelength": ("turbulence", "wavelength", _WAVELENGTH),
        "regime": ("turbulence", "regime", str, "auto"),
        "ln_parameterization": ("turbulence", "ln_parameterization", str, LN_PARAM_RYTOV),
        # run
        "samples": ("run", "samples", int, RunSettings.samples),
        "orders": ("run", "orders", int, RunSettings.orders),
        "seed": ("run", "seed", int, RunSettings.seed),
        "workers": ("run", "workers", int, RunSettings.workers),
        "eta_max": ("run", "eta_max", float, RunSettings.eta_max),
        "eta_points": ("run", "eta_points", int, RunSettings.eta_points),
        "pdf_mode": ("run", "pdf_mode", str, RunSettings.pdf_mode),
    }


def _known_keys():
    """All accepted config keys -> (field, converter)."""
    keys = {}
    for name, spec in _schema().items():
        section, base, conv = spec[0], spec[1], spec[2]
        if isinstance(conv, dict):
            for suffix, fn in conv.items():
                keys[f"{section}.{base}{suffix}"] = (name, fn)
        else:
            keys[f"{section}.{base}"] = (name, conv)
    return keys


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a scenario configuration."""
    known = _known_keys()
    raw: dict[str, tuple[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name = known[key][0]
        if name in raw:
            raise ConfigError(
                f"line {lineno}: {key!r} conflicts with earlier {raw[name][0]!r}"
            )
        raw[name] = (key, value)

    values: dict[str, object] = {}
    for name, spec in _schema().items():
        if name in raw:
            key, text_value = raw[name]
            _, fn = known[key]
            try:
                values[name] = fn(text_value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        elif len(spec) > 3:
            values[name] = spec[3]
        else:
            section, base = spec[0], spec[1]
            conv = spec[2]
            variants = (
                " or ".join(f"{section}.{base}{s}" for s in conv)
                if isinstance(conv, dict)
                else f"{section}.{base}"
            )
            raise ConfigError(f"missing required key: {variants}")

    return _assemble(values)


def _assemble(v: dict) -> ScenarioConfig:
    try:
        geometry = GeometryConfig(
            range_m=v["range"],
            tx_zenith=v["tx_zenith"],
            tx_azimuth=v["tx_azimuth"],
            rx_zenith=v["rx_zenith"],
            rx_azimuth=v["rx_azimuth"],
            tx_beam=v["tx_beam"],
            rx_fov=v["rx_fov"],
            aperture_area=v["aperture"],
        )
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc
    try:
        optics = TurbulenceOpticalParams(
            cn2=v["cn2"],
            outer_scale=v["outer_scale"],
            eddy_size=v["eddy_size"],
            wavelength=v["wavelength"],
        )
    except ValueError as exc:
        raise ConfigError(f"turbulence: {exc}") from exc
    try:
        atmosphere = AtmosphereModel(
            k_s_ray=v["rayleigh_scatter"],
            k_s_mie=v["mie_scatter"],
            k_a_par=v["absorption"],
            scattering=ScatteringParams(
                gamma=v["rayleigh_gamma"], g=v["mie_g"], f=v["mie_f"]
            ),
            optics=optics,
            include_turbulence_scatter=v["include_turbulence_scatter"],
        )
    except ValueError as exc:
        raise ConfigError(f"atmosphere: {exc}") from exc

    regime_text = v["regime"].lower()
    if regime_text == "auto":
        probe = TurbulenceModel(optical=optics)
        sigma_r2 = float(rytov_variance(geometry.range_m, probe))
        family = FadingFamily.LN if sigma_r2 < AUTO_REGIME_LN_LIMIT else FadingFamily.HYBRID
    else:
        try:
            family = FadingFamily(regime_text)
        except ValueError as exc:
            raise ConfigError(
                f"turbulence.regime: expected auto/ln/gg/hybrid, got {regime_text!r}"
            ) from exc
    if v["ln_parameterization"] not in (LN_PARAM_RYTOV, LN_PARAM_SCINTILLATION):
        raise ConfigError(
            f"turbulence.ln_parameterization: expected {LN_PARAM_RYTOV!r} or "
            f"{LN_PARAM_SCINTILLATION!r}, got {v['ln_parameterization']!r}"
        )
    turbulence = TurbulenceModel(
        optical=optics, regime=family, ln_parameterization=v["ln_parameterization"]
    )
    try:
        run = RunSettings(
            samples=v["samples"],
            orders=v["orders"],
            seed=v["seed"],
            workers=v["workers"],
            eta_max=v["eta_max"],
            eta_points=v["eta_points"],
            pdf_mode=v["pdf_mode"],
        )
    except ValueError as exc:
        raise ConfigError(f"run: {exc}") from exc
    return ScenarioConfig(
        geometry=geometry, atmosphere=atmosphere, turbulence=turbulence, run=run
    )


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical serialization (SI units); parse(serialize(c)) == c."""
    g = cfg.geometry
    a = cfg.atmosphere
    t = cfg.turbulence
    r = cfg.run
    pairs = [
        ("geometry.range_m", g.range_m),
        ("geometry.tx_zenith_rad", g.tx_zenith),
        ("geometry.tx_azimuth_rad", g.tx_azimuth),
        ("geometry.rx_zenith_rad", g.rx_zenith),
        ("geometry.rx_azimuth_rad", g.rx_azimuth),
        ("geometry.tx_beam_rad", g.tx_beam),
        ("geometry.rx_fov_rad", g.rx_fov),
        ("geometry.aperture_m2", g.aperture_area),
        ("atmosphere.rayleigh_scatter_per_m", a.k_s_ray),
        ("atmosphere.mie_scatter_per_m", a.k_s_mie),
        ("atmosphere.absorption_per_m", a.k_a_par),
        ("atmosphere.rayleigh_gamma", a.scattering.gamma),
        ("atmosphere.mie_g", a.scattering.g),
        ("atmosphere.mie_f", a.scattering.f),
        ("atmosphere.include_turbulence_scatter", a.include_turbulence_scatter),
        ("turbulence.cn2", t.optical.cn2),
        ("turbulence.outer_scale_m", t.optical.outer_scale),
        ("turbulence.eddy_size_m", t.optical.eddy_size),
        ("turbulence.wavelength_m", t.optical.wavelength),
        ("turbulence.regime", t.regime.value),
        ("turbulence.ln_parameterization", t.ln_parameterization),
        ("run.samples", r.samples),
        ("run.orders", r.orders),
        ("run.seed", r.seed),
        ("run.workers", r.workers),
        ("run.eta_max", r.eta_max),
        ("run.eta_points", r.eta_points),
        ("run.pdf_mode", r.pdf_mode),
    ]
    return "".join(f"{key} = {_fmt(value)}\n" for key, value in pairs)


def config_hash(cfg: ScenarioConfig) -> str:
    """Hash of the canonical serialization; identifies a scenario exactly."""
    return hashlib.sha256(serialize_config(cfg).encode("ascii")).hexdigest()[:16]
