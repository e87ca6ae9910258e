"""Command-line interface: scenario runs, sweeps, estimator comparison,
phase-function tables and measured-data analysis.

Output files are self-describing: a commented metadata header (config
hash, seed, sample counts, workers, package version) followed by
tab-separated sections.  Numbers are written with 17 significant digits,
so reruns with identical inputs produce byte-identical data sections.

Flags can also be provided through UVNLOS_* environment variables
(UVNLOS_CONFIG, UVNLOS_SEED, UVNLOS_SAMPLES, UVNLOS_ORDERS,
UVNLOS_WORKERS, UVNLOS_OUT); explicit flags win over the environment,
which wins over the config file.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure (e.g. no accepted paths, fading grid overflow).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import __version__
from .analysis import analyze_measurements, load_measurements
from .atmosphere import (
    mie_phase,
    rayleigh_phase,
    total_phase,
    turbulence_phase,
)
from .config import ScenarioConfig, config_hash, load_config
from .engine import (
    estimate_channel,
    mcs_variance_experiment,
    path_loss_db,
)
from .errors import ConfigError, NumericalError
from .sampler import derive_seed
from .turbulence import FadingFamily

ENV_PREFIX = "UVNLOS_"

SWEEP_AXES = ("distance", "zenith", "cn2")


class _Parser(argparse.ArgumentParser):
    """argparse terminates with exit code 2 on usage errors; remap to 1."""

    def error(self, message):
        raise ConfigError(message)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_report(out_path, meta: dict, sections) -> None:
    lines = []
    for key, value in meta.items():
        lines.append(f"# {key} = {_fmt(value)}")
    for name, columns, rows in sections:
        lines.append(f"# section: {name}")
        lines.append("# columns: " + "\t".join(columns))
        for row in rows:
            lines.append("\t".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name)


def _load_scenario(args) -> ScenarioConfig:
    config_path = args.config or _env("CONFIG")
    if not config_path:
        raise ConfigError("a config file is required (--config or UVNLOS_CONFIG)")
    cfg = load_config(config_path)
    run = cfg.run
    overrides = {}
    for field, env_name, conv in (
        ("seed", "SEED", int),
        ("samples", "SAMPLES", int),
        ("orders", "ORDERS", int),
        ("workers", "WORKERS", int),
    ):
        flag = getattr(args, field, None)
        if flag is None:
            env_value = _env(env_name)
            if env_value is not None:
                try:
                    flag = conv(env_value)
                except ValueError as exc:
                    raise ConfigError(f"{ENV_PREFIX}{env_name}: {exc}") from exc
        if flag is not None:
            overrides[field] = flag
    if overrides:
        try:
            run = dataclasses.replace(run, **overrides)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg = dataclasses.replace(cfg, run=run)
    return cfg


def _out_path(args):
    return args.out or _env("OUT")


def _meta(cfg: ScenarioConfig, **extra) -> dict:
    meta = {
        "generator": f"uvnlos {__version__}",
        "config_hash": config_hash(cfg),
        "seed": cfg.run.seed,
        "samples": cfg.run.samples,
        "orders": cfg.run.orders,
        "workers": cfg.run.workers,
        "regime": cfg.turbulence.regime.value,
    }
    meta.update(extra)
    return meta


def run_scenario(cfg: ScenarioConfig):
    """Estimate one scenario; returns (meta, sections) ready for writing."""
    r = cfg.run
    est = estimate_channel(
        r.orders,
        r.samples,
        r.seed,
        cfg.atmosphere,
        cfg.turbulence,
        cfg.geometry,
        workers=r.workers,
        pdf_mode=r.pdf_mode,
        eta_max=r.eta_max,
        eta_points=r.eta_points,
    )
    order_rows = []
    for o in est.orders:
        loss = path_loss_db(o.p_n) if o.p_n > 0.0 else float("nan")
        order_rows.append(
            (o.order, o.p_n, loss, o.sigma2_n, o.stderr_p, o.count)
        )
    total_loss = path_loss_db(est.p_tot) if est.p_tot > 0.0 else float("nan")
    sections = [
        (
            "orders",
            ("order", "p_n", "path_loss_db", "sigma2_n", "stderr_p", "count"),
            order_rows,
        ),
        (
            "totals",
            ("p_tot", "path_loss_db", "sigma2_tot", "stderr_p_tot"),
            [(est.p_tot, total_loss, est.sigma2_tot, est.stderr_p_tot)],
        ),
    ]
    meta = _meta(cfg)
    for i, note in enumerate(est.notes):
        meta[f"note_{i}"] = note
    if est.pdf_grid is not None:
        sections.append(
            ("fading_pdf", ("eta", "density"), list(zip(est.eta_grid, est.pdf_grid)))
        )
    return meta, sections


def _apply_axis(cfg: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis == "distance":
        geometry = dataclasses.replace(cfg.geometry, range_m=value)
        return dataclasses.replace(cfg, geometry=geometry)
    if axis == "zenith":
        zenith = math.radians(value)
        geometry = dataclasses.replace(cfg.geometry, tx_zenith=zenith, rx_zenith=zenith)
        return dataclasses.replace(cfg, geometry=geometry)
    if axis == "cn2":
        optics = dataclasses.replace(cfg.turbulence.optical, cn2=value)
        turbulence = dataclasses.replace(cfg.turbulence, optical=optics)
        atmosphere = dataclasses.replace(cfg.atmosphere, optics=optics)
        return dataclasses.replace(
            cfg, turbulence=turbulence, atmosphere=atmosphere
        )
    raise ConfigError(f"unknown sweep axis {axis!r}")


def run_sweep(cfg: ScenarioConfig, axis: str, values):
    """One scenario per axis value, each with a fresh derived seed.

    A failing row is recorded and the sweep continues.
    """
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for index, value in enumerate(values):
        row_cfg = _apply_axis(cfg, axis, value)
        row_seed = derive_seed(cfg.run.seed, index)
        row_cfg = dataclasses.replace(
            row_cfg, run=dataclasses.replace(row_cfg.run, seed=row_seed)
        )
        try:
            est = estimate_channel(
                row_cfg.run.orders,
                row_cfg.run.samples,
                row_seed,
                row_cfg.atmosphere,
                row_cfg.turbulence,
                row_cfg.geometry,
                workers=row_cfg.run.workers,
                build_pdf=False,
            )
        except NumericalError as exc:
            rows.append((value, float("nan"), float("nan"), float("nan"), f"error: {exc}"))
            continue
        rows.append((value, est.p_tot, est.sigma2_tot, est.stderr_p_tot, "ok"))
    meta = _meta(cfg, axis=axis)
    sections = [
        ("sweep", (axis, "p_tot", "sigma2_tot", "stderr_p_tot", "status"), rows)
    ]
    return meta, sections


def run_mcs_compare(cfg: ScenarioConfig, m_list, reps: int):
    """Conventional-MCS variance vs sample count, next to the stable estimate."""
    if reps < 2:
        raise ConfigError(f"need at least 2 repetitions for a variance, got {reps}")
    try:
        result = mcs_variance_experiment(
            m_list,
            reps,
            cfg.run.seed,
            cfg.atmosphere,
            cfg.turbulence,
            cfg.geometry,
            orders=cfg.run.orders,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for mi, (m, var) in enumerate(zip(result.m_values, result.variances)):
        est = estimate_channel(
            cfg.run.orders,
            m,
            derive_seed(cfg.run.seed, "mci", mi),
            cfg.atmosphere,
            cfg.turbulence,
            cfg.geometry,
            workers=cfg.run.workers,
            build_pdf=False,
        )
        rows.append((m, var, est.sigma2_tot))
    meta = _meta(
        cfg,
        reps=reps,
        fitted_slope=result.slope,
        slope_stderr=result.slope_stderr,
    )
    sections = [
        ("mcs_compare", ("m", "conventional_variance", "mci_sigma2_tot"), rows)
    ]
    return meta, sections


def phase_function_report(cfg: ScenarioConfig, points: int, theta_max: float):
    """Table of all phase functions on an angle grid, for plotting."""
    if points < 2:
        raise ConfigError(f"need at least 2 grid points, got {points}")
    if not 0.0 < theta_max <= math.pi:
        raise ConfigError(f"theta_max must lie in (0, pi], got {theta_max}")
    theta = np.linspace(0.0, theta_max, points)
    sc = cfg.atmosphere.scattering
    optics = cfg.turbulence.optical
    rows = list(
        zip(
            theta,
            rayleigh_phase(theta, sc),
            mie_phase(theta, sc),
            total_phase(theta, cfg.atmosphere),
            turbulence_phase(theta, optics),
        )
    )
    meta = _meta(cfg, eddy_size_m=optics.eddy_size, wavelength_m=optics.wavelength)
    sections = [("phase", ("theta_rad", "p_ray", "p_mie", "p_tot", "p_tur"), rows)]
    return meta, sections


def _cmd_scenario(args) -> int:
    cfg = _load_scenario(args)
    meta, sections = run_scenario(cfg)
    _write_report(_out_path(args), meta, sections)
    return 0


def _parse_values(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: {exc}") from exc


def _cmd_sweep(args) -> int:
    cfg = _load_scenario(args)
    meta, sections = run_sweep(cfg, args.axis, _parse_values(args.values))
    _write_report(_out_path(args), meta, sections)
    return 0


def _cmd_mcs_compare(args) -> int:
    cfg = _load_scenario(args)
    try:
        m_list = [int(v) for v in args.m_list.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--m-list: {exc}") from exc
    meta, sections = run_mcs_compare(cfg, m_list, args.reps)
    _write_report(_out_path(args), meta, sections)
    return 0


def _cmd_phase(args) -> int:
    cfg = _load_scenario(args)
    meta, sections = phase_function_report(cfg, args.points, args.theta_max)
    _write_report(_out_path(args), meta, sections)
    return 0


def _cmd_analyze(args) -> int:
    try:
        log = load_measurements(args.input)
        stats = analyze_measurements(log)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{args.input}: {exc}") from exc
    meta = {
        "generator": f"uvnlos {__version__}",
        "input": args.input,
        "samples": stats.samples,
        "mean_voltage": stats.mean_voltage,
        "scintillation_index": stats.scintillation_index,
        "gauss_mean": stats.gauss_mean,
        "gauss_std": stats.gauss_std,
        "ks_distance": stats.ks_distance,
    }
    sections = [
        (
            "histogram",
            ("normalized_value", "density"),
            list(zip(stats.hist_centers, stats.hist_density)),
        )
    ]
    _write_report(_out_path(args), meta, sections)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="uvnlos",
        description=(
            "Monte-Carlo-integration simulator for non-line-of-sight UV "
            "scattering links in a turbulent atmosphere"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", help="scenario config file")
            p.add_argument("--seed", type=int, help="override run.seed")
            p.add_argument("--samples", type=int, help="override run.samples (M)")
            p.add_argument("--orders", type=int, help="override run.orders (N)")
            p.add_argument("--workers", type=int, help="override run.workers")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("scenario", help="estimate one scenario")
    common(p)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("sweep", help="rerun the scenario along one axis")
    common(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument(
        "--values",
        required=True,
        help="comma-separated axis values (m for distance, degrees for zenith)",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "mcs-compare",
        help="variance of the conventional estimator vs the stable one",
    )
    common(p)
    p.add_argument("--m-list", required=True, help="comma-separated sample counts")
    p.add_argument("--reps", type=int, default=100, help="repetitions per count")
    p.set_defaults(func=_cmd_mcs_compare)

    p = sub.add_parser("phase", help="tabulate the phase functions")
    common(p)
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--theta-max", type=float, default=math.pi)
    p.set_defaults(func=_cmd_phase)

    p = sub.add_parser("analyze", help="statistics of recorded receiver samples")
    p.add_argument("--input", required=True, help="measurement log (1 or 2 columns)")
    common(p, needs_config=False)
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # Downstream pager/head closed the pipe; not an error.
        return 0


if __name__ == "__main__":
    sys.exit(main())
