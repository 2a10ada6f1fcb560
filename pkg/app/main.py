# app/main.py
"""
Command-line interface.

    python -m app.main inertia   --case CASE [--out DIR]
    python -m app.main partition --case CASE [--r-min N] [--r-max N] [--damped]
    python -m app.main whatif device-sweep --case CASE --bus J [--h-grid 0.5:10:0.5]
    python -m app.main whatif min-h        --case CASE --bus J
    python -m app.main whatif line-sweep   --case CASE --from-bus A --to-bus B --region R
    python -m app.main simulate --case CASE [--bus J] [--dp P] [--compare SCENARIO ...]

Every command accepts ``--scenario`` (applied to the case in order), ``--seed``
and ``--format``. Failures print one JSON object on stderr and exit with 2
for bad input or 1 for numerical failures.
"""

import functools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
from pydantic import ValidationError

from app import __version__
from app.analysis.inertia import nodal_inertia
from app.analysis.partitioning import partition as run_partition
from app.analysis.regional import (
    device_h_sweep,
    min_device_inertia,
    reactance_sweep,
    regional_inertia,
    sweep_crossing,
)
from app.analysis.simulation import (
    assemble_model,
    coherency_spreads,
    regional_average_frequency,
    simulate_load_step,
)
from app.core.config import get_settings
from app.core.errors import InvalidParameterError, ToolkitError
from app.exports import (
    provenance,
    write_device_sweep,
    write_inertia,
    write_line_sweep,
    write_min_h,
    write_partition,
    write_simulation,
)
from app.models.device import DeviceModel
from app.models.grid import apply_scenario, build_snapshot
from app.schemas.analysis import InertiaProfile, PartitionResult
from app.schemas.grid import DeviceKind, InertialDevice, Snapshot
from app.schemas.run import CommandName, RunConfig

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ----------------------------------------------------------------------
# Parameter parsing
# ----------------------------------------------------------------------
def parse_grid(text: str) -> Tuple[float, ...]:
    """
    ``start:stop:step`` (stop included when it falls on the grid) or a comma list.

    >>> parse_grid("1:3:0.5")
    (1.0, 1.5, 2.0, 2.5, 3.0)
    >>> parse_grid("2, 5,10")
    (2.0, 5.0, 10.0)
    """
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:stop:step, got '{text}'")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"empty or reversed range '{text}'")
        count = int((stop - start) / step + 1e-9) + 1
        return tuple(round(start + n * step, 12) for n in range(count))
    values = tuple(float(p) for p in text.split(",") if p.strip())
    if not values:
        raise ValueError("empty list")
    return values


class GridParamType(click.ParamType):
    name = "grid"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return parse_grid(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


GRID = GridParamType()


def build_template(
    bus: int,
    kind: str,
    device_id: int,
    inertia_h: Optional[float],
    damping_d: float,
    coupling_x: float,
    emf: Optional[float],
    p_inject: float,
    t_omega: Optional[float],
    m_p: Optional[float],
) -> InertialDevice:
    """Device template from the command-line flags, built through the kind's model."""
    params = {"damping_D": damping_d, "p_inject": p_inject, "t_omega": t_omega, "m_p": m_p}
    if kind != DeviceKind.GRID_FOLLOWING.value and not (m_p is not None and t_omega is not None):
        params["inertia_H"] = 1.0 if inertia_h is None else inertia_h
    elif inertia_h is not None:
        params["inertia_H"] = inertia_h
    params = {k: v for k, v in params.items() if v is not None}
    return DeviceModel.create(kind, **params).build(
        device_id=device_id, bus=bus, coupling_reactance=coupling_x, emf_setpoint=emf
    )


# ----------------------------------------------------------------------
# Shared options and plumbing
# ----------------------------------------------------------------------
def _stack(options):
    def decorator(func):
        for option in reversed(options):
            func = option(func)
        return func
    return decorator


case_options = _stack(
    [
        click.option("--case", "case_path", required=True, type=click.Path(dir_okay=False, path_type=Path),
                     help="Case file (JSON)."),
        click.option("--out", "output_dir", default="out", show_default=True,
                     type=click.Path(file_okay=False, path_type=Path), help="Output directory."),
        click.option("--seed", type=int, default=None, help="Clustering seed."),
        click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default=None,
                     help="Table format."),
        click.option("--scenario", "scenarios", multiple=True,
                     help="Named case scenario to apply (repeatable, in order)."),
    ]
)

partition_options = _stack(
    [
        click.option("--r-min", type=int, default=None, help="Smallest region count tried."),
        click.option("--r-max", type=int, default=None, help="Largest region count tried (capped at n_bus - 1)."),
        click.option("--damped", is_flag=True, help="Embed with the damped quadratic problem."),
    ]
)

device_options = _stack(
    [
        click.option("--device-kind", type=click.Choice([k.value for k in DeviceKind]),
                     default=DeviceKind.SYNCHRONOUS_CONDENSER.value, show_default=True),
        click.option("--device-id", type=int, default=900, show_default=True),
        click.option("--device-h", type=float, default=None, help="Device inertia constant, s."),
        click.option("--device-d", type=float, default=0.0, show_default=True, help="Device damping, p.u."),
        click.option("--coupling-x", type=float, default=0.1, show_default=True, help="Coupling reactance, p.u."),
        click.option("--device-emf", type=float, default=None, help="Internal EMF setpoint, p.u."),
        click.option("--p-inject", type=float, default=0.0, show_default=True),
        click.option("--t-omega", type=float, default=None, help="Grid-forming filter constant, s."),
        click.option("--m-p", type=float, default=None, help="Grid-forming droop gain."),
    ]
)


def reports_errors(func):
    """Turn toolkit and validation errors into a JSON line on stderr and an exit code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ToolkitError as exc:
            logger.debug("command failed", exc_info=True)
            click.echo(json.dumps(exc.to_dict(), sort_keys=True), err=True)
            sys.exit(exc.exit_code)
        except ValidationError as exc:
            error = InvalidParameterError("; ".join(e["msg"] for e in exc.errors()))
            click.echo(json.dumps(error.to_dict(), sort_keys=True), err=True)
            sys.exit(error.exit_code)
    return wrapper


def _config(command: CommandName, case_path: Path, output_dir: Path, seed, output_format, **fields) -> RunConfig:
    settings = get_settings()
    return RunConfig(
        case_path=case_path,
        command=command,
        seed=settings.DEFAULT_SEED if seed is None else seed,
        output_dir=output_dir,
        output_format=output_format or settings.OUTPUT_FORMAT,
        **fields,
    )


def _r_range(snapshot: Snapshot, r_min: Optional[int], r_max: Optional[int]) -> Tuple[int, int]:
    settings = get_settings()
    lo = settings.R_MIN if r_min is None else r_min
    hi = min(settings.R_MAX, len(snapshot.case.buses) - 1) if r_max is None else r_max
    return lo, hi


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _announce(paths: List[Path]) -> None:
    for path in paths:
        click.echo(str(path))


def _partition(snapshot: Snapshot, profile: InertiaProfile, config: RunConfig) -> PartitionResult:
    return run_partition(
        snapshot,
        profile,
        r_range=(config.r_min, config.r_max),
        seed=config.seed,
        include_damping=config.include_damping,
    )


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
@click.group()
@click.version_option(__version__, prog_name="regional-inertia")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default from settings).")
def cli(log_level: Optional[str]) -> None:
    """Nodal and regional inertia of power-system cases."""
    level = (log_level or get_settings().LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT, stream=sys.stderr, force=True)


@cli.command()
@case_options
@reports_errors
def inertia(case_path, output_dir, seed, output_format, scenarios):
    """Nodal inertia of every bus, with the audit matrices."""
    config = _config(CommandName.INERTIA, case_path, output_dir, seed, output_format, scenarios=scenarios)
    snapshot = build_snapshot(case_path, scenarios)
    profile = nodal_inertia(snapshot)
    _announce(write_inertia(profile, _outdir(output_dir), provenance(config, snapshot), config.output_format))


@cli.command()
@case_options
@partition_options
@reports_errors
def partition(case_path, output_dir, seed, output_format, scenarios, r_min, r_max, damped):
    """Inertia-weighted spectral regions and their regional inertia."""
    snapshot = build_snapshot(case_path, scenarios)
    lo, hi = _r_range(snapshot, r_min, r_max)
    config = _config(
        CommandName.PARTITION, case_path, output_dir, seed, output_format,
        scenarios=scenarios, r_min=lo, r_max=hi, include_damping=damped,
    )
    profile = nodal_inertia(snapshot)
    result = _partition(snapshot, profile, config)
    report = regional_inertia(profile, result, snapshot)
    paths = write_partition(result, report, snapshot, _outdir(output_dir), provenance(config, snapshot),
                            config.output_format)
    _announce(paths)


@cli.group()
def whatif():
    """What-if studies: device placement and corridor reactance."""


@whatif.command("device-sweep")
@case_options
@device_options
@click.option("--bus", type=int, required=True, help="Connection bus.")
@click.option("--h-grid", type=GRID, default="0.5:10:0.5", show_default=True, help="Device H values, s.")
@reports_errors
def device_sweep(case_path, output_dir, seed, output_format, scenarios, bus, h_grid,
                 device_kind, device_id, device_h, device_d, coupling_x, device_emf, p_inject, t_omega, m_p):
    """Nodal inertia at every bus as the new device's H varies."""
    template = build_template(bus, device_kind, device_id, device_h, device_d, coupling_x,
                              device_emf, p_inject, t_omega, m_p)
    config = _config(
        CommandName.DEVICE_SWEEP, case_path, output_dir, seed, output_format,
        scenarios=scenarios, bus=bus, h_grid=h_grid, device=template.model_dump(mode="json"),
    )
    snapshot = build_snapshot(case_path, scenarios)
    sweep = device_h_sweep(snapshot, bus, template, h_grid)
    crossing = sweep_crossing(sweep)
    if crossing is None:
        logger.warning("h at bus %d stays below its base value over the whole grid", bus)
    paths = write_device_sweep(sweep, crossing, _outdir(output_dir), provenance(config, snapshot),
                               config.output_format)
    _announce(paths)


@whatif.command("min-h")
@case_options
@device_options
@click.option("--bus", type=int, required=True, help="Connection bus.")
@reports_errors
def min_h(case_path, output_dir, seed, output_format, scenarios, bus,
          device_kind, device_id, device_h, device_d, coupling_x, device_emf, p_inject, t_omega, m_p):
    """Smallest device H that keeps the bus's nodal inertia from dropping."""
    template = build_template(bus, device_kind, device_id, device_h, device_d, coupling_x,
                              device_emf, p_inject, t_omega, m_p)
    config = _config(
        CommandName.MIN_H, case_path, output_dir, seed, output_format,
        scenarios=scenarios, bus=bus, device=template.model_dump(mode="json"),
    )
    snapshot = build_snapshot(case_path, scenarios)
    result = min_device_inertia(snapshot, bus, template)
    _announce(write_min_h(result, _outdir(output_dir), provenance(config, snapshot)))


@whatif.command("line-sweep")
@case_options
@partition_options
@click.option("--from-bus", type=int, required=True)
@click.option("--to-bus", type=int, required=True)
@click.option("--alpha-grid", type=GRID, default="1,2,5,10,20", show_default=True,
              help="Reactance scale factors.")
@click.option("--region", type=int, required=True, help="Region whose inertia is tracked.")
@reports_errors
def line_sweep(case_path, output_dir, seed, output_format, scenarios, r_min, r_max, damped,
               from_bus, to_bus, alpha_grid, region):
    """Regional inertia as one corridor's reactance is scaled; regions fixed from the base case."""
    snapshot = build_snapshot(case_path, scenarios)
    lo, hi = _r_range(snapshot, r_min, r_max)
    config = _config(
        CommandName.LINE_SWEEP, case_path, output_dir, seed, output_format,
        scenarios=scenarios, r_min=lo, r_max=hi, include_damping=damped,
        branch=(from_bus, to_bus), alpha_grid=alpha_grid, region=region,
    )
    regions = _partition(snapshot, nodal_inertia(snapshot), config)
    sweep = reactance_sweep(snapshot, (from_bus, to_bus), alpha_grid, regions, region)
    _announce(write_line_sweep(sweep, _outdir(output_dir), provenance(config, snapshot), config.output_format))


@cli.command()
@case_options
@partition_options
@click.option("--bus", type=int, default=None, help="Step bus (default: the case's reference bus).")
@click.option("--dp", "delta_p", type=float, default=None, help="Load step, p.u. (default: the case's reference).")
@click.option("--dt", type=float, default=None, help="Integration step, s.")
@click.option("--horizon", type=float, default=None, help="Simulated time, s.")
@click.option("--t-step", type=float, default=0.0, show_default=True, help="Time the step is applied, s.")
@click.option("--compare", multiple=True, help="Scenario run separately against the base (repeatable).")
@click.option("--regions/--no-regions", default=False, help="Add regional average traces.")
@reports_errors
def simulate(case_path, output_dir, seed, output_format, scenarios, r_min, r_max, damped,
             bus, delta_p, dt, horizon, t_step, compare, regions):
    """Classical swing-equation response to a load step."""
    base = build_snapshot(case_path, scenarios)
    system = base.case.system
    bus = system.reference_step_bus if bus is None else bus
    delta_p = system.reference_load_step if delta_p is None else delta_p
    if bus is None or delta_p is None:
        raise InvalidParameterError("give --bus and --dp; the case has no reference load step")
    lo, hi = _r_range(base, r_min, r_max)
    config = _config(
        CommandName.SIMULATE, case_path, output_dir, seed, output_format,
        scenarios=scenarios, compare=compare, r_min=lo, r_max=hi, include_damping=damped,
        bus=bus, delta_p=delta_p, dt=dt, horizon=horizon, t_step=t_step,
    )

    runs: Dict[str, Snapshot] = {"base": base}
    for name in compare:
        runs[name] = apply_scenario(base, name)

    def run(name: str):
        return name, simulate_load_step(assemble_model(runs[name]), bus, delta_p, horizon, dt, t_step)

    with ThreadPoolExecutor(max_workers=max(1, get_settings().MAX_WORKERS)) as pool:
        results = dict(pool.map(run, list(runs)))

    averages: Dict[str, Dict] = {}
    spreads: Dict[str, Dict[str, float]] = {}
    if regions:
        # regions come from the base case and stay fixed across the compared runs
        frozen = _partition(base, nodal_inertia(base), config)
        for name, result in results.items():
            averages[name] = {r: regional_average_frequency(result, frozen, r) for r in frozen.regions()}
            spreads[name] = coherency_spreads(result, frozen)

    paths = write_simulation(results, averages, _outdir(output_dir), provenance(config, base),
                             config.output_format, spreads=spreads)
    _announce(paths)


if __name__ == "__main__":
    cli()
