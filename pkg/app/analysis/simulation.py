# app/analysis/simulation.py
"""
Classical multi-machine swing-equation model, linearized at a snapshot.

    d(dDelta)/dt = omega_s dOmega
    M d(dOmega)/dt = K_s dDelta - D dOmega - injection[:, j] dP   (t >= t_step)

Sources are the inertial sources of the snapshot (machines and devices with
H > 0) behind their reactances; the network is Kron-reduced onto their
internal nodes. Bus frequencies follow the frequency divider.
"""

import logging
from typing import Dict, Optional

import numpy as np

from app.analysis.inertia import build_frequency_divider
from app.core.config import get_settings
from app.core.errors import InertiaComputationError, InvalidParameterError, SimulationDivergedError
from app.models.network import augmented_network
from app.schemas.analysis import PartitionResult
from app.schemas.grid import Snapshot
from app.schemas.simulation import ClassicalModel, SimResult

logger = logging.getLogger(__name__)


def _synchronizing(reduced: np.ndarray, magnitude: np.ndarray, angle: np.ndarray) -> np.ndarray:
    """Linearized power-flow Laplacian of a reduced network (zero row sums)."""
    B = -reduced
    S = np.outer(magnitude, magnitude) * B * np.cos(angle[:, None] - angle[None, :])
    np.fill_diagonal(S, 0.0)
    return np.diag(S.sum(axis=1)) - S


def assemble_model(snapshot: Snapshot) -> ClassicalModel:
    """
    Linear classical model of the snapshot.

    K_s comes from the network reduced onto the source internal nodes. The
    injection column of bus j comes from the network reduced onto the
    sources plus j: a step there is shared as -L~[S, j] / L~[j, j].
    """
    net = augmented_network(snapshot)
    m = net.n_src
    if m == 0:
        raise InertiaComputationError("no inertial source to simulate")

    emf = np.array([s.emf_mag for s in net.sources])
    delta = np.array([s.angle for s in net.sources])

    K_s = -_synchronizing(net.reduce_onto([]), emf, delta)

    injection = np.zeros((m, net.n_bus))
    for j in net.energized_buses():
        reduced = net.reduce_onto([j])
        lin = _synchronizing(
            reduced,
            np.append(emf, net.voltage[j]),
            np.append(delta, net.angle[j]),
        )
        injection[:, j] = -lin[:m, m] / lin[m, m]

    divider = build_frequency_divider(snapshot, net)
    frequency = snapshot.case.system.frequency_hz
    return ClassicalModel(
        bus_ids=net.bus_ids,
        source_keys=net.source_keys,
        source_buses=tuple(s.bus for s in net.sources),
        M=np.array([2.0 * s.inertia_H for s in net.sources]),
        D=np.array([s.damping_D for s in net.sources]),
        K_s=K_s,
        injection=injection,
        divider=divider.matrix,
        omega_s=2.0 * np.pi * frequency,
    )


def state_matrix(model: ClassicalModel) -> np.ndarray:
    """A of d/dt [dDelta, dOmega] = A [dDelta, dOmega]."""
    m = model.n_sources
    A = np.zeros((2 * m, 2 * m))
    A[:m, m:] = model.omega_s * np.eye(m)
    A[m:, :m] = model.K_s / model.M[:, None]
    A[m:, m:] = -np.diag(model.D / model.M)
    return A


def simulate_load_step(
    model: ClassicalModel,
    bus: int,
    delta_p: float,
    horizon: Optional[float] = None,
    dt: Optional[float] = None,
    t_step: float = 0.0,
) -> SimResult:
    """
    Fixed-step RK4 response to a load step of ``delta_p`` p.u. at ``bus``.

    Positive ``delta_p`` is a load increase. The step switches on at the
    first grid time >= ``t_step`` and stays on. Raises
    SimulationDivergedError when the state leaves the blow-up threshold.
    """
    settings = get_settings()
    dt = settings.SIM_DT if dt is None else dt
    horizon = settings.SIM_HORIZON if horizon is None else horizon
    if dt <= 0 or horizon <= 0:
        raise InvalidParameterError("dt and horizon must be positive")
    if horizon > settings.SIM_MAX_HORIZON:
        raise InvalidParameterError(f"horizon {horizon} s exceeds the {settings.SIM_MAX_HORIZON} s limit")
    if dt > horizon:
        raise InvalidParameterError("dt exceeds the horizon")
    if bus not in model.bus_ids:
        raise InvalidParameterError(f"unknown bus {bus}")
    j = model.bus_ids.index(bus)
    if not np.any(model.injection[:, j]):
        raise InvalidParameterError(f"bus {bus} has no path to an inertial source")

    m = model.n_sources
    n_steps = int(round(horizon / dt))
    time = np.arange(n_steps + 1) * dt
    p = model.injection[:, j] * delta_p
    K_s, D, M, w_s = model.K_s, model.D, model.M, model.omega_s
    threshold = settings.SIM_BLOWUP_THRESHOLD

    def accel(d_delta, d_omega, active):
        out = K_s @ d_delta - D * d_omega
        if active:
            out = out - p
        return out / M

    angle = np.zeros((n_steps + 1, m))
    speed = np.zeros((n_steps + 1, m))
    acceleration = np.zeros((n_steps + 1, m))
    d_delta = np.zeros(m)
    d_omega = np.zeros(m)
    switch_on = t_step - 0.5 * dt
    for n in range(n_steps + 1):
        active = time[n] >= switch_on
        a1 = accel(d_delta, d_omega, active)
        acceleration[n] = a1
        if n == n_steps:
            break
        v1 = w_s * d_omega
        a2 = accel(d_delta + 0.5 * dt * v1, d_omega + 0.5 * dt * a1, active)
        v2 = w_s * (d_omega + 0.5 * dt * a1)
        a3 = accel(d_delta + 0.5 * dt * v2, d_omega + 0.5 * dt * a2, active)
        v3 = w_s * (d_omega + 0.5 * dt * a2)
        a4 = accel(d_delta + dt * v3, d_omega + dt * a3, active)
        v4 = w_s * (d_omega + dt * a3)
        d_delta = d_delta + dt / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)
        d_omega = d_omega + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        peak = max(np.max(np.abs(d_delta)), np.max(np.abs(d_omega)))
        if not np.isfinite(peak) or peak > threshold:
            raise SimulationDivergedError(
                f"state magnitude {peak:.3e} passed {threshold:g} at t = {time[n + 1]:.4f} s"
            )
        angle[n + 1] = d_delta
        speed[n + 1] = d_omega

    divider = model.divider
    logger.info("simulated %.3g p.u. step at bus %d: %d steps of %.3g s", delta_p, bus, n_steps, dt)
    return SimResult(
        bus_ids=model.bus_ids,
        source_keys=model.source_keys,
        source_buses=model.source_buses,
        bus=bus,
        delta_p=delta_p,
        t_step=float(time[min(int(np.searchsorted(time, switch_on)), n_steps)]),
        dt=dt,
        time=time,
        rotor_angle=angle,
        rotor_speed=speed,
        bus_frequency=speed @ divider.T,
        bus_rocof=acceleration @ divider.T,
        source_acceleration=acceleration,
    )


def regional_average_frequency(result: SimResult, partition: PartitionResult, region: int) -> np.ndarray:
    """Unweighted mean of the member buses' frequency traces."""
    members = partition.members(region)
    if not members:
        raise InvalidParameterError(f"region {region} not in partition (1..{partition.r})")
    missing = [b for b in members if b not in result.bus_ids]
    if missing:
        raise InvalidParameterError(f"partition buses {missing} are not in the simulation")
    columns = [result.bus_ids.index(b) for b in members]
    return result.bus_frequency[:, columns].mean(axis=1)


def coherency_spreads(
    result: SimResult, partition: PartitionResult, window: float = 1.0
) -> Dict[str, float]:
    """
    Largest pairwise rotor-speed difference over the first ``window`` seconds,
    for machine pairs in the same region and pairs in different regions.
    """
    upto = result.time <= window + 0.5 * result.dt
    speeds = result.rotor_speed[upto]
    region_of = [partition.labels[b] for b in result.source_buses]
    within = across = 0.0
    for a in range(len(region_of)):
        for b in range(a + 1, len(region_of)):
            spread = float(np.max(np.abs(speeds[:, a] - speeds[:, b])))
            if region_of[a] == region_of[b]:
                within = max(within, spread)
            else:
                across = max(across, spread)
    return {"within": within, "across": across}
