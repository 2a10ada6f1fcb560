# app/analysis/inertia.py
"""
Nodal inertia distribution.

For a snapshot with sources k (machines and inertial devices) and buses j:

- frequency divider D_div (n_bus x n_src): bus frequency deviations as a
  row-stochastic combination of source speed deviations,
- synchronizing power coefficients dS (n_src x n_bus): share of a power step
  at bus j picked up by source k at t = 0+,
- nodal inertia h_j = 1 / sum_k D_div[j, k] dS[k, j] / (2 H_k), so a step
  dP at bus j produces an initial RoCoF of dP / h_j there,
- damping distribution R = diag(D_div diag(D_k / H_k) 1).
"""

import logging
from typing import Optional

import numpy as np
from scipy import linalg as sla

from app.core.config import get_settings
from app.core.errors import InertiaComputationError, SingularNetworkError
from app.models.network import AugmentedNetwork, augmented_network
from app.schemas.analysis import FreqDivider, InertiaProfile, SpcMatrix
from app.schemas.grid import Snapshot

logger = logging.getLogger(__name__)


def _network(snapshot: Snapshot, network: Optional[AugmentedNetwork]) -> AugmentedNetwork:
    net = network if network is not None else augmented_network(snapshot)
    if net.n_src == 0:
        raise InertiaComputationError("all-zero inertia system: no source with H > 0")
    return net


def build_frequency_divider(
    snapshot: Snapshot, network: Optional[AugmentedNetwork] = None
) -> FreqDivider:
    """
    Frequency divider from the augmented susceptance network.

    With source internal nodes held at their speeds and no injection at the
    buses, bus speeds follow -B_bb^-1 B_bg. Rows of isolated buses are NaN.
    """
    net = _network(snapshot, network)
    live = net.energized_buses()
    src = net.source_nodes()
    Y = net.matrix

    D = np.full((net.n_bus, net.n_src), np.nan)
    try:
        D[live] = -sla.solve(Y[np.ix_(live, live)], Y[np.ix_(live, src)], assume_a="sym")
    except sla.LinAlgError as exc:
        raise SingularNetworkError(f"augmented bus susceptance matrix is singular: {exc}") from exc

    tol = get_settings().STOCHASTIC_TOL
    drift = np.max(np.abs(D[live].sum(axis=1) - 1.0)) if live.size else 0.0
    if drift > tol:
        raise InertiaComputationError(f"frequency divider rows deviate from 1 by {drift:.3e}")
    return FreqDivider(bus_ids=net.bus_ids, source_keys=net.source_keys, matrix=D)


def build_spc(snapshot: Snapshot, network: Optional[AugmentedNetwork] = None) -> SpcMatrix:
    """
    Synchronizing power coefficients of every source for a step at every bus.

    For each bus j the energized network is Kron-reduced onto the sources
    plus j; B~[k, j] is the resulting source-to-bus susceptance and
    K[k, j] = E_k V_j B~[k, j] cos(delta_k - theta_j). Column j of dS is
    K[:, j] normalized to sum 1. Columns of isolated buses are NaN.
    """
    net = _network(snapshot, network)
    m = net.n_src
    emf = np.array([s.emf_mag for s in net.sources])
    delta = np.array([s.angle for s in net.sources])

    B_eq = np.full((m, net.n_bus), np.nan)
    K = np.full((m, net.n_bus), np.nan)
    dS = np.full((m, net.n_bus), np.nan)
    for j in net.energized_buses():
        reduced = net.reduce_onto([j])
        B_eq[:, j] = -reduced[:m, m]
        K[:, j] = emf * net.voltage[j] * B_eq[:, j] * np.cos(delta - net.angle[j])
        total = K[:, j].sum()
        if total <= 0:
            raise InertiaComputationError(
                f"synchronizing coefficients at bus {net.bus_ids[j]} sum to {total:.3e}"
            )
        dS[:, j] = K[:, j] / total

    live = net.energized_buses()
    drift = np.max(np.abs(dS[:, live].sum(axis=0) - 1.0)) if live.size else 0.0
    if drift > get_settings().STOCHASTIC_TOL:
        raise InertiaComputationError(f"SPC columns deviate from 1 by {drift:.3e}")
    return SpcMatrix(
        bus_ids=net.bus_ids,
        source_keys=net.source_keys,
        matrix=dS,
        coefficients=K,
        equivalent_susceptance=B_eq,
    )


def scalar_nodal_inertia(divider: np.ndarray, spc: np.ndarray, inertia_H: np.ndarray) -> np.ndarray:
    """Per-bus evaluation: h_j = 1 / sum_k D[j, k] dS[k, j] / (2 H_k)."""
    h = np.full(divider.shape[0], np.nan)
    for j in range(divider.shape[0]):
        if np.isnan(divider[j]).any():
            continue
        weight = 0.0
        for k in range(divider.shape[1]):
            weight += divider[j, k] * spc[k, j] / (2.0 * inertia_H[k])
        h[j] = 1.0 / weight
    return h


def inertia_terms(divider: np.ndarray, K: np.ndarray, inertia_H: np.ndarray):
    """K_h = 1^T K, F = (D_div o K^T) diag(2H)^-1, F_h = F 1 and h = K_h / F_h."""
    K_h = K.sum(axis=0)
    F = (divider * K.T) / (2.0 * inertia_H)[None, :]
    F_h = F.sum(axis=1)
    return K_h, F, F_h, K_h / F_h


def damping_matrix(divider: np.ndarray, damping_D: np.ndarray, inertia_H: np.ndarray) -> np.ndarray:
    """R = diag(R_d 1) with R_d = D_div diag(D_k) diag(H_k)^-1; zero on isolated buses."""
    R_d = divider * (damping_D / inertia_H)[None, :]
    return np.diag(np.nan_to_num(R_d.sum(axis=1), nan=0.0))


def nodal_inertia(snapshot: Snapshot, network: Optional[AugmentedNetwork] = None) -> InertiaProfile:
    """
    Nodal inertia of every bus with the audit matrices.

    Matrix path: K_h = 1^T K, F = (D_div o K^T) M^-1 with M = diag(2H),
    F_h = F 1, h = K_h / F_h. It is checked against the per-bus sum.
    """
    net = _network(snapshot, network)
    divider = build_frequency_divider(snapshot, net)
    spc = build_spc(snapshot, net)

    H = np.array([s.inertia_H for s in net.sources])
    D = np.array([s.damping_D for s in net.sources])
    if not np.all(H > 0):
        raise InertiaComputationError("every source in the inertia matrix needs H > 0")

    K = spc.coefficients
    K_h, F, F_h, h = inertia_terms(divider.matrix, K, H)

    h_scalar = scalar_nodal_inertia(divider.matrix, spc.matrix, H)
    live = net.energized_buses()
    gap = np.max(np.abs(h[live] - h_scalar[live]) / h_scalar[live]) if live.size else 0.0
    if gap > get_settings().PATH_AGREEMENT_TOL:
        raise InertiaComputationError(f"matrix and per-bus nodal inertia disagree by {gap:.3e}")
    if np.any(~np.isfinite(h[live])) or np.any(h[live] <= 0):
        raise InertiaComputationError("nodal inertia is not positive and finite on every energized bus")

    isolated = tuple(b for b, on in zip(net.bus_ids, net.energized) if not on)
    logger.info(
        "nodal inertia: %d buses, %d sources, h in [%.3g, %.3g] s",
        net.n_bus, net.n_src, np.nanmin(h), np.nanmax(h),
    )
    return InertiaProfile(
        bus_ids=net.bus_ids,
        source_keys=net.source_keys,
        source_H=H,
        source_D=D,
        h=h,
        K=K,
        K_h=K_h,
        F=F,
        F_h=F_h,
        R=damping_matrix(divider.matrix, D, H),
        divider=divider,
        spc=spc,
        isolated_buses=isolated,
    )


def damping_distribution(snapshot: Snapshot, network: Optional[AugmentedNetwork] = None) -> np.ndarray:
    net = _network(snapshot, network)
    divider = build_frequency_divider(snapshot, net)
    H = np.array([s.inertia_H for s in net.sources])
    D = np.array([s.damping_D for s in net.sources])
    return damping_matrix(divider.matrix, D, H)
