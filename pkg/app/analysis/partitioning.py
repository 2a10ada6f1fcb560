# app/analysis/partitioning.py
"""
Inertia-weighted spectral partitioning.

The network Laplacian L (linearized power flow at the operating point) is
weighted by the nodal inertia N = diag(h) and, optionally, the damping
distribution R. The first nontrivial modes of (lambda^2 N + lambda R + L)
embed the buses; the embedding dimension k is picked at the largest relative
eigengap, the region count r by the best silhouette of k-means in the
embedding. Regions are finally made electrically contiguous and numbered by
descending size.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.core.config import get_settings
from app.core.errors import InvalidParameterError, PartitionError, ClusteringError
from app.operations.clustering import kmeans, silhouette
from app.operations.linalg import eig_qep, eig_sym_pencil
from app.schemas.analysis import (
    EmbeddingMode,
    InertiaProfile,
    NetworkLaplacian,
    PartitionResult,
    SpectralEmbedding,
)
from app.schemas.grid import GridCase, Snapshot

logger = logging.getLogger(__name__)


def build_laplacian(snapshot: Snapshot) -> NetworkLaplacian:
    """L[i, k] = -V_i V_k b_ik cos(theta_i - theta_k) off the diagonal, zero row sums."""
    case = snapshot.case
    index = case.bus_index()
    V = np.array([b.voltage_mag for b in case.buses])
    theta = np.array([b.voltage_ang for b in case.buses])

    L = np.zeros((len(index), len(index)))
    for br in case.in_service():
        i, k = index[br.from_bus], index[br.to_bus]
        w = V[i] * V[k] * br.susceptance * np.cos(theta[i] - theta[k])
        L[i, k] -= w
        L[k, i] -= w
    np.fill_diagonal(L, -L.sum(axis=1))
    return NetworkLaplacian(bus_ids=case.bus_ids, L=L)


def relative_eigengaps(magnitudes: Sequence[float], zero_tol: float) -> np.ndarray:
    """gamma_i = (a_{i+1} - a_i) / a_i; inf when a_i is zero and a_{i+1} is not."""
    a = np.asarray(magnitudes, dtype=float)
    gaps = np.zeros(max(a.size - 1, 0))
    for i in range(gaps.size):
        if a[i] <= zero_tol:
            gaps[i] = np.inf if a[i + 1] > zero_tol else 0.0
        else:
            gaps[i] = (a[i + 1] - a[i]) / a[i]
    return gaps


def _signed_modulus(vector: np.ndarray) -> np.ndarray:
    """
    Real embedding column from a complex eigenvector.

    The vector is rotated so its largest entry is real; each entry is then
    replaced by its modulus carrying the sign of its rotated real part.
    """
    pivot = vector[int(np.argmax(np.abs(vector)))]
    rotated = vector * np.exp(-1j * np.angle(pivot))
    sign = np.where(rotated.real < 0, -1.0, 1.0)
    return np.abs(rotated) * sign


def _undamped_modes(L: np.ndarray, h: np.ndarray) -> Tuple[List[complex], np.ndarray]:
    mu, phi = eig_sym_pencil(L, h)
    values = [complex(0.0, np.sqrt(m)) for m in mu]
    return values, phi


def _damped_modes(L: np.ndarray, h: np.ndarray, R: np.ndarray, zero_tol: float) -> Tuple[List[complex], np.ndarray]:
    """Oscillatory modes only: one eigenvalue per conjugate pair, real and zero eigenvalues dropped."""
    pairs = eig_qep(np.diag(h), R, L)
    # lambda is a square root of the pencil eigenvalue, so its noise floor is sqrt(tol)
    floor = np.sqrt(zero_tol)
    values, columns = [], []
    for pair in pairs:
        if pair.value.imag <= floor:
            continue
        values.append(pair.value)
        columns.append(_signed_modulus(pair.vector))
    if not values:
        raise PartitionError("damped problem has no oscillatory mode to embed with")
    return values, np.column_stack(columns)


def spectral_modes(
    snapshot: Snapshot,
    profile: InertiaProfile,
    include_damping: bool = False,
    max_modes: Optional[int] = None,
) -> SpectralEmbedding:
    """
    Spectral embedding of the buses.

    Undamped mode solves L phi = mu N phi (eigenvalues +/- j sqrt(mu)) and
    drops the trivial mode; damped mode solves the full quadratic problem with
    R from the profile and keeps only oscillatory eigenvalues, one per
    conjugate pair. Over the first min(max_modes, n - 1) nontrivial
    magnitudes a_2, a_3, ..., the largest relative gap (a_{i+1} - a_i) / a_i
    sets k = i, the trivial a_1 = 0 counted, and the embedding takes the k
    nontrivial columns a_2..a_{k+1}. Columns have unit 2-norm.
    """
    settings = get_settings()
    max_modes = max_modes or settings.MAX_EMBEDDING_MODES
    if profile.isolated_buses:
        raise PartitionError(
            f"buses {list(profile.isolated_buses)} have no inertia; partition each energized island separately"
        )
    if profile.bus_ids != snapshot.case.bus_ids:
        raise InvalidParameterError("inertia profile was built from a different snapshot")

    L = build_laplacian(snapshot).L
    h = np.asarray(profile.h)
    n = h.size
    if n < 3:
        raise PartitionError(f"need at least 3 buses to partition, got {n}")

    zero_tol = settings.ZERO_EIG_TOL * max(1.0, float(np.abs(np.diag(L)).max()))
    if include_damping:
        values, vectors = _damped_modes(L, h, np.asarray(profile.R), zero_tol)
        mode = EmbeddingMode.DAMPED_QEP
    else:
        values, vectors = _undamped_modes(L, h)
        values, vectors = values[1:], vectors[:, 1:]
        mode = EmbeddingMode.UNDAMPED_PENCIL

    candidates = min(max_modes, n - 1, len(values))
    values = values[:candidates]
    vectors = vectors[:, :candidates]
    magnitudes = np.abs(np.array(values))
    gaps = relative_eigengaps(magnitudes, zero_tol)
    # gaps[g] follows a_{g+2}
    k = min(int(np.argmax(gaps)) + 2, candidates) if gaps.size else 1

    embedding = vectors[:, :k].real.copy()
    embedding = embedding / np.linalg.norm(embedding, axis=0)[None, :]
    if settings.ROW_NORMALIZE_EMBEDDING:
        norms = np.linalg.norm(embedding, axis=1)
        embedding = embedding / np.where(norms > 0, norms, 1.0)[:, None]

    logger.debug("eigengaps (%s): %s", mode.value, np.array2string(gaps, precision=4))
    logger.info("spectral embedding: mode=%s, k=%d of %d candidate modes", mode.value, k, candidates)
    return SpectralEmbedding(
        bus_ids=profile.bus_ids,
        mode=mode,
        k=k,
        vectors=embedding,
        eigenvalues=tuple(values[:k]),
        magnitudes=tuple(float(a) for a in magnitudes),
        eigengaps=tuple(float(g) for g in gaps),
    )


def repair_connectivity(
    labels: Dict[int, int], case: GridCase
) -> Tuple[Dict[int, int], Tuple[Tuple[int, ...], ...]]:
    """
    Make every region electrically contiguous.

    In each region the largest connected fragment keeps the label (ties go to
    the fragment with the smallest bus id). Every other fragment joins the
    neighbouring region with the largest total boundary susceptance; a
    fragment with no neighbour at all becomes a region of its own.
    """
    graph = case.graph()
    labels = dict(labels)
    repaired: List[Tuple[int, ...]] = []

    changed = True
    while changed:
        changed = False
        for region in sorted(set(labels.values())):
            members = [b for b in labels if labels[b] == region]
            fragments = sorted(
                (sorted(c) for c in nx.connected_components(graph.subgraph(members))),
                key=lambda frag: (-len(frag), frag[0]),
            )
            for fragment in fragments[1:]:
                strength: Dict[int, float] = {}
                for bus in fragment:
                    for nbr, data in graph[bus].items():
                        if labels[nbr] != region:
                            strength[labels[nbr]] = strength.get(labels[nbr], 0.0) + data["susceptance"]
                if strength:
                    target = max(sorted(strength), key=lambda lab: strength[lab])
                else:
                    target = max(labels.values()) + 1
                for bus in fragment:
                    labels[bus] = target
                repaired.append(tuple(fragment))
                logger.warning("region %d fragment %s moved to region %d", region, fragment, target)
                changed = True
            if changed:
                break
    return labels, tuple(repaired)


def _number_regions(labels: Dict[int, int]) -> Dict[int, int]:
    """Regions numbered 1..r by descending size, ties to the lowest bus id."""
    members: Dict[int, List[int]] = {}
    for bus in sorted(labels):
        members.setdefault(labels[bus], []).append(bus)
    ranked = sorted(members, key=lambda lab: (-len(members[lab]), members[lab][0]))
    numbering = {lab: i + 1 for i, lab in enumerate(ranked)}
    return {bus: numbering[labels[bus]] for bus in labels}


def _score(points: np.ndarray, r: int, seed: int) -> Tuple[int, Optional[np.ndarray], Optional[float]]:
    try:
        result = kmeans(points, r, seed)
    except ClusteringError as exc:
        logger.debug("r=%d skipped: %s", r, exc)
        return r, None, None
    return r, result.labels, silhouette(points, result.labels)


def partition(
    snapshot: Snapshot,
    profile: InertiaProfile,
    r_range: Tuple[int, int] = (2, 10),
    seed: int = 42,
    include_damping: bool = False,
    embedding: Optional[SpectralEmbedding] = None,
) -> PartitionResult:
    """
    Coherent regions of the snapshot.

    Every r in the inclusive ``r_range`` is clustered and scored; the best
    silhouette wins (ties go to the smaller r). Ranges reaching past
    n_bus - 1 are rejected.
    """
    n = len(profile.bus_ids)
    r_lo, r_hi = int(r_range[0]), int(r_range[1])
    if r_lo < 2 or r_hi > n - 1 or r_lo > r_hi:
        raise InvalidParameterError(f"r range [{r_lo}, {r_hi}] must lie within [2, {n - 1}]")

    embedding = embedding or spectral_modes(snapshot, profile, include_damping=include_damping)
    points = np.asarray(embedding.vectors)
    if np.all(np.ptp(points, axis=0) <= 1e-12 * max(1.0, float(np.abs(points).max()))):
        raise PartitionError("degenerate embedding: every bus maps to the same point")

    workers = max(1, get_settings().MAX_WORKERS)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        scored = list(pool.map(lambda r: _score(points, r, seed), range(r_lo, r_hi + 1)))

    silhouette_by_r = {r: score for r, _, score in scored}
    feasible = [(r, labels, score) for r, labels, score in scored if score is not None]
    if not feasible:
        raise PartitionError(f"no r in [{r_lo}, {r_hi}] could be clustered")
    best_r, best_labels, best_score = max(feasible, key=lambda item: (item[2], -item[0]))
    logger.debug("silhouette by r: %s", silhouette_by_r)

    raw = {bus: int(lab) for bus, lab in zip(profile.bus_ids, best_labels)}
    repaired_labels, fragments = repair_connectivity(raw, snapshot.case)
    labels = _number_regions(repaired_labels)
    r = len(set(labels.values()))
    if fragments:
        logger.warning("connectivity repair moved %d fragment(s); %d regions remain", len(fragments), r)
    logger.info("partition: k=%d, r=%d, silhouette=%.4f", embedding.k, r, best_score)

    return PartitionResult(
        labels=labels,
        r=r,
        selected_r=best_r,
        silhouette=best_score,
        k=embedding.k,
        mode=embedding.mode,
        seed=seed,
        silhouette_by_r=silhouette_by_r,
        eigengaps=embedding.eigengaps,
        magnitudes=embedding.magnitudes,
        repaired_fragments=fragments,
    )
