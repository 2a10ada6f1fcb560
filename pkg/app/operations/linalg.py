# app/operations/linalg.py
"""
Dense linear-algebra kernels.

- kron_reduce: Schur-complement elimination of network nodes
- eig_sym_pencil: L phi = mu N phi for a diagonal positive N
- eig_qep: (lambda^2 N + lambda R + L) phi = 0 through a companion pencil

Matrices follow the "Laplacian" sign convention used throughout the package:
positive diagonal, off-diagonal entries equal to minus the branch susceptance.
"""

import logging
import warnings
from typing import List, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from app.core.config import get_settings
from app.core.errors import EigenSolverError, InvalidParameterError, SingularNetworkError
from app.schemas.analysis import EigenPair

logger = logging.getLogger(__name__)


def _square(matrix, name: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParameterError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    return arr


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    """Flip so the entry of largest magnitude is positive (first one on ties)."""
    idx = int(np.argmax(np.abs(vector)))
    pivot = vector[idx]
    if np.iscomplexobj(vector):
        return vector if pivot.real >= 0 else -vector
    return vector if pivot >= 0 else -vector


def kron_reduce(B, keep: Sequence[int]) -> np.ndarray:
    """
    Eliminate every node not in ``keep`` from a symmetric nodal matrix.

    Returns B_kk - B_ke B_ee^-1 B_ek with rows and columns in the order given
    by ``keep``. Injections at kept nodes and the kept angles satisfy the
    same linear relation in the reduced and the full system.

    Example:
    >>> kron_reduce([[2, -2, 0], [-2, 5, -3], [0, -3, 3]], [0, 2]).round(6).tolist()
    [[1.2, -1.2], [-1.2, 1.2]]
    """
    B = _square(B, "B")
    n = B.shape[0]
    keep = [int(k) for k in keep]
    if len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise InvalidParameterError(f"keep set {keep} is not a set of indices into a {n}x{n} matrix")

    kept = set(keep)
    elim = [i for i in range(n) if i not in kept]
    if not elim:
        return B[np.ix_(keep, keep)].copy()

    B_kk = B[np.ix_(keep, keep)]
    B_ke = B[np.ix_(keep, elim)]
    B_ee = B[np.ix_(elim, elim)]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            X = sla.solve(B_ee, B_ke.T, assume_a="sym")
    except (sla.LinAlgError, sla.LinAlgWarning) as exc:
        raise SingularNetworkError(
            f"eliminated block of size {len(elim)} is singular or ill-conditioned: {exc}"
        ) from exc

    reduced = B_kk - B_ke @ X
    return 0.5 * (reduced + reduced.T)


def eig_sym_pencil(L, N) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve L phi = mu N phi for symmetric PSD L and diagonal positive N.

    N may be passed as its diagonal or as a diagonal matrix. Returns ascending
    eigenvalues (tiny negatives clipped to zero) and N-orthonormal
    eigenvectors as columns, each signed so its largest entry is positive.
    """
    L = _square(L, "L")
    n_diag = np.asarray(N, dtype=float)
    if n_diag.ndim == 2:
        if n_diag.shape != L.shape or np.any(n_diag - np.diag(np.diag(n_diag))):
            raise InvalidParameterError("N must be diagonal and match L")
        n_diag = np.diag(n_diag)
    if n_diag.shape != (L.shape[0],):
        raise InvalidParameterError(f"N has {n_diag.size} entries, L is {L.shape[0]}x{L.shape[0]}")
    if not np.all(np.isfinite(n_diag)) or np.any(n_diag <= 0):
        bad = np.flatnonzero(~(n_diag > 0))
        raise InvalidParameterError(f"N must be strictly positive; nonpositive entries at {bad.tolist()}")

    scale = 1.0 / np.sqrt(n_diag)
    whitened = scale[:, None] * L * scale[None, :]
    whitened = 0.5 * (whitened + whitened.T)
    try:
        mu, U = sla.eigh(whitened)
    except sla.LinAlgError as exc:
        raise EigenSolverError(f"symmetric eigensolver failed: {exc}") from exc

    tol = get_settings().ZERO_EIG_TOL * max(1.0, float(np.max(np.abs(mu))))
    if mu[0] < -tol:
        raise EigenSolverError(f"L is not positive semidefinite w.r.t. N (mu_min = {mu[0]:.3e})")
    mu = np.where(np.abs(mu) <= tol, 0.0, mu)

    phi = scale[:, None] * U
    for i in range(phi.shape[1]):
        phi[:, i] = _fix_sign(phi[:, i])
    return mu, phi


def _qep_backward_scale(N, R, L, value: complex) -> float:
    a = abs(value)
    return (
        np.linalg.norm(N, 2) * a * a
        + np.linalg.norm(R, 2) * a
        + np.linalg.norm(L, 2)
    )


def qep_residual(N, R, L, pair: EigenPair) -> float:
    lam = pair.value
    return float(np.linalg.norm((lam * lam * N + lam * R + L) @ pair.vector))


def eig_qep(N, R, L) -> List[EigenPair]:
    """
    All 2n eigenpairs of (lambda^2 N + lambda R + L) phi = 0.

    With R = 0 and a diagonal N the problem reduces exactly to the symmetric
    pencil and the eigenvalues are +/- j sqrt(mu). Otherwise it is linearized
    as A z = lambda B z with A = [[0, I], [-L, -R]], B = [[I, 0], [0, N]].
    Eigenvectors have unit 2-norm; pairs are sorted by |lambda| and, within a
    conjugate pair, positive imaginary part first.
    """
    N = _square(N, "N")
    R = _square(R, "R")
    L = _square(L, "L")
    n = N.shape[0]
    if R.shape != (n, n) or L.shape != (n, n):
        raise InvalidParameterError(f"N, R, L must share one shape; got {N.shape}, {R.shape}, {L.shape}")
    try:
        sla.cholesky(0.5 * (N + N.T), lower=True)
    except sla.LinAlgError as exc:
        raise InvalidParameterError("N is not positive definite") from exc

    pairs: List[EigenPair] = []
    is_diag = not np.any(N - np.diag(np.diag(N)))
    if not np.any(R) and is_diag:
        mu, phi = eig_sym_pencil(L, np.diag(N))
        for i, m in enumerate(mu):
            vec = phi[:, i] / np.linalg.norm(phi[:, i])
            w = np.sqrt(m)
            pairs.append(EigenPair(value=complex(0.0, w), vector=vec.astype(complex)))
            pairs.append(EigenPair(value=complex(0.0, -w), vector=vec.astype(complex)))
    else:
        eye = np.eye(n)
        zero = np.zeros((n, n))
        A = np.block([[zero, eye], [-L, -R]])
        B = np.block([[eye, zero], [zero, N]])
        try:
            values, vectors = sla.eig(A, B)
        except sla.LinAlgError as exc:
            raise EigenSolverError(f"generalized eigensolver failed: {exc}") from exc
        if not np.all(np.isfinite(values)):
            raise EigenSolverError("companion pencil returned infinite eigenvalues")
        for i, lam in enumerate(values):
            vec = vectors[:n, i]
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise EigenSolverError(f"zero eigenvector block for lambda = {lam}")
            pairs.append(EigenPair(value=complex(lam), vector=_fix_sign(vec / norm)))

    pairs.sort(key=lambda p: (round(abs(p.value), 10), -p.value.imag, p.value.real))

    tol = get_settings().QEP_RESIDUAL_TOL
    worst = 0.0
    for pair in pairs:
        res = qep_residual(N, R, L, pair)
        scale = max(_qep_backward_scale(N, R, L, pair.value), np.finfo(float).tiny)
        worst = max(worst, res / scale)
        if res > tol * scale:
            raise EigenSolverError(f"QEP residual {res:.3e} exceeds tolerance for lambda = {pair.value}")
    logger.debug("eig_qep: n=%d, worst relative residual %.2e", n, worst)
    return pairs
