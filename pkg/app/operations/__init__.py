# app/operations/__init__.py
"""
Dense kernels the analytics are built on.

- kron_reduce(B, keep): Schur complement onto the kept nodes
- eig_sym_pencil(L, N): symmetric-definite pencil with diagonal N
- eig_qep(N, R, L): quadratic eigenproblem via companion linearization
- kmeans(points, r, seed): deterministic k-means++ / Lloyd
- silhouette(points, labels): mean silhouette coefficient
"""

from .linalg import eig_qep, eig_sym_pencil, kron_reduce, qep_residual
from .clustering import kmeans, silhouette

__all__ = [
    'eig_qep',
    'eig_sym_pencil',
    'kron_reduce',
    'qep_residual',
    'kmeans',
    'silhouette',
]
