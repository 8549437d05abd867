"""Dense complex linear algebra used by every other module.

Everything here works on plain numpy ``complex128`` arrays in row-major
layout.  The tensor-factor order is fixed globally as
(atom 1) x (atom 2) x (cavity); see :mod:`jumpfeed.model` for the basis
bookkeeping that relies on it.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "asmatrix",
    "dag",
    "kron",
    "expm",
    "eig_hermitian",
    "is_hermitian",
    "hermiticity_defect",
    "trace_distance",
]


def asmatrix(m) -> np.ndarray:
    """Coerce input to a complex128 ndarray."""
    return np.asarray(m, dtype=np.complex128)


def dag(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conjugate(np.transpose(m))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; dimensions multiply."""
    return np.kron(asmatrix(a), asmatrix(b))


def expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential of a square matrix (scaling-and-squaring)."""
    m = asmatrix(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {m.shape}")
    return scipy.linalg.expm(m)


def hermiticity_defect(m: np.ndarray) -> float:
    """Max-entry distance from the Hermitian cone, ||M - M^dag||_max."""
    m = asmatrix(m)
    return float(np.max(np.abs(m - dag(m)))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    return hermiticity_defect(m) < tol


def eig_hermitian(m: np.ndarray, tol: float = 1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with real eigenvalues sorted in
    descending order and eigenvectors as the matching columns.  Raises
    ``ValueError`` if the input is non-Hermitian beyond ``tol``.
    """
    m = asmatrix(m)
    defect = hermiticity_defect(m)
    if defect >= tol:
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e} >= {tol:.3e})")
    w, v = np.linalg.eigh((m + dag(m)) / 2.0)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance (1/2)||a - b||_1 between two Hermitian matrices."""
    diff = asmatrix(a) - asmatrix(b)
    diff = (diff + dag(diff)) / 2.0
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
