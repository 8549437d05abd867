"""Quantum state carriers: pure vectors for trajectories, density matrices
for master-equation runs, each tagged with the Hilbert-space layout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import asmatrix, dag, hermiticity_defect

__all__ = ["HilbertLayout", "QuantumState", "QUBIT_PAIR"]


@dataclass(frozen=True)
class HilbertLayout:
    """Tensor-factor dimensions, in the global order atom1 x atom2 [x cavity]."""

    dims: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))


QUBIT_PAIR = HilbertLayout((2, 2))


@dataclass
class QuantumState:
    """Either a normalized state vector or a valid density matrix."""

    kind: str  # "vector" | "density"
    data: np.ndarray
    layout: HilbertLayout

    def __post_init__(self):
        self.data = asmatrix(self.data)
        if self.kind == "vector":
            self.data = self.data.reshape(-1)
        elif self.kind != "density":
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.data.shape[0] != self.layout.size:
            raise ValueError(
                f"state dimension {self.data.shape[0]} does not match layout {self.layout.dims}"
            )

    @classmethod
    def from_ket(cls, psi, layout: HilbertLayout) -> "QuantumState":
        return cls("vector", np.asarray(psi), layout)

    @classmethod
    def from_density(cls, rho, layout: HilbertLayout) -> "QuantumState":
        return cls("density", np.asarray(rho), layout)

    @property
    def dim(self) -> int:
        return self.layout.size

    def density(self) -> np.ndarray:
        """The density matrix regardless of kind."""
        if self.kind == "vector":
            return np.outer(self.data, self.data.conj())
        return self.data

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10,
                 pos_tol: float = 1e-8, norm_tol: float = 1e-10) -> None:
        """Raise ValueError if the state violates its invariants."""
        if self.kind == "vector":
            norm = float(np.linalg.norm(self.data))
            if abs(norm - 1.0) > norm_tol:
                raise ValueError(f"state vector norm {norm} deviates from 1")
            return
        rho = self.data
        defect = hermiticity_defect(rho)
        if defect > herm_tol:
            raise ValueError(f"density matrix not Hermitian (defect {defect:.3e})")
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        min_eig = float(np.linalg.eigvalsh((rho + dag(rho)) / 2).min())
        if min_eig < -pos_tol:
            raise ValueError(f"density matrix has negative eigenvalue {min_eig:.3e}")
