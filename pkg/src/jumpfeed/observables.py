"""Entanglement and bookkeeping measures: Wootters concurrence, populations,
partial trace onto the qubit pair, and dark/light segmentation of jump
records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import asmatrix, dag
from .model import BELL_ANTISYM, BELL_SYM
from .states import HilbertLayout, QuantumState, QUBIT_PAIR

__all__ = [
    "concurrence",
    "concurrence_pure",
    "concurrence_series",
    "partial_trace_to_qubits",
    "populations",
    "segment_periods",
    "PeriodSegmentation",
]

_SY = np.array([[0, -1j], [1j, 0]])
_SYSY = np.kron(_SY, _SY)


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    C = max(0, l1 - l2 - l3 - l4) with l_i the decreasing square roots of
    the eigenvalues of rho (sy x sy) rho* (sy x sy).  The l_i are computed
    as singular values of sqrt(rhot) sqrt(rho), which stays accurate to
    machine precision for rank-deficient states; both the non-Hermitian
    eigenvalue route and a Hermitian congruence lose ~sqrt(eps) there by
    taking square roots of eigenvalues that should vanish.
    """
    if isinstance(rho, QuantumState):
        rho = rho.density()
    rho = asmatrix(rho)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a 4x4 two-qubit density matrix")
    rhot = _SYSY @ rho.conj() @ _SYSY
    lams = np.linalg.svd(_psd_sqrt(rhot) @ _psd_sqrt(rho), compute_uv=False)
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + dag(a)) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dag(v)


def concurrence_pure(psi: np.ndarray) -> float:
    """Concurrence of a pure two-qubit state: 2|psi_00 psi_11 - psi_01 psi_10|."""
    psi = np.asarray(psi).reshape(4)
    return float(2.0 * abs(psi[0] * psi[3] - psi[1] * psi[2]))


def partial_trace_to_qubits(state: QuantumState) -> tuple[QuantumState, float]:
    """Reduce a full-model (tier A) state to the two-qubit block.

    Traces out the cavity, projects each atom onto span{|0>, |1>},
    renormalizes, and returns the discarded weight (upper-level plus
    leakage population) alongside.
    """
    dims = state.layout.dims
    if len(dims) != 3 or dims[0] != 3 or dims[1] != 3:
        raise ValueError(f"expected a (3, 3, n_cav) layout, got {dims}")
    n_cav = dims[2]
    rho = state.density().reshape(3, 3, n_cav, 3, 3, n_cav)
    atoms = np.trace(rho, axis1=2, axis2=5)  # (3, 3, 3, 3)
    block = atoms[:2, :2, :2, :2].reshape(4, 4)
    kept = float(np.trace(block).real)
    if kept <= 0.0:
        raise ValueError("no population left in the qubit block")
    reduced = np.ascontiguousarray(block) / kept
    reduced = (reduced + dag(reduced)) / 2
    return QuantumState.from_density(reduced, QUBIT_PAIR), 1.0 - kept


def concurrence_series(states: np.ndarray, kind: str,
                       layout: HilbertLayout) -> tuple[np.ndarray, np.ndarray]:
    """Concurrence and discarded weight for a stack of recorded states.

    ``states`` is (n, d) for vectors or (n, d, d) for densities.  For the
    full-model layout each state is first reduced with
    :func:`partial_trace_to_qubits` (the discarded weight is zero for
    two-qubit layouts).
    """
    n = states.shape[0]
    conc = np.empty(n)
    discarded = np.zeros(n)
    if layout.dims == (2, 2):
        if kind == "vector":
            conc[:] = 2.0 * np.abs(states[:, 0] * states[:, 3]
                                   - states[:, 1] * states[:, 2])
        else:
            for i in range(n):
                conc[i] = concurrence(states[i])
        return conc, discarded
    for i in range(n):
        qs = (QuantumState.from_ket(states[i], layout) if kind == "vector"
              else QuantumState.from_density(states[i], layout))
        reduced, disc = partial_trace_to_qubits(qs)
        conc[i] = concurrence(reduced)
        discarded[i] = disc
    return conc, discarded


def populations(rho4: np.ndarray) -> dict[str, float]:
    """Populations of |00>, |s01>, |a01>, |11> for a two-qubit density matrix."""
    rho4 = asmatrix(rho4)
    return {
        "population_00": float(rho4[0, 0].real),
        "population_a01": float((BELL_ANTISYM.conj() @ rho4 @ BELL_ANTISYM).real),
        "population_s01": float((BELL_SYM.conj() @ rho4 @ BELL_SYM).real),
        "population_11": float(rho4[3, 3].real),
    }


@dataclass
class PeriodSegmentation:
    """Dark/light partition of [0, t_final] based on cavity-click gaps."""

    dark_intervals: list[tuple[float, float]]
    light_intervals: list[tuple[float, float]]
    threshold_gap: float

    @property
    def dark_fraction(self) -> float:
        total = sum(e - s for s, e in self.dark_intervals) + \
            sum(e - s for s, e in self.light_intervals)
        if total == 0:
            return 0.0
        return sum(e - s for s, e in self.dark_intervals) / total

    def mean_dark_duration(self) -> float:
        if not self.dark_intervals:
            return 0.0
        return float(np.mean([e - s for s, e in self.dark_intervals]))

    def mean_light_duration(self) -> float:
        if not self.light_intervals:
            return 0.0
        return float(np.mean([e - s for s, e in self.light_intervals]))


def _auto_threshold(gaps: np.ndarray) -> float:
    # 5 x the mean inter-click time of the light state; the light mean is
    # found by a short fixed-point iteration that strips out the long
    # (dark) gaps dominating the raw mean
    mean = float(np.mean(gaps))
    for _ in range(20):
        thr = 5.0 * mean
        light = gaps[gaps < thr]
        if light.size == 0:
            break
        new_mean = float(np.mean(light))
        if abs(new_mean - mean) <= 1e-12 * max(1.0, mean):
            mean = new_mean
            break
        mean = new_mean
    return 5.0 * mean


def segment_periods(record, threshold_gap: float | None = None) -> PeriodSegmentation:
    """Split a trajectory record into dark and light periods.

    Maximal cavity-click-free gaps of at least ``threshold_gap`` become dark
    intervals; the rest is light.  When ``threshold_gap`` is None it defaults
    to five mean inter-click times of the light state, estimated per record.
    """
    t_final = float(record.times[-1])
    clicks = np.asarray(sorted(t for t, label in record.jumps
                               if label.startswith("cavity")))
    if clicks.size == 0:
        return PeriodSegmentation([(0.0, t_final)], [],
                                  threshold_gap if threshold_gap is not None else math.inf)
    edges = np.concatenate([[0.0], clicks, [t_final]])
    gaps = np.diff(edges)
    if threshold_gap is None:
        threshold_gap = _auto_threshold(gaps)
    dark, light = [], []
    light_start = None
    for start, gap in zip(edges[:-1], gaps):
        end = start + gap
        if gap >= threshold_gap:
            if light_start is not None:
                light.append((light_start, start))
                light_start = None
            dark.append((start, end))
        elif light_start is None:
            light_start = start
    if light_start is not None:
        light.append((light_start, t_final))
    return PeriodSegmentation(dark, light, float(threshold_gap))
