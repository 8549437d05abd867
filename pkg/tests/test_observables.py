import math

import numpy as np
import pytest

from jumpfeed.model import BELL_ANTISYM, BELL_SYM
from jumpfeed.observables import (PeriodSegmentation, concurrence,
                                  concurrence_pure, concurrence_series,
                                  partial_trace_to_qubits, populations,
                                  segment_periods)
from jumpfeed.states import HilbertLayout, QuantumState, QUBIT_PAIR


def werner(p: float) -> np.ndarray:
    bell = np.outer(BELL_ANTISYM, BELL_ANTISYM.conj())
    return p * bell + (1 - p) * np.eye(4) / 4


def test_werner_closed_form():
    for p in (0.0, 0.3, 0.5, 0.8, 1.0):
        expected = max(0.0, (3 * p - 1) / 2)
        assert abs(concurrence(werner(p)) - expected) < 1e-10


def test_bell_states_maximal():
    assert abs(concurrence_pure(BELL_SYM) - 1.0) < 1e-12
    assert abs(concurrence_pure(BELL_ANTISYM) - 1.0) < 1e-12
    assert concurrence_pure(np.array([1, 0, 0, 0])) == 0.0


def test_concurrence_local_unitary_invariance():
    rng = np.random.default_rng(3)
    rho = werner(0.7)
    for _ in range(5):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        ua, _ = np.linalg.qr(a)
        ub, _ = np.linalg.qr(b)
        u = np.kron(ua, ub)
        assert abs(concurrence(u @ rho @ u.conj().T) - concurrence(rho)) < 1e-9


def test_concurrence_convexity():
    rho1 = werner(1.0)
    rho2 = np.eye(4, dtype=complex) / 4
    mix = 0.5 * rho1 + 0.5 * rho2
    assert concurrence(mix) <= 0.5 * concurrence(rho1) + 0.5 * concurrence(rho2) + 1e-12


def test_concurrence_rejects_wrong_shape():
    with pytest.raises(ValueError):
        concurrence(np.eye(3))


def test_partial_trace_to_qubits():
    layout = HilbertLayout((3, 3, 2))
    psi = np.zeros(18, complex)
    # (|01> - |10>)/sqrt(2) with cavity vacuum: indices 1*6+0*2, 0*6+1*2
    psi[0 * 6 + 1 * 2 + 0] = 1 / math.sqrt(2)
    psi[1 * 6 + 0 * 2 + 0] = -1 / math.sqrt(2)
    qs = QuantumState.from_ket(psi, layout)
    reduced, discarded = partial_trace_to_qubits(qs)
    assert discarded < 1e-12
    assert abs(concurrence(reduced) - 1.0) < 1e-10


def test_partial_trace_reports_discarded_weight():
    layout = HilbertLayout((3, 3, 2))
    psi = np.zeros(18, complex)
    psi[0] = math.sqrt(0.9)        # |00>, vacuum
    psi[2 * 6 + 0 * 2 + 0] = math.sqrt(0.1)  # atom 1 in upper level
    qs = QuantumState.from_ket(psi, layout)
    reduced, discarded = partial_trace_to_qubits(qs)
    assert abs(discarded - 0.1) < 1e-12
    assert abs(np.trace(reduced.data) - 1.0) < 1e-12


def test_populations_complete_for_bell_mixture():
    rho = 0.25 * np.outer(BELL_SYM, BELL_SYM.conj()) \
        + 0.25 * np.outer(BELL_ANTISYM, BELL_ANTISYM.conj()) \
        + 0.25 * np.diag([1, 0, 0, 0]) + 0.25 * np.diag([0, 0, 0, 1])
    p = populations(rho.astype(complex))
    assert abs(p["population_00"] - 0.25) < 1e-12
    assert abs(p["population_s01"] - 0.25) < 1e-12
    assert abs(p["population_a01"] - 0.25) < 1e-12
    assert abs(p["population_11"] - 0.25) < 1e-12


def test_concurrence_series_vector_fast_path():
    states = np.stack([BELL_SYM, np.array([1, 0, 0, 0], complex)])
    conc, disc = concurrence_series(states, "vector", QUBIT_PAIR)
    assert np.allclose(conc, [1.0, 0.0], atol=1e-12)
    assert np.all(disc == 0.0)


class FakeRecord:
    def __init__(self, times, jumps):
        self.times = np.asarray(times, float)
        self.jumps = jumps


def test_segment_no_clicks_is_all_dark():
    rec = FakeRecord([0.0, 50.0, 100.0], [])
    seg = segment_periods(rec)
    assert seg.dark_intervals == [(0.0, 100.0)]
    assert seg.light_intervals == []
    assert seg.dark_fraction == 1.0


def test_segment_explicit_threshold():
    clicks = [(t, "cavity-detected") for t in
              [1.0, 2.0, 3.0, 4.0, 54.0, 55.0, 56.0]]
    rec = FakeRecord([0.0, 100.0], clicks)
    seg = segment_periods(rec, threshold_gap=20.0)
    assert len(seg.dark_intervals) == 2  # gap 4..54 and tail 56..100
    assert (4.0, 54.0) in seg.dark_intervals
    dark = sum(e - s for s, e in seg.dark_intervals)
    assert abs(seg.dark_fraction - dark / 100.0) < 1e-12


def test_segment_ignores_non_cavity_jumps():
    clicks = [(50.0, "R_{0,a}")]
    rec = FakeRecord([0.0, 100.0], clicks)
    seg = segment_periods(rec, threshold_gap=10.0)
    assert seg.dark_fraction == 1.0


def test_segment_auto_threshold_bimodal():
    rng = np.random.default_rng(4)
    t, clicks = 0.0, []
    for _ in range(30):            # light burst then long dark gap
        for _ in range(20):
            t += rng.exponential(1.0)
            clicks.append((t, "cavity-detected"))
        t += 200.0
    rec = FakeRecord([0.0, t + 1.0], clicks)
    seg = segment_periods(rec)
    assert 3.0 < seg.threshold_gap < 100.0
    assert 0.7 < seg.dark_fraction < 0.95
    assert seg.mean_dark_duration() > seg.mean_light_duration()


def test_period_dataclass_helpers():
    seg = PeriodSegmentation([(0.0, 10.0)], [(10.0, 30.0)], 5.0)
    assert abs(seg.dark_fraction - 1 / 3) < 1e-12
    assert seg.mean_dark_duration() == 10.0
    assert seg.mean_light_duration() == 20.0
