"""Two Raman atoms in a lossy cavity under jump-based feedback: model
builders, master-equation integration, quantum-jump trajectory ensembles and
entanglement observables."""

from .states import HilbertLayout, QuantumState, QUBIT_PAIR
from .model import (ModelSpec, ModelInstance, JumpChannel, EffectiveRates,
                    build_full, build_reduced, build_jitter_averaged,
                    split_cavity,
                    stark_shift_delta, effective_rates, dark_time,
                    delocalized_cavity_operator,
                    CAVITY_DETECTED, CAVITY_UNDETECTED, R_LABELS,
                    BELL_SYM, BELL_ANTISYM)
from .lindblad import (lindblad_rhs, liouvillian, integrate, evolve_expm,
                       steady_state, max_rate, MESolution)
from .trajectory import (JitterConfig, TrajectoryRecord, EnsembleResult,
                         run_trajectory, run_partial, run_inefficient,
                         run_ensemble, ensemble_average, sample_frozen_clicks,
                         resolve_threads)
from .observables import (concurrence, concurrence_pure, concurrence_series,
                          partial_trace_to_qubits, populations,
                          segment_periods, PeriodSegmentation)
from .rng import stream_seed, mix64

__version__ = "1.0.0"

__all__ = [
    "HilbertLayout", "QuantumState", "QUBIT_PAIR",
    "ModelSpec", "ModelInstance", "JumpChannel", "EffectiveRates",
    "build_full", "build_reduced", "build_jitter_averaged", "split_cavity",
    "stark_shift_delta", "effective_rates", "dark_time",
    "delocalized_cavity_operator",
    "CAVITY_DETECTED", "CAVITY_UNDETECTED", "R_LABELS",
    "BELL_SYM", "BELL_ANTISYM",
    "lindblad_rhs", "liouvillian", "integrate", "evolve_expm",
    "steady_state", "max_rate", "MESolution",
    "JitterConfig", "TrajectoryRecord", "EnsembleResult",
    "run_trajectory", "run_partial", "run_inefficient",
    "run_ensemble", "ensemble_average", "sample_frozen_clicks",
    "resolve_threads",
    "concurrence", "concurrence_pure", "concurrence_series",
    "partial_trace_to_qubits", "populations",
    "segment_periods", "PeriodSegmentation",
    "stream_seed", "mix64",
    "__version__",
]
