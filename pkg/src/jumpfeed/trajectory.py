"""Monte-Carlo wave-function trajectories with per-channel conditioning,
post-jump feedback, detector inefficiency and position-jitter coupling noise.

Two engines share the same stepping scheme and RNG stream: a pure-state
unraveling for fully conditioned models (:func:`run_trajectory`) and a
density-matrix trajectory where a chosen subset of channels is averaged into
a deterministic drift (:func:`run_partial`).  Trajectories are independent
work units; :func:`run_ensemble` fans them out over threads (the inner loops
release the GIL) and collects records ordered by index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import _kernels
from .linalg import dag
from .model import (CAVITY_DETECTED, CAVITY_UNDETECTED, JumpChannel,
                    ModelInstance, SIGMA1_MINUS, SIGMA2_MINUS, split_cavity)
from .observables import concurrence_series
from .rng import MASK64, stream_seed
from .states import QuantumState

__all__ = [
    "JitterConfig",
    "TrajectoryRecord",
    "EnsembleResult",
    "run_trajectory",
    "run_partial",
    "run_inefficient",
    "run_ensemble",
    "ensemble_average",
    "sample_frozen_clicks",
    "resolve_threads",
]

MAX_STEP_PROBABILITY = 0.1
_CAVITY_LABELS = (CAVITY_DETECTED, CAVITY_UNDETECTED)


@dataclass(frozen=True)
class JitterConfig:
    """Gaussian position jitter of the two atoms in the standing wave.

    Couplings are g_i = g_max * cos(2*pi*x_i/lambda) with x_i drawn
    independently per atom from Normal(0, trap_sigma*lambda), re-rolled every
    ``resample_dt`` (defaults to the step size).  When ``frozen`` is set the
    couplings are pinned at the given (g1, g2) pair instead and nothing is
    re-rolled.
    """

    trap_sigma: float
    resample_dt: float | None = None
    frozen: tuple[float, float] | None = None

    def __post_init__(self):
        if self.trap_sigma < 0:
            raise ValueError("trap_sigma must be >= 0")
        if self.resample_dt is not None and self.resample_dt <= 0:
            raise ValueError("resample_dt must be > 0")


@dataclass
class TrajectoryRecord:
    """One stochastic realization: states on a (possibly strided) time grid,
    the two-atom concurrence series and every jump tagged by channel label."""

    times: np.ndarray
    concurrence: np.ndarray
    discarded_weight: np.ndarray
    jumps: list[tuple[float, str]]
    seed: int
    states: np.ndarray  # (n_rec, d) vectors or (n_rec, d, d) densities
    kind: str  # "vector" | "density"
    model: ModelInstance

    @property
    def final_state(self) -> QuantumState:
        if self.kind == "vector":
            return QuantumState.from_ket(self.states[-1], self.model.layout)
        return QuantumState.from_density(self.states[-1], self.model.layout)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else JUMPFEED_THREADS, else CPU count."""
    if threads is not None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        return threads
    env = os.environ.get("JUMPFEED_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _record_steps(n_steps: int, record_every: int | None) -> np.ndarray:
    if record_every is None:
        record_every = max(1, n_steps // 2000)
    steps = list(range(0, n_steps + 1, record_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=np.int64)


def _steps_for(t_final: float, dt: float) -> int:
    if dt <= 0 or t_final <= 0:
        raise ValueError("t_final and dt must be positive")
    return max(1, int(round(t_final / dt)))


def _jitter_basis(ch: JumpChannel, g_max: float):
    """(pref, b1, b2) with the channel operator equal to
    pref*(g1*b1 + g2*b2) at per-atom couplings g1, g2."""
    bare = ch.bare_operator
    k = complex(bare[0, 2])
    scale = max(1.0, abs(k))
    if abs(bare[0, 1] - k) > 1e-12 * scale or abs(k.imag) > 1e-12 * scale:
        raise ValueError(
            f"channel {ch.label} is not an equal-coupling collective lowering "
            "operator; jitter and frozen couplings need that form"
        )
    pref = k.real / g_max
    if ch.feedback is None:
        return pref, SIGMA1_MINUS.copy(), SIGMA2_MINUS.copy()
    return pref, ch.feedback @ SIGMA1_MINUS, ch.feedback @ SIGMA2_MINUS


def _resolve_jitter(model: ModelInstance, jitter: JitterConfig | None):
    """Returns (model, jitter) with frozen couplings folded into the
    operators and degenerate configs reduced to None."""
    if jitter is None:
        return model, None
    if model.spec is None or model.layout.dims != (2, 2):
        raise ValueError("jitter needs a reduced-model instance built from a ModelSpec")
    if model.spec.g_max <= 0:
        raise ValueError("jitter needs g_max > 0")
    if jitter.frozen is not None:
        g1, g2 = jitter.frozen
        chans = []
        for ch in model.channels:
            if ch.label in _CAVITY_LABELS:
                pref, b1, b2 = _jitter_basis(ch, model.spec.g_max)
                chans.append(JumpChannel(pref * (g1 * b1 + g2 * b2), ch.label,
                                         feedback=ch.feedback,
                                         conditioned=ch.conditioned))
            else:
                chans.append(ch)
        return replace(model, channels=tuple(chans)), None
    if jitter.trap_sigma == 0 and model.spec.lambda_frac_center == 0:
        return model, None
    return model, jitter


def _jitter_kernel_args(model: ModelInstance, channel_sets: list[list[JumpChannel]],
                        jitter: JitterConfig | None, dt: float):
    """Kernel-side jitter table over one or two channel arrays.

    Returns (n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref, q11, q12,
    q22, static_cc_excluding_jittered, gmax, sigma, center_phase,
    resample_every, prob_bound).
    """
    d = model.dim
    entries = []
    if jitter is not None:
        for which, chans in enumerate(channel_sets):
            for slot, ch in enumerate(chans):
                if ch.label in _CAVITY_LABELS:
                    pref, b1, b2 = _jitter_basis(ch, model.spec.g_max)
                    entries.append((which, slot, b1, b2, pref))
    n_jit = len(entries)
    jittered = {(w, s) for w, s, *_ in entries}

    static_cc = np.zeros((d, d), np.complex128)
    prob_bound = 0.0
    for which, chans in enumerate(channel_sets):
        for slot, ch in enumerate(chans):
            if (which, slot) in jittered:
                continue
            static_cc += dag(ch.operator) @ ch.operator
            prob_bound += float(np.linalg.norm(ch.operator, 2)) ** 2

    if n_jit:
        gmax = model.spec.g_max
        sigma = jitter.trap_sigma
        center_phase = 2.0 * math.pi * model.spec.lambda_frac_center
        resample_dt = jitter.resample_dt if jitter.resample_dt is not None else dt
        resample_every = max(1, int(round(resample_dt / dt)))
        jit_array = np.array([w for w, *_ in entries], np.int64)
        jit_slot = np.array([s for _, s, *_ in entries], np.int64)
        jit_b1 = np.ascontiguousarray(np.stack([e[2] for e in entries]))
        jit_b2 = np.ascontiguousarray(np.stack([e[3] for e in entries]))
        jit_pref = np.array([e[4] for e in entries], np.float64)
        # worst case |g_i| = g_max on both atoms
        prob_bound += sum(4.0 * p * p * gmax * gmax for p in jit_pref)
        q11 = np.ascontiguousarray(dag(SIGMA1_MINUS) @ SIGMA1_MINUS)
        q22 = np.ascontiguousarray(dag(SIGMA2_MINUS) @ SIGMA2_MINUS)
        q12 = np.ascontiguousarray(dag(SIGMA1_MINUS) @ SIGMA2_MINUS
                                   + dag(SIGMA2_MINUS) @ SIGMA1_MINUS)
    else:
        gmax = sigma = center_phase = 0.0
        resample_every = 1
        jit_array = np.zeros(0, np.int64)
        jit_slot = np.zeros(0, np.int64)
        jit_b1 = np.zeros((0, d, d), np.complex128)
        jit_b2 = np.zeros((0, d, d), np.complex128)
        jit_pref = np.zeros(0, np.float64)
        q11 = q12 = q22 = np.zeros((d, d), np.complex128)

    return (n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref,
            q11, q12, q22, np.ascontiguousarray(static_cc),
            float(gmax), float(sigma), float(center_phase),
            resample_every, prob_bound)


def _check_step_probability(prob_bound: float, dt: float) -> None:
    if dt * prob_bound >= MAX_STEP_PROBABILITY:
        raise ValueError(
            f"step too large: dt*sum(rates) = {dt * prob_bound:.3e} must stay "
            f"below {MAX_STEP_PROBABILITY}; reduce dt to < "
            f"{MAX_STEP_PROBABILITY / prob_bound:.3e}"
        )


def _event_capacity(prob_bound: float, dt: float, n_steps: int) -> int:
    return int(3.0 * prob_bound * dt * n_steps) + 1024


def _decode_events(ev_steps, ev_chan, n_ev, dt, labels) -> list[tuple[float, str]]:
    return [(float(ev_steps[i] * dt), labels[ev_chan[i]]) for i in range(n_ev)]


def _as_vector(state, dim: int) -> np.ndarray:
    if isinstance(state, QuantumState):
        if state.kind != "vector":
            raise ValueError("expected a vector-kind state")
        state = state.data
    psi = np.ascontiguousarray(np.asarray(state, np.complex128).reshape(-1))
    if psi.shape[0] != dim:
        raise ValueError(f"state dimension {psi.shape[0]} does not match model dim {dim}")
    return psi


def _as_density(state, dim: int) -> np.ndarray:
    if isinstance(state, QuantumState):
        rho = state.density()
    else:
        arr = np.asarray(state, np.complex128)
        rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    rho = np.ascontiguousarray(rho)
    if rho.shape != (dim, dim):
        raise ValueError(f"density shape {rho.shape} does not match model dim {dim}")
    return rho


def run_trajectory(model: ModelInstance, psi0, t_final: float, dt: float,
                   seed: int, jitter: JitterConfig | None = None,
                   record_every: int | None = None) -> TrajectoryRecord:
    """First-order quantum-jump unraveling of a fully conditioned model.

    Per step, channel k fires with probability dt*||c_k psi||^2 (applying its
    feedback for free, since the operator carries it); otherwise the state
    evolves under the exact no-jump propagator exp(-i H_eff dt) and is
    renormalized.  dt must keep the summed jump probability below 0.1 for
    every reachable state; this is enforced from operator norms up front.
    """
    if any(not ch.conditioned for ch in model.channels):
        raise ValueError("run_trajectory needs every channel conditioned; "
                         "use run_partial for mixed conditioning")
    model, jitter = _resolve_jitter(model, jitter)
    psi = _as_vector(psi0, model.dim)
    n_steps = _steps_for(t_final, dt)
    rec_steps = _record_steps(n_steps, record_every)
    d = model.dim

    (n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref, q11, q12, q22,
     static_cc, gmax, sigma, center_phase, resample_every,
     prob_bound) = _jitter_kernel_args(model, [list(model.channels)], jitter, dt)
    _check_step_probability(prob_bound, dt)

    h = np.ascontiguousarray(model.hamiltonian)
    cs = np.ascontiguousarray(
        np.stack([ch.operator for ch in model.channels])
        if model.channels else np.zeros((0, d, d), np.complex128))
    cc_all = static_cc.copy()
    for k in range(cs.shape[0]):
        if n_jit and any(jit_slot[e] == k for e in range(n_jit)):
            cc_all += dag(cs[k]) @ cs[k]
    prop0 = np.ascontiguousarray(
        scipy.linalg.expm(-1j * dt * h - 0.5 * dt * (static_cc if n_jit == 0 else cc_all)))

    out = np.empty((len(rec_steps), d), np.complex128)
    cap = _event_capacity(prob_bound, dt, n_steps)
    while True:
        ev_steps = np.empty(cap, np.int64)
        ev_chan = np.empty(cap, np.int32)
        status, n_ev = _kernels.pure_jump_kernel(
            psi, prop0, cs, dt, n_steps, rec_steps, np.uint64(seed & MASK64),
            n_jit, jit_slot, jit_b1, jit_b2, jit_pref,
            h, static_cc, q11, q12, q22,
            gmax, sigma, center_phase, resample_every,
            out, ev_steps, ev_chan)
        if status != _kernels.EVENT_OVERFLOW:
            break
        cap *= 4
    if status == _kernels.PROB_OVERFLOW:
        raise RuntimeError("summed jump probability reached 1 in one step; dt too large")

    labels = model.labels()
    conc, disc = concurrence_series(out, "vector", model.layout)
    return TrajectoryRecord(
        times=rec_steps * dt, concurrence=conc, discarded_weight=disc,
        jumps=_decode_events(ev_steps, ev_chan, n_ev, dt, labels),
        seed=int(seed), states=out, kind="vector", model=model)


def run_partial(model: ModelInstance, rho0, conditioned_labels,
                t_final: float, dt: float, seed: int,
                jitter: JitterConfig | None = None,
                record_every: int | None = None) -> TrajectoryRecord:
    """Density-matrix trajectory with a chosen subset of channels conditioned.

    Unconditioned channels enter a deterministic Lindblad drift (integrated
    with RK4 and renormalized); conditioned channels fire stochastic jumps
    rho -> c rho c^dag / trace with probability dt*trace(c rho c^dag).  With
    ``conditioned_labels`` empty this degenerates to plain master-equation
    integration.
    """
    if conditioned_labels is None:
        conditioned_labels = {ch.label for ch in model.channels if ch.conditioned}
    labels = set(conditioned_labels)
    unknown = labels - set(model.labels())
    if unknown:
        raise ValueError(f"unknown channel labels: {sorted(unknown)}")
    model, jitter = _resolve_jitter(model, jitter)
    rho = _as_density(rho0, model.dim)
    n_steps = _steps_for(t_final, dt)
    rec_steps = _record_steps(n_steps, record_every)
    d = model.dim

    cond = [ch for ch in model.channels if ch.label in labels]
    uncond = [ch for ch in model.channels if ch.label not in labels]
    (n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref, q11, q12, q22,
     static_cc, gmax, sigma, center_phase, resample_every,
     prob_bound) = _jitter_kernel_args(model, [cond, uncond], jitter, dt)
    _check_step_probability(prob_bound, dt)

    h = np.ascontiguousarray(model.hamiltonian)
    cond_ops = np.ascontiguousarray(
        np.stack([ch.operator for ch in cond])
        if cond else np.zeros((0, d, d), np.complex128))
    uncond_ops = np.ascontiguousarray(
        np.stack([ch.operator for ch in uncond])
        if uncond else np.zeros((0, d, d), np.complex128))

    out = np.empty((len(rec_steps), d, d), np.complex128)
    cap = _event_capacity(prob_bound, dt, n_steps)
    while True:
        ev_steps = np.empty(cap, np.int64)
        ev_chan = np.empty(cap, np.int32)
        status, n_ev = _kernels.density_jump_kernel(
            rho, h, cond_ops, uncond_ops, dt, n_steps, rec_steps,
            np.uint64(seed & MASK64),
            n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref,
            q11, q12, q22, static_cc,
            gmax, sigma, center_phase, resample_every,
            out, ev_steps, ev_chan)
        if status != _kernels.EVENT_OVERFLOW:
            break
        cap *= 4
    if status == _kernels.PROB_OVERFLOW:
        raise RuntimeError("summed jump probability reached 1 in one step; dt too large")

    cond_labels = [ch.label for ch in cond]
    conc, disc = concurrence_series(out, "density", model.layout)
    return TrajectoryRecord(
        times=rec_steps * dt, concurrence=conc, discarded_weight=disc,
        jumps=_decode_events(ev_steps, ev_chan, n_ev, dt, cond_labels),
        seed=int(seed), states=out, kind="density", model=model)


def run_inefficient(model: ModelInstance, eta: float, rho0,
                    conditioned_labels=None, t_final: float = 0.0,
                    dt: float = 0.0, seed: int = 0,
                    jitter: JitterConfig | None = None,
                    record_every: int | None = None) -> TrajectoryRecord:
    """Trajectory with detector efficiency eta: the cavity channel is split
    into a detected part (rate factor eta, feedback kept, conditioned) and an
    undetected part (rate factor 1-eta, no feedback, unconditioned), then run
    as a partially conditioned density trajectory."""
    split = split_cavity(model, eta)
    if conditioned_labels is None:
        conditioned_labels = {ch.label for ch in split.channels
                              if ch.label != CAVITY_UNDETECTED}
    return run_partial(split, rho0, conditioned_labels, t_final, dt, seed,
                       jitter=jitter, record_every=record_every)


@dataclass
class EnsembleResult:
    """Ensemble statistics on the shared time grid.

    ``mean_concurrence`` averages per-run concurrence (the quantity plotted
    for jitter ensembles); ``concurrence_of_mean`` is the concurrence of the
    averaged state (the master-equation comparison quantity).
    """

    times: np.ndarray
    mean_states: np.ndarray  # (n_rec, d, d)
    mean_concurrence: np.ndarray
    concurrence_stderr: np.ndarray
    concurrence_of_mean: np.ndarray
    concurrence_min: np.ndarray
    concurrence_max: np.ndarray
    n_trajectories: int

    def mean_state(self, i: int, model: ModelInstance) -> QuantumState:
        return QuantumState.from_density(self.mean_states[i], model.layout)


def ensemble_average(records: list[TrajectoryRecord]) -> EnsembleResult:
    """Average a list of records sharing one time grid."""
    if not records:
        raise ValueError("need at least one record")
    times = records[0].times
    for r in records[1:]:
        if r.times.shape != times.shape or not np.array_equal(r.times, times):
            raise ValueError("records do not share a time grid")
    n = len(records)
    d = records[0].model.dim
    mean = np.zeros((len(times), d, d), np.complex128)
    for r in records:
        if r.kind == "vector":
            mean += np.einsum("ti,tj->tij", r.states, r.states.conj())
        else:
            mean += r.states
    mean /= n
    conc = np.stack([r.concurrence for r in records])
    com, _ = concurrence_series(mean, "density", records[0].model.layout)
    stderr = (conc.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else np.zeros(len(times))
    return EnsembleResult(
        times=times, mean_states=mean,
        mean_concurrence=conc.mean(axis=0),
        concurrence_stderr=stderr,
        concurrence_of_mean=com,
        concurrence_min=conc.min(axis=0),
        concurrence_max=conc.max(axis=0),
        n_trajectories=n)


def run_ensemble(model: ModelInstance, state0, n_traj: int, t_final: float,
                 dt: float, master_seed: int, conditioned_labels=None,
                 jitter: JitterConfig | None = None,
                 record_every: int | None = None,
                 threads: int | None = None) -> list[TrajectoryRecord]:
    """Run ``n_traj`` independent trajectories on a thread pool.

    Trajectory k uses the derived stream seed ``stream_seed(master_seed, k)``,
    so results are deterministic and independent of scheduling; records come
    back ordered by index.  Pure unraveling is used when ``state0`` is a
    vector and no channel set is given; otherwise the density engine runs.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    pure = (conditioned_labels is None
            and (not isinstance(state0, QuantumState) or state0.kind == "vector")
            and all(ch.conditioned for ch in model.channels))
    if pure and not isinstance(state0, QuantumState):
        arr = np.asarray(state0)
        pure = arr.ndim == 1

    def one(k: int) -> TrajectoryRecord:
        s = stream_seed(master_seed, k)
        if pure:
            return run_trajectory(model, state0, t_final, dt, s,
                                  jitter=jitter, record_every=record_every)
        return run_partial(model, state0, conditioned_labels, t_final, dt, s,
                           jitter=jitter, record_every=record_every)

    workers = min(resolve_threads(threads), n_traj)
    if workers == 1:
        return [one(k) for k in range(n_traj)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_traj)))


def sample_frozen_clicks(model: ModelInstance, state, label: str,
                         dt: float, n_clicks: int, seed: int) -> np.ndarray:
    """Inter-click gaps for a state held frozen against one channel.

    The click probability per step is p = dt*trace(c^dag c rho), constant
    because the state is re-prepared after every step; gaps are geometric
    step counts sampled by inverse CDF and returned in time units.  This is
    the estimator behind click-rate checks where back-action would otherwise
    push the state into an exact dark state.
    """
    if n_clicks < 1:
        raise ValueError("n_clicks must be >= 1")
    rho = _as_density(state, model.dim)
    c = model.channel(label).operator
    p = float(dt * np.trace(dag(c) @ c @ rho).real)
    if not 0.0 < p < 1.0:
        raise ValueError(f"per-step click probability {p} outside (0, 1); adjust dt")
    rng = np.random.default_rng(np.uint64(seed & MASK64))
    u = rng.random(n_clicks)
    gaps = np.floor(np.log1p(-u) / math.log1p(-p)) + 1.0
    return gaps * dt
