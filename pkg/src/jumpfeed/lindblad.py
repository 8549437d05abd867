"""Deterministic density-matrix evolution: Lindblad right-hand side,
fixed-step RK4 integration, exact superoperator propagation, and
steady-state extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .linalg import asmatrix, dag
from .model import ModelInstance
from .states import QuantumState

__all__ = [
    "lindblad_rhs",
    "liouvillian",
    "integrate",
    "evolve_expm",
    "steady_state",
    "max_rate",
    "MESolution",
]


def _as_density(rho, dim: int) -> np.ndarray:
    if isinstance(rho, QuantumState):
        if rho.kind != "density":
            raise ValueError("expected a density-kind state")
        rho = rho.data
    rho = asmatrix(rho)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match model dim {dim}")
    return rho


def lindblad_rhs(model: ModelInstance, rho) -> np.ndarray:
    """-i[H, rho] + sum_k (c_k rho c_k^dag - {c_k^dag c_k, rho}/2)."""
    rho = _as_density(rho, model.dim)
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for ch in model.channels:
        c = ch.operator
        cd = dag(c)
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def liouvillian(model: ModelInstance) -> np.ndarray:
    """Vectorized generator L with row-major vec: vec(rhs) = L @ vec(rho)."""
    d = model.dim
    eye = np.eye(d, dtype=np.complex128)
    h = model.hamiltonian
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in model.channels:
        c = ch.operator
        cdc = dag(c) @ c
        lv += np.kron(c, c.conj()) - 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return lv


def max_rate(model: ModelInstance) -> float:
    """Largest rate in the generator: spectral norm of H and the squared
    spectral norms of the channel operators."""
    rates = [float(np.linalg.norm(model.hamiltonian, 2))]
    rates += [float(np.linalg.norm(ch.operator, 2)) ** 2 for ch in model.channels]
    return max(rates)


def _drift_generator(model: ModelInstance):
    """(m, stacked channel ops) with m = -iH - 0.5 sum c^dag c."""
    d = model.dim
    cs = np.ascontiguousarray(
        np.stack([ch.operator for ch in model.channels])
        if model.channels else np.zeros((0, d, d), np.complex128)
    )
    cc = np.zeros((d, d), np.complex128)
    for ch in model.channels:
        cc += dag(ch.operator) @ ch.operator
    m = np.ascontiguousarray(-1j * model.hamiltonian - 0.5 * cc)
    return m, cs


def _record_steps(n_steps: int, record_every: int) -> np.ndarray:
    steps = list(range(0, n_steps + 1, record_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return np.asarray(steps, dtype=np.int64)


@dataclass
class MESolution:
    """Stored density matrices on a (possibly strided) time grid."""

    times: np.ndarray
    states: np.ndarray  # (n_rec, d, d)
    model: ModelInstance

    def state(self, i: int) -> QuantumState:
        return QuantumState.from_density(self.states[i], self.model.layout)

    @property
    def final(self) -> QuantumState:
        return self.state(-1)


def integrate(model: ModelInstance, rho0, t_final: float, dt: float,
              record_every: int | None = None) -> MESolution:
    """Fixed-step RK4 integration of the master equation.

    Requires dt <= 0.01 / max_rate(model); stored states are renormalized
    to unit trace when drift exceeds 1e-10 and checked for positivity
    (violations beyond -1e-6 abort with diagnostics).
    """
    rho0 = _as_density(rho0, model.dim)
    if dt <= 0 or t_final <= 0:
        raise ValueError("t_final and dt must be positive")
    limit = 0.01 / max_rate(model)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt={dt} too large: must be <= 0.01/max_rate = {limit:.3e}")
    n_steps = max(1, int(round(t_final / dt)))
    if record_every is None:
        record_every = max(1, n_steps // 2000)
    rec_steps = _record_steps(n_steps, record_every)
    d = model.dim
    out = np.empty((len(rec_steps), d, d), np.complex128)
    m, cs = _drift_generator(model)
    status = _kernels.rk4_me_kernel(np.ascontiguousarray(rho0), m, cs, dt,
                                    n_steps, rec_steps, out, 1e-6)
    if status == _kernels.TRACE_DRIFT:
        raise RuntimeError(
            f"integration aborted: per-step trace drift exceeded 1e-6 (dt={dt} too large)"
        )
    min_eig = min(float(np.linalg.eigvalsh((s + dag(s)) / 2).min()) for s in out)
    if min_eig < -1e-6:
        raise RuntimeError(
            f"positivity violation: min eigenvalue {min_eig:.3e} < -1e-6 "
            f"(dt={dt}, t_final={t_final})"
        )
    return MESolution(times=rec_steps * dt, states=out, model=model)


def evolve_expm(model: ModelInstance, rho0, t_final: float,
                n_records: int = 200) -> MESolution:
    """Exact propagation with the superoperator exponential.

    Fast path for long-horizon curves at small dimension, where the RK4 step
    bound would force an impractical number of steps; agrees with
    :func:`integrate` to integrator accuracy.
    """
    rho0 = _as_density(rho0, model.dim)
    d = model.dim
    dt_rec = t_final / n_records
    prop = scipy.linalg.expm(liouvillian(model) * dt_rec)
    out = np.empty((n_records + 1, d, d), np.complex128)
    vec = rho0.reshape(-1).copy()
    out[0] = rho0
    for i in range(1, n_records + 1):
        vec = prop @ vec
        vec = vec / np.trace(vec.reshape(d, d)).real
        out[i] = vec.reshape(d, d)
    return MESolution(times=np.linspace(0.0, t_final, n_records + 1),
                      states=out, model=model)


def _slowest_rate(model: ModelInstance) -> float:
    rates = [float(np.linalg.norm(ch.operator, 2)) ** 2 for ch in model.channels]
    rates = [r for r in rates if r > 0]
    if not rates:
        raise ValueError("model has no dissipative channel")
    return min(rates)


def steady_state(model: ModelInstance, tol: float = 1e-8, method: str = "auto",
                 max_windows: int = 200) -> QuantumState:
    """Stationary state of the master equation.

    ``method="nullspace"`` solves the vectorized generator's null space;
    ``method="integrate"`` propagates exactly over windows T = 10/slowest_rate
    until ||rho(t+T) - rho(t)||_max < tol.  ``"auto"`` tries the null-space
    solve and falls back to integration.  Either way the result must satisfy
    ||rhs(rho_ss)||_max < 10*tol.
    """
    if not model.channels:
        raise ValueError("steady_state needs at least one channel")
    d = model.dim

    def _check(rho: np.ndarray) -> QuantumState | None:
        resid = float(np.max(np.abs(lindblad_rhs(model, rho))))
        if resid < 10 * tol:
            return QuantumState.from_density(rho, model.layout)
        return None

    last_resid = None
    if method in ("auto", "nullspace"):
        lv = liouvillian(model)
        w, v = np.linalg.eig(lv)
        rho = v[:, np.argmin(np.abs(w))].reshape(d, d)
        rho = (rho + dag(rho)) / 2
        tr = np.trace(rho).real
        if abs(tr) > 1e-14:
            rho = rho / tr
            result = _check(rho)
            if result is not None:
                return result
            last_resid = float(np.max(np.abs(lindblad_rhs(model, rho))))
        if method == "nullspace":
            raise RuntimeError(
                f"null-space steady state did not converge (residual {last_resid})"
            )

    window = 10.0 / _slowest_rate(model)
    prop = scipy.linalg.expm(liouvillian(model) * window)
    rho = np.eye(d, dtype=np.complex128) / d
    vec = rho.reshape(-1)
    for _ in range(max_windows):
        nxt = prop @ vec
        nxt = nxt / np.trace(nxt.reshape(d, d)).real
        delta = float(np.max(np.abs(nxt - vec)))
        vec = nxt
        if delta < tol:
            rho = vec.reshape(d, d)
            rho = (rho + dag(rho)) / 2
            result = _check(rho)
            if result is not None:
                return result
    resid = float(np.max(np.abs(lindblad_rhs(model, vec.reshape(d, d)))))
    raise RuntimeError(
        f"steady state did not converge after {max_windows} windows of {window:.3g}; "
        f"last residual {resid:.3e}"
    )
