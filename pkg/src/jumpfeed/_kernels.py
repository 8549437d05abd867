"""Numba inner loops for the integrators and trajectory engines.

These kernels are private: the public modules validate inputs, precompute
operator products and decode event buffers.  All matrices arrive as
C-contiguous complex128 arrays; matrix products use explicit loops, which
beat BLAS dispatch at the 4x4..36x36 sizes used here.

RNG: a splitmix64 sequence seeded per trajectory (see :mod:`jumpfeed.rng`),
uniforms from the top 53 bits, normals via Box-Muller.  No global state, so
kernels are safe to run concurrently (``nogil=True``).
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * np.pi

# status codes shared with the Python wrappers
OK = 0
TRACE_DRIFT = 1
EVENT_OVERFLOW = 2
PROB_OVERFLOW = 3


@njit(cache=True, inline="always")
def _next_u64(st):
    st[0] = st[0] + _GOLDEN
    z = st[0]
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _uniform(st):
    return float(_next_u64(st) >> np.uint64(11)) * _INV53


@njit(cache=True, inline="always")
def _normal(st):
    u1 = _uniform(st) + 1e-300
    u2 = _uniform(st)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2)


@njit(cache=True, inline="always")
def _mm(a, b, out):
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for k in range(d):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@njit(cache=True, inline="always")
def _mm_dag_right(a, b, out):
    # out = a @ b^dag
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0 + 0.0j
            for k in range(d):
                acc += a[i, k] * np.conj(b[j, k])
            out[i, j] = acc


@njit(cache=True, inline="always")
def _mv(a, x, out):
    d = a.shape[0]
    for i in range(d):
        acc = 0.0 + 0.0j
        for k in range(d):
            acc += a[i, k] * x[k]
        out[i] = acc


@njit(cache=True, inline="always")
def _norm2(x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i].real * x[i].real + x[i].imag * x[i].imag
    return acc


@njit(cache=True, inline="always")
def _trace_re(a):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i, i].real
    return acc


@njit(cache=True)
def _expm_small(a, out, term, tmp):
    """Taylor-series exponential; valid for ||a|| << 1 (step generators)."""
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            ident = 1.0 + 0.0j if i == j else 0.0 + 0.0j
            out[i, j] = ident
            term[i, j] = ident
    for n in range(1, 25):
        _mm(term, a, tmp)
        inv = 1.0 / n
        biggest = 0.0
        for i in range(d):
            for j in range(d):
                term[i, j] = tmp[i, j] * inv
                out[i, j] += term[i, j]
                mag = abs(term[i, j])
                if mag > biggest:
                    biggest = mag
        if biggest < 1e-20:
            break


@njit(cache=True, inline="always")
def _lindblad_rhs(m, md, cs, rho, out, t1, t2):
    """out = m@rho + rho@md + sum_k c_k rho c_k^dag (linear in rho)."""
    d = rho.shape[0]
    _mm(m, rho, t1)
    _mm(rho, md, t2)
    for i in range(d):
        for j in range(d):
            out[i, j] = t1[i, j] + t2[i, j]
    for k in range(cs.shape[0]):
        _mm(cs[k], rho, t1)
        _mm_dag_right(t1, cs[k], t2)
        for i in range(d):
            for j in range(d):
                out[i, j] += t2[i, j]


@njit(cache=True, inline="always")
def _rk4_step(m, md, cs, rho, dt, k1, k2, k3, k4, stage, t1, t2):
    d = rho.shape[0]
    _lindblad_rhs(m, md, cs, rho, k1, t1, t2)
    for i in range(d):
        for j in range(d):
            stage[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
    _lindblad_rhs(m, md, cs, stage, k2, t1, t2)
    for i in range(d):
        for j in range(d):
            stage[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
    _lindblad_rhs(m, md, cs, stage, k3, t1, t2)
    for i in range(d):
        for j in range(d):
            stage[i, j] = rho[i, j] + dt * k3[i, j]
    _lindblad_rhs(m, md, cs, stage, k4, t1, t2)
    for i in range(d):
        for j in range(d):
            rho[i, j] += dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])


@njit(cache=True, nogil=True)
def rk4_me_kernel(rho0, m, cs, dt, n_steps, rec_steps, out_states, step_drift_tol):
    """Fixed-step RK4 Lindblad integration; states stored at rec_steps."""
    d = rho0.shape[0]
    rho = rho0.copy()
    md = np.conj(m).T.copy()
    k1 = np.empty((d, d), np.complex128)
    k2 = np.empty((d, d), np.complex128)
    k3 = np.empty((d, d), np.complex128)
    k4 = np.empty((d, d), np.complex128)
    stage = np.empty((d, d), np.complex128)
    t1 = np.empty((d, d), np.complex128)
    t2 = np.empty((d, d), np.complex128)

    out_states[0] = rho
    ri = 1
    n_rec = rec_steps.shape[0]
    for s in range(1, n_steps + 1):
        tr_before = _trace_re(rho)
        _rk4_step(m, md, cs, rho, dt, k1, k2, k3, k4, stage, t1, t2)
        tr = _trace_re(rho)
        if abs(tr - tr_before) > step_drift_tol:
            return TRACE_DRIFT
        if abs(tr - 1.0) > 1e-10:
            inv = 1.0 / tr
            for i in range(d):
                for j in range(d):
                    rho[i, j] *= inv
        if ri < n_rec and s == rec_steps[ri]:
            out_states[ri] = rho
            ri += 1
    return OK


@njit(cache=True, nogil=True)
def pure_jump_kernel(psi0, prop0, cs, dt, n_steps, rec_steps, seed,
                     n_jit, jit_slot, jit_b1, jit_b2, jit_pref,
                     h, static_cc, q11, q12, q22,
                     gmax, sigma, center_phase, resample_every,
                     out_states, ev_steps, ev_chan):
    """First-order quantum-jump unraveling of a pure state.

    Per step one uniform draw decides between a jump through channel k
    (probability dt*||c_k psi||^2) and no-jump evolution under the exact
    exp(-i H_eff dt) propagator.  ``n_jit`` channels (slots ``jit_slot``,
    rebuilt as pref*(g1*b1 + g2*b2)) follow the position jitter: fresh
    Gaussian atom positions are sampled every ``resample_every`` steps.
    ``static_cc`` holds sum c^dag c over the non-jittered channels only.
    """
    d = psi0.shape[0]
    n_ch = cs.shape[0]
    psi = psi0.copy()
    channels = cs.copy()
    prop = prop0.copy()
    st = np.empty(1, np.uint64)
    st[0] = seed

    phi = np.empty((n_ch, d), np.complex128)
    probs = np.empty(n_ch, np.float64)
    tmp_v = np.empty(d, np.complex128)
    a_mat = np.empty((d, d), np.complex128)
    e1 = np.empty((d, d), np.complex128)
    e2 = np.empty((d, d), np.complex128)
    p2 = 0.0
    for e in range(n_jit):
        p2 += jit_pref[e] * jit_pref[e]

    out_states[0] = psi
    ri = 1
    n_rec = rec_steps.shape[0]
    n_ev = 0
    cap = ev_steps.shape[0]

    for s in range(1, n_steps + 1):
        if n_jit > 0 and ((s - 1) % resample_every == 0):
            g1 = gmax * np.cos(center_phase + TWO_PI * sigma * _normal(st))
            g2 = gmax * np.cos(center_phase + TWO_PI * sigma * _normal(st))
            for e in range(n_jit):
                slot = jit_slot[e]
                for i in range(d):
                    for j in range(d):
                        channels[slot, i, j] = jit_pref[e] * (
                            g1 * jit_b1[e, i, j] + g2 * jit_b2[e, i, j])
            for i in range(d):
                for j in range(d):
                    cc = p2 * (g1 * g1 * q11[i, j] + g1 * g2 * q12[i, j]
                               + g2 * g2 * q22[i, j])
                    a_mat[i, j] = -1j * dt * h[i, j] - 0.5 * dt * (static_cc[i, j] + cc)
            _expm_small(a_mat, prop, e1, e2)

        p_tot = 0.0
        for k in range(n_ch):
            _mv(channels[k], psi, phi[k])
            probs[k] = dt * _norm2(phi[k])
            p_tot += probs[k]
        if p_tot >= 1.0:
            return PROB_OVERFLOW, n_ev
        u = _uniform(st)
        if u < p_tot:
            acc = 0.0
            chosen = n_ch - 1
            for k in range(n_ch):
                acc += probs[k]
                if u < acc:
                    chosen = k
                    break
            inv = 1.0 / np.sqrt(_norm2(phi[chosen]))
            for i in range(d):
                psi[i] = phi[chosen][i] * inv
            if n_ev >= cap:
                return EVENT_OVERFLOW, n_ev
            ev_steps[n_ev] = s
            ev_chan[n_ev] = chosen
            n_ev += 1
        else:
            _mv(prop, psi, tmp_v)
            inv = 1.0 / np.sqrt(_norm2(tmp_v))
            for i in range(d):
                psi[i] = tmp_v[i] * inv
        if ri < n_rec and s == rec_steps[ri]:
            out_states[ri] = psi
            ri += 1
    return OK, n_ev


@njit(cache=True, nogil=True)
def density_jump_kernel(rho0, h, cond, uncond, dt, n_steps, rec_steps, seed,
                        n_jit, jit_array, jit_slot, jit_b1, jit_b2, jit_pref,
                        q11, q12, q22, static_cc,
                        gmax, sigma, center_phase, resample_every,
                        out_states, ev_steps, ev_chan):
    """Partially conditioned density-matrix trajectory.

    Unconditioned channels enter the deterministic drift; conditioned
    channels fire stochastic jumps rho -> c rho c^dag / tr with probability
    dt*tr(c rho c^dag).  The smooth no-click completion is integrated with
    RK4 and renormalized every step.  ``n_jit`` jittered channels (array 0 =
    ``cond``, array 1 = ``uncond``; rebuilt as pref*(g1*b1 + g2*b2)) are
    resampled every ``resample_every`` steps; ``static_cc`` holds
    sum c^dag c over the non-jittered channels only.
    """
    d = rho0.shape[0]
    n_c = cond.shape[0]
    rho = rho0.copy()
    cnd = cond.copy()
    unc = uncond.copy()
    st = np.empty(1, np.uint64)
    st[0] = seed

    # drift generator pieces: m = -i h - 0.5 * sum_all c^dag c
    m = np.empty((d, d), np.complex128)
    md = np.empty((d, d), np.complex128)
    k1 = np.empty((d, d), np.complex128)
    k2 = np.empty((d, d), np.complex128)
    k3 = np.empty((d, d), np.complex128)
    k4 = np.empty((d, d), np.complex128)
    stage = np.empty((d, d), np.complex128)
    t1 = np.empty((d, d), np.complex128)
    t2 = np.empty((d, d), np.complex128)
    probs = np.empty(max(n_c, 1), np.float64)

    # without jitter the generator is fixed; with jitter the first resample
    # (step 1) fills m/md before they are used
    p2 = 0.0
    for e in range(n_jit):
        p2 += jit_pref[e] * jit_pref[e]
    for i in range(d):
        for j in range(d):
            m[i, j] = -1j * h[i, j] - 0.5 * static_cc[i, j]
            md[j, i] = np.conj(m[i, j])

    out_states[0] = rho
    ri = 1
    n_rec = rec_steps.shape[0]
    n_ev = 0
    cap = ev_steps.shape[0]

    for s in range(1, n_steps + 1):
        if n_jit > 0 and ((s - 1) % resample_every == 0):
            g1 = gmax * np.cos(center_phase + TWO_PI * sigma * _normal(st))
            g2 = gmax * np.cos(center_phase + TWO_PI * sigma * _normal(st))
            for e in range(n_jit):
                slot = jit_slot[e]
                for i in range(d):
                    for j in range(d):
                        val = jit_pref[e] * (g1 * jit_b1[e, i, j] + g2 * jit_b2[e, i, j])
                        if jit_array[e] == 0:
                            cnd[slot, i, j] = val
                        else:
                            unc[slot, i, j] = val
            for i in range(d):
                for j in range(d):
                    cc = p2 * (g1 * g1 * q11[i, j] + g1 * g2 * q12[i, j]
                               + g2 * g2 * q22[i, j])
                    m[i, j] = -1j * h[i, j] - 0.5 * (static_cc[i, j] + cc)
            for i in range(d):
                for j in range(d):
                    md[i, j] = np.conj(m[j, i])

        # conditioned jump probabilities p_k = dt * tr(c rho c^dag)
        p_tot = 0.0
        for k in range(n_c):
            _mm(cnd[k], rho, t1)
            acc = 0.0
            for i in range(d):
                for j in range(d):
                    acc += (t1[i, j] * np.conj(cnd[k, i, j])).real
            probs[k] = dt * acc
            p_tot += probs[k]
        if p_tot >= 1.0:
            return PROB_OVERFLOW, n_ev
        u = _uniform(st)
        if n_c > 0 and u < p_tot:
            acc = 0.0
            chosen = n_c - 1
            for k in range(n_c):
                acc += probs[k]
                if u < acc:
                    chosen = k
                    break
            _mm(cnd[chosen], rho, t1)
            _mm_dag_right(t1, cnd[chosen], t2)
            tr = _trace_re(t2)
            inv = 1.0 / tr
            for i in range(d):
                for j in range(d):
                    rho[i, j] = t2[i, j] * inv
            if n_ev >= cap:
                return EVENT_OVERFLOW, n_ev
            ev_steps[n_ev] = s
            ev_chan[n_ev] = chosen
            n_ev += 1
        else:
            _rk4_step(m, md, unc, rho, dt, k1, k2, k3, k4, stage, t1, t2)
            tr = _trace_re(rho)
            inv = 1.0 / tr
            for i in range(d):
                for j in range(d):
                    rho[i, j] *= inv
        if (s & 63) == 0:
            for i in range(d):
                for j in range(i, d):
                    avg = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                    rho[i, j] = avg
                    rho[j, i] = np.conj(avg)
        if ri < n_rec and s == rec_steps[ri]:
            out_states[ri] = rho
            ri += 1
    return OK, n_ev
