import math

import numpy as np
import pytest
import scipy.stats

from jumpfeed.lindblad import integrate
from jumpfeed.linalg import trace_distance
from jumpfeed.model import (BELL_ANTISYM, CAVITY_DETECTED, CAVITY_UNDETECTED,
                            ModelInstance, ModelSpec, build_full,
                            build_reduced, dark_time, split_cavity)
from jumpfeed.rng import stream_seed
from jumpfeed.states import QUBIT_PAIR
from jumpfeed.trajectory import (JitterConfig, ensemble_average,
                                 run_ensemble, run_inefficient, run_partial,
                                 run_trajectory, sample_frozen_clicks)

KET00 = np.array([1, 0, 0, 0], complex)


def fast_spec(**kw):
    # tight detuning so channel rates are large and runs stay short
    base = dict(delta_big=10.0, v_l=1.0, v_m=0.05, g_max=1.0, kappa=1.0,
                gamma0=0.05, gamma1=0.05)
    base.update(kw)
    return ModelSpec(**base)


def rho00():
    rho = np.zeros((4, 4), complex)
    rho[0, 0] = 1.0
    return rho


def click_counts(records, prefix="cavity"):
    return np.array([sum(1 for _, lbl in r.jumps if lbl.startswith(prefix))
                     for r in records])


def chi2_same_distribution(a, b):
    """Two-sample chi-square p-value on binned count distributions."""
    edges = np.unique(np.quantile(np.concatenate([a, b]),
                                  np.linspace(0, 1, 8)).astype(int))
    edges = np.concatenate([edges, [max(a.max(), b.max()) + 1]])
    ha = np.histogram(a, bins=edges)[0]
    hb = np.histogram(b, bins=edges)[0]
    keep = (ha + hb) > 0
    table = np.stack([ha[keep], hb[keep]])
    if table.shape[1] < 2:
        return 1.0
    return float(scipy.stats.chi2_contingency(table)[1])


def test_no_channels_constant_state():
    model = ModelInstance(hamiltonian=np.zeros((4, 4)), channels=(),
                          layout=QUBIT_PAIR, tier="B")
    rec = run_trajectory(model, BELL_ANTISYM, t_final=10.0, dt=0.1, seed=3)
    assert rec.jumps == []
    assert np.max(np.abs(rec.states - BELL_ANTISYM)) < 1e-12
    assert np.allclose(rec.concurrence, 1.0, atol=1e-9)


def test_record_invariants_and_norm():
    model = build_reduced(fast_spec())
    rec = run_trajectory(model, KET00, t_final=2000.0, dt=0.2, seed=11)
    assert np.all(np.diff(rec.times) > 0)
    assert np.all(rec.concurrence >= 0.0)
    assert np.all(rec.concurrence <= 1.0 + 1e-9)
    labels = set(model.labels())
    assert all(lbl in labels for _, lbl in rec.jumps)
    norms = np.linalg.norm(rec.states, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9
    rec.final_state.validate()


def test_determinism_bit_identical():
    model = build_reduced(fast_spec())
    r1 = run_trajectory(model, KET00, t_final=500.0, dt=0.2, seed=42)
    r2 = run_trajectory(model, KET00, t_final=500.0, dt=0.2, seed=42)
    assert np.array_equal(r1.states, r2.states)
    assert r1.jumps == r2.jumps
    r3 = run_trajectory(model, KET00, t_final=500.0, dt=0.2, seed=43)
    assert not np.array_equal(r3.states, r1.states)


def test_step_probability_rejected_at_config_time():
    model = build_reduced(fast_spec())
    with pytest.raises(ValueError, match="step too large"):
        run_trajectory(model, KET00, t_final=100.0, dt=10.0, seed=1)


def test_run_trajectory_requires_full_conditioning():
    model = split_cavity(build_reduced(fast_spec()), 0.5)
    with pytest.raises(ValueError, match="conditioned"):
        run_trajectory(model, KET00, t_final=10.0, dt=0.1, seed=1)


def test_partial_empty_set_reproduces_integrate():
    model = build_reduced(fast_spec())
    rec = run_partial(model, rho00(), set(), t_final=500.0, dt=0.2, seed=5)
    sol = integrate(model, rho00(), t_final=500.0, dt=0.2)
    assert rec.jumps == []
    assert trace_distance(rec.states[-1], sol.states[-1]) < 1e-8


def test_partial_all_conditioned_matches_pure_statistics():
    model = build_reduced(fast_spec())
    all_labels = set(model.labels())
    n = 200
    pure = [run_trajectory(model, KET00, 2000.0, 0.2, stream_seed(1, k),
                           record_every=10000) for k in range(n)]
    dens = [run_partial(model, rho00(), all_labels, 2000.0, 0.2,
                        stream_seed(2, k), record_every=10000)
            for k in range(n)]
    p = chi2_same_distribution(click_counts(pure), click_counts(dens))
    assert p > 0.01, f"chi-square p = {p}"


def test_jitter_zero_sigma_matches_frozen_distribution():
    model = build_reduced(fast_spec(), with_spont=False)
    n = 150
    tiny = [run_trajectory(model, KET00, 2000.0, 0.2, stream_seed(3, k),
                           jitter=JitterConfig(1e-7), record_every=10000)
            for k in range(n)]
    frozen = [run_trajectory(model, KET00, 2000.0, 0.2, stream_seed(4, k),
                             jitter=JitterConfig(0.0, frozen=(1.0, 1.0)),
                             record_every=10000) for k in range(n)]
    p = chi2_same_distribution(click_counts(tiny), click_counts(frozen))
    assert p > 0.01, f"chi-square p = {p}"


def test_frozen_unequal_couplings_click_rate():
    # frozen-state click rate converges to trace(c^dag c rho) (3 sigma)
    spec = fast_spec(v_m=0.0, gamma0=0.0, gamma1=0.0, feedback_angle=0.0)
    model = build_reduced(spec, with_spont=False)
    cfg = JitterConfig(0.0, frozen=(1.0, 0.9))
    from jumpfeed.trajectory import _resolve_jitter
    frozen_model, _ = _resolve_jitter(model, cfg)
    expected = dark_time(spec, 1.0, 0.9)
    gaps = sample_frozen_clicks(frozen_model, BELL_ANTISYM, CAVITY_DETECTED,
                                dt=expected / 100, n_clicks=2000, seed=9)
    stderr = gaps.std(ddof=1) / math.sqrt(len(gaps))
    assert abs(gaps.mean() - expected) < 3 * stderr


def test_run_inefficient_limits():
    model = build_reduced(fast_spec())
    full = run_inefficient(model, 1.0, rho00(), None, t_final=500.0, dt=0.2,
                           seed=17)
    direct = run_partial(model, rho00(),
                         {ch.label for ch in model.channels},
                         t_final=500.0, dt=0.2, seed=17)
    assert np.array_equal(full.states, direct.states)
    assert full.jumps == direct.jumps
    with pytest.raises(ValueError):
        run_inefficient(model, 1.5, rho00(), None, 10.0, 0.1, 1)


def test_eta_zero_never_applies_feedback():
    model = build_reduced(fast_spec())
    rec = run_inefficient(model, 0.0, rho00(), None, t_final=4000.0, dt=0.2,
                          seed=23)
    labels = {lbl for _, lbl in rec.jumps}
    assert CAVITY_DETECTED not in labels
    # without feedback the late state stays weakly entangled
    assert rec.concurrence[-1] < 0.3


def test_eta_split_channel_bookkeeping():
    model = split_cavity(build_reduced(fast_spec()), 0.5)
    rec = run_partial(model, rho00(),
                      {CAVITY_DETECTED} | set(model.labels()[2:]),
                      t_final=2000.0, dt=0.2, seed=29)
    labels = {lbl for _, lbl in rec.jumps}
    assert CAVITY_UNDETECTED not in labels


def test_ensemble_average_identity_and_errors():
    model = build_reduced(fast_spec())
    rec = run_trajectory(model, KET00, t_final=200.0, dt=0.2, seed=31)
    ens = ensemble_average([rec, rec, rec])
    assert np.allclose(ens.mean_concurrence, rec.concurrence, atol=1e-12)
    assert np.allclose(ens.concurrence_min, ens.concurrence_max, atol=1e-12)
    assert np.max(ens.concurrence_stderr) < 1e-12
    other = run_trajectory(model, KET00, t_final=100.0, dt=0.2, seed=31)
    with pytest.raises(ValueError, match="time grid"):
        ensemble_average([rec, other])
    with pytest.raises(ValueError):
        ensemble_average([])


def test_ensemble_concurrence_convexity():
    model = build_reduced(fast_spec())
    recs = run_ensemble(model, KET00, 30, t_final=2000.0, dt=0.2,
                        master_seed=37)
    ens = ensemble_average(recs)
    assert np.all(ens.concurrence_of_mean <= ens.mean_concurrence + 1e-9)
    assert np.all(ens.concurrence_min <= ens.mean_concurrence + 1e-12)
    assert np.all(ens.mean_concurrence <= ens.concurrence_max + 1e-12)


def test_run_ensemble_scheduling_independent():
    model = build_reduced(fast_spec())
    serial = run_ensemble(model, KET00, 6, 500.0, 0.2, 41, threads=1)
    pooled = run_ensemble(model, KET00, 6, 500.0, 0.2, 41, threads=3)
    for a, b in zip(serial, pooled):
        assert a.seed == b.seed
        assert np.array_equal(a.states, b.states)
        assert a.jumps == b.jumps


def test_full_model_trajectory_smoke():
    spec = fast_spec(delta_big=50.0)
    model = build_full(spec)
    psi0 = np.zeros(model.dim, complex)
    psi0[0] = 1.0
    rec = run_trajectory(model, psi0, t_final=5.0, dt=5e-4, seed=47)
    norms = np.linalg.norm(rec.states, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9
    assert np.all(rec.discarded_weight >= 0.0)
    assert np.all(rec.discarded_weight < 0.05)
