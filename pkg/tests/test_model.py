import math

import numpy as np
import pytest

from jumpfeed.linalg import dag
from jumpfeed.model import (BELL_ANTISYM, BELL_SYM, CAVITY_DETECTED,
                            CAVITY_UNDETECTED, R_LABELS, JumpChannel,
                            ModelSpec, build_full, build_jitter_averaged,
                            build_reduced, dark_time,
                            delocalized_cavity_operator, effective_rates,
                            split_cavity, stark_shift_delta)


def fig3_spec(**kw):
    base = dict(delta_big=50.0, v_l=1.0, v_m=0.05, g_max=1.0, kappa=1.0,
                gamma0=0.05, gamma1=0.05)
    base.update(kw)
    return ModelSpec(**base)


def test_spec_validation():
    with pytest.raises(ValueError):
        fig3_spec(kappa=-1.0)
    with pytest.raises(ValueError):
        fig3_spec(eta=1.5)
    with pytest.raises(ValueError):
        fig3_spec(fock_cutoff=0)


def test_stark_matched_detuning():
    spec = fig3_spec()
    assert abs(spec.delta_small_resolved - spec.v_l**2 / (4 * spec.delta_big)) < 1e-15
    assert stark_shift_delta(spec) == spec.delta_small_resolved


def test_adiabatic_flag_and_warning():
    assert fig3_spec().adiabatic_ok
    tight = fig3_spec(delta_big=5.0)
    assert not tight.adiabatic_ok
    model = build_reduced(tight)
    assert model.warnings


def test_reduced_channel_labels_and_tiers():
    c = build_reduced(fig3_spec())
    assert c.tier == "C"
    assert c.labels() == (CAVITY_DETECTED,) + R_LABELS
    b = build_reduced(fig3_spec(), with_spont=False)
    assert b.tier == "B"
    assert b.labels() == (CAVITY_DETECTED,)


def test_dark_state_annihilated_by_cavity_channel():
    model = build_reduced(fig3_spec(feedback_angle=0.0), with_spont=False)
    c = model.channel(CAVITY_DETECTED).operator
    assert np.max(np.abs(c @ BELL_ANTISYM)) == 0.0


def test_unequal_coupling_click_rate():
    # ||(1.0 s1- + 0.8 s2-)|a01>||^2 = (1.0 - 0.8)^2 / 2 = 0.02
    spec = fig3_spec()
    op = delocalized_cavity_operator(spec, 1.0, 0.8, with_feedback=False)
    pref2 = (spec.v_l / (spec.delta_big * math.sqrt(spec.kappa))) ** 2
    rate = float(np.linalg.norm(op @ BELL_ANTISYM) ** 2)
    assert abs(rate - pref2 * 0.02) < 1e-15


def test_r_channel_actions_on_dark_state():
    spec = fig3_spec()
    model = build_reduced(spec)
    r1a = model.channel("R_{1,a}").operator
    out = r1a @ BELL_ANTISYM
    # proportional to |s01> with squared norm gamma1*V_L^2/(8*Delta^2)
    overlap = abs(np.vdot(BELL_SYM, out)) ** 2
    norm2 = float(np.linalg.norm(out) ** 2)
    assert abs(overlap - norm2) < 1e-15
    assert abs(norm2 - spec.gamma1 * spec.v_l**2 / (8 * spec.delta_big**2)) < 1e-15
    r0a = model.channel("R_{0,a}").operator
    out0 = r0a @ BELL_ANTISYM
    # decays to |00> at rate gamma0*V_L^2/(4*Delta^2)
    assert abs(abs(out0[0]) ** 2
               - spec.gamma0 * spec.v_l**2 / (4 * spec.delta_big**2)) < 1e-15


def test_cooperativity_identity_random_specs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        spec = ModelSpec(delta_big=float(rng.uniform(10, 5000)),
                         v_l=float(rng.uniform(0.1, 100)),
                         v_m=float(rng.uniform(0.001, 1)),
                         g_max=1.0,
                         kappa=float(rng.uniform(0.01, 2)),
                         gamma0=float(rng.uniform(0.001, 5)),
                         gamma1=float(rng.uniform(0.001, 5)))
        r = effective_rates(spec)
        lhs = r.g_eff**2 / (spec.kappa * r.gamma_eff)
        rhs = spec.g_max**2 / (spec.gamma * spec.kappa)
        assert abs(lhs - rhs) < 1e-12 * abs(rhs)


def test_effective_rates_gamma_zero():
    r = effective_rates(fig3_spec(gamma0=0.0, gamma1=0.0))
    assert math.isinf(r.cooperativity)
    assert r.unbounded


def test_dark_time_forms():
    spec = fig3_spec()
    assert math.isinf(dark_time(spec, 1.0, 1.0))
    assert math.isinf(dark_time(fig3_spec(v_l=0.0), 1.0, 0.9))
    t = dark_time(spec, 1.0, 0.9)
    expected = 2 * spec.kappa * spec.delta_big**2 / (spec.v_l**2 * 0.1**2)
    assert abs(t - expected) < 1e-9 * expected


def test_feedback_applied_on_click():
    model = build_reduced(fig3_spec(), with_spont=False)
    ch = model.channel(CAVITY_DETECTED)
    assert ch.feedback is not None
    # operator = U @ bare; stripping the unitary recovers the bare form
    assert np.max(np.abs(ch.feedback @ ch.bare_operator - ch.operator)) < 1e-12
    u = ch.feedback
    assert np.max(np.abs(dag(u) @ u - np.eye(4))) < 1e-12


def test_jump_channel_rejects_nonunitary_feedback():
    with pytest.raises(ValueError):
        JumpChannel(np.eye(4), "x", feedback=2 * np.eye(4))


def test_split_cavity_rates_and_flags():
    model = build_reduced(fig3_spec())
    split = split_cavity(model, 0.4)
    det = split.channel(CAVITY_DETECTED)
    undet = split.channel(CAVITY_UNDETECTED)
    assert det.conditioned and not undet.conditioned
    assert det.feedback is not None and undet.feedback is None
    # rates add back to the original cavity rate
    orig = model.channel(CAVITY_DETECTED).operator
    total = dag(det.operator) @ det.operator + dag(undet.operator) @ undet.operator
    assert np.max(np.abs(total - dag(orig) @ orig)) < 1e-12
    assert split_cavity(model, 1.0).labels() == model.labels()
    with pytest.raises(ValueError):
        split_cavity(model, 1.2)


def test_full_model_structure():
    spec = fig3_spec()
    model = build_full(spec)
    assert model.tier == "A"
    assert model.dim == 9 * (spec.fock_cutoff + 1)
    assert model.labels()[0] == CAVITY_DETECTED
    assert set(model.labels()[1:]) == {"atom-1-to-0", "atom-1-to-1",
                                       "atom-2-to-0", "atom-2-to-1"}
    # Hermiticity is enforced at construction; spot-check the defect
    h = model.hamiltonian
    assert np.max(np.abs(h - dag(h))) < 1e-12


def test_jitter_averaged_reduces_to_plain_at_zero_sigma():
    spec = fig3_spec(trap_sigma=0.0)
    avg = build_jitter_averaged(spec)
    plain = build_reduced(spec)
    assert avg.labels() == plain.labels()
    assert np.max(np.abs(avg.channel(CAVITY_DETECTED).operator
                         - plain.channel(CAVITY_DETECTED).operator)) < 1e-12


def test_jitter_averaged_total_rate_preserved():
    # the collective + per-atom pieces carry the full second moment m2
    spec = fig3_spec(trap_sigma=0.08)
    avg = build_jitter_averaged(spec)
    total = np.zeros((4, 4), complex)
    for ch in avg.channels:
        if ch.label.startswith("cavity"):
            total += dag(ch.operator) @ ch.operator
    s = 2 * math.pi * spec.trap_sigma
    m2 = spec.g_max**2 * (1 + math.exp(-2 * s**2)) / 2
    pref2 = (spec.v_l / (spec.delta_big * math.sqrt(spec.kappa))) ** 2
    # diagonal of sum c^dag c on |01>: m2 * pref2
    assert abs(total[1, 1].real - m2 * pref2) < 1e-12
