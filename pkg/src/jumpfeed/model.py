"""Model construction for the three simulation tiers.

Tier A is the full pair-of-three-level-atoms + cavity model, tier B the
adiabatically reduced two-qubit model without spontaneous emission, and
tier C the reduced model with the four collective spontaneous-emission
jump channels.  Rate prefactors are folded into the channel operators, so
every channel contributes D[c] with c carrying sqrt(rate).

Basis conventions (fixed globally):
  * two-qubit product basis order |00>, |01>, |10>, |11> (index = 2*q1 + q2);
  * tier A factors ordered atom1 (3) x atom2 (3) x cavity (fock_cutoff + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import asmatrix, dag, expm, hermiticity_defect, kron
from .states import HilbertLayout, QUBIT_PAIR

__all__ = [
    "ModelSpec",
    "JumpChannel",
    "ModelInstance",
    "EffectiveRates",
    "build_full",
    "build_reduced",
    "build_jitter_averaged",
    "stark_shift_delta",
    "effective_rates",
    "dark_time",
    "delocalized_cavity_operator",
    "split_cavity",
    "CAVITY_DETECTED",
    "CAVITY_UNDETECTED",
    "R_LABELS",
    "BELL_ANTISYM",
    "BELL_SYM",
]

CAVITY_DETECTED = "cavity-detected"
CAVITY_UNDETECTED = "cavity-undetected"
R_LABELS = ("R_{0,s}", "R_{0,a}", "R_{1,s}", "R_{1,a}")

# single-qubit primitives
_SM = np.array([[0, 1], [0, 0]], dtype=np.complex128)  # |0><1|
_SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_I2 = np.eye(2, dtype=np.complex128)

SIGMA1_MINUS = kron(_SM, _I2)
SIGMA2_MINUS = kron(_I2, _SM)
A01_QUBITS = SIGMA1_MINUS + SIGMA2_MINUS

KET_00 = np.array([1, 0, 0, 0], dtype=np.complex128)
KET_11 = np.array([0, 0, 0, 1], dtype=np.complex128)
BELL_SYM = np.array([0, 1, 1, 0], dtype=np.complex128) / math.sqrt(2)
BELL_ANTISYM = np.array([0, 1, -1, 0], dtype=np.complex128) / math.sqrt(2)


@dataclass(frozen=True)
class ModelSpec:
    """All physical parameters, in units of g_max (rates) and 1/g_max (times).

    ``delta_small`` defaults to the Stark-matched value V_L^2/(4*Delta) when
    left as None, which cancels the residual two-photon detuning in the
    reduced Hamiltonian.
    """

    delta_big: float
    v_l: float
    v_m: float
    g_max: float
    kappa: float
    gamma0: float
    gamma1: float
    delta_small: float | None = None
    eta: float = 1.0
    fock_cutoff: int = 2
    feedback_angle: float = math.pi / 2
    trap_sigma: float = 0.0
    lambda_frac_center: float = 0.0

    def __post_init__(self):
        for name in ("v_l", "v_m", "g_max", "kappa", "gamma0", "gamma1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")
        if self.trap_sigma < 0:
            raise ValueError("trap_sigma must be >= 0")

    @property
    def gamma(self) -> float:
        return self.gamma0 + self.gamma1

    @property
    def delta_small_resolved(self) -> float:
        if self.delta_small is not None:
            return self.delta_small
        return stark_shift_delta(self)

    @property
    def adiabatic_ok(self) -> bool:
        """Whether Delta >= 10 * max(V_L, g, kappa), the tier-B/C validity flag."""
        return self.delta_big >= 10.0 * max(self.v_l, self.g_max, self.kappa)


@dataclass(frozen=True)
class JumpChannel:
    """One dissipation channel, contributing D[operator] to the generator.

    ``operator`` carries sqrt(rate); when ``feedback`` is set, the unitary is
    already pre-multiplied into ``operator`` so a jump applies it for free.
    """

    operator: np.ndarray
    label: str
    feedback: np.ndarray | None = None
    conditioned: bool = True

    def __post_init__(self):
        object.__setattr__(self, "operator", asmatrix(self.operator))
        if self.feedback is not None:
            fb = asmatrix(self.feedback)
            unit_defect = float(np.max(np.abs(dag(fb) @ fb - np.eye(fb.shape[0]))))
            if unit_defect > 1e-10:
                raise ValueError(f"feedback for {self.label} not unitary (defect {unit_defect:.3e})")
            object.__setattr__(self, "feedback", fb)

    @property
    def bare_operator(self) -> np.ndarray:
        """The channel operator with any feedback unitary stripped off."""
        if self.feedback is None:
            return self.operator
        return dag(self.feedback) @ self.operator


@dataclass(frozen=True)
class ModelInstance:
    hamiltonian: np.ndarray
    channels: tuple[JumpChannel, ...]
    layout: HilbertLayout
    tier: str  # "A" | "B" | "C"
    spec: ModelSpec | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        h = asmatrix(self.hamiltonian)
        defect = hermiticity_defect(h)
        if defect > 1e-10:
            raise ValueError(f"Hamiltonian not Hermitian (defect {defect:.3e})")
        object.__setattr__(self, "hamiltonian", h)
        for ch in self.channels:
            if ch.operator.shape != h.shape:
                raise ValueError(f"channel {ch.label} dimension mismatch")

    @property
    def dim(self) -> int:
        return self.layout.size

    def channel(self, label: str) -> JumpChannel:
        for ch in self.channels:
            if ch.label == label:
                return ch
        raise KeyError(label)

    def labels(self) -> tuple[str, ...]:
        return tuple(ch.label for ch in self.channels)


def stark_shift_delta(spec: ModelSpec) -> float:
    """Second detuning delta = V_L^2/(4*Delta) that cancels the residual
    light-shift term in the reduced Hamiltonian."""
    if spec.delta_big == 0:
        raise ValueError("delta_big must be nonzero")
    return spec.v_l**2 / (4.0 * spec.delta_big)


@dataclass(frozen=True)
class EffectiveRates:
    g_eff: float
    gamma_eff: float
    cooperativity: float  # math.inf when gamma == 0

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.cooperativity)


def effective_rates(spec: ModelSpec) -> EffectiveRates:
    """Effective coupling V_L*g/(2*Delta), effective spontaneous rate
    V_L^2*gamma/(4*Delta^2) and the cooperativity g^2/(gamma*kappa).

    The V_L^2 form of the effective spontaneous rate is the one consistent
    with the cooperativity identity g_eff^2/(kappa*gamma_eff) = g^2/(gamma*kappa).
    """
    if spec.delta_big <= 0:
        raise ValueError("delta_big must be > 0")
    g_eff = spec.v_l * spec.g_max / (2.0 * spec.delta_big)
    gamma_eff = spec.v_l**2 * spec.gamma / (4.0 * spec.delta_big**2)
    if spec.gamma == 0:
        coop = math.inf
    else:
        coop = spec.g_max**2 / (spec.gamma * spec.kappa)
    return EffectiveRates(g_eff, gamma_eff, coop)


def dark_time(spec: ModelSpec, g1: float, g2: float) -> float:
    """Mean time before a cavity emission out of the antisymmetric dark
    state when the two couplings are frozen at g1 != g2.

    This is the inverse of (V_L^2/(Delta^2*kappa)) * ||(g1 s1- + g2 s2-)|a>||^2
    = V_L^2 (g1-g2)^2 / (2 Delta^2 kappa).  Returns inf when g1 == g2 (the
    dark state is then exact).
    """
    rate = spec.v_l**2 * (g1 - g2) ** 2 / (2.0 * spec.delta_big**2 * spec.kappa)
    if rate == 0.0:
        return math.inf
    return 1.0 / rate


def _reduced_feedback(spec: ModelSpec) -> np.ndarray | None:
    if spec.feedback_angle == 0.0:
        return None
    return expm(1j * spec.feedback_angle * kron(_SX, _I2))


def delocalized_cavity_operator(spec: ModelSpec, g1: float, g2: float,
                                with_feedback: bool = True) -> np.ndarray:
    """Reduced-model cavity channel operator for per-atom couplings g1, g2:
    (V_L/(Delta*sqrt(kappa))) * U * (g1 s1- + g2 s2-)."""
    pref = spec.v_l / (spec.delta_big * math.sqrt(spec.kappa))
    op = pref * (g1 * SIGMA1_MINUS + g2 * SIGMA2_MINUS)
    u = _reduced_feedback(spec) if with_feedback else None
    if u is not None:
        op = u @ op
    return op


def _r_channels(spec: ModelSpec) -> list[JumpChannel]:
    """Four collective spontaneous-emission jumps in the product basis."""
    p0 = math.sqrt(spec.gamma0 * spec.v_l**2 / (4.0 * spec.delta_big**2))
    p1 = math.sqrt(spec.gamma1 * spec.v_l**2 / (8.0 * spec.delta_big**2))
    s, a = BELL_SYM, BELL_ANTISYM
    k00, k11 = KET_00, KET_11
    ops = {
        "R_{0,s}": p0 * (np.outer(k00, s.conj()) + np.outer(s, k11.conj())),
        "R_{0,a}": p0 * (np.outer(k00, a.conj()) - np.outer(a, k11.conj())),
        "R_{1,s}": p1 * (np.outer(a, a.conj()) + np.outer(s, s.conj())
                         + 2.0 * np.outer(k11, k11.conj())),
        "R_{1,a}": p1 * (np.outer(s, a.conj()) - np.outer(a, s.conj())),
    }
    return [JumpChannel(ops[lbl], lbl) for lbl in R_LABELS]


def build_reduced(spec: ModelSpec, with_spont: bool = True) -> ModelInstance:
    """Adiabatically reduced two-qubit model (tier C with the R jumps,
    tier B without).  Outside the adiabatic regime the instance carries a
    warning instead of failing, so scans may probe the boundary."""
    warnings = ()
    if not spec.adiabatic_ok:
        warnings = (
            f"outside adiabatic regime: Delta={spec.delta_big} < "
            f"10*max(V_L, g, kappa)={10 * max(spec.v_l, spec.g_max, spec.kappa)}",
        )
    h = spec.v_m / 2.0 * (A01_QUBITS + dag(A01_QUBITS))
    u = _reduced_feedback(spec)
    pref = spec.v_l * spec.g_max / (spec.delta_big * math.sqrt(spec.kappa))
    cav_op = pref * A01_QUBITS
    if u is not None:
        cav_op = u @ cav_op
    channels = [JumpChannel(cav_op, CAVITY_DETECTED, feedback=u)]
    if with_spont:
        channels += _r_channels(spec)
    return ModelInstance(
        hamiltonian=h,
        channels=tuple(channels),
        layout=QUBIT_PAIR,
        tier="C" if with_spont else "B",
        spec=spec,
        warnings=warnings,
    )


def build_jitter_averaged(spec: ModelSpec) -> ModelInstance:
    """Reduced model with the cavity channel replaced by its average over
    Gaussian position jitter.

    With positions re-rolled independently every step, the unconditioned mean
    state evolves under the jitter-averaged generator.  Averaging the cavity
    dissipator over g_i = g_max*cos(phi_c + theta_i), theta_i ~ N(0, 2*pi*sigma),
    splits it into a collective channel at the mean coupling m1 and two
    independent per-atom channels carrying the coupling variance m2 - m1^2.
    Detector efficiency ``spec.eta`` further splits each part into a
    feedback-carrying detected piece and a bare undetected piece.
    """
    base = build_reduced(spec)
    s = 2.0 * math.pi * spec.trap_sigma
    phi_c = 2.0 * math.pi * spec.lambda_frac_center
    m1 = spec.g_max * math.exp(-s**2 / 2.0) * math.cos(phi_c)
    m2 = spec.g_max**2 * (1.0 + math.exp(-2.0 * s**2) * math.cos(2.0 * phi_c)) / 2.0
    var = max(m2 - m1**2, 0.0)

    pref = spec.v_l / (spec.delta_big * math.sqrt(spec.kappa))
    u = _reduced_feedback(spec)
    parts = [
        (m1 * (SIGMA1_MINUS + SIGMA2_MINUS), ""),
        (math.sqrt(var) * SIGMA1_MINUS, "-jitter-1"),
        (math.sqrt(var) * SIGMA2_MINUS, "-jitter-2"),
    ]
    channels = []
    for op, suffix in parts:
        if np.max(np.abs(op)) == 0.0:
            continue
        op = pref * op
        if spec.eta > 0.0:
            det = math.sqrt(spec.eta) * (u @ op if u is not None else op)
            channels.append(JumpChannel(det, CAVITY_DETECTED + suffix, feedback=u))
        if spec.eta < 1.0:
            channels.append(JumpChannel(math.sqrt(1.0 - spec.eta) * op,
                                        CAVITY_UNDETECTED + suffix,
                                        conditioned=False))
    channels += [ch for ch in base.channels if ch.label != CAVITY_DETECTED]
    return replace(base, channels=tuple(channels))


def _atom_op(single: np.ndarray, atom: int, n_cav: int) -> np.ndarray:
    """Embed a single-atom 3x3 operator at the given atom slot (1 or 2)."""
    i3 = np.eye(3, dtype=np.complex128)
    ic = np.eye(n_cav, dtype=np.complex128)
    if atom == 1:
        return kron(kron(single, i3), ic)
    return kron(kron(i3, single), ic)


def _collective(i: int, j: int, n_cav: int) -> np.ndarray:
    """A_{i,j} = |i>_1<j| + |i>_2<j| on the full atom1 x atom2 x cavity space."""
    e = np.zeros((3, 3), dtype=np.complex128)
    e[i, j] = 1.0
    return _atom_op(e, 1, n_cav) + _atom_op(e, 2, n_cav)


def build_full(spec: ModelSpec) -> ModelInstance:
    """Full Raman + cavity model (tier A), dimension 9*(fock_cutoff+1)."""
    n_cav = spec.fock_cutoff + 1
    i3 = np.eye(3, dtype=np.complex128)
    a_op = kron(kron(i3, i3), np.diag(np.sqrt(np.arange(1, n_cav, dtype=float)), 1))

    delta_small = spec.delta_small_resolved
    h = (
        -delta_small * _collective(1, 1, n_cav)
        + spec.delta_big * _collective(2, 2, n_cav)
        + spec.v_l / 2.0 * (_collective(1, 2, n_cav) + _collective(2, 1, n_cav))
        + spec.v_m / 2.0 * (_collective(1, 0, n_cav) + _collective(0, 1, n_cav))
        + spec.g_max * (_collective(0, 2, n_cav) @ dag(a_op)
                        + _collective(2, 0, n_cav) @ a_op)
    )

    # feedback acts on the |1><->|2> transition of atom 1
    f_single = np.zeros((3, 3), dtype=np.complex128)
    f_single[1, 2] = f_single[2, 1] = 1.0
    u = None
    cav_op = math.sqrt(spec.kappa) * a_op
    if spec.feedback_angle != 0.0:
        u = expm(1j * spec.feedback_angle * _atom_op(f_single, 1, n_cav))
        cav_op = u @ cav_op
    channels = [JumpChannel(cav_op, CAVITY_DETECTED, feedback=u)]

    for atom in (1, 2):
        for j, rate in ((0, spec.gamma0), (1, spec.gamma1)):
            e = np.zeros((3, 3), dtype=np.complex128)
            e[j, 2] = 1.0
            channels.append(
                JumpChannel(math.sqrt(rate) * _atom_op(e, atom, n_cav),
                            f"atom-{atom}-to-{j}")
            )

    return ModelInstance(
        hamiltonian=h,
        channels=tuple(channels),
        layout=HilbertLayout((3, 3, n_cav)),
        tier="A",
        spec=spec,
    )


def split_cavity(model: ModelInstance, eta: float) -> ModelInstance:
    """Split the cavity channel for detector efficiency eta: a detected part
    (rate factor eta, feedback kept, conditioned) and an undetected part
    (rate factor 1-eta, no feedback, unconditioned)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    cav = model.channel(CAVITY_DETECTED)
    rest = [ch for ch in model.channels if ch.label != CAVITY_DETECTED]
    new = []
    if eta > 0.0:
        new.append(JumpChannel(math.sqrt(eta) * cav.operator, CAVITY_DETECTED,
                               feedback=cav.feedback, conditioned=True))
    if eta < 1.0:
        new.append(JumpChannel(math.sqrt(1.0 - eta) * cav.bare_operator,
                               CAVITY_UNDETECTED, conditioned=False))
    return replace(model, channels=tuple(new + rest))
