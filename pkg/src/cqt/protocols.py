"""Bell-pair preparation, Bell-state discrimination and teleportation.

Every procedure is written purely in terms of :mod:`cqt.qops` primitives.
The cavity starts in ``|-alpha>``, atoms cross it dispersively with phase
``phi`` (pi by default), a coherent field of amplitude ``+-alpha`` is
injected, and a resonant probe atom sent in ``f`` is post-selected in ``e``,
which keeps only the branch where the cavity was displaced away from vacuum.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qops
from .errors import PostselectionError, ProtocolAbort, StructuralError
from .hilbert import (
    AtomSite,
    CompositeState,
    FockCutoff,
    InputQubit,
    coherent_state,
    compose,
    extract,
    product,
    reduced_density,
)
from .qops import Gate2

PROBE = "probe"
F_G = ("f", "g")
F_E = ("f", "e")


class Injection(enum.Enum):
    PLUS = 1
    MINUS = -1

    @property
    def sign(self) -> int:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Injection":
        key = str(text).strip().lower()
        if key in ("plus", "+", "+alpha", "+1", "1"):
            return cls.PLUS
        if key in ("minus", "-", "-alpha", "-1"):
            return cls.MINUS
        raise ValueError(f"injection must be 'plus' or 'minus', got {text!r}")

    def __str__(self):
        return self.name.lower()


class BellKind(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @classmethod
    def parse(cls, text: str) -> "BellKind":
        key = str(text).strip().lower().replace("_plus", "+").replace("_minus", "-")
        for k in cls:
            if k.value == key:
                return k
        raise ValueError(f"unknown Bell state {text!r}; expected one of phi+, phi-, psi+, psi-")

    @property
    def is_psi(self) -> bool:
        return self in (BellKind.PSI_PLUS, BellKind.PSI_MINUS)

    @property
    def preparation_injection(self) -> Injection:
        # Phi+ and (R5-rotated) Psi- come out of the -alpha injection
        return Injection.MINUS if self in (BellKind.PHI_PLUS, BellKind.PSI_MINUS) else Injection.PLUS

    @property
    def discrimination_injection(self) -> Injection:
        return Injection.PLUS if self in (BellKind.PHI_PLUS, BellKind.PSI_PLUS) else Injection.MINUS


# outcome pair after the discrimination sequence -> Bell state
DISCRIMINATION_TABLE: dict[tuple[str, str], BellKind] = {
    ("g", "f"): BellKind.PHI_PLUS,
    ("f", "g"): BellKind.PHI_MINUS,
    ("f", "f"): BellKind.PSI_PLUS,
    ("g", "g"): BellKind.PSI_MINUS,
}


@dataclass(frozen=True)
class ProtocolParams:
    alpha: float = 2.0
    n_max: int = 64
    phi: float = math.pi
    gt_probe: float | None = None
    tail_tol: float = 1e-12
    postselect_min: float = 1e-14
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise StructuralError(f"alpha must be > 0, got {self.alpha!r}")
        FockCutoff(self.n_max)
        if self.gt_probe is None:
            # sqrt(nbar) * gt = pi/2 with nbar = |2 alpha|^2 for the probed field
            object.__setattr__(self, "gt_probe", math.pi / (2 * math.sqrt(4 * self.alpha**2)))
        tail = coherent_state(2 * self.alpha, self.cutoff).tail_mass
        if tail >= self.tail_tol:
            raise StructuralError(
                f"n_max={self.n_max} too small for a |2 alpha| = {2 * self.alpha} field (tail {tail:.2e})"
            )

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.n_max)

    @property
    def n_bar(self) -> int:
        """Integer nearest the probed field's mean photon number (halves round up)."""
        return int(math.floor(4 * self.alpha**2 + 0.5))

    @property
    def n_bar_exact(self) -> bool:
        return math.isclose(4 * self.alpha**2, self.n_bar, rel_tol=0, abs_tol=1e-12)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n_max": self.n_max,
            "phi": self.phi,
            "gt_probe": self.gt_probe,
            "tail_tol": self.tail_tol,
            "postselect_min": self.postselect_min,
            "seed": self.seed,
            "n_bar": self.n_bar,
            "n_bar_exact": self.n_bar_exact,
        }


@dataclass(frozen=True)
class ClassicalMessage:
    injection: Injection
    outcome1: str
    outcome2: str


@dataclass(frozen=True)
class TeleportRecord:
    success: bool
    probe_probability: float
    bell_branch_probability: float
    message: ClassicalMessage | None
    fidelity: float | None  # None when the probe was not excited
    bob_gate: str | None
    bob_amplitudes: tuple[complex, complex] | None = None
    source_level: str | None = None
    source_in_basis_state: bool | None = None


def bell_state(kind: BellKind, labels: tuple[str, str] = ("A1", "A2")) -> CompositeState:
    """Closed-form Bell state over two (f, g) atoms."""
    v = np.zeros(4, dtype=complex)
    ff, fg, gf, gg = 0, 1, 2, 3
    s = 1 / math.sqrt(2)
    if kind is BellKind.PHI_PLUS:
        v[ff], v[gg] = s, s
    elif kind is BellKind.PHI_MINUS:
        v[ff], v[gg] = s, -s
    elif kind is BellKind.PSI_PLUS:
        v[fg], v[gf] = s, s
    else:
        v[fg], v[gf] = s, -s
    return CompositeState(tuple(AtomSite(lb) for lb in labels), None, v)


def _cavity(params: ProtocolParams) -> np.ndarray:
    vec, tail = coherent_state(-params.alpha, params.cutoff)
    if tail >= params.tail_tol:
        raise StructuralError(f"initial cavity tail {tail:.2e} exceeds {params.tail_tol}")
    return vec


def _probe_and_cavity(params: ProtocolParams) -> CompositeState:
    return compose([(1, 0)], _cavity(params), sites=[AtomSite(PROBE, F_E)])


def _probe(state: CompositeState, params: ProtocolParams, injection: Injection) -> CompositeState:
    state = qops.displace(state, injection.sign * params.alpha, params.tail_tol)
    return qops.jc_evolve(state, PROBE, params.gt_probe)


def _postselect_probe(state: CompositeState, params: ProtocolParams) -> tuple[float, CompositeState]:
    try:
        return qops.postselect(state, PROBE, "e", params.postselect_min)
    except PostselectionError as exc:
        raise ProtocolAbort(f"probe atom was never excited: {exc}") from exc


def prepare_bell(
    params: ProtocolParams, kind: BellKind, labels: tuple[str, str] = ("A1", "A2")
) -> tuple[CompositeState, float]:
    """Run the preparation sequence and return the two-atom state together with
    the probability of the probe detection it was conditioned on."""
    return _prepare_bell(params, kind, tuple(labels))


@lru_cache(maxsize=32)
def _prepare_bell(params: ProtocolParams, kind: BellKind, labels: tuple[str, str]):
    a1, a2 = labels
    atoms = compose([(0, 1), (0, 1)], None, sites=[AtomSite(a1), AtomSite(a2)])
    state = product(atoms, _probe_and_cavity(params))
    for atom in (a1, a2):
        state = qops.apply_gate(state, atom, qops.R_H)
        state = qops.dispersive_gate(state, atom, params.phi)
        state = qops.apply_gate(state, atom, qops.R_H)
    state = _probe(state, params, kind.preparation_injection)
    p, state = _postselect_probe(state, params)
    if kind.is_psi:
        state = qops.apply_gate(state, a2, qops.R5)
    return extract(state, labels), p


def sigma_xx_procedure(
    state: CompositeState, rng: np.random.Generator, atoms: tuple[str, str] | None = None
) -> tuple[int, tuple[str, str]]:
    """Measure sigma_x^1 sigma_x^2 by rotating both atoms with K and detecting
    them; equal outcomes mean eigenvalue +1."""
    a1, a2 = atoms or state.labels[:2]
    for lb in (a1, a2):
        state = qops.apply_gate(state, lb, qops.K)
    m1 = qops.measure_atom(state, a1, rng)
    m2 = qops.measure_atom(m1.post_state, a2, rng)
    outcomes = (m1.level, m2.level)
    return (1 if m1.level == m2.level else -1), outcomes


@dataclass(frozen=True)
class Discrimination:
    outcomes: tuple[str, str]
    inferred: BellKind
    probe_probability: float
    post_state: CompositeState = field(repr=False)


def discriminate_bell(
    state: CompositeState, params: ProtocolParams, injection: Injection, rng: np.random.Generator
) -> Discrimination:
    """K on atom 1, dispersive pass of atom 2 through a fresh ``|-alpha>``
    cavity, R on atom 2, injection, probe post-selection, then K on both atoms
    and detection. The outcome pair is mapped through
    :data:`DISCRIMINATION_TABLE` as is, whatever injection was used."""
    if state.n_atoms != 2 or state.cutoff is not None:
        raise StructuralError("discriminate_bell takes a bare two-atom state")
    a1, a2 = state.labels
    full = product(state, _probe_and_cavity(params))
    full = qops.apply_gate(full, a1, qops.K)
    full = qops.dispersive_gate(full, a2, params.phi)
    full = qops.apply_gate(full, a2, qops.R_H)
    full = _probe(full, params, injection)
    p, full = _postselect_probe(full, params)
    full = qops.apply_gate(full, a1, qops.K)
    full = qops.apply_gate(full, a2, qops.K)
    m1 = qops.measure_atom(full, a1, rng)
    m2 = qops.measure_atom(m1.post_state, a2, rng)
    outcomes = (m1.level, m2.level)
    return Discrimination(outcomes, DISCRIMINATION_TABLE[outcomes], p, m2.post_state)


def bob_correction(message: ClassicalMessage) -> Gate2:
    same = message.outcome1 == message.outcome2
    if message.injection is Injection.MINUS:
        return qops.IDENTITY if same else qops.Z_CORR
    return qops.X_CORR if same else qops.XZ_CORR


TELEPORT_LABELS = ("A1", "A2", "A4")


def teleport(
    qubit: InputQubit,
    params: ProtocolParams,
    injection: Injection,
    rng: np.random.Generator,
) -> TeleportRecord:
    """Teleport ``qubit`` from A1 onto A4 using a Phi+ pair on A2-A4.

    The probe detection is sampled; when it fails the record has
    ``success=False`` and no message is produced.
    """
    src, alice, bob = TELEPORT_LABELS
    pair, _ = prepare_bell(params, BellKind.PHI_PLUS, (alice, bob))
    state = compose([qubit.vector], None, sites=[AtomSite(src)])
    state = product(product(state, pair), _probe_and_cavity(params))
    state = teleport_before_probe(state, params, injection)

    probe = qops.measure_atom(state, PROBE, rng)
    p_probe = probe.probability if probe.level == "e" else 1.0 - probe.probability
    if probe.level != "e":
        return TeleportRecord(False, p_probe, 0.0, None, None, None)
    state = probe.post_state
    for atom in (src, alice):
        state = qops.apply_gate(state, atom, qops.K)
    m1 = qops.measure_atom(state, src, rng)
    m2 = qops.measure_atom(m1.post_state, alice, rng)
    message = ClassicalMessage(injection, m1.level, m2.level)
    gate = bob_correction(message)
    state = qops.apply_gate(m2.post_state, bob, gate)

    rho_bob = reduced_density(state, [bob])
    target = qubit.vector
    fid = float(np.real(np.vdot(target, rho_bob @ target)))
    bob_state = extract(state, [bob])
    rho_src = reduced_density(state, [src])
    in_basis = bool(abs(rho_src[0, 1]) < 1e-12 and min(rho_src[0, 0].real, rho_src[1, 1].real) < 1e-12)
    return TeleportRecord(
        success=True,
        probe_probability=p_probe,
        bell_branch_probability=m1.probability * m2.probability,
        message=message,
        fidelity=min(max(fid, 0.0), 1.0),
        bob_gate=gate.name,
        bob_amplitudes=(complex(bob_state.amp[0]), complex(bob_state.amp[1])),
        source_level=m1.level,
        source_in_basis_state=in_basis,
    )


def teleport_before_probe(state: CompositeState, params: ProtocolParams, injection: Injection) -> CompositeState:
    """Alice's coherent part: A1 and A2 cross the cavity, she injects, and the
    probe interacts. Exposed so callers can inspect the pre-detection state."""
    src, alice, _ = TELEPORT_LABELS
    state = qops.dispersive_gate(state, src, params.phi)
    state = qops.dispersive_gate(state, alice, params.phi)
    return _probe(state, params, injection)
