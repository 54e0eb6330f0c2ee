import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqt import qops
from cqt.errors import NonUnitaryError, PostselectionError, StructuralError, TruncationError, UsageError
from cqt.hilbert import AtomSite, CompositeState, FockCutoff, coherent_state, compose, extract, fidelity
from cqt.testing.oracle import probe_success_probability, random_state

R = 1 / math.sqrt(2)
PROBE = AtomSite("P", ("f", "e"))

# P(e) for a probe crossing |-4> with gt = pi/8, from the compensated-sum oracle
P_E_ALPHA4 = 0.96188023696990147


def cavity_state(alpha, n_max=64, atoms=((1, 0),), sites=None):
    cut = FockCutoff(n_max)
    vec, _ = coherent_state(alpha, cut)
    return compose(list(atoms), vec / np.linalg.norm(vec), sites=sites, cutoff=cut)


def fock(n, n_max):
    v = np.zeros(n_max + 1, dtype=complex)
    v[n] = 1
    return v


def test_gate_unitarity_check():
    with pytest.raises(NonUnitaryError):
        qops.Gate2([[1, 1], [0, 1]])
    with pytest.raises(StructuralError):
        qops.Gate2(np.eye(3))
    for g in qops.PRESETS.values():
        assert np.allclose(g.matrix.conj().T @ g.matrix, np.eye(2), atol=1e-12)


def test_preset_matrices():
    assert np.allclose(qops.R_H.matrix, R * np.array([[1, 1], [-1, 1]]))
    assert np.allclose(qops.K.matrix, R * np.array([[1, -1], [1, 1]]))
    assert np.allclose(qops.R5.matrix, [[0, -1], [1, 0]])
    assert np.allclose(qops.Z_CORR.matrix, [[1, 0], [0, -1]])
    assert np.allclose(qops.X_CORR.matrix, [[0, 1], [1, 0]])
    assert np.allclose(qops.XZ_CORR.matrix, [[0, 1], [-1, 0]])


def test_rh_on_g_gives_equal_superposition():
    s = qops.apply_gate(compose([(0, 1)], None), "A1", qops.R_H)
    assert np.allclose(s.amp, [R, R])


def test_k_unravels_superposition():
    s = qops.apply_gate(compose([(R, R)], None), "A1", qops.K)
    assert np.allclose(s.amp, [0, 1])


def test_identity_gate():
    s = random_state([AtomSite("A1"), AtomSite("A2")], FockCutoff(3), np.random.default_rng(0))
    assert np.array_equal(qops.apply_gate(s, "A2", qops.IDENTITY).amp, s.amp)


def test_gate_acts_on_named_atom_only():
    s = compose([(1, 0), (1, 0)], None)
    t = qops.apply_gate(s, "A2", qops.X_CORR)
    assert np.allclose(t.amp, [0, 1, 0, 0])


def test_dispersive_pi_flips_coherent_state():
    s = qops.dispersive_gate(cavity_state(2), "A1", math.pi)
    target = cavity_state(-2)
    assert fidelity(s, target) >= 1 - 1e-10


def test_dispersive_leaves_g_alone():
    s = cavity_state(2, atoms=((0, 1),))
    assert np.allclose(qops.dispersive_gate(s, "A1", math.pi).amp, s.amp, atol=1e-15)


def test_dispersive_zero_phase_is_identity():
    s = random_state([AtomSite("A1")], FockCutoff(6), np.random.default_rng(2))
    assert np.allclose(qops.dispersive_gate(s, "A1", 0.0).amp, s.amp, atol=1e-15)


def test_dispersive_needs_fg_atom_and_cavity():
    s = compose([(1, 0)], fock(0, 3), sites=[PROBE])
    with pytest.raises(UsageError):
        qops.dispersive_gate(s, "P", math.pi)
    with pytest.raises(StructuralError):
        qops.dispersive_gate(compose([(1, 0)], None), "A1", math.pi)


def test_displace_back_to_vacuum():
    s = qops.displace(cavity_state(2), -2)
    assert abs(s.amplitude(["f"], 0)) ** 2 >= 1 - 1e-10


def test_displace_zero_is_identity():
    s = cavity_state(1.5)
    assert qops.displace(s, 0) is s


def test_displace_doubles_negative_amplitude():
    s = qops.displace(cavity_state(-2), -2)
    assert fidelity(s, cavity_state(-4)) >= 1 - 1e-10


def test_displace_truncation_guard():
    with pytest.raises(TruncationError) as exc:
        qops.displace(cavity_state(2, n_max=20), 3)
    assert exc.value.mass > 1e-12


def test_jc_leaves_f0_alone():
    s = compose([(1, 0)], fock(0, 5), sites=[PROBE])
    assert np.allclose(qops.jc_evolve(s, "P", 1.234).amp, s.amp)


def test_jc_quarter_turn_on_one_photon():
    s = compose([(1, 0)], fock(1, 5), sites=[PROBE])
    t = qops.jc_evolve(s, "P", math.pi / 2)
    assert t.amplitude(["e"], 0) == pytest.approx(-1j, abs=1e-15)
    assert np.sum(np.abs(t.amp) ** 2) == pytest.approx(1.0)


def test_jc_probe_probability_matches_oracle():
    s = cavity_state(-4, atoms=((1, 0),), sites=[PROBE])
    t = qops.jc_evolve(s, "P", math.pi / 8)
    p = qops.outcome_probabilities(t, "P")["e"]
    ref = probe_success_probability(-4, math.pi / 8, 64)
    assert p == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(P_E_ALPHA4, abs=1e-14)
    assert ref >= 0.95


def test_jc_top_level_guard():
    s = compose([(0, 1)], fock(4, 4), sites=[PROBE])
    with pytest.raises(TruncationError):
        qops.jc_evolve(s, "P", 0.3)
    with pytest.raises(UsageError):
        qops.jc_evolve(compose([(1, 0)], fock(0, 4)), "A1", 0.3)


def test_measure_certain_outcome():
    s = cavity_state(1, atoms=((1, 0),))
    m = qops.measure_atom(s, "A1", np.random.default_rng(0))
    assert m.level == "f" and m.probability == pytest.approx(1.0)


def test_measure_collapses_partner():
    bell = CompositeState((AtomSite("A1"), AtomSite("A2")), None, [R, 0, 0, R])
    rng = np.random.default_rng(5)
    for _ in range(20):
        m = qops.measure_atom(bell, "A1", rng)
        partner = extract(m.post_state, ["A2"])
        expected = compose([(1, 0) if m.level == "f" else (0, 1)], None, sites=[AtomSite("A2")])
        assert fidelity(partner, expected) == pytest.approx(1.0, abs=1e-12)
        assert m.probability == pytest.approx(0.5)


def test_measure_statistics_within_three_sigma():
    s = compose([(R, R)], None)
    rng = np.random.default_rng(12345)
    n = 100_000
    hits = sum(qops.measure_atom(s, "A1", rng).level == "f" for _ in range(n))
    sigma = math.sqrt(n * 0.25)
    assert abs(hits - n / 2) <= 3 * sigma


def test_postselect_certain_branch():
    s = cavity_state(1.0, atoms=((1, 0),))
    p, post = qops.postselect(s, "A1", "f")
    assert p == pytest.approx(1.0) and np.allclose(post.amp, s.amp)


def test_postselect_impossible_branch():
    s = qops.jc_evolve(compose([(1, 0)], fock(0, 3), sites=[PROBE]), "P", 0.7)
    with pytest.raises(PostselectionError) as exc:
        qops.postselect(s, "P", "e")
    assert exc.value.probability == 0.0


def test_postselect_bell_from_probe_conditioning():
    # (|ff> + |gg>)|-2a> + (|fg> + |gf>)|0>, probed: only the first branch can excite
    cut = FockCutoff(64)
    far, _ = coherent_state(-4, cut)
    near = fock(0, 64)
    sites = (AtomSite("A1"), AtomSite("A2"), PROBE)
    amp = np.zeros((2, 2, 2, cut.dim), dtype=complex)
    amp[0, 0, 0] = amp[1, 1, 0] = 0.5 * far
    amp[0, 1, 0] = amp[1, 0, 0] = 0.5 * near
    s = CompositeState(sites, cut, amp.reshape(-1)).normalized()
    _, post = qops.postselect(qops.jc_evolve(s, "P", math.pi / 8), "P", "e")
    bell = CompositeState(sites[:2], None, [R, 0, 0, R])
    assert fidelity(extract(post, ["A1", "A2"]), bell) >= 1 - 1e-12


def test_measure_probabilities_match_postselect():
    s = random_state([AtomSite("A1"), AtomSite("A2")], FockCutoff(4), np.random.default_rng(8))
    probs = qops.outcome_probabilities(s, "A2")
    rng = np.random.default_rng(0)
    for _ in range(10):
        m = qops.measure_atom(s, "A2", rng)
        p, post = qops.postselect(s, "A2", m.level)
        assert m.probability == p == probs[m.level]
        assert np.array_equal(m.post_state.amp, post.amp)
        assert abs(m.post_state.norm() - 1) < 1e-12


def test_sigma_xx_expectations():
    basis = (AtomSite("A1"), AtomSite("A2"))
    cases = {(R, 0, 0, R): 1, (0, R, R, 0): 1, (R, 0, 0, -R): -1, (0, R, -R, 0): -1, (1, 0, 0, 0): 0}
    for amp, value in cases.items():
        s = CompositeState(basis, None, amp)
        assert qops.expectation_sigma_xx(s, "A1", "A2") == pytest.approx(value, abs=1e-15)


# --- properties --------------------------------------------------------------

SITES = (AtomSite("A1"), AtomSite("A2"), PROBE)
CUT = FockCutoff(10)
seeds = st.integers(0, 2**32 - 1)
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def _rand(seed):
    return random_state(SITES, CUT, np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(seeds, angles, angles, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_every_primitive_preserves_norm(seed, phi, gt, br, bi):
    s = _rand(seed)
    u = qops.Gate2(np.linalg.qr(np.random.default_rng(seed).normal(size=(2, 2)))[0])
    outs = [
        qops.apply_gate(s, "A1", u),
        qops.dispersive_gate(s, "A2", phi),
        qops.displace(s, complex(br, bi), tail_tol=math.inf),
        qops.jc_evolve(s, "P", gt, top_tol=math.inf),
    ]
    for t in outs:
        assert abs(t.norm() - 1) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, angles, angles)
def test_dispersive_phases_compose(seed, a, b):
    s = _rand(seed)
    two = qops.dispersive_gate(qops.dispersive_gate(s, "A1", a), "A1", b)
    one = qops.dispersive_gate(s, "A1", a + b)
    assert np.max(np.abs(two.amp - one.amp)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_displacement_inverse_pair(br, bi):
    beta = complex(br, bi)
    s = cavity_state(0.5, n_max=64)
    back = qops.displace(qops.displace(s, beta), -beta)
    assert np.max(np.abs(back.amp - s.amp)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, angles)
def test_jc_inverse_pair(seed, gt):
    s = _rand(seed)
    back = qops.jc_evolve(qops.jc_evolve(s, "P", gt, top_tol=math.inf), "P", -gt, top_tol=math.inf)
    assert np.max(np.abs(back.amp - s.amp)) < 1e-12
