import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqt.errors import NotSeparableError, StructuralError
from cqt.hilbert import (
    AtomSite,
    CompositeState,
    FockCutoff,
    InputQubit,
    basis_index,
    cat_norm_squared,
    cat_state,
    coherent_state,
    compose,
    extract,
    fidelity,
    inner_product,
    product,
    purity,
    reduced_density,
    replace_cavity,
    split_index,
    summary,
)

# frozen reference values (closed forms evaluated with mpmath at 30 digits)
E_MINUS_2 = 0.1353352832366127
EVEN_NORM_ALPHA_1 = 2.2706705664732254
ODD_NORM_ALPHA_1 = 1.7293294335267746
POISSON16_TAIL_ABOVE_63 = 1.36013431663190197e-19


def vacuum(n_max=8):
    v = np.zeros(n_max + 1, dtype=complex)
    v[0] = 1
    return v


def test_cutoff_dim_and_validation():
    assert FockCutoff(64).dim == 65
    with pytest.raises(StructuralError):
        FockCutoff(0)
    with pytest.raises(StructuralError):
        FockCutoff(2.5)


def test_atom_site_levels():
    s = AtomSite("A1")
    assert s.index("f") == 0 and s.index("g") == 1
    p = AtomSite("P", ("f", "e"))
    assert p.is_probe and p.index("e") == 1
    with pytest.raises(StructuralError):
        s.index("e")
    with pytest.raises(StructuralError):
        AtomSite("X", ("g", "e"))


def test_input_qubit_norm_check():
    InputQubit(0.6, 0.8j)
    with pytest.raises(StructuralError):
        InputQubit(1.0, 1e-5)
    q = InputQubit.haar_random(np.random.default_rng(1))
    assert abs(np.linalg.norm(q.vector) - 1) < 1e-12


def test_coherent_vacuum_has_no_tail():
    vec, tail = coherent_state(0, FockCutoff(5))
    assert np.allclose(vec, vacuum(5)) and tail == 0.0


def test_coherent_ground_amplitude():
    vec, _ = coherent_state(2, FockCutoff(64))
    assert vec[0] == pytest.approx(E_MINUS_2, abs=1e-15)


def test_coherent_tail_mass_alpha4():
    _, tail = coherent_state(4, FockCutoff(63))
    assert tail < 1e-15
    assert tail == pytest.approx(POISSON16_TAIL_ABOVE_63, rel=1e-3)


def test_coherent_norm_monotone_in_cutoff():
    norms = [np.linalg.norm(coherent_state(3, FockCutoff(n)).vector) for n in range(1, 60)]
    assert all(b >= a - 1e-15 for a, b in zip(norms, norms[1:]))
    assert norms[-1] == pytest.approx(1.0, abs=1e-12)


def test_coherent_tail_matches_missing_norm():
    vec, tail = coherent_state(2.5, FockCutoff(12))
    assert 1 - np.vdot(vec, vec).real == pytest.approx(tail, rel=1e-9)


def test_cat_norms_alpha_1():
    cut = FockCutoff(64)
    even = cat_state(1, "even", cut)
    odd = cat_state(1, "odd", cut)
    assert np.vdot(even, even).real == pytest.approx(EVEN_NORM_ALPHA_1, abs=1e-12)
    assert np.vdot(odd, odd).real == pytest.approx(ODD_NORM_ALPHA_1, abs=1e-12)
    assert cat_norm_squared(1, "even") == pytest.approx(EVEN_NORM_ALPHA_1, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1, 2, 4])
def test_cats_orthogonal(alpha):
    cut = FockCutoff(64)
    assert abs(np.vdot(cat_state(alpha, "even", cut), cat_state(alpha, "odd", cut))) < 1e-12


@pytest.mark.parametrize("alpha", [0.5, 1.3, 2])
def test_cat_parity_is_exact(alpha):
    cut = FockCutoff(40)
    even = cat_state(alpha, "even", cut)
    odd = cat_state(alpha, "odd", cut)
    assert np.all(even[1::2] == 0)
    assert np.all(odd[0::2] == 0)


def test_normalized_cat():
    v = cat_state(2, "odd", FockCutoff(64), normalize=True)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        cat_state(0, "odd", FockCutoff(4), normalize=True)
    with pytest.raises(ValueError):
        cat_state(1, "weird", FockCutoff(4))


def test_compose_basis_state():
    s = compose([(1, 0)], vacuum())
    assert s.amp[0] == 1 and np.count_nonzero(s.amp) == 1


def test_compose_superposition_layout():
    r = 1 / math.sqrt(2)
    s = compose([(r, r)], vacuum())
    cd = s.cavity_dim
    assert s.amp[basis_index([0], 0, cd)] == pytest.approx(r)
    assert s.amp[basis_index([1], 0, cd)] == pytest.approx(r)
    assert s.amplitude(["g"], 0) == pytest.approx(r)


def test_compose_rejects_bad_inputs():
    with pytest.raises(StructuralError):
        compose([(1, 1)], vacuum())
    with pytest.raises(StructuralError):
        compose([(1, 0)], vacuum(), sites=[AtomSite("A"), AtomSite("B")])
    with pytest.raises(StructuralError):
        compose([(1, 0), (0, 1)], None, sites=[AtomSite("A"), AtomSite("A")])


def test_index_convention_atoms_major():
    # amp[((b1*2 + b2)*2 + b3)*(n_max+1) + n]
    sites = [AtomSite("A1"), AtomSite("A2"), AtomSite("P", ("f", "e"))]
    cav = np.zeros(4)
    cav[2] = 1
    s = compose([(1, 0), (0, 1), (0, 1)], cav, sites=sites)
    assert s.amp[((0 * 2 + 1) * 2 + 1) * 4 + 2] == 1


@given(st.integers(1, 4), st.integers(1, 12), st.data())
def test_index_round_trip(n_atoms, n_max, data):
    cd = n_max + 1
    idx = data.draw(st.integers(0, 2**n_atoms * cd - 1))
    bits, n = split_index(idx, n_atoms, cd)
    assert basis_index(bits, n, cd) == idx


unit_pairs = st.tuples(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
).filter(lambda p: abs(p[0]) ** 2 + abs(p[1]) ** 2 > 1e-6)


def _unit(p):
    v = np.array(p, dtype=complex)
    return v / np.linalg.norm(v)


@settings(max_examples=60)
@given(st.lists(unit_pairs, min_size=1, max_size=4), st.floats(-2, 2))
def test_compose_norm_is_product_of_norms(pairs, alpha):
    cav, _ = coherent_state(alpha, FockCutoff(30))
    cav = cav / np.linalg.norm(cav)
    s = compose([_unit(p) for p in pairs], cav)
    assert abs(s.norm() - 1.0) < 1e-12 and s.is_normalized


def test_product_places_cavity_last():
    a = compose([(0, 1)], None)
    b = compose([(1, 0)], vacuum(3), sites=[AtomSite("B")])
    ab = product(a, b)
    ba = product(b, a)
    assert ab.labels == ("A1", "B") and ba.labels == ("B", "A1")
    assert ab.amplitude(["g", "f"], 0) == 1
    assert ba.amplitude(["f", "g"], 0) == 1
    with pytest.raises(StructuralError):
        product(b, b)


def test_fidelity_basics():
    f = compose([(1, 0)], None)
    g = compose([(0, 1)], None)
    assert fidelity(f, f) == pytest.approx(1.0)
    assert fidelity(f, g) == 0.0


def test_coherent_overlap_alpha_1():
    cut = FockCutoff(64)
    a = CompositeState((), cut, coherent_state(1, cut).vector)
    b = CompositeState((), cut, coherent_state(-1, cut).vector)
    assert inner_product(a, b).real == pytest.approx(E_MINUS_2, abs=1e-12)


def test_inner_product_rejects_other_space():
    with pytest.raises(StructuralError):
        inner_product(compose([(1, 0)], None), compose([(1, 0)], vacuum(2)))


def test_amp_is_read_only():
    s = compose([(1, 0)], None)
    with pytest.raises(ValueError):
        s.amp[0] = 2


def test_reduced_density_and_extract():
    r = 1 / math.sqrt(2)
    bell = CompositeState((AtomSite("A1"), AtomSite("A2")), None, [r, 0, 0, r])
    rho = reduced_density(bell, ["A1"])
    assert np.allclose(rho, np.eye(2) / 2)
    assert purity(rho) == pytest.approx(0.5)
    with pytest.raises(NotSeparableError):
        extract(bell, ["A2"])
    prod = compose([(0, 1), (r, r)], vacuum(2))
    assert fidelity(extract(prod, ["A2"]), compose([(r, r)], None, sites=[AtomSite("A2")])) == pytest.approx(1)


def test_replace_cavity():
    s = compose([(0, 1)], vacuum(4))
    new = np.zeros(5)
    new[3] = 1
    t = replace_cavity(s, new)
    assert t.amplitude(["g"], 3) == 1


def test_summary_fields():
    cut = FockCutoff(40)
    s = compose([(1, 0)], coherent_state(2, cut).vector, cutoff=cut)
    out = summary(s)
    assert out["populations"]["A1"] == pytest.approx({"f": 1.0, "g": 0.0})
    assert out["mean_photon_number"] == pytest.approx(4.0, abs=1e-9)
