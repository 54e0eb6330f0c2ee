"""Pure states of k two-level atoms and one truncated cavity mode.

Amplitudes are stored densely with the atoms as the most significant indices
(in site order) and the photon number as the least significant one::

    amp[((b1 * 2 + b2) * 2 + ...) * (n_max + 1) + n]

where ``b_i`` is the basis index of atom i (0 for the first named level).
States are immutable; every operation returns a new state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammainc

from .errors import NotSeparableError, StructuralError

NORM_TOL = 1e-12
INPUT_NORM_TOL = 1e-10

LEVEL_PAIRS = (("f", "g"), ("f", "e"))


@dataclass(frozen=True)
class FockCutoff:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise StructuralError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class AtomSite:
    label: str
    basis: tuple[str, str] = ("f", "g")

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        if self.basis not in LEVEL_PAIRS:
            raise StructuralError(f"atom {self.label}: unsupported level pair {self.basis}")

    def index(self, level: str) -> int:
        try:
            return self.basis.index(level)
        except ValueError:
            raise StructuralError(
                f"atom {self.label} has levels {self.basis}, not {level!r}"
            ) from None

    @property
    def is_probe(self) -> bool:
        return self.basis == ("f", "e")


@dataclass(frozen=True)
class InputQubit:
    """The unknown state zeta|f> + xi|g> handed to the teleporter."""

    zeta: complex
    xi: complex

    def __post_init__(self):
        norm2 = abs(self.zeta) ** 2 + abs(self.xi) ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise StructuralError(f"|zeta|^2 + |xi|^2 = {norm2!r}, expected 1")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.zeta, self.xi], dtype=complex)

    @classmethod
    def haar_random(cls, rng: np.random.Generator) -> "InputQubit":
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        return cls(complex(v[0]), complex(v[1]))


def basis_index(bits: Sequence[int], n: int, cavity_dim: int) -> int:
    idx = 0
    for b in bits:
        idx = idx * 2 + int(b)
    return idx * cavity_dim + n


def split_index(idx: int, n_atoms: int, cavity_dim: int) -> tuple[tuple[int, ...], int]:
    rest, n = divmod(idx, cavity_dim)
    bits = []
    for _ in range(n_atoms):
        rest, b = divmod(rest, 2)
        bits.append(b)
    if rest:
        raise StructuralError(f"index {idx} out of range")
    return tuple(reversed(bits)), n


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Joint ket of ``sites`` (in order) and an optional cavity mode.

    ``cutoff=None`` means there is no cavity factor (cavity dimension 1), which
    is how bare atomic states such as Bell pairs are returned.
    """

    sites: tuple[AtomSite, ...]
    cutoff: FockCutoff | None
    amp: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        labels = [s.label for s in self.sites]
        if len(set(labels)) != len(labels):
            raise StructuralError(f"duplicate atom labels in {labels}")
        amp = np.array(self.amp, dtype=complex).reshape(-1)
        if amp.size != self.dim:
            raise StructuralError(
                f"amplitude vector has length {amp.size}, expected {self.dim}"
            )
        amp.setflags(write=False)
        object.__setattr__(self, "amp", amp)

    @property
    def cavity_dim(self) -> int:
        return 1 if self.cutoff is None else self.cutoff.dim

    @property
    def n_atoms(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 2 ** self.n_atoms * self.cavity_dim

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sites)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2,) * self.n_atoms + (self.cavity_dim,)

    def tensor(self) -> np.ndarray:
        """Amplitudes as an array with one axis per atom plus the cavity axis."""
        return self.amp.reshape(self.shape)

    def site_index(self, label: str) -> int:
        for i, s in enumerate(self.sites):
            if s.label == label:
                return i
        raise StructuralError(f"unknown atom label {label!r}; have {list(self.labels)}")

    def site(self, label: str) -> AtomSite:
        return self.sites[self.site_index(label)]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) <= NORM_TOL

    def with_amp(self, amp: np.ndarray) -> "CompositeState":
        return CompositeState(self.sites, self.cutoff, amp)

    def normalized(self) -> "CompositeState":
        nrm = self.norm()
        if nrm == 0.0:
            raise StructuralError("cannot normalise the zero vector")
        return self.with_amp(self.amp / nrm)

    def amplitude(self, levels: Sequence[str], n: int = 0) -> complex:
        bits = [s.index(lv) for s, lv in zip(self.sites, levels, strict=True)]
        return complex(self.amp[basis_index(bits, n, self.cavity_dim)])

    def same_space(self, other: "CompositeState") -> bool:
        return self.sites == other.sites and self.cutoff == other.cutoff


class Truncated(NamedTuple):
    vector: np.ndarray
    tail_mass: float


def coherent_state(alpha: complex, cutoff: FockCutoff) -> Truncated:
    """Truncated coherent vector ``e^{-|a|^2/2} a^n / sqrt(n!)`` plus the
    probability mass lying above ``n_max`` (not policed here)."""
    alpha = complex(alpha)
    vec = np.empty(cutoff.dim, dtype=complex)
    vec[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff.dim):
        vec[n] = vec[n - 1] * alpha / math.sqrt(n)
    lam = abs(alpha) ** 2
    tail = float(gammainc(cutoff.dim, lam)) if lam > 0 else 0.0
    return Truncated(vec, tail)


def cat_state(alpha: complex, parity: str, cutoff: FockCutoff, normalize: bool = False) -> np.ndarray:
    """``|alpha> + |-alpha>`` (even) or ``|alpha> - |-alpha>`` (odd).

    With ``normalize`` the vector is divided by the analytic norm
    ``sqrt(2 (1 +- exp(-2|alpha|^2)))`` rather than the truncated one.
    """
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    plus, _ = coherent_state(alpha, cutoff)
    minus, _ = coherent_state(-alpha, cutoff)
    sign = 1.0 if parity == "even" else -1.0
    vec = plus + sign * minus
    if normalize:
        n2 = cat_norm_squared(alpha, parity)
        if n2 <= 0.0:
            raise ValueError("odd cat state of the vacuum has zero norm")
        vec = vec / math.sqrt(n2)
    return vec


def cat_norm_squared(alpha: complex, parity: str) -> float:
    sign = 1.0 if parity == "even" else -1.0
    return 2.0 * (1.0 + sign * math.exp(-2.0 * abs(alpha) ** 2))


def default_sites(k: int) -> tuple[AtomSite, ...]:
    return tuple(AtomSite(f"A{i + 1}") for i in range(k))


def compose(
    atom_states: Sequence[Sequence[complex]],
    cavity: np.ndarray | None,
    sites: Sequence[AtomSite] | None = None,
    cutoff: FockCutoff | None = None,
) -> CompositeState:
    """Tensor product of single-atom amplitude pairs and a cavity vector.

    Sites default to ``A1..Ak`` with levels (f, g). The cutoff is inferred
    from the cavity vector length when not given.
    """
    if sites is None:
        sites = default_sites(len(atom_states))
    sites = tuple(sites)
    if len(sites) != len(atom_states):
        raise StructuralError(f"{len(atom_states)} atom states for {len(sites)} sites")
    factors = []
    for site, pair in zip(sites, atom_states):
        v = np.asarray(pair, dtype=complex).reshape(-1)
        if v.size != 2:
            raise StructuralError(f"atom {site.label}: expected 2 amplitudes, got {v.size}")
        _check_unit(v, f"atom {site.label}")
        factors.append(v)
    if cavity is not None:
        c = np.asarray(cavity, dtype=complex).reshape(-1)
        if cutoff is None:
            if c.size < 2:
                raise StructuralError("cavity vector needs at least 2 levels")
            cutoff = FockCutoff(c.size - 1)
        elif c.size != cutoff.dim:
            raise StructuralError(f"cavity vector length {c.size} != {cutoff.dim}")
        _check_unit(c, "cavity")
        factors.append(c)
    elif cutoff is not None:
        raise StructuralError("cutoff given without a cavity vector")
    amp = np.ones(1, dtype=complex)
    for v in factors:
        amp = np.kron(amp, v)
    return CompositeState(sites, cutoff, amp)


def _check_unit(v: np.ndarray, what: str) -> None:
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > INPUT_NORM_TOL:
        raise StructuralError(f"{what} is not normalised (norm={nrm!r})")


def product(left: CompositeState, right: CompositeState) -> CompositeState:
    """Tensor product of two states; at most one of them may carry the cavity."""
    if left.cutoff is not None and right.cutoff is not None:
        raise StructuralError("both states carry a cavity mode")
    sites = left.sites + right.sites
    if right.cutoff is not None or left.cutoff is None:
        return CompositeState(sites, right.cutoff, np.kron(left.amp, right.amp))
    lt = left.amp.reshape(2 ** left.n_atoms, left.cavity_dim)
    amp = np.einsum("an,b->abn", lt, right.amp)
    return CompositeState(sites, left.cutoff, amp)


def inner_product(a: CompositeState, b: CompositeState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if not a.same_space(b):
        raise StructuralError(f"incompatible states: {a.labels}/{a.cutoff} vs {b.labels}/{b.cutoff}")
    return complex(np.vdot(a.amp, b.amp))


def fidelity(a: CompositeState, b: CompositeState) -> float:
    return abs(inner_product(a, b)) ** 2


def _split_axes(state: CompositeState, keep: Sequence[str]) -> tuple[np.ndarray, int]:
    idx = [state.site_index(lb) for lb in keep]
    if len(set(idx)) != len(idx):
        raise StructuralError(f"repeated labels in {list(keep)}")
    rest = [i for i in range(state.n_atoms + 1) if i not in idx]
    t = np.transpose(state.tensor(), idx + rest)
    k = 2 ** len(idx)
    return t.reshape(k, -1), k


def reduced_density(state: CompositeState, keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix of the listed atoms (in the listed order)."""
    m, _ = _split_axes(state, keep)
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def extract(state: CompositeState, keep: Sequence[str], tol: float = 1e-9) -> CompositeState:
    """Pure state of the listed atoms, which must be unentangled from the rest.

    The global phase is taken from the dominant column of the bipartition and
    is therefore arbitrary; compare results with :func:`fidelity`.
    """
    m, _ = _split_axes(state, keep)
    s = np.linalg.svd(m, compute_uv=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise StructuralError("zero state")
    leak = 1.0 - s[0] ** 2 / total
    if leak > tol:
        raise NotSeparableError(f"atoms {list(keep)} are entangled with the rest (1-purity={leak:.3e})")
    col = m[:, int(np.argmax(np.linalg.norm(m, axis=0)))]
    sites = tuple(state.site(lb) for lb in keep)
    return CompositeState(sites, None, col / np.linalg.norm(col))


def cavity_vector(state: CompositeState, tol: float = 1e-9) -> np.ndarray:
    """Cavity ket of a state whose atoms are unentangled from the field."""
    if state.cutoff is None:
        raise StructuralError("state has no cavity")
    m = state.amp.reshape(2 ** state.n_atoms, state.cavity_dim)
    s = np.linalg.svd(m, compute_uv=False)
    leak = 1.0 - s[0] ** 2 / float(np.sum(s**2))
    if leak > tol:
        raise NotSeparableError(f"cavity is entangled with the atoms (1-purity={leak:.3e})")
    row = m[int(np.argmax(np.linalg.norm(m, axis=1)))]
    return row / np.linalg.norm(row)


def replace_cavity(state: CompositeState, cavity: np.ndarray, tol: float = 1e-9) -> CompositeState:
    """Discard the (unentangled) cavity field and put ``cavity`` in its place."""
    if state.cutoff is None:
        raise StructuralError("state has no cavity")
    atoms = extract(state, state.labels, tol) if state.n_atoms else None
    c = np.asarray(cavity, dtype=complex).reshape(-1)
    if c.size != state.cavity_dim:
        raise StructuralError(f"cavity vector length {c.size} != {state.cavity_dim}")
    amp = np.kron(atoms.amp, c) if atoms is not None else c
    return CompositeState(state.sites, state.cutoff, amp)


def summary(state: CompositeState) -> dict:
    """Small JSON-friendly description: populations of each atom's levels and
    the cavity photon statistics."""
    t = np.abs(state.tensor()) ** 2
    out = {"sites": [[s.label, "".join(s.basis)] for s in state.sites], "norm": state.norm()}
    pops = {}
    for i, s in enumerate(state.sites):
        axes = tuple(j for j in range(t.ndim) if j != i)
        p = t.sum(axis=axes)
        pops[s.label] = {s.basis[0]: float(p[0]), s.basis[1]: float(p[1])}
    out["populations"] = pops
    if state.cutoff is not None:
        pn = t.reshape(-1, state.cavity_dim).sum(axis=0)
        out["n_max"] = state.cutoff.n_max
        out["mean_photon_number"] = float(np.dot(np.arange(state.cavity_dim), pn))
        out["top_level_population"] = float(pn[-1])
    return out
