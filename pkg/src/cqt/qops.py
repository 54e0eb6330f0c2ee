"""Primitive operations on :class:`~cqt.hilbert.CompositeState`.

Ramsey rotations act on one atom, the dispersive gate imprints a
photon-number phase conditioned on level f, ``displace`` injects a coherent
field, ``jc_evolve`` runs resonant Jaynes-Cummings exchange between a probe
atom and the cavity, and measurement collapses one atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.sparse import diags
from scipy.sparse.linalg import expm_multiply

from .errors import (
    NonUnitaryError,
    NumericalError,
    PostselectionError,
    StructuralError,
    TruncationError,
    UsageError,
)
from .hilbert import CompositeState

UNITARY_TOL = 1e-12
MIN_BRANCH = 1e-14
DENSE_TAIL_DIM = 400
_S2 = 1 / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class Gate2:
    """2x2 unitary on one atom; column j is the image of basis level j."""

    matrix: np.ndarray = field(repr=False)
    name: str | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise StructuralError(f"gate must be 2x2, got shape {m.shape}")
        err = np.max(np.abs(m.conj().T @ m - np.eye(2)))
        if err > UNITARY_TOL:
            raise NonUnitaryError(f"gate {self.name or ''} is not unitary (|U^dag U - I| = {err:.2e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        if not isinstance(other, Gate2):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash((self.name, self.matrix.tobytes()))


R_H = Gate2(_S2 * np.array([[1, 1], [-1, 1]]), "R_H")
K = Gate2(_S2 * np.array([[1, -1], [1, 1]]), "K")
R5 = Gate2(np.array([[0, -1], [1, 0]]), "R5")
Z_CORR = Gate2(np.array([[1, 0], [0, -1]]), "Z_CORR")
X_CORR = Gate2(np.array([[0, 1], [1, 0]]), "X_CORR")
XZ_CORR = Gate2(np.array([[0, 1], [-1, 0]]), "XZ_CORR")
IDENTITY = Gate2(np.eye(2), "IDENTITY")

PRESETS: dict[str, Gate2] = {g.name: g for g in (R_H, K, R5, Z_CORR, X_CORR, XZ_CORR, IDENTITY)}


@dataclass(frozen=True)
class MeasurementOutcome:
    atom: str
    level: str
    probability: float
    post_state: CompositeState


def _on_axis(state: CompositeState, axis: int, fn) -> CompositeState:
    t = np.moveaxis(state.tensor(), axis, 0)
    t = np.moveaxis(fn(t), 0, axis)
    return state.with_amp(t.reshape(-1))


def apply_gate(state: CompositeState, atom: str, gate: Gate2 | np.ndarray) -> CompositeState:
    if not isinstance(gate, Gate2):
        gate = Gate2(gate)
    i = state.site_index(atom)
    m = gate.matrix
    return _on_axis(state, i, lambda t: np.tensordot(m, t, axes=(1, 0)))


def _require(state: CompositeState, atom: str, basis: tuple[str, str], op: str) -> int:
    i = state.site_index(atom)
    if state.sites[i].basis != basis:
        raise UsageError(f"{op} needs atom levels {basis}; {atom} has {state.sites[i].basis}")
    if state.cutoff is None:
        raise StructuralError(f"{op} needs a cavity mode")
    return i


def dispersive_gate(state: CompositeState, atom: str, phi: float) -> CompositeState:
    """``exp(i phi a^dag a)|f><f| + |g><g|`` on ``atom``."""
    i = _require(state, atom, ("f", "g"), "dispersive_gate")
    phases = np.exp(1j * phi * np.arange(state.cavity_dim))

    def fn(t):
        t = t.copy()
        t[0] = t[0] * phases
        return t

    return _on_axis(state, i, fn)


@lru_cache(maxsize=64)
def displacement_matrix(beta: complex, dim: int) -> np.ndarray:
    """``exp(beta a^dag - beta* a)`` exponentiated inside a ``dim``-level space."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    gen = beta * a.conj().T - np.conj(beta) * a
    u = expm(gen)
    u.setflags(write=False)
    return u


def displacement_tail(cavity: np.ndarray, beta: complex) -> float:
    """Mass the exact displacement would push above the truncation.

    ``cavity`` is an (n_rows, dim) array of cavity slices. The displacement is
    re-exponentiated in a padded space whose own boundary is far away, and
    the weight landing beyond the original top level is returned.
    """
    dim = cavity.shape[-1]
    b = abs(beta)
    pad = int(math.ceil(b * b + 12 * b + 40))
    big_dim = dim + pad
    if big_dim <= DENSE_TAIL_DIM:
        big = displacement_matrix(complex(beta), big_dim)
        moved = cavity @ big[:, :dim].T
    else:
        # large shifts: act with the sparse generator instead of a dense expm
        root = np.sqrt(np.arange(1, big_dim))
        gen = diags([beta * root, -np.conj(beta) * root], [-1, 1], format="csr", dtype=complex)
        padded = np.zeros((big_dim, cavity.shape[0]), dtype=complex)
        padded[:dim] = cavity.T
        moved = expm_multiply(gen, padded).T
    return float(np.sum(np.abs(moved[:, dim:]) ** 2))


def displace(state: CompositeState, beta: complex, tail_tol: float = 1e-12) -> CompositeState:
    """Inject a coherent field ``beta`` into the cavity.

    The truncated operator is exactly unitary; ``tail_tol`` bounds how far the
    result may differ from the untruncated displacement (``math.inf`` skips
    the check).
    """
    if state.cutoff is None:
        raise StructuralError("displace needs a cavity mode")
    beta = complex(beta)
    if beta == 0:
        return state
    m = state.amp.reshape(-1, state.cavity_dim)
    if math.isfinite(tail_tol):
        tail = displacement_tail(m, beta) / max(state.norm() ** 2, MIN_BRANCH)
        if tail >= tail_tol:
            raise TruncationError(
                f"displacement by {beta} leaves the n_max={state.cutoff.n_max} space", tail
            )
    u = displacement_matrix(beta, state.cavity_dim)
    return state.with_amp((m @ u.T).reshape(-1))


def jc_evolve(state: CompositeState, probe: str, gt: float, top_tol: float = 1e-10) -> CompositeState:
    """Resonant exchange ``(f, n) <-> (e, n-1)`` with pulse area ``gt``.

    Each block rotates as ``cos(gt sqrt n)`` / ``-i sin(gt sqrt n)``; ``(f, 0)`` is
    untouched and ``(e, n_max)`` is frozen because its partner is outside the
    space, so any amplitude there above ``top_tol`` is an error.
    """
    i = _require(state, probe, ("f", "e"), "jc_evolve")
    nmax = state.cutoff.n_max
    t = state.tensor()
    top = float(np.max(np.abs(np.take(np.take(t, 1, axis=i), nmax, axis=-1))))
    if top > top_tol:
        raise TruncationError(f"probe {probe}: amplitude on (e, n_max={nmax})", top)
    root = np.sqrt(np.arange(1, nmax + 1))
    c = np.cos(gt * root)
    s = np.sin(gt * root)

    def fn(t):
        f, e = t[0], t[1]
        nf = f.astype(complex, copy=True)
        ne = e.astype(complex, copy=True)
        nf[..., 1:] = c * f[..., 1:] - 1j * s * e[..., :-1]
        ne[..., :-1] = c * e[..., :-1] - 1j * s * f[..., 1:]
        return np.stack([nf, ne])

    return _on_axis(state, i, fn)


def _branch(state: CompositeState, atom: str, level: str) -> tuple[float, CompositeState, float]:
    i = state.site_index(atom)
    b = state.sites[i].index(level)
    total = state.norm() ** 2
    if total < MIN_BRANCH:
        raise NumericalError(f"state norm^2 {total:.3e} is degenerate")
    t = state.tensor().copy()
    np.moveaxis(t, i, 0)[1 - b] = 0.0
    projected = state.with_amp(t.reshape(-1))
    weight = projected.norm() ** 2
    return weight / total, projected, weight


def postselect(
    state: CompositeState, atom: str, level: str, min_prob: float = MIN_BRANCH
) -> tuple[float, CompositeState]:
    """Condition on ``atom`` being found in ``level``; returns (Born probability,
    renormalised post-state)."""
    p, projected, _ = _branch(state, atom, level)
    if p < min_prob:
        raise PostselectionError(f"cannot post-select {atom} in {level}", p)
    return p, projected.normalized()


def measure_atom(state: CompositeState, atom: str, rng: np.random.Generator) -> MeasurementOutcome:
    site = state.site(atom)
    p0, proj0, _ = _branch(state, atom, site.basis[0])
    k = 0 if rng.random() < p0 else 1
    if k == 0:
        p, proj = p0, proj0
    else:
        p, proj, _ = _branch(state, atom, site.basis[1])
    if p < MIN_BRANCH:
        raise NumericalError(f"sampled a branch of probability {p:.3e}")
    return MeasurementOutcome(atom, site.basis[k], p, proj.normalized())


def outcome_probabilities(state: CompositeState, atom: str) -> dict[str, float]:
    site = state.site(atom)
    return {lv: _branch(state, atom, lv)[0] for lv in site.basis}


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)


def expectation_sigma_xx(state: CompositeState, a1: str, a2: str) -> float:
    """<sigma_x^1 sigma_x^2> for two (f, g) atoms."""
    for lb in (a1, a2):
        if state.site(lb).basis != ("f", "g"):
            raise UsageError(f"sigma_x expectation needs (f, g) atoms; {lb} is {state.site(lb).basis}")
    if a1 == a2:
        raise StructuralError("sigma_xx needs two distinct atoms")
    flipped = state
    for lb in (a1, a2):
        flipped = _on_axis(flipped, flipped.site_index(lb), lambda t: t[::-1])
    val = np.vdot(state.amp, flipped.amp) / state.norm() ** 2
    return float(val.real)
