"""Bosonic many-body layer on top of the coupling matrices.

Fixed particle number throughout: the basis is the set of occupation
vectors with a given total, so number conservation is structural rather
than numerical. Assembly walks the basis with scalar arithmetic; for the
small windows this package targets that is both fast enough and easy to
check against an independent operator-algebra construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import eigsh

from .couplings import CouplingSet
from .modes import ModeIndex

__all__ = [
    "BasisTooLarge",
    "FockBasis",
    "build_basis",
    "ManyBodyOperator",
    "build_hamiltonian",
    "single_particle_matrix",
    "interaction_shift",
    "eigensolve",
    "time_evolve",
    "occupations",
    "write_eigenvalues",
    "write_occupations",
]

MAX_BASIS_DIM = 200_000
DENSE_CUTOFF = 2000
RESIDUAL_RTOL = 1e-9


class BasisTooLarge(ValueError):
    def __init__(self, dim: int):
        self.dim = dim
        super().__init__(
            f"Fock basis would have {dim} states (cap {MAX_BASIS_DIM}); "
            "shrink the window or the particle number"
        )


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number basis at fixed total particle number.

    States are tuples ordered lexicographically; index maps a tuple back to
    its position.
    """

    modes: tuple[ModeIndex, ...]
    n_particles: int
    states: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, state: tuple[int, ...]) -> int:
        return self._index[state]

    @property
    def _index(self) -> dict[tuple[int, ...], int]:
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_index_cache", cache)
        return cache


def _compositions(total: int, slots: int):
    # lexicographic: first slot slowest
    if slots == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, slots - 1):
            yield (head,) + rest


def build_basis(modes, n_particles: int) -> FockBasis:
    """All occupation vectors of n_particles over the given modes.

    Accepts a mode window or any sequence of mode indices. Refuses to build
    a basis past the dimension cap instead of thrashing memory.
    """
    if hasattr(modes, "modes"):
        modes = modes.modes
    modes = tuple(modes)
    if n_particles < 0:
        raise ValueError("particle number must be non-negative")
    if not modes:
        raise ValueError("need at least one mode")
    dim = math.comb(n_particles + len(modes) - 1, n_particles)
    if dim > MAX_BASIS_DIM:
        raise BasisTooLarge(dim)
    states = tuple(_compositions(n_particles, len(modes)))
    return FockBasis(modes=modes, n_particles=n_particles, states=states)


@dataclass
class ManyBodyOperator:
    basis: FockBasis
    matrix: scipy.sparse.csr_matrix

    @property
    def dim(self) -> int:
        return self.basis.dim

    def norm_one(self) -> float:
        """Maximum absolute column sum, used to scale residual tolerances."""
        return float(np.max(np.abs(self.matrix).sum(axis=0)))


def build_hamiltonian(couplings: CouplingSet, n_particles: int) -> ManyBodyOperator:
    """Assemble the fixed-number Hamiltonian as a sparse matrix.

    Diagonal: chemical potentials plus the density-density energy
    sign * sum_{n,q} u[n,q] * (3 occ_n + 4 occ_n occ_q), attractive meaning
    sign -1. Off-diagonal: t[i, j] moves a particle from j to i with the
    usual bosonic matrix element. Only entries inside the fixed-number
    sector are ever generated.
    """
    basis = build_basis(couplings.window, n_particles)
    m = len(basis.modes)
    mu = couplings.mu
    t = couplings.t
    u = couplings.u
    sign = -1.0 if couplings.interaction_sign == "attractive" else 1.0

    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for a, occ in enumerate(basis.states):
        diag = 0.0
        for n in range(m):
            diag += mu[n] * occ[n]
        for n in range(m):
            for q in range(m):
                if u[n, q] != 0.0:
                    diag += sign * u[n, q] * (3.0 * occ[n] + 4.0 * occ[n] * occ[q])
        rows.append(a)
        cols.append(a)
        vals.append(complex(diag))
        for i in range(m):
            for j in range(m):
                if i == j or occ[j] == 0 or t[i, j] == 0j:
                    continue
                target = list(occ)
                target[j] -= 1
                target[i] += 1
                b = basis.index_of(tuple(target))
                amp = t[i, j] * (math.sqrt(occ[j]) * math.sqrt(occ[i] + 1))
                rows.append(b)
                cols.append(a)
                vals.append(amp)
    matrix = scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex
    )
    return ManyBodyOperator(basis=basis, matrix=matrix)


def single_particle_matrix(couplings: CouplingSet) -> np.ndarray:
    """Hermitian one-body matrix: chemical potentials on the diagonal plus t."""
    h = couplings.t.copy()
    h[np.diag_indices_from(h)] = couplings.mu
    return h


def interaction_shift(couplings: CouplingSet) -> np.ndarray:
    """Diagonal energy a single particle picks up from the interaction terms."""
    sign = -1.0 if couplings.interaction_sign == "attractive" else 1.0
    return sign * (3.0 * couplings.u.sum(axis=1) + 4.0 * np.diag(couplings.u))


def eigensolve(
    operator: ManyBodyOperator, n_states: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest eigenpairs, dense below the cutoff and Lanczos above it.

    Every returned pair is residual-checked against the one-norm of the
    operator; a failed check raises instead of returning bad pairs.
    """
    dim = operator.dim
    if dim < DENSE_CUTOFF:
        values, vectors = scipy.linalg.eigh(operator.matrix.toarray())
        if n_states is not None:
            values = values[:n_states]
            vectors = vectors[:, :n_states]
    else:
        k = n_states if n_states is not None else 6
        if k >= dim:
            raise ValueError("n_states must be below the basis dimension")
        values, vectors = eigsh(operator.matrix, k=k, which="SA")
        order = np.argsort(values)
        values = values[order]
        vectors = vectors[:, order]
    scale = operator.norm_one()
    for idx in range(len(values)):
        residual = np.linalg.norm(
            operator.matrix @ vectors[:, idx] - values[idx] * vectors[:, idx]
        )
        if residual > RESIDUAL_RTOL * max(scale, 1.0):
            raise RuntimeError(
                f"eigenpair {idx} residual {residual:.3e} exceeds "
                f"{RESIDUAL_RTOL:.1e} * max(norm, 1)"
            )
    return values, vectors


def time_evolve(
    operator: ManyBodyOperator, initial: np.ndarray, times
) -> np.ndarray:
    """Evolve a state through exp(-i H t) via the dense eigendecomposition.

    Returns one row per requested time. Intended for the small bases this
    package produces; refuses dimensions past the dense cutoff.
    """
    if operator.dim >= DENSE_CUTOFF:
        raise ValueError("time evolution is dense only; basis too large")
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (operator.dim,):
        raise ValueError("initial state has the wrong dimension")
    values, vectors = scipy.linalg.eigh(operator.matrix.toarray())
    weights = vectors.conj().T @ initial
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, values))
    return (phases * weights) @ vectors.T


def occupations(basis: FockBasis, state: np.ndarray) -> np.ndarray:
    """Expected occupation of each mode in a normalized many-body state."""
    weights = np.abs(np.asarray(state)) ** 2
    table = np.asarray(basis.states, dtype=float)
    return weights @ table


def write_eigenvalues(values, path) -> None:
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["index,value"]
    for i, v in enumerate(np.asarray(values)):
        lines.append(f"{i},{format(float(v), '.17g')}")
    path.write_text("\n".join(lines) + "\n")


def write_occupations(basis: FockBasis, vectors: np.ndarray, path) -> None:
    """Per-eigenstate mode occupations, one row per (state, mode)."""
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["state,l,p,occupation"]
    vectors = np.asarray(vectors)
    for s in range(vectors.shape[1]):
        occ = occupations(basis, vectors[:, s])
        for mode, value in zip(basis.modes, occ):
            lines.append(f"{s},{mode.l},{mode.p},{format(float(value), '.17g')}")
    path.write_text("\n".join(lines) + "\n")
