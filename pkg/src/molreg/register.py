"""Two-molecule register: H0 assembly, diagonalization, adiabatic labels.

The time-independent Hamiltonian over the truncated product basis is

    H0 = H_in(1) + H_in(2) - E1 d1 - E2 d2 - 2 d1 d2 / R^3

(atomic units, 1/4pi.eps0 = 1), with d_i = mu_i cos(theta_i) the axial
dipole operator of molecule i.  Eigenstates are tagged with the product
state they adiabatically connect to by ramping (E1, E2, 1/R^3) from zero.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LabelingError, MolregError
from .molecule import MoleculeSpec, cos_theta_N, rotor_energy
from .units import UnitTag, from_atomic

LABEL_RAMP_STEPS = 20      # geometric continuation ramp
LABEL_TIE_TOL = 1e-6       # ambiguity tolerance on squared overlaps


class ProductState(NamedTuple):
    v1: int
    N1: int
    v2: int
    N2: int


@dataclass(frozen=True)
class RegisterConfig:
    mol1: MoleculeSpec
    mol2: MoleculeSpec
    R: float                      # a.u.
    E1: float                     # a.u. static field at molecule 1
    E2: float                     # a.u. static field at molecule 2
    truncation: dict[int, int]    # v -> N_max, applied to both molecules

    def __post_init__(self):
        if self.R <= 0:
            raise MolregError("intermolecular distance R must be > 0")
        if self.E1 < 0 or self.E2 < 0:
            raise MolregError("static fields must be >= 0")
        if not self.truncation:
            raise MolregError("truncation map must be non-empty")


@dataclass
class CoupledBasis:
    energies: np.ndarray                 # ascending, a.u.
    vectors: np.ndarray                  # columns: eigenvectors in product basis
    product_basis: list[ProductState]
    labels: list[ProductState] | None = None

    @property
    def size(self) -> int:
        return len(self.energies)

    def index_of(self, label: ProductState) -> int:
        if self.labels is None:
            raise MolregError("coupled basis has no adiabatic labels yet")
        try:
            return self.labels.index(ProductState(*label))
        except ValueError:
            raise MolregError(f"no eigenstate labeled {tuple(label)}") from None


@dataclass(frozen=True)
class DipoleOperators:
    d1: np.ndarray   # coupled basis, a.u.
    d2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.d1 + self.d2


def _single_states(spec: MoleculeSpec, truncation: dict[int, int]) -> list[tuple[int, int]]:
    states = []
    for v in sorted(truncation):
        spec.level(v)  # raises if v unknown
        for N in range(truncation[v] + 1):
            states.append((v, N))
    return states


def build_basis(config: RegisterConfig) -> list[ProductState]:
    """Tensor-product enumeration under the truncation map, lexicographic."""
    s1 = _single_states(config.mol1, config.truncation)
    s2 = _single_states(config.mol2, config.truncation)
    return [ProductState(v1, N1, v2, N2) for (v1, N1) in s1 for (v2, N2) in s2]


def _single_dipole(spec: MoleculeSpec, states: list[tuple[int, int]]) -> np.ndarray:
    n = len(states)
    d = np.zeros((n, n))
    for a, (va, Na) in enumerate(states):
        for b in range(a + 1, n):
            vb, Nb = states[b]
            d[a, b] = d[b, a] = spec.dipole(va, vb) * cos_theta_N(Na, Nb)
    return d


def build_h0(
    config: RegisterConfig,
    basis: list[ProductState] | None = None,
    stark_scale: float = 1.0,
    dd_scale: float = 1.0,
) -> np.ndarray:
    """Assemble H0 in the product basis (real symmetric, a.u.).

    ``stark_scale`` and ``dd_scale`` rescale the Stark and dipole-dipole
    terms; they exist for the adiabatic continuation ramp.
    """
    s1 = _single_states(config.mol1, config.truncation)
    s2 = _single_states(config.mol2, config.truncation)
    if basis is not None and len(basis) != len(s1) * len(s2):
        raise MolregError("basis does not match the register configuration")
    d1 = _single_dipole(config.mol1, s1)
    d2 = _single_dipole(config.mol2, s2)
    e1 = np.array([rotor_energy(config.mol1, v, N) for (v, N) in s1])
    e2 = np.array([rotor_energy(config.mol2, v, N) for (v, N) in s2])
    i1 = np.eye(len(s1))
    i2 = np.eye(len(s2))
    h = np.kron(np.diag(e1), i2) + np.kron(i1, np.diag(e2))
    h -= stark_scale * config.E1 * np.kron(d1, i2)
    h -= stark_scale * config.E2 * np.kron(i1, d2)
    h -= dd_scale * (2.0 / config.R**3) * np.kron(d1, d2)
    return h


def diagonalize(h0: np.ndarray, basis: list[ProductState] | None = None) -> CoupledBasis:
    """Eigen-decompose H0; ascending eigenvalues, labels left unset."""
    if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
        raise MolregError("H0 must be a square matrix")
    if not np.allclose(h0, h0.T.conj(), atol=1e-12 * max(1.0, np.abs(h0).max())):
        raise MolregError("H0 is not Hermitian")
    energies, vectors = np.linalg.eigh(h0)
    return CoupledBasis(energies=energies, vectors=vectors,
                        product_basis=list(basis) if basis is not None else [])


def adiabatic_labels(config: RegisterConfig, basis: list[ProductState] | None = None) -> CoupledBasis:
    """Diagonalize H0 and attach adiabatic labels by continuation.

    The Stark and dipole-dipole terms are ramped together from zero with a
    geometric schedule; assignments propagate by maximum-overlap matching
    between consecutive eigenbases.
    """
    if basis is None:
        basis = build_basis(config)
    scales = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, LABEL_RAMP_STEPS)])
    prev_vectors = np.eye(len(basis))
    assignment = np.arange(len(basis))  # eigen position -> product index
    coupled = None
    for lam in scales:
        if lam == 0.0:
            continue
        h = build_h0(config, basis, stark_scale=lam, dd_scale=lam)
        coupled = diagonalize(h, basis)
        overlap2 = np.abs(prev_vectors.T @ coupled.vectors) ** 2
        row, col = linear_sum_assignment(-overlap2)
        # row[i] indexes the previous eigenbasis, col[i] the current one
        new_assignment = np.empty(len(basis), dtype=int)
        for r, c in zip(row, col):
            best = overlap2[:, c].copy()
            top = best[r]
            best[r] = -1.0
            runner = best.max()
            if abs(top - runner) < LABEL_TIE_TOL:
                raise LabelingError(
                    f"ambiguous adiabatic matching at ramp {lam:.3g}: state {c} overlaps "
                    f"{top:.3e} vs {runner:.3e} with two ancestors")
            new_assignment[c] = assignment[r]
        assignment = new_assignment
        prev_vectors = coupled.vectors
    assert coupled is not None
    labels = [basis[assignment[k]] for k in range(len(basis))]
    if len(set(labels)) != len(labels):
        raise LabelingError("adiabatic labeling is not a bijection")
    coupled.labels = labels
    return coupled


def dipole_operators(config: RegisterConfig, coupled: CoupledBasis) -> DipoleOperators:
    """mu_i cos(theta_i) operators rotated into the coupled basis."""
    s1 = _single_states(config.mol1, config.truncation)
    s2 = _single_states(config.mol2, config.truncation)
    d1p = np.kron(_single_dipole(config.mol1, s1), np.eye(len(s2)))
    d2p = np.kron(np.eye(len(s1)), _single_dipole(config.mol2, s2))
    v = coupled.vectors
    return DipoleOperators(d1=v.T @ d1p @ v, d2=v.T @ d2p @ v)


def transition(coupled: CoupledBasis, dip: DipoleOperators, i: int, j: int) -> tuple[float, float]:
    """(Bohr angular frequency, |transition dipole|) between eigenstates i, j."""
    if i == j:
        raise MolregError("transition requires two distinct states")
    omega = abs(coupled.energies[i] - coupled.energies[j])
    mu = abs(dip.total[i, j])
    return omega, mu


def build_register(config: RegisterConfig) -> tuple[list[ProductState], CoupledBasis, DipoleOperators]:
    """Convenience: basis, labeled coupled basis and dipole operators."""
    basis = build_basis(config)
    coupled = adiabatic_labels(config, basis)
    dip = dipole_operators(config, coupled)
    return basis, coupled, dip


def export_spectrum(coupled: CoupledBasis, path: str) -> None:
    """CSV spectrum: index, energy_cm, adiabatic label, dominant weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "energy_cm", "label_v1", "label_N1",
                         "label_v2", "label_N2", "dominant_weight"])
        for k in range(coupled.size):
            label = coupled.labels[k] if coupled.labels else ProductState(-1, -1, -1, -1)
            weight = float(np.max(np.abs(coupled.vectors[:, k]) ** 2))
            writer.writerow([
                k,
                f"{from_atomic(coupled.energies[k], UnitTag.wavenumber_cm):.12e}",
                label.v1, label.N1, label.v2, label.N2,
                f"{weight:.9f}",
            ])
