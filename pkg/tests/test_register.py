"""Register assembly: eigen-oracles, separability, Stark perturbation theory."""
import numpy as np
import pytest

from molreg.errors import MolregError
from molreg.molecule import builtin_molecule
from molreg.register import (CoupledBasis, ProductState, RegisterConfig,
                             adiabatic_labels, build_basis, build_h0,
                             build_register, diagonalize, dipole_operators,
                             export_spectrum, transition)
from molreg.units import UnitTag, to_atomic


def jacobi_eigenvalues(a, sweeps=50, tol=1e-14):
    """Cyclic Jacobi rotations: an eigensolver independent of LAPACK."""
    a = a.copy()
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * np.sqrt(np.sum(np.diag(a) ** 2) + 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def small_config(**overrides):
    mol = builtin_molecule("nacs")
    kwargs = dict(
        mol1=mol, mol2=mol,
        R=to_atomic(300.0, UnitTag.nanometer),
        E1=to_atomic(2.0, UnitTag.kilovolt_per_cm),
        E2=to_atomic(1.5, UnitTag.kilovolt_per_cm),
        truncation={0: 2},
    )
    kwargs.update(overrides)
    return RegisterConfig(**kwargs)


def test_basis_enumeration():
    cfg = small_config()
    basis = build_basis(cfg)
    assert len(basis) == 9
    assert basis[0] == ProductState(0, 0, 0, 0)
    assert basis[-1] == ProductState(0, 2, 0, 2)


def test_eigenvalues_match_jacobi_oracle():
    cfg = small_config()
    h = build_h0(cfg)
    coupled = diagonalize(h, build_basis(cfg))
    oracle = jacobi_eigenvalues(h)
    scale = np.max(np.abs(oracle))
    assert np.max(np.abs(coupled.energies - oracle)) <= 1e-10 * scale


def test_zero_coupling_separability():
    """With dd off, two-molecule eigenvalues are sums of one-molecule ones."""
    cfg = small_config()
    h = build_h0(cfg, dd_scale=0.0)
    coupled = diagonalize(h)

    mol = cfg.mol1
    from molreg.molecule import cos_theta_N, rotor_energy
    states = [(0, n) for n in range(3)]
    e = np.diag([rotor_energy(mol, v, n) for (v, n) in states])
    d = np.zeros((3, 3))
    for a, (va, na) in enumerate(states):
        for b, (vb, nb) in enumerate(states):
            d[a, b] = mol.dipole(va, vb) * cos_theta_N(na, nb)
    w1 = np.linalg.eigvalsh(e - cfg.E1 * d)
    w2 = np.linalg.eigvalsh(e - cfg.E2 * d)
    sums = np.sort((w1[:, None] + w2[None, :]).ravel())
    assert np.allclose(coupled.energies, sums, atol=1e-14 + 1e-12 * np.abs(sums).max())


def test_weak_field_second_order_stark():
    """Ground-state shift matches second-order perturbation theory."""
    mol = builtin_molecule("nacs")
    weak = to_atomic(0.005, UnitTag.kilovolt_per_cm)
    cfg = small_config(E1=weak, E2=0.0, R=to_atomic(5000.0, UnitTag.nanometer))
    h0 = build_h0(cfg, stark_scale=0.0, dd_scale=0.0)
    h = build_h0(cfg, dd_scale=0.0)
    e0 = np.linalg.eigvalsh(h0)
    e = np.linalg.eigvalsh(h)
    v = h - h0   # the Stark perturbation
    shift2 = 0.0
    for k in range(1, len(e0)):
        if abs(e0[k] - e0[0]) < 1e-18:
            continue
        shift2 -= abs(v[k, 0]) ** 2 / (e0[k] - e0[0])
    predicted = e0[0] + shift2
    # fourth-order corrections scale as (muE/B)^4; allow 1% of the shift
    assert e[0] - e0[0] == pytest.approx(predicted - e0[0], rel=1e-2)


def test_diagonalize_rejects_non_hermitian():
    with pytest.raises(MolregError):
        diagonalize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(MolregError):
        diagonalize(np.zeros((2, 3)))


def test_adiabatic_labels_bijective():
    cfg = small_config()
    coupled = adiabatic_labels(cfg)
    assert coupled.labels is not None
    assert len(set(coupled.labels)) == coupled.size
    # the global ground state connects to the rotational ground product state
    assert coupled.labels[0] == ProductState(0, 0, 0, 0)


def test_index_of_unknown_label(adder_register):
    _, _, coupled, _ = adder_register
    with pytest.raises(MolregError):
        coupled.index_of(ProductState(9, 9, 9, 9))


def test_transition_basic(adder_register):
    _, _, coupled, dip = adder_register
    omega, mu = transition(coupled, dip, 0, 1)
    assert omega > 0 and mu >= 0
    omega_rev, mu_rev = transition(coupled, dip, 1, 0)
    assert omega_rev == pytest.approx(omega, rel=1e-14)
    assert mu_rev == pytest.approx(mu, rel=1e-12)
    with pytest.raises(MolregError):
        transition(coupled, dip, 3, 3)


def test_adder_splitting_scales_as_r_cubed():
    """The dd shift of the |110>-|111> line falls as 1/R^3."""
    mol = builtin_molecule("nacs_desk")

    def splitting(r_nm):
        cfg = RegisterConfig(
            mol1=mol, mol2=mol, R=to_atomic(r_nm, UnitTag.nanometer),
            E1=to_atomic(2.0, UnitTag.kilovolt_per_cm),
            E2=to_atomic(1.5, UnitTag.kilovolt_per_cm),
            truncation={0: 1})
        _, coupled, dip = build_register(cfg)
        w_active = abs(coupled.energies[coupled.index_of(ProductState(0, 1, 0, 1))]
                       - coupled.energies[coupled.index_of(ProductState(0, 1, 0, 0))])
        w_unwanted = abs(coupled.energies[coupled.index_of(ProductState(0, 0, 0, 1))]
                         - coupled.energies[coupled.index_of(ProductState(0, 0, 0, 0))])
        return abs(w_active - w_unwanted)

    s300 = splitting(300.0)
    s600 = splitting(600.0)
    assert s300 / s600 == pytest.approx(8.0, rel=1e-2)


def test_export_spectrum(tmp_path, adder_register):
    _, _, coupled, _ = adder_register
    out = tmp_path / "spectrum.csv"
    export_spectrum(coupled, str(out))
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("index,energy_cm")
    assert len(lines) == coupled.size + 1


def test_config_validation():
    with pytest.raises(MolregError):
        small_config(R=0.0)
    with pytest.raises(MolregError):
        small_config(E1=-1.0)
    with pytest.raises(MolregError):
        small_config(truncation={})
