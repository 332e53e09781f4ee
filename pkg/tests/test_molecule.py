"""Single-molecule data: cos(theta) matrix elements against a quadrature oracle."""
import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_legendre

from molreg.errors import MoleculeLoadError, MolregError
from molreg.molecule import (RotState, builtin_molecule, cos_theta_N,
                             load_molecule, molecule_from_dict, rotor_energy)
from molreg.units import UnitTag, to_atomic


def cos_theta_quadrature(Na, Nb):
    """<Na,0|cos|Nb,0> by direct integration of normalized Legendre polynomials."""
    norm = np.sqrt((2 * Na + 1) / 2.0) * np.sqrt((2 * Nb + 1) / 2.0)

    def integrand(x):
        return eval_legendre(Na, x) * x * eval_legendre(Nb, x)

    val, _ = quad(integrand, -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    return norm * val


@pytest.mark.parametrize("Na", range(7))
@pytest.mark.parametrize("Nb", range(7))
def test_cos_theta_against_quadrature(Na, Nb):
    assert cos_theta_N(Na, Nb) == pytest.approx(cos_theta_quadrature(Na, Nb), abs=1e-12)


def test_cos_theta_selection_rule():
    assert cos_theta_N(0, 2) == 0.0
    assert cos_theta_N(3, 3) == 0.0
    assert cos_theta_N(0, 1) == pytest.approx(1.0 / np.sqrt(3.0), rel=1e-14)


def test_rot_state_validation():
    with pytest.raises(MolregError):
        RotState(N=-1)
    with pytest.raises(MolregError):
        RotState(N=1, mN=1)


def test_rotor_energy():
    mol = builtin_molecule("nacs")
    b = mol.level(0).rot_const
    assert rotor_energy(mol, 0, 0) == 0.0
    assert rotor_energy(mol, 0, 3) == pytest.approx(12.0 * b, rel=1e-14)
    gap = rotor_energy(mol, 2, 0) - rotor_energy(mol, 0, 0)
    assert gap == pytest.approx(to_atomic(196.43, UnitTag.wavenumber_cm), rel=1e-12)


def test_builtin_nacs_dipoles():
    mol = builtin_molecule("nacs")
    assert mol.dipole(0, 0) == pytest.approx(to_atomic(4.6, UnitTag.debye), rel=1e-12)
    assert mol.dipole(0, 2) == mol.dipole(2, 0)
    assert mol.dipole(0, 1) == 0.0  # unlisted pair


def test_builtin_unknown_raises():
    with pytest.raises(MoleculeLoadError):
        builtin_molecule("unobtainium")


def test_roundtrip_dict():
    mol = builtin_molecule("nacs")
    again = molecule_from_dict(mol.to_dict())
    assert again.vib_numbers == mol.vib_numbers
    assert again.dipole(0, 2) == pytest.approx(mol.dipole(0, 2), rel=1e-12)
    assert again.level(2).rot_const == pytest.approx(mol.level(2).rot_const, rel=1e-12)


def _base_data():
    return {
        "name": "toy",
        "levels": [{"v": 0, "energy_cm": 0.0, "B_cm": 0.05},
                   {"v": 1, "energy_cm": 100.0, "B_cm": 0.05}],
        "mu_perm_debye": {"0": 4.0, "1": 4.0},
        "mu_trans_debye": [{"v1": 0, "v2": 1, "value": 0.1}],
    }


def test_load_validation_errors(tmp_path):
    bad_cases = []

    d = _base_data()
    del d["levels"]
    bad_cases.append(d)

    d = _base_data()
    d["levels"][1]["energy_cm"] = -1.0      # not increasing
    bad_cases.append(d)

    d = _base_data()
    d["levels"][0]["B_cm"] = 0.0            # B must be positive
    bad_cases.append(d)

    d = _base_data()
    d["mu_perm_debye"]["7"] = 1.0           # unknown v
    bad_cases.append(d)

    d = _base_data()
    d["mu_trans_debye"].append({"v1": 1, "v2": 0, "value": 0.2})  # asymmetric
    bad_cases.append(d)

    d = _base_data()
    d["mu_trans_debye"][0]["v2"] = 0        # diagonal entry
    bad_cases.append(d)

    for case in bad_cases:
        with pytest.raises(MoleculeLoadError):
            molecule_from_dict(case)


def test_load_molecule_file_errors(tmp_path):
    with pytest.raises(MoleculeLoadError):
        load_molecule(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MoleculeLoadError):
        load_molecule(str(bad))
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_base_data()))
    mol = load_molecule(str(good))
    assert mol.name == "toy"
