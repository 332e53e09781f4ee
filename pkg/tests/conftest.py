"""Shared fixtures: registers are expensive to build, so they are session-scoped."""
import numpy as np
import pytest

from molreg.molecule import builtin_molecule
from molreg.register import RegisterConfig, build_register
from molreg.units import UnitTag, to_atomic


@pytest.fixture(scope="session")
def dj_register():
    """Paper-scale rotational register: 25 states, v = 0, N <= 4."""
    mol = builtin_molecule("nacs")
    cfg = RegisterConfig(
        mol1=mol, mol2=mol,
        R=to_atomic(300.0, UnitTag.nanometer),
        E1=to_atomic(2.0, UnitTag.kilovolt_per_cm),
        E2=to_atomic(1.5, UnitTag.kilovolt_per_cm),
        truncation={0: 4},
    )
    return cfg, *build_register(cfg)


@pytest.fixture(scope="session")
def adder_register():
    """Desk-scale adder register: 64 states, low vibrational carrier."""
    mol = builtin_molecule("nacs_desk")
    cfg = RegisterConfig(
        mol1=mol, mol2=mol,
        R=to_atomic(150.0, UnitTag.nanometer),
        E1=to_atomic(2.0, UnitTag.kilovolt_per_cm),
        E2=to_atomic(1.5, UnitTag.kilovolt_per_cm),
        truncation={0: 2, 2: 4},
    )
    return cfg, *build_register(cfg)


@pytest.fixture
def two_level():
    """Hand-built two-level system: gap omega0, transition dipole mu."""
    from molreg.register import CoupledBasis, DipoleOperators

    omega0 = 1.0e-5   # a.u. (~2.2 cm^-1)
    mu = 0.4          # a.u. (~1 D)
    coupled = CoupledBasis(
        energies=np.array([0.0, omega0]),
        vectors=np.eye(2),
        product_basis=[],
        labels=None,
    )
    dip = DipoleOperators(d1=np.array([[0.0, mu], [mu, 0.0]]),
                          d2=np.zeros((2, 2)))
    return coupled, dip, omega0, mu
