"""Unit conversions to and from atomic units (hbar = 1).

All internal computation in this package is done in atomic units; unit
tags appear only at input/output boundaries.  Conversion factors are
derived from CODATA 2018 recommended values so that the numbers quoted
in the documentation are reproducible bit-for-bit.
"""
from __future__ import annotations

import enum

from .errors import ConfigurationError

# CODATA 2018
HARTREE_J = 4.3597447222071e-18     # Hartree energy in J
BOHR_M = 5.29177210903e-11          # Bohr radius in m
ATOMIC_TIME_S = 2.4188843265857e-17  # hbar / E_h
ATOMIC_FIELD_V_M = 5.14220674763e11  # E_h / (e a0)
E_CHARGE_C = 1.602176634e-19        # exact
PLANCK_JS = 6.62607015e-34          # exact
C_M_S = 299792458.0                 # exact

# 1 Debye = 1e-21/c C m ; atomic dipole unit is e*a0
_DEBYE_CM = 1e-21 / C_M_S
_EA0_CM = E_CHARGE_C * BOHR_M
DEBYE_AU = _DEBYE_CM / _EA0_CM

# photon of wavenumber 1 cm^-1: E = h c * (100 m^-1)
WAVENUMBER_AU = PLANCK_JS * C_M_S * 100.0 / HARTREE_J
# photon of frequency 1 Hz: E = h * nu
HERTZ_AU = PLANCK_JS / HARTREE_J


class UnitTag(enum.Enum):
    atomic = "atomic"
    debye = "debye"
    wavenumber_cm = "wavenumber_cm"
    hertz = "hertz"
    second = "second"
    microsecond = "microsecond"
    nanosecond = "nanosecond"
    volt_per_meter = "volt_per_meter"
    kilovolt_per_cm = "kilovolt_per_cm"
    nanometer = "nanometer"
    bohr = "bohr"


# tag -> (dimension, multiplicative factor to the atomic unit of that dimension)
_FACTORS: dict[UnitTag, tuple[str, float]] = {
    UnitTag.atomic: ("any", 1.0),
    UnitTag.debye: ("dipole", DEBYE_AU),
    UnitTag.wavenumber_cm: ("energy", WAVENUMBER_AU),
    UnitTag.hertz: ("energy", HERTZ_AU),
    UnitTag.second: ("time", 1.0 / ATOMIC_TIME_S),
    UnitTag.microsecond: ("time", 1e-6 / ATOMIC_TIME_S),
    UnitTag.nanosecond: ("time", 1e-9 / ATOMIC_TIME_S),
    UnitTag.volt_per_meter: ("field", 1.0 / ATOMIC_FIELD_V_M),
    UnitTag.kilovolt_per_cm: ("field", 1e5 / ATOMIC_FIELD_V_M),
    UnitTag.nanometer: ("length", 1e-9 / BOHR_M),
    UnitTag.bohr: ("length", 1.0),
}


def _resolve(tag: UnitTag | str) -> UnitTag:
    if isinstance(tag, UnitTag):
        return tag
    try:
        return UnitTag(tag)
    except ValueError:
        raise ConfigurationError(f"unknown unit tag: {tag!r}") from None


def to_atomic(value: float, tag: UnitTag | str) -> float:
    """Convert ``value`` expressed in ``tag`` units to atomic units."""
    return value * _FACTORS[_resolve(tag)][1]


def from_atomic(value: float, tag: UnitTag | str) -> float:
    """Convert ``value`` in atomic units to ``tag`` units."""
    return value / _FACTORS[_resolve(tag)][1]


def dimension_of(tag: UnitTag | str) -> str:
    return _FACTORS[_resolve(tag)][0]
