"""Unit conversions: pinned values against independent constants, roundtrips."""
import math

import pytest
from hypothesis import given, strategies as st

from molreg.errors import ConfigurationError
from molreg.units import UnitTag, dimension_of, from_atomic, to_atomic

ALL_TAGS = list(UnitTag)


def test_debye_pinned():
    # 1 D = 1e-21/c C m over e*a0, from CODATA 2018 constants
    assert to_atomic(1.0, UnitTag.debye) == pytest.approx(0.3934303, rel=1e-6)


def test_wavenumber_pinned():
    # h c (1 cm^-1) / E_h
    assert to_atomic(1.0, UnitTag.wavenumber_cm) == pytest.approx(4.5563353e-6, rel=1e-7)


def test_static_field_pinned():
    # 2 kV/cm = 2e5 V/m over the atomic field unit
    assert to_atomic(2.0, UnitTag.kilovolt_per_cm) == pytest.approx(3.8894e-7, rel=1e-4)


def test_zero_maps_to_zero():
    for tag in ALL_TAGS:
        assert to_atomic(0.0, tag) == 0.0
        assert from_atomic(0.0, tag) == 0.0


def test_time_units_consistent():
    assert to_atomic(1.0, UnitTag.microsecond) == pytest.approx(
        1e-6 * to_atomic(1.0, UnitTag.second), rel=1e-14)
    assert to_atomic(1.0, UnitTag.nanosecond) == pytest.approx(
        1e-9 * to_atomic(1.0, UnitTag.second), rel=1e-14)


def test_energy_units_consistent():
    # 1 cm^-1 corresponds to c * 100 Hz-equivalents
    ratio = to_atomic(1.0, UnitTag.wavenumber_cm) / to_atomic(1.0, UnitTag.hertz)
    assert ratio == pytest.approx(299792458.0 * 100.0, rel=1e-12)


def test_string_tags_accepted():
    assert to_atomic(1.0, "debye") == to_atomic(1.0, UnitTag.debye)


def test_unknown_tag_raises():
    with pytest.raises(ConfigurationError):
        to_atomic(1.0, "furlong")


def test_dimension_of():
    assert dimension_of(UnitTag.debye) == "dipole"
    assert dimension_of(UnitTag.nanometer) == "length"
    assert dimension_of(UnitTag.kilovolt_per_cm) == "field"


@given(
    x=st.floats(min_value=1e-12, max_value=1e12,
                allow_nan=False, allow_infinity=False),
    tag=st.sampled_from(ALL_TAGS),
)
def test_roundtrip(x, tag):
    back = from_atomic(to_atomic(x, tag), tag)
    assert math.isclose(back, x, rel_tol=1e-14)
