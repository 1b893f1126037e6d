import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from cavdiss import units
from cavdiss.units import Quantity, UnitError, convert

ROOT = Path(__file__).resolve().parents[1]

# independent literals from the NIST CODATA 2018 table
HARTREE_PER_CM1 = 4.556335252912e-6
FS_PER_AU_TIME = 2.4188843265857e-2


def test_zero_maps_to_zero():
    assert convert(Quantity(0.0, "cm-1"), "hartree").value == 0.0


def test_wavenumber_to_hartree():
    v = convert(Quantity(1514.9, "cm-1"), "hartree").value
    assert v == pytest.approx(1514.9 * HARTREE_PER_CM1, rel=1e-11)


def test_picoseconds_to_au_time():
    v = convert(Quantity(1.5, "ps"), "au_time").value
    assert v == pytest.approx(1500.0 / FS_PER_AU_TIME, rel=1e-12)


def test_incompatible_units_name_both():
    with pytest.raises(UnitError, match="cm-1.*fs"):
        convert(Quantity(1.0, "cm-1"), "fs")


def test_unknown_unit():
    with pytest.raises(UnitError):
        Quantity(1.0, "furlong")


def test_intensity_factor_from_si():
    eps0, c, e_au = 8.8541878128e-12, 299792458.0, 5.14220674763e11
    expected = 0.5 * eps0 * c * e_au**2 / 1e4
    assert units.field_to_intensity(1.0) == pytest.approx(expected, rel=1e-14)
    assert units.field_to_intensity(1.0) == pytest.approx(3.51e16, rel=2e-3)


def test_threshold_field_intensity():
    # E_D = 0.652 E ~ 0.06 aJ gives a field of about 0.0212 au, i.e. ~1e13 W/cm^2
    e = units.to_au(0.06, "aJ") / math.sqrt(0.85 / 2)
    assert e == pytest.approx(0.0212, rel=0.01)
    assert units.field_to_intensity(e) == pytest.approx(1.6e13, rel=0.05)


def test_field_intensity_zero_and_negative():
    assert units.field_to_intensity(0.0) == 0.0
    with pytest.raises(ValueError):
        units.field_to_intensity(-1e-3)


@given(st.just(0.0) | st.floats(min_value=1e-100, max_value=1e3))
def test_intensity_quadratic(e):
    assert units.field_to_intensity(2 * e) == pytest.approx(4 * units.field_to_intensity(e), rel=1e-15)
    assert units.intensity_to_field(units.field_to_intensity(e)) == pytest.approx(e, rel=1e-12, abs=1e-300)


_GROUPS = {}
for tag in units.UNIT_TAGS:
    _GROUPS.setdefault(units.dimension(tag), []).append(tag)
_PAIRS = [(a, b) for tags in _GROUPS.values() for a in tags for b in tags]


@given(
    st.sampled_from(_PAIRS),
    st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False),
)
def test_round_trip(pair, value):
    a, b = pair
    back = convert(convert(Quantity(value, a), b), a).value
    assert back == pytest.approx(value, rel=1e-12, abs=1e-300)


def test_thz_uses_planck_relation():
    # E = h nu; 0.01 aJ is about 15.09 THz
    assert convert(Quantity(0.01, "aJ"), "THz").value == pytest.approx(1e-20 / 6.62607015e-34 / 1e12, rel=1e-9)


def test_constants_table_file_matches_code():
    path = ROOT / "constants.tsv"
    assert path.read_text() == units.constants_table()
