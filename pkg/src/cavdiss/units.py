"""Atomic-unit conversions for the reporting units used in the simulations.

Everything inside the solver is in atomic units (hbar = m_e = e = 1).  This
module is the only place that knows about cm^-1, aJ, fs, W/cm^2 and friends.

All factors are CODATA 2018.  ``CONSTANTS`` is the single source; the
repository file ``constants.tsv`` is generated from it with
:func:`write_constants_table`.

Note on THz: energies are converted to frequencies with E = h*nu.  With that
convention 0.01 aJ is 15.09 THz, not the 23 THz sometimes quoted for the same
energy; we do not know which convention produces 23 THz and do not emulate it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Constant:
    name: str
    value: float
    source: str


_CODATA = "CODATA 2018 (NIST SP 961)"

CONSTANTS: dict[str, Constant] = {
    c.name: c
    for c in [
        Constant("hartree_J", 4.3597447222071e-18, _CODATA),
        Constant("hartree_eV", 27.211386245988, _CODATA),
        Constant("hartree_cm-1", 2.1947463136320e5, _CODATA),
        Constant("hartree_Hz", 6.579683920502e15, _CODATA),
        Constant("au_time_s", 2.4188843265857e-17, _CODATA),
        Constant("bohr_m", 5.29177210903e-11, _CODATA),
        Constant("au_field_V_per_m", 5.14220674763e11, _CODATA),
        Constant("amu_in_electron_masses", 1822.888486209, _CODATA + ", m_u/m_e"),
        Constant("speed_of_light_m_per_s", 299792458.0, "exact (SI)"),
        Constant("vacuum_permittivity_F_per_m", 8.8541878128e-12, _CODATA),
    ]
}


def _c(name: str) -> float:
    return CONSTANTS[name].value


# I = (1/2) eps0 c E^2 for a field of 1 a.u., in W/cm^2 (W/m^2 * 1e-4).
AU_INTENSITY_W_PER_CM2 = (
    0.5
    * _c("vacuum_permittivity_F_per_m")
    * _c("speed_of_light_m_per_s")
    * _c("au_field_V_per_m") ** 2
    * 1e-4
)

# unit tag -> (dimension, value of one unit expressed in atomic units)
_UNITS: dict[str, tuple[str, float]] = {
    "hartree": ("energy", 1.0),
    "cm-1": ("energy", 1.0 / _c("hartree_cm-1")),
    "aJ": ("energy", 1e-18 / _c("hartree_J")),
    "eV": ("energy", 1.0 / _c("hartree_eV")),
    "THz": ("energy", 1e12 / _c("hartree_Hz")),
    "au_time": ("time", 1.0),
    "fs": ("time", 1e-15 / _c("au_time_s")),
    "ps": ("time", 1e-12 / _c("au_time_s")),
    "bohr": ("length", 1.0),
    "au_field": ("field", 1.0),
    "W_per_cm2": ("intensity", 1.0 / AU_INTENSITY_W_PER_CM2),
    "au_mass": ("mass", 1.0),
    "amu": ("mass", _c("amu_in_electron_masses")),
}

_ALIASES = {
    "cm^-1": "cm-1",
    "cm⁻¹": "cm-1",
    "wavenumber": "cm-1",
    "Eh": "hartree",
    "au": "hartree",
    "W/cm2": "W_per_cm2",
    "W/cm^2": "W_per_cm2",
    "me": "au_mass",
}

UNIT_TAGS = tuple(_UNITS)

# handy scalars for the physics modules
CM1 = _UNITS["cm-1"][1]
AJ = _UNITS["aJ"][1]
FS = _UNITS["fs"][1]
PS = _UNITS["ps"][1]
AMU = _UNITS["amu"][1]


class UnitError(ValueError):
    """Unknown unit tag or conversion between different dimensions."""


def canonical_unit(tag: str) -> str:
    tag = _ALIASES.get(tag, tag)
    if tag not in _UNITS:
        raise UnitError(f"unknown unit {tag!r}; known units: {', '.join(UNIT_TAGS)}")
    return tag


def dimension(tag: str) -> str:
    return _UNITS[canonical_unit(tag)][0]


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str

    def __post_init__(self):
        object.__setattr__(self, "unit", canonical_unit(self.unit))

    def to(self, target: str) -> "Quantity":
        return convert(self, target)


def convert(q: Quantity, target: str) -> Quantity:
    target = canonical_unit(target)
    src_dim, src_scale = _UNITS[q.unit]
    dst_dim, dst_scale = _UNITS[target]
    if src_dim != dst_dim:
        raise UnitError(
            f"cannot convert {q.unit} ({src_dim}) to {target} ({dst_dim})"
        )
    if q.unit == target:
        return Quantity(q.value, target)
    return Quantity(q.value * src_scale / dst_scale, target)


def to_au(value: float, unit: str) -> float:
    return value * _UNITS[canonical_unit(unit)][1]


def from_au(value: float, unit: str) -> float:
    return value / _UNITS[canonical_unit(unit)][1]


def field_to_intensity(field_au: float) -> float:
    """Cycle-averaged intensity (W/cm^2) of a field with amplitude `field_au`."""
    if not field_au >= 0:
        raise ValueError(f"field amplitude must be non-negative, got {field_au}")
    return AU_INTENSITY_W_PER_CM2 * field_au**2


def intensity_to_field(intensity: float) -> float:
    if not intensity >= 0:
        raise ValueError(f"intensity must be non-negative, got {intensity}")
    return math.sqrt(intensity / AU_INTENSITY_W_PER_CM2)


def constants_table() -> str:
    lines = ["# name\tvalue\tsource"]
    for c in CONSTANTS.values():
        lines.append(f"{c.name}\t{c.value!r}\t{c.source}")
    lines.append(
        f"au_intensity_W_per_cm2\t{AU_INTENSITY_W_PER_CM2!r}\t"
        "derived: 0.5*eps0*c*(au_field)^2*1e-4"
    )
    return "\n".join(lines) + "\n"


def write_constants_table(path: str | Path) -> None:
    Path(path).write_text(constants_table())
