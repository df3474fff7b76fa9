"""Static physics of a two-ion crystal in a linear Paul trap.

All frequencies are angular (rad/s) and all lengths are in meters unless a
field name says otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .constants import ATOMIC_MASS, ELEMENTARY_CHARGE, EPSILON_0, HBAR, TWO_PI


class ModeLabel(str, enum.Enum):
    AXIAL_COM = "AxialCOM"
    BREATHING = "Breathing"
    RADIAL_COM_X = "RadialCOM_x"
    RADIAL_COM_Y = "RadialCOM_y"
    ROCKING_X = "Rocking_x"
    ROCKING_Y = "Rocking_y"

    def __str__(self):
        return self.value


class Axis(str, enum.Enum):
    AXIAL = "axial"
    RADIAL_X = "radial-x"
    RADIAL_Y = "radial-y"


# short names accepted in config files
MODE_ALIASES = {
    "axial": ModeLabel.AXIAL_COM,
    "breathing": ModeLabel.BREATHING,
    "radial": ModeLabel.RADIAL_COM_X,
    "rocking": ModeLabel.ROCKING_X,
}


def mode_label(name) -> ModeLabel:
    """Resolve a label, its string value, or a short alias."""
    if isinstance(name, ModeLabel):
        return name
    key = str(name)
    if key in MODE_ALIASES:
        return MODE_ALIASES[key]
    try:
        return ModeLabel(key)
    except ValueError:
        valid = [m.value for m in ModeLabel] + list(MODE_ALIASES)
        raise ValueError(f"unknown mode {name!r}; expected one of {valid}") from None


class TrapError(ValueError):
    pass


@dataclass(frozen=True)
class IonSpecies:
    mass_amu: float = 40.0
    qubit_wavelength: float = 729e-9
    dipole_linewidth_natural: float = TWO_PI * 20e6

    def __post_init__(self):
        if not self.mass_amu > 0:
            raise ValueError("mass_amu must be positive")
        if not self.qubit_wavelength > 0:
            raise ValueError("qubit_wavelength must be positive")
        if not self.dipole_linewidth_natural > 0:
            raise ValueError("dipole_linewidth_natural must be positive")

    @property
    def mass(self) -> float:
        """Single-ion mass in kg."""
        return self.mass_amu * ATOMIC_MASS

    @property
    def wavenumber(self) -> float:
        return TWO_PI / self.qubit_wavelength


@dataclass(frozen=True)
class TrapConfig:
    omega_axial: float = TWO_PI * 700e3
    omega_radial_x: float = TWO_PI * 1.8e6
    omega_radial_y: float = TWO_PI * 1.8e6
    electrode_distance_mm: float = 1.18
    rf_drive: float = TWO_PI * 16e6

    def __post_init__(self):
        for name in ("omega_axial", "omega_radial_x", "omega_radial_y", "rf_drive"):
            if not getattr(self, name) > 0:
                raise TrapError(f"{name} must be positive")
        if not self.electrode_distance_mm > 0:
            raise TrapError("electrode_distance_mm must be positive")
        for name in ("omega_radial_x", "omega_radial_y"):
            if not getattr(self, name) > self.omega_axial:
                raise TrapError(
                    f"{name} must exceed omega_axial: the rocking mode frequency "
                    "sqrt(w_rad^2 - w_ax^2) is not real and the crystal is not a "
                    "linear string"
                )


@dataclass(frozen=True)
class Mode:
    label: ModeLabel
    frequency: float
    axis: Axis
    ion_amplitudes: tuple[float, float]

    @property
    def is_com(self) -> bool:
        return self.label in (ModeLabel.AXIAL_COM, ModeLabel.RADIAL_COM_X, ModeLabel.RADIAL_COM_Y)


@dataclass(frozen=True)
class BeamGeometry:
    angle_to_axis_deg: float = 67.5
    waist: float = 3.7e-6
    center_offset: float = 0.0
    peak_rabi: float = TWO_PI * 100e3

    def __post_init__(self):
        if not 0.0 <= self.angle_to_axis_deg <= 90.0:
            raise ValueError("angle_to_axis_deg must lie in [0, 90]")
        if not self.waist > 0:
            raise ValueError("waist must be positive")
        if not self.peak_rabi >= 0:
            raise ValueError("peak_rabi must be non-negative")

    def projection(self, axis: Axis) -> float:
        """Cosine between the beam wavevector and a mode axis.

        The beam is taken to lie in the plane spanned by the trap axis and
        the radial x axis, so radial-y modes do not couple.
        """
        theta = math.radians(self.angle_to_axis_deg)
        if axis is Axis.AXIAL:
            return math.cos(theta)
        if axis is Axis.RADIAL_X:
            return math.sin(theta)
        return 0.0


_COM = (1 / math.sqrt(2), 1 / math.sqrt(2))
_REL = (1 / math.sqrt(2), -1 / math.sqrt(2))


def mode_spectrum(trap: TrapConfig) -> list[Mode]:
    """The six normal modes of two identical ions on the trap axis."""
    w_ax = trap.omega_axial
    modes = [
        Mode(ModeLabel.AXIAL_COM, w_ax, Axis.AXIAL, _COM),
        Mode(ModeLabel.BREATHING, math.sqrt(3.0) * w_ax, Axis.AXIAL, _REL),
    ]
    for w_rad, com, rock, axis in (
        (trap.omega_radial_x, ModeLabel.RADIAL_COM_X, ModeLabel.ROCKING_X, Axis.RADIAL_X),
        (trap.omega_radial_y, ModeLabel.RADIAL_COM_Y, ModeLabel.ROCKING_Y, Axis.RADIAL_Y),
    ):
        if w_rad <= w_ax:
            raise TrapError("rocking frequency is not real: radial frequency must exceed axial")
        modes.append(Mode(com, w_rad, axis, _COM))
        modes.append(Mode(rock, math.sqrt(w_rad**2 - w_ax**2), axis, _REL))
    return modes


def modes_by_label(trap: TrapConfig) -> dict[ModeLabel, Mode]:
    return {m.label: m for m in mode_spectrum(trap)}


def ion_separation(trap: TrapConfig, species: IonSpecies) -> float:
    """Equilibrium spacing of two identical singly charged ions (meters)."""
    return (
        ELEMENTARY_CHARGE**2
        / (2 * math.pi * EPSILON_0 * species.mass * trap.omega_axial**2)
    ) ** (1.0 / 3.0)


def lamb_dicke(mode: Mode, species: IonSpecies, beam: BeamGeometry) -> float:
    """Lamb-Dicke parameter using the single-ion mass.

    Multiply by ``abs(mode.ion_amplitudes[i])`` (see :func:`ion_coupling`)
    for the normal-mode eigenvector convention.
    """
    x0 = math.sqrt(HBAR / (2 * species.mass * mode.frequency))
    return species.wavenumber * beam.projection(mode.axis) * x0


def ion_coupling(eta: float, mode: Mode, ion: int) -> float:
    return eta * abs(mode.ion_amplitudes[ion])


def rabi_at_position(beam: BeamGeometry, x):
    """Carrier Rabi frequency at axial position ``x`` for a Gaussian beam.

    ``waist`` is the 1/e radius of the field, so the intensity falls as the
    square of the returned ratio.
    """
    x = np.asarray(x, dtype=float)
    out = beam.peak_rabi * np.exp(-((x - beam.center_offset) ** 2) / beam.waist**2)
    return float(out) if out.ndim == 0 else out
