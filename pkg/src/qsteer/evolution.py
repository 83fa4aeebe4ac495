"""Closed-form first-order evolution maps for one accumulated pulse area.

Both maps propagate the reduced density matrix from the start of the current
control cycle under a cumulative decoherence exponent g >= 0 and a cumulative
pulse area I (half the time integral of the control field).  They are exact
averages of unitary rotations over Gaussian environment phases, so they
preserve trace and Hermiticity identically and are completely positive.

Adiabatic regime (sigma_x control, phase damping):

    rho11' = rho11 cos^2 I + rho22 sin^2 I - i (rho12 - rho21) e^-g cos I sin I
    rho12' = (rho12 cos^2 I + rho21 sin^2 I) e^-g + i (rho22 - rho11) cos I sin I

Thermal regime (control axis (C_x, C_y), population damping), written in the
mixed components a = Re rho12, b = Im rho12, D = (rho11 - rho22) / 2 with
cx = cos(2 C_x I), sx = sin(2 C_x I), cy = cos(2 C_y I), sy = sin(2 C_y I):

    a' = (a cy + D sy) e^-g
    b' = b cx e^-g - (D cy - a sy) sx e^-2g
    D' = (D cy - a sy) cx e^-2g + b sx e^-g

which is the environment-averaged composition of a rotation generated by
sigma_y (acting in the x-z Bloch plane) followed by one generated by sigma_x
(acting in the y-z plane), each through twice the pulse area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .states import DensityMatrix

PulseArea = float


@dataclass(frozen=True)
class ControlAxis:
    """Coefficients (cx, cy) of sigma_x and sigma_y in the control Hamiltonian.

    Normalised so cx^2 + cy^2 = 1; (0, 1) drives the x-z Bloch plane and
    (1, 0) the y-z plane.  The plane azimuth is phi = atan2(cx, cy).
    """

    cx: float
    cy: float

    def __post_init__(self):
        norm = math.hypot(self.cx, self.cy)
        if norm == 0.0:
            raise ValueError("control axis must be non-zero")
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("control axis must be normalised to cx^2 + cy^2 = 1")

    @property
    def plane_phi(self) -> float:
        return math.atan2(self.cx, self.cy) % (2.0 * math.pi)


AXIS_Y = ControlAxis(0.0, 1.0)
AXIS_X = ControlAxis(1.0, 0.0)


def evolve_adiabatic(rho0: DensityMatrix, g: float, pulse_area: PulseArea) -> DensityMatrix:
    """Propagate under sigma_x control with adiabatic decoherence exponent g."""
    if g < 0:
        raise ValueError("g must be >= 0")
    rho0.validate()
    c, s = math.cos(pulse_area), math.sin(pulse_area)
    c2, s2, cs = c * c, s * s, c * s
    eg = math.exp(-g)
    r11 = rho0.r11 * c2 + rho0.r22 * s2 - 1j * (rho0.r12 - rho0.r21) * eg * cs
    r22 = rho0.r22 * c2 + rho0.r11 * s2 + 1j * (rho0.r12 - rho0.r21) * eg * cs
    r12 = (rho0.r12 * c2 + rho0.r21 * s2) * eg + 1j * (rho0.r22 - rho0.r11) * cs
    r21 = (rho0.r21 * c2 + rho0.r12 * s2) * eg - 1j * (rho0.r22 - rho0.r11) * cs
    return DensityMatrix(r11, r12, r21, r22)


def evolve_thermal(rho0: DensityMatrix, g: float, pulse_area: PulseArea,
                   axis: ControlAxis) -> DensityMatrix:
    """Propagate under control axis (C_x, C_y) with thermal decoherence exponent g."""
    if g < 0:
        raise ValueError("g must be >= 0")
    rho0.validate()
    cx = math.cos(2.0 * axis.cx * pulse_area)
    sx = math.sin(2.0 * axis.cx * pulse_area)
    cy = math.cos(2.0 * axis.cy * pulse_area)
    sy = math.sin(2.0 * axis.cy * pulse_area)
    eg = math.exp(-g)
    eg2 = eg * eg

    a0 = 0.5 * (rho0.r12 + rho0.r21)      # Re rho12 for Hermitian input
    b0 = (rho0.r12 - rho0.r21) / 2j       # Im rho12 for Hermitian input
    d0 = 0.5 * (rho0.r11 - rho0.r22)

    a1 = (a0 * cy + d0 * sy) * eg
    b1 = b0 * cx * eg - (d0 * cy - a0 * sy) * sx * eg2
    d1 = (d0 * cy - a0 * sy) * cx * eg2 + b0 * sx * eg

    r11 = 0.5 + d1
    r22 = 0.5 - d1
    r12 = a1 + 1j * b1
    r21 = a1 - 1j * b1
    return DensityMatrix(r11, r12, r21, r22)


def evolve(regime: str, rho0: DensityMatrix, g: float, pulse_area: PulseArea,
           axis: ControlAxis) -> DensityMatrix:
    """Dispatch on regime; the adiabatic closed form is sigma_x-specific."""
    if regime == "adiabatic":
        if abs(axis.cx - 1.0) > 1e-12 or abs(axis.cy) > 1e-12:
            raise ValueError("the adiabatic map is derived for control axis (1, 0)")
        return evolve_adiabatic(rho0, g, pulse_area)
    if regime == "thermal":
        return evolve_thermal(rho0, g, pulse_area, axis)
    raise ValueError(f"unknown regime {regime!r}")
