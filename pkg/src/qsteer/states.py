"""Qubit state representations and metrics.

Conventions used throughout the package:

* Basis ordering is (|1>, |2>) = (ground, excited).  Index 1 of a density
  matrix refers to the ground state, index 2 to the excited state.
* Bloch coordinates are defined by

      x = 2 Re(rho12),   y = -2 Im(rho12),   z = rho22 - rho11,

  so the ground state sits at (0, 0, -1) and the excited state at (0, 0, +1).
* Pure states are parametrised by a polar angle ``theta`` and the azimuth
  ``phi`` of their great-circle plane:

      (x, y, z) = (sin(theta) cos(phi), -sin(theta) sin(phi), cos(theta)),

  i.e. theta = 0 is the excited state, theta = pi the ground state, and
  (theta = pi/2, phi = 0) the symmetric superposition on the +x axis.
  The plane S_phi contains the z axis and satisfies x sin(phi) + y cos(phi) = 0.

Global phase is discarded everywhere; states are compared via fidelity only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError

TRACE_TOL = 1e-12
HERMITICITY_TOL = 1e-12
POSITIVITY_TOL = 1e-9
RADIUS_TOL = 1e-9

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DensityMatrix:
    """2x2 reduced density matrix of the qubit, stored element-wise."""

    r11: complex
    r12: complex
    r21: complex
    r22: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.r11, self.r12], [self.r21, self.r22]], dtype=complex)

    @staticmethod
    def from_array(m) -> "DensityMatrix":
        m = np.asarray(m, dtype=complex)
        return DensityMatrix(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def validate(self, *, positivity_tol: float = POSITIVITY_TOL) -> "DensityMatrix":
        """Check trace, Hermiticity and positivity; raise InvalidStateError on failure."""
        tr = self.r11 + self.r22
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
        if abs(self.r21 - self.r12.conjugate()) > HERMITICITY_TOL:
            raise InvalidStateError("r21 is not the conjugate of r12 within tolerance")
        if abs(self.r11.imag) > HERMITICITY_TOL or abs(self.r22.imag) > HERMITICITY_TOL:
            raise InvalidStateError("populations have imaginary parts beyond tolerance")
        # Eigenvalues of a Hermitian unit-trace 2x2 matrix.
        d = (self.r11.real - self.r22.real) / 2.0
        off = abs(self.r12)
        disc = math.hypot(d, off)
        if 0.5 - disc < -positivity_tol:
            raise InvalidStateError(f"negative eigenvalue {0.5 - disc} beyond tolerance")
        return self


@dataclass(frozen=True)
class BlochVector:
    """Real Bloch-space coordinates (x, y, z); |v| <= 1 for physical states."""

    x: float
    y: float
    z: float

    @property
    def r(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class PureStateAngle:
    """Polar angle theta (radians, [-pi, pi]) and plane azimuth phi ([0, 2pi))."""

    theta: float
    phi: float = 0.0

    @staticmethod
    def normalized(theta: float, phi: float = 0.0) -> "PureStateAngle":
        """Wrap arbitrary angles into the canonical ranges."""
        th = math.remainder(theta, TWO_PI)
        if th > math.pi:
            th -= TWO_PI
        elif th < -math.pi:
            th += TWO_PI
        ph = phi % TWO_PI
        return PureStateAngle(th, ph)

    def validate(self) -> "PureStateAngle":
        if not (-math.pi - 1e-12 <= self.theta <= math.pi + 1e-12):
            raise InvalidStateError(f"theta {self.theta} outside [-pi, pi]")
        if not (0.0 <= self.phi < TWO_PI + 1e-12):
            raise InvalidStateError(f"phi {self.phi} outside [0, 2pi)")
        return self


def to_bloch(rho: DensityMatrix) -> BlochVector:
    """Bloch vector of a density matrix (validates the state first)."""
    rho.validate()
    x = 2.0 * rho.r12.real
    y = -2.0 * rho.r12.imag
    z = rho.r22.real - rho.r11.real
    return BlochVector(x, y, z)


def from_bloch(v: BlochVector) -> DensityMatrix:
    """Density matrix with the given Bloch coordinates; requires |v| <= 1 + tol."""
    if v.r > 1.0 + RADIUS_TOL:
        raise InvalidStateError(f"Bloch radius {v.r} exceeds 1")
    r11 = 0.5 * (1.0 - v.z)
    r22 = 0.5 * (1.0 + v.z)
    r12 = 0.5 * (v.x - 1j * v.y)
    return DensityMatrix(complex(r11), r12, r12.conjugate(), complex(r22))


def pure_state(angle: PureStateAngle) -> DensityMatrix:
    """Pure density matrix on the great circle of plane S_phi."""
    angle.validate()
    s, c = math.sin(angle.theta), math.cos(angle.theta)
    return from_bloch(BlochVector(s * math.cos(angle.phi), -s * math.sin(angle.phi), c))


def fidelity(rho: DensityMatrix, target: PureStateAngle) -> float:
    """<target|rho|target>, the overlap of the state with a pure target."""
    return fidelity_states(rho, pure_state(target))


def fidelity_states(rho: DensityMatrix, pure_rho: DensityMatrix) -> float:
    """Overlap Tr(rho P) of a state with a pure projector P."""
    v = to_bloch(rho)
    w = to_bloch(pure_rho)
    return 0.5 * (1.0 + v.x * w.x + v.y * w.y + v.z * w.z)


def purity(rho: DensityMatrix) -> float:
    """Bloch radius r; 1 for a pure state, 0 for the maximally mixed state."""
    return to_bloch(rho).r


GROUND = PureStateAngle(math.pi, 0.0)
EXCITED = PureStateAngle(0.0, 0.0)
