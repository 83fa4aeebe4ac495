"""Decoherence functions for the adiabatic and thermal regimes.

Both regimes reduce the traced-out boson environment to a scalar exponent
g(tau) that damps density-matrix components:

    g_ad(tau) = gamma * Int_0^inf dw G(w) (1 - cos(w tau)) coth(beta0 w / 2),
                G(w) = w^s exp(-w / w_c)

    g_th(tau) = gamma * Int_0^inf dw (1 - cos((w12 - w) tau)) / (w12 - w)^2
                * w^3 coth(beta0 w / 2) exp(-w / w_c)

The thermal integrand's singularity at w = w12 is removable; it is evaluated
through the stable form (1 - cos(u tau)) / u^2 = (tau^2 / 2) sinc(u tau / 2)^2.

Quadrature is composite Gauss-Legendre on [0, w_max] with w_max far beyond the
exponential cutoff, panel widths capped below one oscillation period, and
panel-doubling refinement until the requested relative tolerance is met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QuadratureFailureError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

# Panels per oscillation period of the cos(w tau) factor.
_PANELS_PER_PERIOD = 4
_MAX_PANELS = 600_000
_CUTOFF_MULTIPLE = 60.0


@dataclass(frozen=True)
class SpectralConfig:
    """Environment and coupling parameters entering the decoherence integrals.

    coupling_gamma (gamma) is the dimensionless overall coupling constant,
    beta0 the inverse temperature, omega_c the spectral cutoff, omega_12 the
    qubit transition frequency, all in Rabi-normalised units.
    spectral_exponent is the exponent s of the adiabatic spectral density.
    """

    coupling_gamma: float
    beta0: float
    omega_c: float
    omega_12: float = 10.0
    spectral_exponent: float = 1.0

    def __post_init__(self):
        if self.coupling_gamma < 0:
            raise ValueError("coupling_gamma must be >= 0")
        if self.beta0 <= 0 or self.omega_c <= 0 or self.omega_12 <= 0:
            raise ValueError("beta0, omega_c and omega_12 must be > 0")


@dataclass(frozen=True)
class DecoherenceCurve:
    """g(tau) tabulated on the uniform grid tau_k = k * dt."""

    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if vals.size < 1 or vals[0] != 0.0:
            raise ValueError("curve must start with g(0) = 0")
        if np.any(vals < 0.0):
            raise ValueError("decoherence values must be non-negative")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def taus(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))


def _coth(x: np.ndarray) -> np.ndarray:
    """coth(x) for x > 0, series-stabilised near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    out[~small] = 1.0 / np.tanh(xs[~small])
    out[small] = 1.0 / x[small] + x[small] / 3.0
    return out


def _one_minus_cos_over_u2(u: np.ndarray, tau: float) -> np.ndarray:
    """(1 - cos(u tau)) / u^2 evaluated stably through its removable zero."""
    half = 0.5 * tau * np.asarray(u, dtype=float)
    # np.sinc(x) = sin(pi x)/(pi x); limit tau^2/2 at u = 0 comes out exactly.
    return 0.5 * tau * tau * np.sinc(half / math.pi) ** 2


def _adiabatic_integrand(w: np.ndarray, tau: float, cfg: SpectralConfig) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    spectral = np.power(w, cfg.spectral_exponent, where=w > 0, out=np.zeros_like(w))
    half = 0.5 * tau * w
    one_minus_cos = 2.0 * np.sin(half) ** 2
    return spectral * np.exp(-w / cfg.omega_c) * one_minus_cos * _coth(0.5 * cfg.beta0 * w)


def _thermal_integrand(w: np.ndarray, tau: float, cfg: SpectralConfig) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    u = cfg.omega_12 - w
    kernel = _one_minus_cos_over_u2(u, tau)
    return kernel * w**3 * _coth(0.5 * cfg.beta0 * w) * np.exp(-w / cfg.omega_c)


def _composite_gl(fn, edges: np.ndarray) -> float:
    centers = 0.5 * (edges[1:] + edges[:-1])
    halves = 0.5 * (edges[1:] - edges[:-1])
    nodes = centers[:, None] + halves[:, None] * _GL_NODES[None, :]
    weights = halves[:, None] * _GL_WEIGHTS[None, :]
    return float(np.sum(fn(nodes) * weights))


def _edges(a: float, b: float, n_panels: int, breakpoints=()) -> np.ndarray:
    pts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    segments = []
    total = b - a
    for lo, hi in zip(pts[:-1], pts[1:]):
        k = max(1, int(round(n_panels * (hi - lo) / total)))
        segments.append(np.linspace(lo, hi, k + 1)[:-1])
    segments.append(np.array([b]))
    return np.concatenate(segments)


def _adaptive_integral(fn, a: float, b: float, tau: float, rel_tol: float,
                       breakpoints=()) -> tuple[float, float]:
    """Integrate fn on [a, b], refining panels until successive estimates agree.

    Returns (value, error_estimate). Raises QuadratureFailureError if the
    panel budget is exhausted before the tolerance is met.
    """
    period_cap = (2.0 * math.pi / tau) / _PANELS_PER_PERIOD if tau > 0 else math.inf
    n = max(64, int(math.ceil((b - a) / period_cap)) if math.isfinite(period_cap) else 0)
    if n > _MAX_PANELS:
        raise QuadratureFailureError(
            f"oscillation period requires {n} panels, over the {_MAX_PANELS} budget")
    prev = _composite_gl(fn, _edges(a, b, n, breakpoints))
    while True:
        n *= 2
        if n > _MAX_PANELS:
            raise QuadratureFailureError(
                f"quadrature did not converge within {_MAX_PANELS} panels")
        cur = _composite_gl(fn, _edges(a, b, n, breakpoints))
        err = abs(cur - prev)
        if err <= rel_tol * max(abs(cur), 1e-300):
            return cur, err
        prev = cur


def g_adiabatic(tau: float, cfg: SpectralConfig, rel_tol: float = 1e-10,
                with_error: bool = False):
    """Adiabatic (phase-damping) decoherence exponent g_ad(tau)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0.0 or cfg.coupling_gamma == 0.0:
        return (0.0, 0.0) if with_error else 0.0
    w_max = _CUTOFF_MULTIPLE * cfg.omega_c
    val, err = _adaptive_integral(
        lambda w: _adiabatic_integrand(w, tau, cfg), 0.0, w_max, tau, rel_tol)
    val *= cfg.coupling_gamma
    err *= cfg.coupling_gamma
    return (val, err) if with_error else val


def g_thermal(tau: float, cfg: SpectralConfig, rel_tol: float = 1e-10,
              with_error: bool = False):
    """Thermal (population-damping) decoherence exponent g_th(tau)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0.0 or cfg.coupling_gamma == 0.0:
        return (0.0, 0.0) if with_error else 0.0
    w_max = _CUTOFF_MULTIPLE * cfg.omega_c + cfg.omega_12
    val, err = _adaptive_integral(
        lambda w: _thermal_integrand(w, tau, cfg), 0.0, w_max, tau, rel_tol,
        breakpoints=(cfg.omega_12,))
    val *= cfg.coupling_gamma
    err *= cfg.coupling_gamma
    return (val, err) if with_error else val


def g_function(regime: str, tau: float, cfg: SpectralConfig, rel_tol: float = 1e-10) -> float:
    if regime == "adiabatic":
        return g_adiabatic(tau, cfg, rel_tol)
    if regime == "thermal":
        return g_thermal(tau, cfg, rel_tol)
    raise ValueError(f"unknown regime {regime!r}")


def tabulate(regime: str, cfg: SpectralConfig, dt: float, n: int,
             rel_tol: float = 1e-10) -> DecoherenceCurve:
    """Tabulate g(k dt) for k = 0 .. n-1 on the controller's time grid."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.array([g_function(regime, k * dt, cfg, rel_tol) for k in range(n)])
    return DecoherenceCurve(dt=dt, values=values)


def write_curve_csv(curve: DecoherenceCurve, path) -> None:
    """Export the curve as CSV with full double precision."""
    with open(path, "w") as fh:
        fh.write("tau,g\n")
        for tau, g in zip(curve.taus, curve.values):
            fh.write(f"{tau:.17g},{g:.17g}\n")
