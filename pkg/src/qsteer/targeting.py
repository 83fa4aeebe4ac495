"""Open-loop targeting controller.

Drives the qubit from a known initial pure state to a pure target state on
the great circle selected by the control axis, via a sequence of intermediate
waypoint states.  Each control cycle consists of eight control steps, one per
real density-matrix component, in the fixed order

    11R, 11I, 12R, 12I, 21R, 21I, 22R, 22I.

Step t of a cycle solves the one-dimensional equation

    component(evolve(rho_cycle_start, g(t dt), I_accumulated + I)) = zeta_component

for a bounded pulse area I in [-i_max, +i_max].  If no root exists in the
interval, the step falls back to the area minimising the absolute residual
and is flagged.  At the end of each cycle the state is re-baselined: it
becomes the next cycle's rho(0), and the decoherence and pulse-area
accumulators restart from zero, which keeps the first-order evolution maps in
their small-(g, I) regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import minimize_scalar

from .decoherence import SpectralConfig, DecoherenceCurve, tabulate
from .evolution import AXIS_X, ControlAxis, evolve
from .states import (DensityMatrix, PureStateAngle, fidelity_states,
                     pure_state, to_bloch)

COMPONENT_ORDER = ("11R", "11I", "12R", "12I", "21R", "21I", "22R", "22I")

ROOT_RESIDUAL_TOL = 1e-10
_BISECT_XTOL = 1e-12
_PLANE_TOL = 1e-9
_N_PROBES = 65  # 64 uniform scan intervals over [-i_max, +i_max]


def _on_plane(angle: PureStateAngle, plane_phi: float) -> bool:
    v = to_bloch(pure_state(angle))
    return abs(v.x * math.sin(plane_phi) + v.y * math.cos(plane_phi)) <= _PLANE_TOL


def _plane_theta(angle: PureStateAngle, plane_phi: float) -> float:
    """Polar angle of an on-plane pure state within the S_phi great circle."""
    return _plane_theta_dm(pure_state(angle), plane_phi)


def _plane_theta_dm(rho: DensityMatrix, plane_phi: float) -> float:
    v = to_bloch(rho)
    transverse = v.x * math.cos(plane_phi) - v.y * math.sin(plane_phi)
    return math.atan2(transverse, v.z)


def _arc(initial: PureStateAngle, target: PureStateAngle, plane_phi: float,
         arc_direction: int) -> tuple[float, float]:
    """Start angle and signed arc length of the planned great-circle path."""
    th_i = _plane_theta(initial, plane_phi)
    delta = math.remainder(_plane_theta(target, plane_phi) - th_i, 2.0 * math.pi)
    if arc_direction > 0 and delta < 0:
        delta += 2.0 * math.pi
    elif arc_direction < 0 and delta > 0:
        delta -= 2.0 * math.pi
    return th_i, delta


def _preferred_sign(cfg: TargetingConfig) -> int:
    """Pulse-area sign that advances the state along the planned arc.

    Used only to break exact +/- root degeneracies at the poles of the
    control circle; 0 (no preference) if the path is degenerate.
    """
    th_i, delta = _arc(cfg.initial, cfg.target, cfg.axis.plane_phi, cfg.arc_direction)
    if abs(delta) < 1e-12:
        return 0
    phi = cfg.axis.plane_phi
    for frac in (0.5, 0.25, 0.75):
        th_mid = th_i + frac * delta
        probe = pure_state(PureStateAngle.normalized(th_mid, phi))
        moved = evolve(cfg.regime, probe, 0.0, 1e-3, cfg.axis)
        dth = math.remainder(_plane_theta_dm(moved, phi) - th_mid, 2.0 * math.pi)
        if abs(dth) > 1e-9:
            return 1 if dth * delta > 0 else -1
    return 0


@dataclass(frozen=True)
class TargetingConfig:
    """Parameters of one open-loop targeting run."""

    regime: str
    axis: ControlAxis
    n_intermediates: int
    cycles_per_intermediate: int
    i_max: float
    dt: float
    spectral: SpectralConfig
    initial: PureStateAngle
    target: PureStateAngle
    hold_cycles: int = 0
    interpolation: str = "angular"
    fidelity_threshold: float = 0.99
    arc_direction: int = 0  # 0: shorter arc; +1 / -1: force increasing/decreasing theta

    def __post_init__(self):
        if self.regime not in ("adiabatic", "thermal"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.n_intermediates < 1 or self.cycles_per_intermediate < 1:
            raise ValueError("n_intermediates and cycles_per_intermediate must be >= 1")
        if self.i_max <= 0 or self.dt <= 0:
            raise ValueError("i_max and dt must be > 0")
        if self.hold_cycles < 0:
            raise ValueError("hold_cycles must be >= 0")
        if self.interpolation not in ("angular", "chordal"):
            raise ValueError("interpolation must be 'angular' or 'chordal'")
        if self.regime == "adiabatic" and (self.axis.cx, self.axis.cy) != (AXIS_X.cx, AXIS_X.cy):
            raise ValueError("the adiabatic closed form supports control axis (1, 0) only")
        for name, angle in (("initial", self.initial), ("target", self.target)):
            if not _on_plane(angle, self.axis.plane_phi):
                raise ValueError(
                    f"{name} state does not lie on the great circle of the control axis")


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    cycle: int
    intermediate: int
    component: str
    pulse_area: float
    residual: float
    fallback: bool
    fidelity: float
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SolveResult:
    pulse_area: float
    residual: float
    fallback: bool


@dataclass
class ControlLog:
    """Per-step record of a targeting run plus run-level summary values."""

    steps: list = field(default_factory=list)
    final_state: DensityMatrix | None = None
    final_fidelity: float = 0.0
    transition_step: int | None = None
    fallback_steps: int = 0
    converged: bool = False

    def summary_line(self) -> str:
        t0 = "none" if self.transition_step is None else str(self.transition_step)
        return (f"final_fidelity={self.final_fidelity:.12g} "
                f"transition_steps={t0} fallback_steps={self.fallback_steps}")

    def fidelity_series(self):
        return [rec.fidelity for rec in self.steps]


def plan_intermediates(initial: PureStateAngle, target: PureStateAngle, n: int,
                       plane_phi: float = 0.0, interpolation: str = "angular",
                       arc_direction: int = 0) -> list[DensityMatrix]:
    """Waypoint states between initial and target on the S_phi great circle.

    The k-th waypoint sits at theta_k = theta_init + (k/n) * delta along the
    shorter arc (direction overridable for full-circle drives); the n-th
    equals the target exactly.  Chordal interpolation (straight line between
    the density-matrix components, waypoints mixed) is kept as an alternative.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rho_t = pure_state(target)
    rho_i = pure_state(initial)
    if fidelity_states(rho_i, rho_t) > 1.0 - 1e-14:
        # Degenerate path: initial equals target.
        return [rho_t]
    if interpolation == "chordal":
        mi, mt = rho_i.as_array(), rho_t.as_array()
        return [DensityMatrix.from_array(mi + (k / n) * (mt - mi)) for k in range(1, n + 1)]
    th_i, delta = _arc(initial, target, plane_phi, arc_direction)
    out = []
    for k in range(1, n + 1):
        if k == n:
            out.append(rho_t)
        else:
            th = th_i + (k / n) * delta
            out.append(pure_state(PureStateAngle.normalized(th, plane_phi)))
    return out


def _component_value(rho: DensityMatrix, label: str) -> float:
    elem = {"11": rho.r11, "12": rho.r12, "21": rho.r21, "22": rho.r22}[label[:2]]
    return elem.real if label[2] == "R" else elem.imag


def _component_fn(regime: str, rho0: DensityMatrix, g: float, axis: ControlAxis,
                  label: str):
    """Scalar function I -> component of evolve(rho0, g, I) for fast root solving.

    Specialised to Hermitian cycle-start states (the controller's invariant);
    run_cycle rebuilds the full state through evolve() itself.
    """
    a0 = rho0.r12.real
    b0 = rho0.r12.imag
    d0 = 0.5 * (rho0.r11.real - rho0.r22.real)
    eg = math.exp(-g)
    eg2 = eg * eg
    idx, part = label[:2], label[2]

    if regime == "adiabatic":
        def fn(pulse: float) -> float:
            c2 = math.cos(2.0 * pulse)
            s2 = math.sin(2.0 * pulse)
            if idx == "11":
                return 0.5 + d0 * c2 + b0 * eg * s2 if part == "R" else 0.0
            if idx == "22":
                return 0.5 - d0 * c2 - b0 * eg * s2 if part == "R" else 0.0
            a1 = a0 * eg
            b1 = b0 * eg * c2 - d0 * s2
            if part == "R":
                return a1
            return b1 if idx == "12" else -b1
        return fn

    two_cx, two_cy = 2.0 * axis.cx, 2.0 * axis.cy

    def fn(pulse: float) -> float:
        cx = math.cos(two_cx * pulse)
        sx = math.sin(two_cx * pulse)
        cy = math.cos(two_cy * pulse)
        sy = math.sin(two_cy * pulse)
        if idx in ("11", "22"):
            if part == "I":
                return 0.0
            d1 = (d0 * cy - a0 * sy) * cx * eg2 + b0 * sx * eg
            return 0.5 + d1 if idx == "11" else 0.5 - d1
        if part == "R":
            return (a0 * cy + d0 * sy) * eg
        b1 = b0 * cx * eg - (d0 * cy - a0 * sy) * sx * eg2
        return b1 if idx == "12" else -b1
    return fn


def _bisect(f, lo: float, hi: float, flo: float) -> float:
    while hi - lo > _BISECT_XTOL:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_step(component: str, zeta: float, rho_cycle_start: DensityMatrix,
               g_now: float, i_accumulated: float, cfg: TargetingConfig,
               prefer_sign: int = 0) -> SolveResult:
    """Solve component(evolve(rho, g_now, i_accumulated + I)) = zeta for bounded I.

    Prefers the smallest-magnitude root; without a root in the interval it
    returns the area minimising the absolute residual and flags the step.
    prefer_sign breaks exact +/- degeneracies (population equations are even
    in I at the poles of the control circle) toward the planned arc direction.
    """
    fn = _component_fn(cfg.regime, rho_cycle_start, g_now, cfg.axis, component)
    f = lambda i: fn(i_accumulated + i) - zeta
    imax = cfg.i_max

    if abs(f(0.0)) <= ROOT_RESIDUAL_TOL:
        return SolveResult(0.0, abs(f(0.0)), False)

    n = _N_PROBES
    probes = [(-imax + 2.0 * imax * k / (n - 1)) for k in range(n)]
    vals = [f(p) for p in probes]

    roots = []
    for k in range(n - 1):
        if vals[k] == 0.0:
            roots.append(probes[k])
        elif (vals[k] < 0) != (vals[k + 1] < 0):
            roots.append(_bisect(f, probes[k], probes[k + 1], vals[k]))
    if vals[-1] == 0.0:
        roots.append(probes[-1])

    if roots:
        best = _pick(roots, key=abs, prefer_sign=prefer_sign)
        return SolveResult(best, abs(f(best)), False)

    # No sign change: minimise |residual| around the best probe.
    k_best = min(range(n), key=lambda k: abs(vals[k]))
    lo = probes[max(0, k_best - 1)]
    hi = probes[min(n - 1, k_best + 1)]
    res = minimize_scalar(lambda i: abs(f(i)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    candidates = [probes[0], probes[-1], float(res.x), 0.0]
    best_i = _pick(candidates, key=lambda i: (abs(f(i)), abs(i)),
                   prefer_sign=prefer_sign)
    return SolveResult(best_i, abs(f(best_i)), True)


def _pick(candidates, key, prefer_sign: int = 0, tie_tol: float = 1e-9):
    """Minimise key over candidates, breaking near-ties toward prefer_sign."""
    ranked = sorted(candidates, key=key)
    best = ranked[0]
    if prefer_sign == 0:
        return best

    def _metric(c):
        k = key(c)
        return k if isinstance(k, tuple) else (k,)

    tied = [c for c in ranked
            if all(abs(a - b) <= tie_tol for a, b in zip(_metric(c), _metric(best)))]
    for c in tied:
        if math.copysign(1.0, c) == prefer_sign and c != 0.0:
            return c
    return best


def run_cycle(rho_cycle_start: DensityMatrix, zeta: DensityMatrix,
              curve: DecoherenceCurve, cfg: TargetingConfig, t0: int,
              cycle_index: int = 0, intermediate_index: int = 0,
              prefer_sign: int = 0) -> tuple[DensityMatrix, list]:
    """Execute the eight control steps of one cycle toward waypoint zeta.

    Decoherence advances along the tabulated curve within the cycle while the
    pulse area accumulates; returns the end-of-cycle state for re-baselining.
    """
    if len(curve) < 9:
        raise ValueError("curve must cover the eight in-cycle steps (n >= 9)")
    records = []
    i_acc = 0.0
    rho_final_target = pure_state(cfg.target)
    rho_t = rho_cycle_start
    for t, comp in enumerate(COMPONENT_ORDER, start=1):
        g_now = float(curve.values[t])
        solved = solve_step(comp, _component_value(zeta, comp), rho_cycle_start,
                            g_now, i_acc, cfg, prefer_sign=prefer_sign)
        i_acc += solved.pulse_area
        rho_t = evolve(cfg.regime, rho_cycle_start, g_now, i_acc, cfg.axis)
        v = to_bloch(rho_t)
        step = t0 + t - 1
        records.append(StepRecord(
            step=step, time=step * cfg.dt, cycle=cycle_index,
            intermediate=intermediate_index, component=comp,
            pulse_area=solved.pulse_area, residual=solved.residual,
            fallback=solved.fallback,
            fidelity=fidelity_states(rho_t, rho_final_target),
            x=v.x, y=v.y, z=v.z))
    return rho_t, records


def _transition_step(fids: list, threshold: float) -> int | None:
    """First step at which fidelity reaches the threshold and holds for a cycle.

    The persistence window (the step itself plus the following cycle's worth
    of records, clipped at the end of the run) avoids counting transient
    spikes as the transition.
    """
    for s in range(len(fids)):
        if all(v >= threshold for v in fids[s:s + 8]) and fids[s] >= threshold:
            return s
    return None


def run_targeting(cfg: TargetingConfig) -> ControlLog:
    """Run the full intermediate schedule plus any maintenance (hold) cycles."""
    curve = tabulate(cfg.regime, cfg.spectral, cfg.dt, 9)
    intermediates = plan_intermediates(
        cfg.initial, cfg.target, cfg.n_intermediates, cfg.axis.plane_phi,
        cfg.interpolation, cfg.arc_direction)
    log = ControlLog()
    rho = pure_state(cfg.initial)
    prefer = _preferred_sign(cfg)
    step = 0
    cycle = 0
    schedule = [(idx, zeta) for idx, zeta in enumerate(intermediates)
                for _ in range(cfg.cycles_per_intermediate)]
    schedule += [(len(intermediates) - 1, intermediates[-1])] * cfg.hold_cycles
    for inter_idx, zeta in schedule:
        rho, recs = run_cycle(rho, zeta, curve, cfg, step,
                              cycle_index=cycle, intermediate_index=inter_idx,
                              prefer_sign=prefer)
        log.steps.extend(recs)
        step += 8
        cycle += 1
    assert all(abs(rec.pulse_area) <= cfg.i_max + 1e-12 for rec in log.steps)
    log.final_state = rho
    log.final_fidelity = log.steps[-1].fidelity
    log.fallback_steps = sum(rec.fallback for rec in log.steps)
    fids = log.fidelity_series()
    if fidelity_states(pure_state(cfg.initial), pure_state(cfg.target)) >= cfg.fidelity_threshold:
        log.transition_step = 0
    else:
        log.transition_step = _transition_step(fids, cfg.fidelity_threshold)
    log.converged = log.final_fidelity >= cfg.fidelity_threshold
    return log


def run_composite(cfg_leg1: TargetingConfig, cfg_leg2: TargetingConfig) -> ControlLog:
    """Two-leg drive through the ground state using two different control axes."""
    ground = PureStateAngle(math.pi, 0.0)
    if fidelity_states(pure_state(cfg_leg1.target), pure_state(ground)) < 1.0 - 1e-9:
        raise ValueError("leg1 must target the ground state")
    if fidelity_states(pure_state(cfg_leg2.initial), pure_state(ground)) < 1.0 - 1e-9:
        raise ValueError("leg2 must start from the ground state")
    if abs(cfg_leg1.axis.plane_phi - cfg_leg2.axis.plane_phi) < 1e-12:
        raise ValueError("legs must use different control axes")
    log1 = run_targeting(cfg_leg1)
    log2 = run_targeting(cfg_leg2)
    offset = len(log1.steps)
    combined = ControlLog()
    combined.steps = list(log1.steps)
    for rec in log2.steps:
        combined.steps.append(StepRecord(
            step=rec.step + offset, time=rec.time + offset * cfg_leg1.dt,
            cycle=rec.cycle + offset // 8, intermediate=rec.intermediate,
            component=rec.component, pulse_area=rec.pulse_area,
            residual=rec.residual, fallback=rec.fallback, fidelity=rec.fidelity,
            x=rec.x, y=rec.y, z=rec.z))
    combined.final_state = log2.final_state
    combined.final_fidelity = log2.final_fidelity
    combined.fallback_steps = log1.fallback_steps + log2.fallback_steps
    combined.transition_step = (None if log2.transition_step is None
                                else offset + log2.transition_step)
    combined.converged = log1.converged and log2.converged
    return combined


def write_control_csv(log: ControlLog, path) -> None:
    """Per-step CSV export of a targeting run."""
    with open(path, "w") as fh:
        fh.write("step,time,cycle,intermediate,component,pulse_area,residual,"
                 "fallback,fidelity,x,y,z\n")
        for r in log.steps:
            fh.write(f"{r.step},{r.time:.17g},{r.cycle},{r.intermediate},"
                     f"{r.component},{r.pulse_area:.17g},{r.residual:.17g},"
                     f"{int(r.fallback)},{r.fidelity:.17g},"
                     f"{r.x:.17g},{r.y:.17g},{r.z:.17g}\n")
