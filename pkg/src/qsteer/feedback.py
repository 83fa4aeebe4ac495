"""Homodyne-feedback benchmark for a spontaneously emitting two-level atom.

The atom decays at rate gamma through the lowering operator sigma = |1><2| and
is driven by a resonant classical field of strength alpha.  All of the
fluorescence is collected in a homodyne setup (local-oscillator phase zero),
yielding the photocurrent

    Delta I(t) = sqrt(gamma) <sigma_x>_c + dW/dt.

Adding the photocurrent to the drive with gain lambda modifies the ensemble
master equation to

    drho/dt = -i alpha [A_phi, rho] + D[sqrt(gamma) sigma - i lambda A_phi] rho,

where A_phi = sigma_x sin(phi) + sigma_y cos(phi) is the drive/feedback
operator of the control plane S_phi and D[A]B = A B A^+ - {A^+ A, B}/2.

Conditioned trajectories are integrated by Euler-Maruyama: a measurement
update driven by the simulated photocurrent, followed by an exact rotation
through the drive-plus-feedback angle.  With perfect detection the conditioned
state stays pure and is propagated as a state vector; inefficient detection
(eta < 1) splits the emission into a conditioned channel of rate eta*gamma and
an undetected Lindblad channel of rate (1-eta)*gamma, and propagates the
density matrix.  Feedback delay is realised with a circular buffer of past
photocurrent samples (no feedback before one delay time has elapsed).

Matrix conventions match `qsteer.states`: basis ordering (ground, excited),
sigma_x = [[0,1],[1,0]], sigma_y = [[0,-i],[i,0]], sigma = [[0,1],[0,0]].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateTargetError, StepInstabilityError
from .states import (BlochVector, DensityMatrix, PureStateAngle, pure_state,
                     to_bloch)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)

_MASTER_STEP = 1e-3       # default deterministic step, in units of 1/gamma
_SDE_STEP_LIMIT = 1e-3    # cfg.dt must not exceed this / gamma for SDE runs
_MAX_HALVINGS = 6
_NOISE_BLOCK = 4096


@dataclass(frozen=True)
class FeedbackConfig:
    """Parameters of the feedback scheme (times in units of 1/gamma for gamma=1)."""

    gamma: float = 1.0
    alpha: float = 0.0
    lam: float = 0.0
    eta: float = 1.0
    delay: float = 0.0
    phi: float = 0.0
    dt: float = 1e-4
    seed: int = 0
    n_traj: int = 1

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled Bloch trajectory; states has shape (n_samples, 3)."""

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    kind: str = "single_conditioned"
    stderr: np.ndarray | None = field(default=None, repr=False)

    def fidelities(self, target: PureStateAngle) -> np.ndarray:
        w = to_bloch(pure_state(target)).as_array()
        return 0.5 * (1.0 + self.states @ w)

    def purities(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def final_state(self) -> BlochVector:
        return BlochVector(*self.states[-1])


def drive_operator(phi: float) -> np.ndarray:
    """A_phi = sigma_x sin(phi) + sigma_y cos(phi); rotates Bloch plane S_phi."""
    return math.sin(phi) * SIGMA_X + math.cos(phi) * SIGMA_Y


def collapse_operator(cfg: FeedbackConfig, with_feedback: bool) -> np.ndarray:
    """Emission (plus feedback) collapse operator of the control plane S_phi.

    The whole phi = 0 scheme is conjugated by the z rotation that maps the x-z
    plane onto S_phi; under that rotation the lowering operator acquires the
    phase e^{i phi}, which fixes the relative phase between the emission and
    feedback parts (a global phase would be irrelevant, the relative one is
    not).  Without feedback the phase drops out of the dissipator entirely.
    """
    if not with_feedback:
        return math.sqrt(cfg.gamma) * SIGMA_MINUS
    phase = complex(math.cos(cfg.phi), math.sin(cfg.phi))
    return (math.sqrt(cfg.gamma) * phase * SIGMA_MINUS
            - 1j * cfg.lam * drive_operator(cfg.phi))


def _master_deriv(m: np.ndarray, alpha, a_phi: np.ndarray,
                  c: np.ndarray) -> np.ndarray:
    """Master-equation right-hand side; batched over leading axes of every input."""
    c_dag = np.swapaxes(c.conj(), -1, -2)
    cc = c_dag @ c
    out = -1j * np.asarray(alpha) * (a_phi @ m - m @ a_phi)
    out += c @ m @ c_dag - 0.5 * (cc @ m + m @ cc)
    return out


def master_rhs(rho: DensityMatrix, cfg: FeedbackConfig,
               with_feedback: bool = False) -> np.ndarray:
    """Time derivative of the density matrix under the (feedback) master equation."""
    rho.validate()
    return _master_deriv(rho.as_array(), cfg.alpha, drive_operator(cfg.phi),
                         collapse_operator(cfg, with_feedback))


def stationary_solution(alpha: float, gamma: float, phi: float = 0.0) -> BlochVector:
    """Closed-form fixed point of the driven atom without feedback."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    denom = gamma * gamma + 8.0 * alpha * alpha
    return BlochVector(4.0 * alpha * gamma * math.cos(phi) / denom,
                       -4.0 * alpha * gamma * math.sin(phi) / denom,
                       -gamma * gamma / denom)


def feedback_params_for_target(theta: float, gamma: float) -> tuple[float, float]:
    """Drive and feedback strengths that stabilise the pure target |theta>.

    With the conventions above the stabilising values are

        alpha = -(gamma / 4) sin(theta) cos(theta),
        lambda = (sqrt(gamma) / 2) (1 + cos(theta)),

    for which sqrt(gamma) sigma - i lambda sigma_y annihilates |theta> up to a
    scalar.  theta = +/- pi/2 (equal superpositions) is degenerate: the
    collapse operator becomes proportional to sigma_x, which no longer singles
    out one of the two equatorial states.
    """
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if min(abs(theta - math.pi / 2), abs(theta + math.pi / 2)) <= 1e-6:
        raise DegenerateTargetError(
            "equal-superposition targets theta = +/- pi/2 are degenerate")
    alpha = -0.25 * gamma * math.sin(theta) * math.cos(theta)
    lam = 0.5 * math.sqrt(gamma) * (1.0 + math.cos(theta))
    return alpha, lam


def _bloch_of_matrices(m: np.ndarray) -> np.ndarray:
    """(..., 2, 2) density matrices -> (..., 3) Bloch coordinates."""
    x = 2.0 * m[..., 0, 1].real
    y = -2.0 * m[..., 0, 1].imag
    z = (m[..., 1, 1] - m[..., 0, 0]).real
    return np.stack([x, y, z], axis=-1)


def _check_states(m: np.ndarray) -> bool:
    tr = np.abs(m[..., 0, 0] + m[..., 1, 1] - 1.0)
    d = 0.5 * (m[..., 0, 0] - m[..., 1, 1]).real
    disc = np.hypot(d, np.abs(m[..., 0, 1]))
    eig_min = 0.5 - disc
    return bool(np.all(tr < 1e-9) and np.all(eig_min > -1e-9))


def integrate_master(rho0: DensityMatrix, cfg: FeedbackConfig, t_end: float,
                     with_feedback: bool = False, h: float | None = None,
                     n_samples: int = 1001) -> TrajectoryRecord:
    """Fixed-step 4th-order (RK4) integration of the master equation.

    Trace and positivity are monitored at every sample; a violation halves the
    step and retries, up to 6 times, before raising StepInstabilityError.
    """
    if t_end <= 0:
        raise ValueError("t_end must be > 0")
    rho0.validate()
    a_phi = drive_operator(cfg.phi)
    c = collapse_operator(cfg, with_feedback)
    step = h if h is not None else _MASTER_STEP / cfg.gamma
    for _ in range(_MAX_HALVINGS + 1):
        n_steps = max(1, int(math.ceil(t_end / step)))
        hh = t_end / n_steps
        stride = max(1, n_steps // (n_samples - 1)) if n_samples > 1 else n_steps
        m = rho0.as_array()
        times = [0.0]
        states = [_bloch_of_matrices(m)]
        ok = True
        for k in range(1, n_steps + 1):
            k1 = _master_deriv(m, cfg.alpha, a_phi, c)
            k2 = _master_deriv(m + 0.5 * hh * k1, cfg.alpha, a_phi, c)
            k3 = _master_deriv(m + 0.5 * hh * k2, cfg.alpha, a_phi, c)
            k4 = _master_deriv(m + hh * k3, cfg.alpha, a_phi, c)
            m = m + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if k % stride == 0 or k == n_steps:
                if not _check_states(m):
                    ok = False
                    break
                times.append(k * hh)
                states.append(_bloch_of_matrices(m))
        if ok:
            return TrajectoryRecord(times=np.array(times), states=np.array(states),
                                    kind="master_equation")
        step /= 2.0
    raise StepInstabilityError("master integration unstable after 6 step halvings")


def _traj_generator(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based per-trajectory noise stream (order-independent ensembles)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(traj_index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _pure_amplitudes(rho0: DensityMatrix) -> np.ndarray:
    """State-vector amplitudes (ground, excited) of a pure density matrix."""
    w, v = np.linalg.eigh(rho0.as_array())
    return v[:, int(np.argmax(w))].astype(complex)


def _simulate_batch(rho0: DensityMatrix, cfg: FeedbackConfig, t_end: float,
                    traj_indices, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Euler-Maruyama batch of conditioned trajectories.

    Returns (times, bloch) with bloch of shape (n_traj, n_samples, 3).
    Pure-state-preserving vector propagation is used at eta = 1 with a pure
    initial state; otherwise the conditioned density matrix is propagated.
    """
    gamma, eta, lam, alpha, phi = cfg.gamma, cfg.eta, cfg.lam, cfg.alpha, cfg.phi
    n_steps = max(1, int(round(t_end / dt)))
    delay_steps = int(round(cfg.delay / dt))
    stride = max(1, n_steps // 2000)
    n = len(traj_indices)
    gens = [_traj_generator(cfg.seed, int(i)) for i in traj_indices]
    sq_det = math.sqrt(eta * gamma)
    mu = math.sin(phi) - 1j * math.cos(phi)        # A_phi = [[0, mu], [mu*, 0]]
    pf = complex(math.cos(phi), math.sin(phi))     # z-rotated lowering-operator phase

    vector_path = (eta == 1.0) and to_bloch(rho0).r >= 1.0 - 1e-9
    if vector_path:
        psi0 = _pure_amplitudes(rho0)
        p1 = np.full(n, psi0[0], dtype=complex)
        p2 = np.full(n, psi0[1], dtype=complex)
    else:
        m0 = rho0.as_array()
        r11 = np.full(n, m0[0, 0], dtype=complex)
        r12 = np.full(n, m0[0, 1], dtype=complex)
        r22 = np.full(n, m0[1, 1], dtype=complex)

    buffer = np.zeros((n, delay_steps)) if delay_steps > 0 else None
    sqrt_dt = math.sqrt(dt)
    times = [0.0]
    samples = []

    def current_bloch():
        if vector_path:
            r = p1 * np.conj(p2)
            return np.stack([2.0 * r.real, -2.0 * r.imag,
                             (np.abs(p2) ** 2 - np.abs(p1) ** 2)], axis=-1)
        return np.stack([2.0 * r12.real, -2.0 * r12.imag, (r22 - r11).real], axis=-1)

    samples.append(current_bloch())
    for k in range(n_steps):
        pos = k % _NOISE_BLOCK
        if pos == 0:
            width = min(_NOISE_BLOCK, n_steps - k)
            noise = np.empty((n, width))
            for i, g in enumerate(gens):
                noise[i] = g.standard_normal(width)
            noise *= sqrt_dt
        dw = noise[:, pos]

        # Homodyne quadrature of the S_phi scheme (x quadrature at phi = 0).
        if vector_path:
            xc = 2.0 * (pf * np.conj(p1) * p2).real
        else:
            xc = 2.0 * (np.conj(pf) * r12).real
        i_dt = sq_det * xc * dt + dw

        if delay_steps > 0:
            slot = k % delay_steps
            fb = buffer[:, slot].copy() if k >= delay_steps else np.zeros(n)
            buffer[:, slot] = i_dt
        else:
            fb = i_dt

        if vector_path:
            p1 = p1 + math.sqrt(gamma) * pf * p2 * i_dt
            p2 = p2 * (1.0 - 0.5 * gamma * dt)
        else:
            # Full-rate Lindblad decay plus conditioning on the detected channel.
            h11 = 2.0 * (np.conj(pf) * r12).real + 0.0j
            n11 = r11 + gamma * r22 * dt + sq_det * dw * (h11 - xc * r11)
            n12 = r12 - 0.5 * gamma * r12 * dt + sq_det * dw * (pf * r22 - xc * r12)
            n22 = r22 - gamma * r22 * dt + sq_det * dw * (-xc * r22)
            r11, r12, r22 = n11, n12, n22

        chi = alpha * dt + lam * fb
        cc = np.cos(chi)
        ss = np.sin(chi)
        if vector_path:
            t1 = cc * p1 - 1j * ss * mu * p2
            t2 = cc * p2 - 1j * ss * np.conj(mu) * p1
            norm = np.sqrt(np.abs(t1) ** 2 + np.abs(t2) ** 2)
            p1, p2 = t1 / norm, t2 / norm
        else:
            u12 = -1j * ss * mu
            u21 = -1j * ss * np.conj(mu)
            a11 = cc * r11 + u12 * np.conj(r12)
            a12 = cc * r12 + u12 * r22
            a21 = u21 * r11 + cc * np.conj(r12)
            a22 = u21 * r12 + cc * r22
            r11 = a11 * cc + a12 * np.conj(u12)
            r12 = a11 * np.conj(u21) + a12 * cc
            r22 = a21 * np.conj(u21) + a22 * cc
            tr = (r11 + r22).real
            r11, r12, r22 = r11 / tr, r12 / tr, r22 / tr

        if (k + 1) % stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * dt)
            samples.append(current_bloch())

    bloch = np.stack(samples, axis=1)
    if not np.all(np.isfinite(bloch)):
        raise StepInstabilityError("stochastic integration produced non-finite values")
    return np.array(times), bloch


def _run_batch_with_retry(rho0, cfg, t_end, traj_indices):
    if cfg.dt > _SDE_STEP_LIMIT / cfg.gamma + 1e-15:
        raise ValueError("cfg.dt exceeds the SDE step bound 1e-3 / gamma")
    dt = cfg.dt
    for _ in range(_MAX_HALVINGS + 1):
        try:
            return _simulate_batch(rho0, cfg, t_end, traj_indices, dt)
        except StepInstabilityError:
            dt /= 2.0
    raise StepInstabilityError("stochastic integration unstable after 6 halvings")


def simulate_trajectory(rho0: DensityMatrix, cfg: FeedbackConfig, t_end: float,
                        traj_index: int = 0) -> TrajectoryRecord:
    """One conditioned trajectory (bit-reproducible for a given seed and index)."""
    rho0.validate()
    times, bloch = _run_batch_with_retry(rho0, cfg, t_end, [traj_index])
    return TrajectoryRecord(times=times, states=bloch[0], kind="single_conditioned")


def ensemble_average(cfg: FeedbackConfig, rho0: DensityMatrix,
                     t_end: float) -> TrajectoryRecord:
    """Pointwise mean Bloch vector over n_traj independent trajectories."""
    if cfg.n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    rho0.validate()
    times, bloch = _run_batch_with_retry(rho0, cfg, t_end, range(cfg.n_traj))
    mean = bloch.mean(axis=0)
    if cfg.n_traj > 1:
        stderr = bloch.std(axis=0, ddof=1) / math.sqrt(cfg.n_traj)
    else:
        stderr = np.zeros_like(mean)
    return TrajectoryRecord(times=times, states=mean, kind="ensemble_mean",
                            stderr=stderr)


def transition_time(record: TrajectoryRecord, target: PureStateAngle,
                    threshold: float = 0.99) -> float | None:
    """First time the fidelity with the target reaches the threshold.

    Linearly interpolates between the samples bracketing the crossing;
    returns None if the threshold is never reached.
    """
    fids = record.fidelities(target)
    if fids.size == 0:
        return None
    hits = np.nonzero(fids >= threshold)[0]
    if hits.size == 0:
        return None
    k = int(hits[0])
    if k == 0:
        return 0.0
    f0, f1 = fids[k - 1], fids[k]
    t0, t1 = record.times[k - 1], record.times[k]
    return float(t0 + (threshold - f0) * (t1 - t0) / (f1 - f0))


def summary_line(record: TrajectoryRecord, target: PureStateAngle) -> str:
    t0 = transition_time(record, target)
    t0_str = "none" if t0 is None else f"{t0:.12g}"
    return (f"t0={t0_str} final_fidelity={record.fidelities(target)[-1]:.12g} "
            f"final_purity={record.purities()[-1]:.12g}")


def write_trajectory_csv(record: TrajectoryRecord, target: PureStateAngle, path) -> None:
    """CSV export: time,x,y,z,fidelity (+ stderr columns for ensembles)."""
    fids = record.fidelities(target)
    ens = record.kind == "ensemble_mean" and record.stderr is not None
    with open(path, "w") as fh:
        header = "time,x,y,z,fidelity"
        if ens:
            header += ",stderr_x,stderr_y,stderr_z"
        fh.write(header + "\n")
        for k, t in enumerate(record.times):
            row = (f"{t:.17g},{record.states[k, 0]:.17g},{record.states[k, 1]:.17g},"
                   f"{record.states[k, 2]:.17g},{fids[k]:.17g}")
            if ens:
                row += (f",{record.stderr[k, 0]:.17g},{record.stderr[k, 1]:.17g},"
                        f"{record.stderr[k, 2]:.17g}")
            fh.write(row + "\n")
