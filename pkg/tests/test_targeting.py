import math

import numpy as np
import pytest

from qsteer.decoherence import SpectralConfig, tabulate
from qsteer.evolution import AXIS_X, AXIS_Y, evolve
from qsteer.states import (PureStateAngle, fidelity_states, from_bloch,
                           pure_state, to_bloch)
from qsteer.targeting import (COMPONENT_ORDER, TargetingConfig,
                              plan_intermediates, run_composite, run_cycle,
                              run_targeting, solve_step, write_control_csv,
                              _component_value)

GROUND = PureStateAngle(math.pi, 0.0)
EXCITED = PureStateAngle(0.0, 0.0)
GROUND_YZ = PureStateAngle(math.pi, math.pi / 2)
PLUS_Y = PureStateAngle(-math.pi / 2, math.pi / 2)   # (|1> + i|2>)/sqrt(2)
PLUS_X = PureStateAngle(math.pi / 2, 0.0)            # (|1> + |2>)/sqrt(2)

SPEC_OFF = SpectralConfig(coupling_gamma=0.0, beta0=1.0, omega_c=1.0, omega_12=10.0)
SPEC_WEAK = SpectralConfig(coupling_gamma=0.005, beta0=1.0, omega_c=1.0, omega_12=10.0)


def make_cfg(**kw):
    base = dict(regime="thermal", axis=AXIS_Y, n_intermediates=10,
                cycles_per_intermediate=2, i_max=0.1, dt=0.05,
                spectral=SPEC_WEAK, initial=GROUND, target=EXCITED)
    base.update(kw)
    return TargetingConfig(**base)


def grid_scan_root(component, zeta, rho, g, i_acc, cfg, n=100_000):
    """Dense-grid oracle: the in-interval pulse area minimising the residual."""
    grid = np.linspace(-cfg.i_max, cfg.i_max, n)
    vals = np.array([_component_value(
        evolve(cfg.regime, rho, g, i_acc + i, cfg.axis), component) - zeta
        for i in grid])
    k = int(np.argmin(np.abs(vals)))
    return grid[k], abs(vals[k])


class TestPlanIntermediates:
    def test_single_is_target(self):
        out = plan_intermediates(GROUND, PLUS_X, 1)
        assert fidelity_states(out[0], pure_state(PLUS_X)) > 1.0 - 1e-12

    def test_uniform_ground_to_excited(self):
        out = plan_intermediates(GROUND, EXCITED, 4)
        # uniform angular spacing: 3pi/4, pi/2, pi/4, 0
        for rho, th in zip(out, (3 * math.pi / 4, math.pi / 2, math.pi / 4, 0.0)):
            assert fidelity_states(rho, pure_state(PureStateAngle(th, 0.0))) > 1.0 - 1e-12

    def test_six_waypoints_to_superposition(self):
        out = plan_intermediates(GROUND, PLUS_X, 6)
        assert len(out) == 6
        angles = [math.pi - (k / 6) * (math.pi / 2) for k in range(1, 7)]
        for rho, th in zip(out, angles):
            assert fidelity_states(rho, pure_state(PureStateAngle(th, 0.0))) > 1.0 - 1e-12

    def test_degenerate_path(self):
        out = plan_intermediates(PLUS_X, PLUS_X, 5)
        assert len(out) == 1
        assert fidelity_states(out[0], pure_state(PLUS_X)) > 1.0 - 1e-12

    def test_every_waypoint_pure(self):
        for rho in plan_intermediates(GROUND, EXCITED, 25):
            assert abs(to_bloch(rho).r - 1.0) < 1e-12

    def test_chordal_waypoints_are_mixed(self):
        out = plan_intermediates(GROUND, EXCITED, 4, interpolation="chordal")
        assert to_bloch(out[1]).r < 0.6

    def test_forced_direction(self):
        short = plan_intermediates(GROUND, PLUS_X, 8)
        # the shorter arc decreases theta; forcing +1 goes the long way round
        long = plan_intermediates(GROUND, PLUS_X, 8, arc_direction=1)
        assert fidelity_states(long[3], pure_state(EXCITED)) > 0.5
        assert fidelity_states(short[3], pure_state(EXCITED)) < 0.5


class TestSolveStep:
    def test_zero_when_already_satisfied(self):
        cfg = make_cfg()
        rho = pure_state(GROUND)
        res = solve_step("11R", 1.0, rho, 0.0, 0.0, cfg)
        assert res.pulse_area == 0.0 and not res.fallback

    def test_known_population_root(self):
        # From the ground state, rho11(I) = cos^2(I) at g=0, so zeta = cos^2(0.05)
        cfg = make_cfg(i_max=0.1, spectral=SPEC_OFF)
        rho = pure_state(GROUND)
        zeta = math.cos(0.05) ** 2
        res = solve_step("11R", zeta, rho, 0.0, 0.0, cfg)
        assert abs(abs(res.pulse_area) - 0.05) < 1e-9
        assert res.residual < 1e-10 and not res.fallback
        i_oracle, _ = grid_scan_root("11R", zeta, rho, 0.0, 0.0, cfg)
        assert abs(abs(res.pulse_area) - abs(i_oracle)) < 1e-4

    def test_out_of_reach_falls_back_to_minimiser(self):
        cfg = make_cfg(i_max=0.1, spectral=SPEC_OFF)
        rho = pure_state(GROUND)
        res = solve_step("11R", 0.0, rho, 0.0, 0.0, cfg)  # needs |I| = pi/2
        assert res.fallback
        assert abs(res.pulse_area) <= cfg.i_max
        i_oracle, res_oracle = grid_scan_root("11R", 0.0, rho, 0.0, 0.0, cfg)
        assert res.residual <= res_oracle + 1e-9
        assert abs(abs(res.pulse_area) - abs(i_oracle)) < 1e-4

    def test_smallest_root_preferred(self):
        # Many roots exist for a coherence target when i_max spans > one period.
        cfg = make_cfg(i_max=3.0, spectral=SPEC_OFF)
        rho = pure_state(PLUS_X)
        zeta = _component_value(evolve("thermal", pure_state(PLUS_X), 0.0, 0.2, AXIS_Y),
                                "12R")
        res = solve_step("12R", zeta, rho, 0.0, 0.0, cfg)
        assert abs(res.pulse_area) <= 0.2 + 1e-6

    def test_residual_tolerance_on_roots(self, rng):
        cfg = make_cfg(i_max=0.2, spectral=SPEC_WEAK)
        curve = tabulate("thermal", SPEC_WEAK, cfg.dt, 9)
        rho = pure_state(PureStateAngle(2.2, 0.0))
        zeta_state = pure_state(PureStateAngle(2.15, 0.0))
        for comp in COMPONENT_ORDER:
            res = solve_step(comp, _component_value(zeta_state, comp), rho,
                             float(curve.values[1]), 0.0, cfg)
            if not res.fallback:
                assert res.residual <= 1e-10


class TestRunCycle:
    def test_noop_when_on_target_no_decoherence(self):
        cfg = make_cfg(spectral=SPEC_OFF)
        curve = tabulate("thermal", SPEC_OFF, cfg.dt, 9)
        rho = pure_state(PLUS_X)
        out, recs = run_cycle(rho, pure_state(PLUS_X), curve, cfg, 0)
        assert all(r.pulse_area == 0.0 for r in recs)
        assert fidelity_states(out, pure_state(PLUS_X)) > 1.0 - 1e-12

    def test_zero_budget_is_pure_decoherence(self):
        cfg = make_cfg(i_max=1e-12)
        curve = tabulate("thermal", SPEC_WEAK, cfg.dt, 9)
        rho = pure_state(PLUS_X)
        out, recs = run_cycle(rho, pure_state(EXCITED), curve, cfg, 0)
        expected = evolve("thermal", rho, float(curve.values[8]), 0.0, AXIS_Y)
        assert abs(out.r11 - expected.r11) < 1e-9
        assert abs(out.r12 - expected.r12) < 1e-9

    def test_first_cycle_improves_fidelity(self):
        cfg = make_cfg(n_intermediates=100, i_max=0.01, dt=0.005)
        curve = tabulate("thermal", SPEC_WEAK, cfg.dt, 9)
        rho = pure_state(GROUND)
        zeta = plan_intermediates(GROUND, EXCITED, 100)[0]
        out, recs = run_cycle(rho, zeta, curve, cfg, 0, prefer_sign=1)
        assert fidelity_states(out, zeta) > fidelity_states(rho, zeta)

    def test_eight_steps_fixed_order(self):
        cfg = make_cfg()
        curve = tabulate("thermal", SPEC_WEAK, cfg.dt, 9)
        _, recs = run_cycle(pure_state(GROUND), pure_state(EXCITED), curve, cfg, 40)
        assert tuple(r.component for r in recs) == COMPONENT_ORDER
        assert [r.step for r in recs] == list(range(40, 48))


class TestRunTargeting:
    def test_trivial_when_initial_equals_target(self):
        cfg = make_cfg(initial=PLUS_X, target=PLUS_X, n_intermediates=3,
                       cycles_per_intermediate=1, spectral=SPEC_OFF)
        log = run_targeting(cfg)
        assert log.transition_step == 0
        assert all(abs(r.pulse_area) < 1e-9 for r in log.steps)

    def test_exact_steering_without_decoherence(self):
        for target in (EXCITED, PLUS_X, PureStateAngle(2.0, 0.0)):
            cfg = make_cfg(spectral=SPEC_OFF, n_intermediates=10,
                           cycles_per_intermediate=2, i_max=0.1, hold_cycles=2)
            cfg = make_cfg(spectral=SPEC_OFF, target=target)
            log = run_targeting(cfg)
            assert log.final_fidelity >= 1.0 - 1e-6

    def test_pulse_bound_respected(self):
        log = run_targeting(make_cfg())
        assert all(abs(r.pulse_area) <= 0.1 + 1e-12 for r in log.steps)

    def test_waypoint_fidelity_nondecreasing_smooth_run(self):
        cfg = make_cfg(n_intermediates=100, i_max=0.01, dt=0.005, hold_cycles=0)
        log = run_targeting(cfg)
        # fidelity at the end of each waypoint's cycles, against the final target
        ends = [log.steps[(2 * (k + 1)) * 8 - 1].fidelity for k in range(100)]
        violations = sum(1 for a, b in zip(ends, ends[1:]) if b < a - 0.01)
        assert violations <= 5

    def test_maintenance_phase_holds(self):
        cfg = make_cfg(n_intermediates=100, i_max=0.01, dt=0.005, hold_cycles=100)
        log = run_targeting(cfg)
        hold = [r.fidelity for r in log.steps[-100 * 8:]]
        assert min(hold) >= 0.99

    def test_plane_validation(self):
        with pytest.raises(ValueError):
            make_cfg(axis=AXIS_Y, initial=GROUND, target=PLUS_Y)

    def test_summary_line_format(self):
        log = run_targeting(make_cfg(spectral=SPEC_OFF))
        line = log.summary_line()
        assert line.startswith("final_fidelity=")
        assert "transition_steps=" in line and "fallback_steps=" in line


class TestComposite:
    def two_leg_configs(self, reverse=False):
        leg1 = make_cfg(initial=PLUS_X, target=GROUND, axis=AXIS_Y,
                        n_intermediates=15, cycles_per_intermediate=2,
                        i_max=0.05, dt=0.01)
        leg2 = make_cfg(initial=GROUND_YZ, target=PLUS_Y, axis=AXIS_X,
                        n_intermediates=15, cycles_per_intermediate=2,
                        i_max=0.05, dt=0.01)
        if not reverse:
            return leg1, leg2
        back1 = make_cfg(initial=PLUS_Y, target=GROUND_YZ, axis=AXIS_X,
                         n_intermediates=15, cycles_per_intermediate=2,
                         i_max=0.05, dt=0.01)
        back2 = make_cfg(initial=GROUND, target=PLUS_X, axis=AXIS_Y,
                         n_intermediates=15, cycles_per_intermediate=2,
                         i_max=0.05, dt=0.01)
        return back1, back2

    def test_two_axis_drive(self):
        log = run_composite(*self.two_leg_configs())
        assert log.final_fidelity > 0.99
        assert log.converged

    def test_reversal_returns_to_start(self):
        log = run_composite(*self.two_leg_configs(reverse=True))
        assert log.final_fidelity > 0.99

    def test_null_second_leg(self):
        leg1, _ = self.two_leg_configs()
        null2 = make_cfg(initial=GROUND_YZ, target=GROUND_YZ, axis=AXIS_X,
                         n_intermediates=1, cycles_per_intermediate=1)
        log = run_composite(leg1, null2)
        assert fidelity_states(log.final_state, pure_state(GROUND)) > 0.99

    def test_leg_validation(self):
        leg1 = make_cfg(initial=PLUS_X, target=PLUS_X)
        leg2 = make_cfg(initial=GROUND_YZ, target=PLUS_Y, axis=AXIS_X)
        with pytest.raises(ValueError):
            run_composite(leg1, leg2)  # leg1 does not end at ground
        leg1 = make_cfg(initial=PLUS_X, target=GROUND)
        leg2b = make_cfg(initial=GROUND, target=PLUS_X)
        with pytest.raises(ValueError):
            run_composite(leg1, leg2b)  # same axis on both legs


class TestCsv:
    def test_control_csv_format(self, tmp_path):
        log = run_targeting(make_cfg(spectral=SPEC_OFF, n_intermediates=2,
                                     cycles_per_intermediate=1))
        path = tmp_path / "log.csv"
        write_control_csv(log, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == ("step,time,cycle,intermediate,component,pulse_area,"
                            "residual,fallback,fidelity,x,y,z")
        assert len(lines) == 1 + len(log.steps)
        first = lines[1].split(",")
        assert first[0] == "0" and first[4] == "11R"
