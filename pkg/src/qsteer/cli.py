"""Configuration parsing, run orchestration and file output.

Command surface:

    qsteer decoherence|target|composite|feedback|compare
           --config <path> [--out <dir>] [--set key=value ...] [--seed <int>]

Configs are YAML documents validated against per-mode schemas; unknown keys
are hard errors (with a nearest-key suggestion), and every applied default is
echoed back into ``resolved_config.yaml`` in the output directory so a run can
be reproduced byte-identically.  Open-loop modes use Rabi-normalised time
units; feedback modes use units of the decay time 1/gamma.

Exit status is 0 iff the run completed and every threshold in the optional
``require`` section was met; failed runs keep their partial outputs next to a
``FAILED`` marker file.
"""

from __future__ import annotations

import argparse
import difflib
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import feedback as fb
from .decoherence import SpectralConfig, tabulate, write_curve_csv
from .errors import ConfigError, QsteerError
from .evolution import ControlAxis
from .states import PureStateAngle, pure_state
from .targeting import (TargetingConfig, run_composite, run_targeting,
                        write_control_csv)

OUT_ROOT_ENV = "QSTEER_OUT_ROOT"

_REQUIRED = object()

_SPECTRAL_SCHEMA = {
    "coupling_gamma": (float, _REQUIRED),
    "beta0": (float, 1.0),
    "omega_c": (float, 1.0),
    "omega_12": (float, 10.0),
    "spectral_exponent": (float, 1.0),
}

_ANGLE_SCHEMA = {
    "theta": (float, _REQUIRED),
    "phi": (float, 0.0),
}

_TARGETING_SCHEMA = {
    "regime": (str, _REQUIRED),
    "axis": (list, _REQUIRED),
    "n_intermediates": (int, _REQUIRED),
    "cycles_per_intermediate": (int, 2),
    "i_max": (float, _REQUIRED),
    "dt": (float, _REQUIRED),
    "hold_cycles": (int, 0),
    "interpolation": (str, "angular"),
    "fidelity_threshold": (float, 0.99),
    "arc_direction": (int, 0),
    "initial": (dict, _REQUIRED),
    "target": (dict, _REQUIRED),
}

_FEEDBACK_SCHEMA = {
    "gamma": (float, 1.0),
    "alpha": (float, 0.0),
    "lam": (float, 0.0),
    "target_theta": (float, None),
    "eta": (float, 1.0),
    "delay": (float, 0.0),
    "phi": (float, 0.0),
    "dt": (float, 1e-4),
    "seed": (int, 0),
    "n_traj": (int, 1),
    "t_end": (float, _REQUIRED),
    "with_feedback": (bool, True),
    "run": (list, ["trajectory"]),
    "initial": (dict, {"theta": math.pi, "phi": 0.0}),
    "target": (dict, None),
}

_REQUIRE_SCHEMA = {
    "min_final_fidelity": (float, None),
    "max_final_fidelity": (float, None),
    "max_transition_steps": (int, None),
}

_MODE_SCHEMAS = {
    "decoherence": {
        "regime": (str, _REQUIRED),
        "dt": (float, _REQUIRED),
        "n": (int, _REQUIRED),
        "rel_tol": (float, 1e-10),
        "spectral": (dict, _REQUIRED),
    },
    "target": {
        "targeting": (dict, _REQUIRED),
        "spectral": (dict, _REQUIRED),
        "require": (dict, None),
    },
    "composite": {
        "leg1": (dict, _REQUIRED),
        "leg2": (dict, _REQUIRED),
        "require": (dict, None),
    },
    "feedback": {
        "feedback": (dict, _REQUIRED),
        "require": (dict, None),
    },
    "compare": {
        "openloop": (dict, _REQUIRED),
        "feedback": (dict, _REQUIRED),
        "require": (dict, None),
    },
}

_NESTED_SCHEMAS = {
    "spectral": _SPECTRAL_SCHEMA,
    "targeting": _TARGETING_SCHEMA,
    "feedback": _FEEDBACK_SCHEMA,
    "require": _REQUIRE_SCHEMA,
    "initial": _ANGLE_SCHEMA,
    "target": _ANGLE_SCHEMA,
    "leg1": {"targeting": (dict, _REQUIRED), "spectral": (dict, _REQUIRED)},
    "leg2": {"targeting": (dict, _REQUIRED), "spectral": (dict, _REQUIRED)},
    "openloop": {"targeting": (dict, _REQUIRED), "spectral": (dict, _REQUIRED)},
}


def _suggest(key: str, known) -> str:
    close = difflib.get_close_matches(key, list(known), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _apply_schema(data, schema: dict, path: str) -> dict:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"parse-error at {path}: expected a mapping")
    out = {}
    for key in data:
        if key not in schema:
            raise ConfigError(
                f"parse-error at {path}: unknown key {key!r}{_suggest(key, schema)}")
    for key, (typ, default) in schema.items():
        if key in data and data[key] is not None:
            val = data[key]
            if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
                val = float(val)
            elif typ is int and isinstance(val, int) and not isinstance(val, bool):
                val = int(val)
            elif not isinstance(val, typ) or (typ is not bool and isinstance(val, bool)):
                raise ConfigError(
                    f"validation-error at {path}.{key}: expected {typ.__name__}")
        else:
            if default is _REQUIRED:
                raise ConfigError(f"validation-error at {path}: missing key {key!r}")
            val = default
        if key in _NESTED_SCHEMAS and isinstance(val, dict):
            val = _apply_schema(val, _NESTED_SCHEMAS[key], f"{path}.{key}")
        out[key] = val
    return out


def _angle(doc: dict) -> PureStateAngle:
    return PureStateAngle.normalized(doc["theta"], doc["phi"])


def _spectral(doc: dict) -> SpectralConfig:
    return SpectralConfig(**doc)


def _targeting(doc: dict, spectral_doc: dict) -> TargetingConfig:
    axis = doc["axis"]
    if len(axis) != 2:
        raise ConfigError("validation-error: axis must be a [cx, cy] pair")
    return TargetingConfig(
        regime=doc["regime"], axis=ControlAxis(float(axis[0]), float(axis[1])),
        n_intermediates=doc["n_intermediates"],
        cycles_per_intermediate=doc["cycles_per_intermediate"],
        i_max=doc["i_max"], dt=doc["dt"], spectral=_spectral(spectral_doc),
        initial=_angle(doc["initial"]), target=_angle(doc["target"]),
        hold_cycles=doc["hold_cycles"], interpolation=doc["interpolation"],
        fidelity_threshold=doc["fidelity_threshold"],
        arc_direction=doc["arc_direction"])


def _feedback_cfg(doc: dict) -> tuple[fb.FeedbackConfig, PureStateAngle, PureStateAngle]:
    alpha, lam = doc["alpha"], doc["lam"]
    if doc["target_theta"] is not None:
        alpha, lam = fb.feedback_params_for_target(doc["target_theta"], doc["gamma"])
        doc["alpha"], doc["lam"] = alpha, lam
    cfg = fb.FeedbackConfig(gamma=doc["gamma"], alpha=alpha, lam=lam,
                            eta=doc["eta"], delay=doc["delay"], phi=doc["phi"],
                            dt=doc["dt"], seed=doc["seed"], n_traj=doc["n_traj"])
    initial = _angle(doc["initial"])
    if doc["target"] is not None:
        target = _angle(doc["target"])
    elif doc["target_theta"] is not None:
        target = PureStateAngle.normalized(doc["target_theta"], doc["phi"])
    else:
        target = PureStateAngle(0.0, 0.0)
    doc["target"] = {"theta": target.theta, "phi": target.phi}
    return cfg, initial, target


def _check_require(req: dict | None, final_fidelity: float,
                   transition_steps: int | None) -> list[str]:
    if not req:
        return []
    failures = []
    if req.get("min_final_fidelity") is not None and final_fidelity < req["min_final_fidelity"]:
        failures.append(f"final fidelity {final_fidelity:.6g} < "
                        f"required {req['min_final_fidelity']}")
    if req.get("max_final_fidelity") is not None and final_fidelity > req["max_final_fidelity"]:
        failures.append(f"final fidelity {final_fidelity:.6g} > "
                        f"allowed {req['max_final_fidelity']}")
    if req.get("max_transition_steps") is not None:
        if transition_steps is None or transition_steps > req["max_transition_steps"]:
            failures.append(f"transition steps {transition_steps} > "
                            f"allowed {req['max_transition_steps']}")
    return failures


def _run_decoherence(doc: dict, outdir: Path) -> tuple[bool, str]:
    curve = tabulate(doc["regime"], _spectral(doc["spectral"]), doc["dt"], doc["n"],
                     rel_tol=doc["rel_tol"])
    write_curve_csv(curve, outdir / "curve.csv")
    summary = (f"regime={doc['regime']} n={len(curve)} dt={curve.dt:.12g} "
               f"g_last={curve.values[-1]:.12g}")
    return True, summary


def _run_target(doc: dict, outdir: Path) -> tuple[bool, str]:
    cfg = _targeting(doc["targeting"], doc["spectral"])
    log = run_targeting(cfg)
    write_control_csv(log, outdir / "control_log.csv")
    failures = _check_require(doc.get("require"), log.final_fidelity, log.transition_step)
    ok = log.converged and not failures
    return ok, log.summary_line()


def _run_composite(doc: dict, outdir: Path) -> tuple[bool, str]:
    cfg1 = _targeting(doc["leg1"]["targeting"], doc["leg1"]["spectral"])
    cfg2 = _targeting(doc["leg2"]["targeting"], doc["leg2"]["spectral"])
    log = run_composite(cfg1, cfg2)
    write_control_csv(log, outdir / "control_log.csv")
    failures = _check_require(doc.get("require"), log.final_fidelity, log.transition_step)
    ok = log.converged and not failures
    return ok, log.summary_line()


def _run_feedback(doc: dict, outdir: Path) -> tuple[bool, str]:
    cfg, initial, target = _feedback_cfg(doc["feedback"])
    rho0 = pure_state(initial)
    t_end = doc["feedback"]["t_end"]
    runs = doc["feedback"]["run"]
    unknown = set(runs) - {"trajectory", "ensemble", "master"}
    if unknown:
        raise ConfigError(f"validation-error: unknown run kinds {sorted(unknown)}")
    primary = None
    if "master" in runs:
        rec = fb.integrate_master(rho0, cfg, t_end,
                                  with_feedback=doc["feedback"]["with_feedback"])
        fb.write_trajectory_csv(rec, target, outdir / "master.csv")
        primary = rec
    if "trajectory" in runs:
        rec = fb.simulate_trajectory(rho0, cfg, t_end)
        fb.write_trajectory_csv(rec, target, outdir / "trajectory.csv")
        primary = rec
    if "ensemble" in runs:
        rec = fb.ensemble_average(cfg, rho0, t_end)
        fb.write_trajectory_csv(rec, target, outdir / "ensemble.csv")
        primary = rec
    summary = fb.summary_line(primary, target)
    final_fid = float(primary.fidelities(target)[-1])
    failures = _check_require(doc.get("require"), final_fid, None)
    return not failures, summary


def _run_compare(doc: dict, outdir: Path) -> tuple[bool, str]:
    ol_dir = outdir / "openloop"
    fb_dir = outdir / "feedback"
    ol_dir.mkdir(parents=True, exist_ok=True)
    fb_dir.mkdir(parents=True, exist_ok=True)

    cfg_ol = _targeting(doc["openloop"]["targeting"], doc["openloop"]["spectral"])
    log = run_targeting(cfg_ol)
    write_control_csv(log, ol_dir / "control_log.csv")
    t0_tau = (None if log.transition_step is None else log.transition_step * cfg_ol.dt)

    cfg_fb, initial, target = _feedback_cfg(doc["feedback"])
    rho0 = pure_state(initial)
    t_end = doc["feedback"]["t_end"]
    ens = fb.ensemble_average(cfg_fb, rho0, t_end)
    fb.write_trajectory_csv(ens, target, fb_dir / "ensemble.csv")
    t0s = []
    for idx in range(cfg_fb.n_traj):
        rec = fb.simulate_trajectory(rho0, cfg_fb, t_end, traj_index=idx)
        t0 = fb.transition_time(rec, target)
        t0s.append(math.inf if t0 is None else t0)
    med = float(np.median(t0s))
    med_str = "none" if not math.isfinite(med) else f"{med:.12g}"

    lines = [
        f"openloop {log.summary_line()} t0_tau="
        + ("none" if t0_tau is None else f"{t0_tau:.12g}"),
        f"feedback {fb.summary_line(ens, target)} t0_median={med_str}",
    ]
    summary = "\n".join(lines)
    failures = _check_require(doc.get("require"), log.final_fidelity, log.transition_step)
    return log.converged and not failures, summary


_RUNNERS = {
    "decoherence": _run_decoherence,
    "target": _run_target,
    "composite": _run_composite,
    "feedback": _run_feedback,
    "compare": _run_compare,
}


def _set_override(doc: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    cur = doc
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = yaml.safe_load(raw)


def parse_config(text: str, mode: str, overrides=(), seed: int | None = None) -> dict:
    """Validate a config document for a mode, applying overrides and defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse-error: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("parse-error: top level must be a mapping")
    for dotted, value in overrides:
        _set_override(raw, dotted, value)
    if seed is not None:
        if mode == "feedback":
            raw.setdefault("feedback", {})["seed"] = seed
        elif mode == "compare":
            raw.setdefault("feedback", {})["seed"] = seed
    if mode not in _MODE_SCHEMAS:
        raise ConfigError(f"unknown mode {mode!r}")
    return _apply_schema(raw, _MODE_SCHEMAS[mode], mode)


def run(mode: str, doc: dict, outdir: Path) -> int:
    """Execute a validated run spec; returns the process exit status."""
    outdir.mkdir(parents=True, exist_ok=True)
    marker = outdir / "FAILED"
    if marker.exists():
        marker.unlink()
    try:
        ok, summary = _RUNNERS[mode](doc, outdir)
    except QsteerError as exc:
        with open(outdir / "resolved_config.yaml", "w") as fh:
            yaml.safe_dump(doc, fh, sort_keys=True)
        marker.write_text(f"{type(exc).__name__}: {exc}\n")
        raise
    with open(outdir / "resolved_config.yaml", "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)
    (outdir / "summary.txt").write_text(summary + "\n")
    print(summary)
    if not ok:
        marker.write_text("thresholds not met\n" + summary + "\n")
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qsteer",
        description="Open-loop qubit steering and homodyne-feedback benchmark runs.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _MODE_SCHEMAS:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (dotted path)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed override")
    args = parser.parse_args(argv)

    overrides = []
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        dotted, raw = item.split("=", 1)
        overrides.append((dotted, raw))

    if args.out is not None:
        outdir = Path(args.out)
    else:
        root = os.environ.get(OUT_ROOT_ENV, "runs")
        outdir = Path(root) / args.mode / Path(args.config).stem

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        doc = parse_config(text, args.mode, overrides, args.seed)
        return run(args.mode, doc, outdir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QsteerError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
