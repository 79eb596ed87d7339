"""Command-line harness: run controllers in simulation, inspect dynamics,
self-check the engine.

Commands::

    wholebody simulate CONFIG [--print-config]
    wholebody dynamics MODEL.urdf [--q ...] [--nu ...] [--frame NAME]
                       [--zero-gravity] [--floating] [--base-pos X Y Z]
    wholebody verify [--seed N]

The simulate config is an INI file with sections [model], [selection],
[controller], [simulation] and [logging]; see the README for every key.
Model paths are resolved relative to the config file, log paths relative
to the working directory.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from configparser import ConfigParser, Error as ConfigParserError
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics
from .controllers import PdGravityGains, gravity_compensation_step, pd_gravity_step
from .errors import ConfigError, UnknownJoint, WholeBodyError
from .interface import ControlMode, initialize
from .model import (MultibodyModel, RobotConfiguration, RobotVelocity,
                    load_model, neutral_configuration, zero_velocity)
from .sim import SimulatedRobot, TrajectoryLog
from .spatial import exp_so3

CONTROLLERS = ("pd_gravity", "gravity_comp", "none")
BACKENDS = ("sim",)


def bundled_fixture(name: str) -> Path:
    """Path of a model or config file shipped with the package."""
    return Path(str(resources.files("wholebody") / "fixtures" / name))


# --- run configuration ----------------------------------------------------------

@dataclass
class RunConfig:
    model_path: str
    floating: bool = False
    gravity: tuple = (0.0, 0.0, -9.81)
    backend: str = "sim"
    joints: tuple | None = None  # None selects all model joints
    controller: str = "none"
    kp: tuple | None = None
    kd: tuple | None = None
    setpoint: tuple | None = None
    dt: float = 1e-3
    duration: float = 5.0
    initial_positions: tuple | None = None
    initial_velocities: tuple | None = None
    filter_cutoff: float = 10.0
    noise_std: float = 0.0
    noise_seed: int = 0
    settle_threshold: float = 1e-3
    log_path: str | None = None
    decimation: int = 1


def _floats(text: str, key: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as e:
        raise ConfigError(key, f"expected numbers, got '{text}'") from e


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    parser = ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except ConfigParserError as e:
        raise ConfigError("config", f"cannot parse: {e}") from e

    def get(section, key, default=None, required=False):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        if required:
            raise ConfigError(f"{section}.{key}", "required key is missing")
        return default

    def get_float(section, key, default):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as e:
            raise ConfigError(f"{section}.{key}", f"expected a number, got '{raw}'") from e

    def get_int(section, key, default):
        raw = get(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as e:
            raise ConfigError(f"{section}.{key}", f"expected an integer, got '{raw}'") from e

    def get_bool(section, key, default):
        raw = get(section, key)
        if raw is None:
            return default
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}", f"expected a boolean, got '{raw}'")

    def get_vec(section, key):
        raw = get(section, key)
        return None if raw is None else _floats(raw, f"{section}.{key}")

    model_rel = get("model", "urdf", required=True)
    model_path = Path(model_rel)
    if not model_path.is_absolute():
        model_path = (path.parent / model_path).resolve()

    gravity = get_vec("model", "gravity") or (0.0, 0.0, -9.81)
    if len(gravity) != 3:
        raise ConfigError("model.gravity", "expected 3 numbers")
    backend = get("model", "backend", default="sim")
    if backend not in BACKENDS:
        raise ConfigError("model.backend", f"unknown backend '{backend}'")

    joints_raw = get("selection", "joints", default="all")
    joints = None if joints_raw.lower() == "all" else tuple(
        joints_raw.replace(",", " ").split())
    if joints is not None and not joints:
        raise ConfigError("selection.joints", "joint list is empty")

    controller = get("controller", "type", default="none")
    if controller not in CONTROLLERS:
        raise ConfigError("controller.type",
                          f"expected one of {CONTROLLERS}, got '{controller}'")

    cfg = RunConfig(
        model_path=str(model_path),
        floating=get_bool("model", "floating", False),
        gravity=gravity,
        backend=backend,
        joints=joints,
        controller=controller,
        kp=get_vec("controller", "kp"),
        kd=get_vec("controller", "kd"),
        setpoint=get_vec("controller", "setpoint"),
        dt=get_float("simulation", "dt", 1e-3),
        duration=get_float("simulation", "duration", 5.0),
        initial_positions=get_vec("simulation", "initial_positions"),
        initial_velocities=get_vec("simulation", "initial_velocities"),
        filter_cutoff=get_float("simulation", "filter_cutoff", 10.0),
        noise_std=get_float("simulation", "noise_std", 0.0),
        noise_seed=get_int("simulation", "noise_seed", 0),
        settle_threshold=get_float("simulation", "settle_threshold", 1e-3),
        log_path=get("logging", "path"),
        decimation=get_int("logging", "decimation", 1),
    )

    if not 0.0 < cfg.dt <= 0.01:
        raise ConfigError("simulation.dt", f"must be in (0, 0.01], got {cfg.dt}")
    if cfg.duration <= 0.0:
        raise ConfigError("simulation.duration", f"must be > 0, got {cfg.duration}")
    if cfg.decimation < 1:
        raise ConfigError("logging.decimation", "must be >= 1")
    if cfg.noise_std < 0.0:
        raise ConfigError("simulation.noise_std", "must be >= 0")
    if cfg.settle_threshold <= 0.0:
        raise ConfigError("simulation.settle_threshold", "must be > 0")
    if cfg.controller == "pd_gravity":
        for key in ("kp", "kd", "setpoint"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"controller.{key}", "required for pd_gravity")
    return cfg


def dump_run_config(cfg: RunConfig) -> str:
    """Config echo; re-parsing the output reproduces an equivalent run."""

    def vec(v):
        return " ".join(repr(float(x)) for x in v)

    lines = ["[model]",
             f"urdf = {cfg.model_path}",
             f"floating = {str(cfg.floating).lower()}",
             f"gravity = {vec(cfg.gravity)}",
             f"backend = {cfg.backend}",
             "",
             "[selection]",
             f"joints = {'all' if cfg.joints is None else ' '.join(cfg.joints)}",
             "",
             "[controller]",
             f"type = {cfg.controller}"]
    for key in ("kp", "kd", "setpoint"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {vec(value)}")
    lines += ["",
              "[simulation]",
              f"dt = {repr(cfg.dt)}",
              f"duration = {repr(cfg.duration)}"]
    for key in ("initial_positions", "initial_velocities"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {vec(value)}")
    lines += [f"filter_cutoff = {repr(cfg.filter_cutoff)}",
              f"noise_std = {repr(cfg.noise_std)}",
              f"noise_seed = {cfg.noise_seed}",
              f"settle_threshold = {repr(cfg.settle_threshold)}",
              "",
              "[logging]"]
    if cfg.log_path is not None:
        lines.append(f"path = {cfg.log_path}")
    lines.append(f"decimation = {cfg.decimation}")
    return "\n".join(lines) + "\n"


# --- simulate ---------------------------------------------------------------------

def _broadcast(values, size, key) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape == (1,) and size > 1:
        arr = np.full(size, arr[0])
    if arr.shape != (size,):
        raise ConfigError(key, f"expected {size} values, got {len(values)}")
    return arr


def _initial_state(cfg: RunConfig, model: MultibodyModel):
    config = neutral_configuration(model)
    if cfg.initial_positions is not None:
        q0 = _broadcast(cfg.initial_positions, model.dof_count,
                        "simulation.initial_positions")
        config = RobotConfiguration(config.base_position, config.base_rotation, q0)
    velocity = zero_velocity(model)
    if cfg.initial_velocities is not None:
        v0 = _broadcast(cfg.initial_velocities, model.dof_count,
                        "simulation.initial_velocities")
        velocity = RobotVelocity(np.zeros(3), np.zeros(3), v0)
    return config, velocity


def run_simulation(cfg: RunConfig, out=sys.stdout) -> None:
    model = _load_config_model(cfg)
    sim = SimulatedRobot(model, dt=cfg.dt, gravity=np.asarray(cfg.gravity),
                         noise_std=cfg.noise_std, noise_seed=cfg.noise_seed)
    config0, velocity0 = _initial_state(cfg, model)
    sim.reset(config0, velocity0)
    try:
        interface = initialize(model, cfg.joints, sim,
                               gravity=np.asarray(cfg.gravity),
                               filter_cutoff=cfg.filter_cutoff)
    except UnknownJoint as e:
        raise ConfigError("selection.joints", str(e)) from e
    m = interface.dofs

    gains = None
    if cfg.controller == "pd_gravity":
        gains = PdGravityGains(kp=_broadcast(cfg.kp, m, "controller.kp"),
                               kd=_broadcast(cfg.kd, m, "controller.kd"),
                               setpoint=_broadcast(cfg.setpoint, m,
                                                   "controller.setpoint"))
    if cfg.controller != "none":
        interface.actuators.set_control_mode(ControlMode.TORQUE)

    ctrl_model_idx = np.array([model.dof_index(n) for n in interface.joint_names])
    if gains is not None:
        target = gains.setpoint
    else:
        target = config0.joint_positions[ctrl_model_idx]

    # log selected joints, kept in canonical model order
    log_names = [n for n in model.joint_names if n in set(interface.joint_names)]
    log_idx = np.array([model.dof_index(n) for n in log_names], dtype=int)
    log = None
    if cfg.log_path:
        log = TrajectoryLog(cfg.log_path, log_names, floating=model.floating,
                            decimation=cfg.decimation)

    steps = max(1, int(round(cfg.duration / cfg.dt)))
    error_trace = np.empty(steps)
    max_torque = 0.0
    try:
        for k in range(steps):
            if cfg.controller == "pd_gravity":
                pd_gravity_step(interface, gains)
            elif cfg.controller == "gravity_comp":
                gravity_compensation_step(interface)
            state = sim.step()
            q = state.configuration.joint_positions
            error_trace[k] = np.max(np.abs(q[ctrl_model_idx] - target))
            applied = state.applied_torques[ctrl_model_idx]
            max_torque = max(max_torque, float(np.max(np.abs(applied))) if m else 0.0)
            if log is not None:
                log.record(state.time, q[log_idx],
                           state.velocity.joint_velocities[log_idx],
                           state.applied_torques[log_idx],
                           base_pose=state.configuration.base_transform(),
                           base_velocity=sim.base_velocity())
    finally:
        if log is not None:
            log.close()

    below = error_trace < cfg.settle_threshold
    settle = None
    if below[-1]:
        k = steps - 1
        while k >= 0 and below[k]:
            k -= 1
        settle = (k + 2) * cfg.dt  # first step index after which it stays below
    print(f"steps: {steps}", file=out)
    print(f"final_error_inf: {error_trace[-1]:.6e}", file=out)
    print(f"settling_time_s: {'never' if settle is None else format(settle, '.3f')}",
          file=out)
    print(f"max_torque: {max_torque:.6e}", file=out)
    print(f"saturation_events: {interface.actuators.saturation_count}", file=out)
    print(f"log: {cfg.log_path if cfg.log_path else 'none'}", file=out)


def _load_config_model(cfg: RunConfig) -> MultibodyModel:
    try:
        return load_model(cfg.model_path, floating=cfg.floating)
    except WholeBodyError as e:
        raise ConfigError("model.urdf", str(e)) from e


def cmd_simulate(args) -> int:
    try:
        cfg = load_run_config(args.config)
        if args.print_config:
            _load_config_model(cfg)  # validate before echoing
            sys.stdout.write(dump_run_config(cfg))
            return 0
        run_simulation(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except WholeBodyError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    return 0


# --- dynamics ----------------------------------------------------------------------

def _print_block(name, matrix, out):
    print(f"# {name}", file=out)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    for row in matrix:
        print(",".join(format(v, ".12g") for v in row), file=out)


def cmd_dynamics(args) -> int:
    out = sys.stdout
    try:
        model = load_model(args.model, floating=args.floating)
        n = model.dof_count
        q = np.zeros(n) if args.q is None else np.asarray(args.q, dtype=float)
        if q.shape != (n,):
            raise WholeBodyError(f"--q needs {n} values, got {q.size}")
        dim = model.velocity_dim
        nu = np.zeros(dim) if args.nu is None else np.asarray(args.nu, dtype=float)
        if nu.shape != (dim,):
            raise WholeBodyError(f"--nu needs {dim} values, got {nu.size}")
        base_pos = np.zeros(3)
        base_rot = np.eye(3)
        if args.base_pos is not None:
            base_pos = np.asarray(args.base_pos, dtype=float)
        config = RobotConfiguration(base_pos, base_rot, q)
        velocity = RobotVelocity.from_generalized(nu, model.floating)
        gravity = np.zeros(3) if args.zero_gravity else dynamics.GRAVITY

        print(f"# model {model.name}", file=out)
        print(f"# joint_order", file=out)
        print(",".join(model.joint_names), file=out)
        _print_block("mass_matrix", dynamics.mass_matrix(model, config), out)
        _print_block("gravity_bias",
                     dynamics.gravity_bias(model, config, gravity), out)
        _print_block("bias_forces",
                     dynamics.bias_forces(model, config, velocity, gravity), out)
        if args.frame is not None:
            jac = dynamics.frame_jacobian(model, config, args.frame)
            _print_block(f"jacobian {args.frame}", jac, out)
    except (WholeBodyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


# --- verify ---------------------------------------------------------------------------

def _fd_frame_twist(model, config, velocity, frame, h=1e-6):
    """Finite-difference twist of a frame along the trajectory q(t)."""
    plus = dynamics.forward_kinematics(
        model, dynamics.integrate_configuration(model, config, velocity, h))[frame]
    minus = dynamics.forward_kinematics(
        model, dynamics.integrate_configuration(model, config, velocity, -h))[frame]
    here = dynamics.forward_kinematics(model, config)[frame]
    lin = (plus.translation - minus.translation) / (2.0 * h)
    rdot = (plus.rotation - minus.rotation) / (2.0 * h)
    w_mat = rdot @ here.rotation.T
    ang = 0.5 * np.array([w_mat[2, 1] - w_mat[1, 2],
                          w_mat[0, 2] - w_mat[2, 0],
                          w_mat[1, 0] - w_mat[0, 1]])
    return np.concatenate([lin, ang])


def _random_state(model, rng, spread=1.0):
    q = rng.uniform(-spread, spread, model.dof_count)
    config = RobotConfiguration(rng.uniform(-1, 1, 3) if model.floating else np.zeros(3),
                                exp_so3(rng.uniform(-1, 1, 3)) if model.floating
                                else np.eye(3), q)
    velocity = RobotVelocity(rng.uniform(-1, 1, 3) if model.floating else np.zeros(3),
                             rng.uniform(-1, 1, 3) if model.floating else np.zeros(3),
                             rng.uniform(-1, 1, model.dof_count))
    return config, velocity


def _verify_mass_matrix_symmetry(rng):
    worst = 0.0
    for name, floating in (("arm4.urdf", True), ("chain5.urdf", False)):
        model = load_model(bundled_fixture(name), floating=floating)
        for _ in range(10):
            config, _ = _random_state(model, rng)
            m = dynamics.mass_matrix(model, config)
            worst = max(worst, float(np.max(np.abs(m - m.T))))
            np.linalg.cholesky(m)  # positive definiteness
    return worst < 1e-9, f"max asymmetry {worst:.3e} (tol 1e-9)"


def _verify_fd_id_round_trip(rng):
    worst = 0.0
    for name, floating in (("chain5.urdf", False), ("floating_chain3.urdf", True)):
        model = load_model(bundled_fixture(name), floating=floating)
        for _ in range(20):
            config, velocity = _random_state(model, rng)
            accel = rng.uniform(-1, 1, model.velocity_dim)
            force = dynamics.inverse_dynamics(model, config, velocity, accel)
            if model.floating:
                # base rows are unactuated: feed them back as a base wrench
                tau = force[6:]
                contacts = [(model.base_link, force[0:6])]
            else:
                tau = force
                contacts = None
            recovered = dynamics.forward_dynamics(model, config, velocity, tau,
                                                  contacts=contacts)
            worst = max(worst, float(np.max(np.abs(recovered - accel))))
    return worst < 1e-8, f"max round-trip error {worst:.3e} (tol 1e-8)"


def _verify_jacobian_fd(rng):
    model = load_model(bundled_fixture("arm4.urdf"), floating=True)
    worst = 0.0
    for _ in range(10):
        config, velocity = _random_state(model, rng)
        nu = velocity.to_generalized(True)
        for frame in model.frame_names:
            jac = dynamics.frame_jacobian(model, config, frame)
            worst = max(worst, float(np.max(np.abs(
                jac @ nu - _fd_frame_twist(model, config, velocity, frame)))))
    return worst < 1e-6, f"max twist error {worst:.3e} (tol 1e-6)"


def _verify_energy_drift():
    model = load_model(bundled_fixture("pendulum.urdf"))
    sim = SimulatedRobot(model, dt=1e-3)
    q0 = RobotConfiguration(np.zeros(3), np.eye(3), np.array([2.0]))
    sim.reset(q0)
    bottom = RobotConfiguration(np.zeros(3), np.eye(3), np.zeros(1))
    u_ref = dynamics.potential_energy(model, bottom)

    def energy():
        return (dynamics.kinetic_energy(model, sim.configuration, sim.velocity)
                + dynamics.potential_energy(model, sim.configuration) - u_ref)

    e0 = energy()
    worst = 0.0
    for _ in range(10000):
        sim.step()
        worst = max(worst, abs(energy() - e0))
    rel = worst / abs(e0)
    return rel < 0.01, f"relative drift {rel:.3e} over 10 s (tol 1e-2)"


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    checks = [
        ("mass_matrix_symmetry", lambda: _verify_mass_matrix_symmetry(rng)),
        ("fd_id_round_trip", lambda: _verify_fd_id_round_trip(rng)),
        ("jacobian_finite_difference", lambda: _verify_jacobian_fd(rng)),
        ("energy_drift", _verify_energy_drift),
    ]
    failed = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except WholeBodyError as e:
            ok, detail = False, f"raised {type(e).__name__}: {e}"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


# --- entry point -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wholebody",
        description="Whole-body control demos: simulate, inspect dynamics, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a controller in simulation")
    p_sim.add_argument("config", help="INI run configuration")
    p_sim.add_argument("--print-config", action="store_true",
                       help="echo the parsed configuration and exit")
    p_sim.set_defaults(fn=cmd_simulate)

    p_dyn = sub.add_parser("dynamics", help="print dynamics quantities of a model")
    p_dyn.add_argument("model", help="URDF file")
    p_dyn.add_argument("--q", type=float, nargs="+", default=None,
                       help="joint positions (canonical order)")
    p_dyn.add_argument("--nu", type=float, nargs="+", default=None,
                       help="generalized velocity (base first when floating)")
    p_dyn.add_argument("--frame", default=None, help="also print this frame's jacobian")
    p_dyn.add_argument("--zero-gravity", action="store_true")
    p_dyn.add_argument("--floating", action="store_true")
    p_dyn.add_argument("--base-pos", type=float, nargs=3, default=None)
    p_dyn.set_defaults(fn=cmd_dynamics)

    p_ver = sub.add_parser("verify", help="run the built-in engine checks")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
