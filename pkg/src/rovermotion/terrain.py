"""Regolith slip, actuator power model, traverse simulation, calibration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import nnls

from rovermotion.config import (
    WHEEL_ORDER,
    BodyTwist,
    ConfigError,
    LocomotionMode,
    RoverConfig,
    WheelCommand,
    validate_config,
    wheel_positions,
)
from rovermotion.kernels import integrate_track
from rovermotion.kinematics import ProfileSegment, inverse_kinematics, load_twist_profile
from rovermotion.telemetry import BUS_VOLTAGE, TelemetryRecord

_ANGLE_TOL = 1e-9


class CalibrationError(ValueError):
    """Raised when the power-model calibration problem is ill-posed."""


@dataclass(frozen=True)
class TerrainParams:
    slope_deg: float = 0.0
    skid_rotation_efficiency: float = 0.75
    point_turn_efficiency: float = 1.0
    longitudinal_slip_ratio: float = 0.05
    noise_std: float = 0.0
    rng_seed: int = 0


def validate_terrain(terrain: TerrainParams) -> TerrainParams:
    if not 0.0 <= terrain.slope_deg < 90.0:
        raise ConfigError("slope out of supported range")
    for name in ("skid_rotation_efficiency", "point_turn_efficiency"):
        if not 0.0 < getattr(terrain, name) <= 1.0:
            raise ConfigError(f"{name} outside (0, 1]")
    if not 0.0 <= terrain.longitudinal_slip_ratio < 1.0:
        raise ConfigError("longitudinal_slip_ratio outside [0, 1)")
    if terrain.noise_std < 0.0:
        raise ConfigError("negative noise_std")
    return terrain


@dataclass(frozen=True)
class PowerModelParams:
    """Electrical power model of the drive and steering units.

    Default rolling-resistance and quadratic coefficients are the
    flat-ground calibration result for the breadboard configuration.
    """

    idle_power_per_drive: float = 0.0  # W
    rolling_resistance_coeff: float = 0.201
    drivetrain_efficiency: float = 1.0
    steering_hold_power: float = 0.0  # W per steering unit at rest
    steering_move_power: float = 8.0  # W per steering unit while repositioning
    speed_quadratic_coeff: float = 3069.549  # W s^2/m^2 per wheel
    lateral_friction_coeff: float = 0.4  # scrub drag during skid rotation
    drawbar_force: float = 0.0  # N, payload/implement pull (excavator mode)


def validate_power(power: PowerModelParams) -> PowerModelParams:
    for name in (
        "idle_power_per_drive",
        "rolling_resistance_coeff",
        "steering_hold_power",
        "steering_move_power",
        "speed_quadratic_coeff",
        "lateral_friction_coeff",
    ):
        if getattr(power, name) < 0.0:
            raise ConfigError(f"negative {name}")
    if not 0.0 < power.drivetrain_efficiency <= 1.0:
        raise ConfigError("drivetrain_efficiency outside (0, 1]")
    return power


def apply_slip(
    cmd: BodyTwist,
    mode: LocomotionMode,
    terrain: TerrainParams,
    rng: np.random.Generator | None = None,
) -> BodyTwist:
    """Scale a commanded twist down to the achieved twist on regolith."""
    if mode is LocomotionMode.SKID_STEER:
        yaw_eff = terrain.skid_rotation_efficiency
    elif mode is LocomotionMode.POINT_TURN:
        yaw_eff = terrain.point_turn_efficiency
    else:
        yaw_eff = 1.0
    lin = 1.0 - terrain.longitudinal_slip_ratio
    vx = cmd.vx * lin
    vy = cmd.vy * lin
    wz = cmd.wz * yaw_eff
    if rng is not None and terrain.noise_std > 0.0:
        vx *= 1.0 + rng.normal(0.0, terrain.noise_std)
        vy *= 1.0 + rng.normal(0.0, terrain.noise_std)
        wz *= 1.0 + rng.normal(0.0, terrain.noise_std)
    return BodyTwist(vx, vy, wz)


def _twist_from_commands(
    commands: list[WheelCommand], config: RoverConfig
) -> BodyTwist:
    # same rolling-projection least squares as forward_odometry
    from rovermotion.kinematics import forward_odometry

    return forward_odometry(commands, LocomotionMode.SKID_STEER, config)


def drive_power(
    commands: list[WheelCommand],
    terrain: TerrainParams,
    config: RoverConfig,
    power: PowerModelParams,
    steering_in_motion: bool = False,
) -> tuple[float, dict[str, float]]:
    """Total electrical power and per-actuator breakdown for a command set.

    Per drive: idle power plus slope/rolling-resistance tractive power, a
    quadratic speed term, lateral scrub drag (nonzero only when a wheel's
    no-slip contact velocity has a component across its rolling direction,
    as in skid rotation), and an optional drawbar pull, all divided by the
    drivetrain efficiency. Steering units draw move power while
    repositioning and hold power otherwise.
    """
    theta = math.radians(terrain.slope_deg)
    weight_per_wheel = config.mass * config.gravity / 4.0
    tractive_coeff = (
        power.rolling_resistance_coeff * math.cos(theta) + math.sin(theta)
    ) * weight_per_wheel
    normal_per_wheel = weight_per_wheel * math.cos(theta)
    twist = _twist_from_commands(commands, config)
    positions = wheel_positions(config)

    breakdown: dict[str, float] = {}
    for cmd in commands:
        v_i = abs(cmd.drive_speed) * config.wheel_radius
        px, py = positions[cmd.wheel_id]
        cx = twist.vx - twist.wz * py
        cy = twist.vy + twist.wz * px
        ux = math.cos(cmd.steering_angle)
        uy = math.sin(cmd.steering_angle)
        lateral = abs(-uy * cx + ux * cy)
        p_i = (
            power.idle_power_per_drive
            + (
                tractive_coeff * v_i
                + power.speed_quadratic_coeff * v_i * v_i
                + power.lateral_friction_coeff * normal_per_wheel * lateral
                + (power.drawbar_force / 4.0) * v_i
            )
            / power.drivetrain_efficiency
        )
        breakdown[f"drive_{cmd.wheel_id.value.lower()}"] = max(p_i, 0.0)
    steer_power = (
        power.steering_move_power if steering_in_motion else power.steering_hold_power
    )
    for cmd in commands:
        breakdown[f"steer_{cmd.wheel_id.value.lower()}"] = steer_power
    return sum(breakdown.values()), breakdown


_MODE_REFERENCE_TWIST = {
    LocomotionMode.SKID_STEER: BodyTwist(1.0, 0.0, 0.0),
    LocomotionMode.CRAB: BodyTwist(1.0, 0.0, 0.0),
    LocomotionMode.ACKERMANN: BodyTwist(1.0, 0.0, 0.0),
    LocomotionMode.POINT_TURN: BodyTwist(0.0, 0.0, 1.0),
}


def mode_steering_angles(mode: LocomotionMode, config: RoverConfig) -> list[float]:
    """Canonical steering angles a mode requires before motion starts."""
    commands = inverse_kinematics(_MODE_REFERENCE_TWIST[mode], mode, config)
    return [cmd.steering_angle for cmd in commands]


def reposition_between(
    from_angles: list[float],
    to_angles: list[float],
    config: RoverConfig,
    power: PowerModelParams,
) -> tuple[float, float]:
    """(energy J, duration s) to slew steering units between angle sets."""
    deltas = [abs(b - a) for a, b in zip(from_angles, to_angles)]
    duration = max(deltas) / config.steering_rate
    moving = sum(1 for d in deltas if d > _ANGLE_TOL)
    return power.steering_move_power * moving * duration, duration


def steering_reposition_energy(
    from_mode: LocomotionMode,
    to_mode: LocomotionMode,
    config: RoverConfig,
    power: PowerModelParams,
) -> tuple[float, float]:
    """Energy and duration of the steering slew between two modes' poses."""
    return reposition_between(
        mode_steering_angles(from_mode, config),
        mode_steering_angles(to_mode, config),
        config,
        power,
    )


@dataclass(frozen=True)
class Scenario:
    profile: list[ProfileSegment]
    terrain: TerrainParams = field(default_factory=TerrainParams)
    config: RoverConfig = field(default_factory=RoverConfig)
    power: PowerModelParams = field(default_factory=PowerModelParams)
    marker_offset: tuple[float, float] = (0.0, 0.0)
    step: float = 0.01
    name: str = "scenario"


def _record(
    t: float,
    pose: tuple[float, float, float],
    marker_offset: tuple[float, float],
    odo: BodyTwist,
    cmd: BodyTwist,
    breakdown: dict[str, float],
    speeds: tuple[float, ...],
    angles: tuple[float, ...],
) -> TelemetryRecord:
    x, y, heading = pose
    mx, my = marker_offset
    cos_t, sin_t = math.cos(heading), math.sin(heading)
    marker = (x + cos_t * mx - sin_t * my, y + sin_t * mx + cos_t * my)
    tags = [w.value.lower() for w in WHEEL_ORDER]
    drive_p = [breakdown[f"drive_{tag}"] for tag in tags]
    steer_p = [breakdown[f"steer_{tag}"] for tag in tags]
    return TelemetryRecord(
        t=t,
        pose=pose,
        marker=marker,
        odo_twist=odo,
        commanded_twist=cmd,
        drive_voltage=(BUS_VOLTAGE,) * 4,
        drive_current=tuple(p / BUS_VOLTAGE for p in drive_p),
        steer_voltage=(BUS_VOLTAGE,) * 4,
        steer_current=tuple(p / BUS_VOLTAGE for p in steer_p),
        drive_speeds=tuple(speeds),
        steering_angles=tuple(angles),
    )


@dataclass(frozen=True)
class _Phase:
    n_steps: int
    # sample(tau) -> (angles, breakdown, odo_twist, commanded_twist, speeds)
    start_angles: tuple[float, ...]
    deltas: tuple[float, ...]
    move_times: tuple[float, ...]
    motion: tuple | None  # (odo, cmd, breakdown, speeds, angles) or None


def simulate_traverse(scenario: Scenario) -> list[TelemetryRecord]:
    """Simulate a scenario into synthetic telemetry.

    Before any segment whose steering pose differs from the current one, a
    reposition phase is inserted: the body holds still while the steering
    units slew at the configured rate, drawing move power. During motion,
    odometry reflects the commanded (pre-slip) wheel speeds while the
    ground-truth pose integrates the slip-reduced twist, so the odometry /
    ground-truth efficiency gap appears by construction.
    """
    config = validate_config(scenario.config)
    terrain = validate_terrain(scenario.terrain)
    power = validate_power(scenario.power)
    if scenario.step <= 0:
        raise ConfigError("non-positive integration step")
    if not scenario.profile:
        return []
    rng = np.random.default_rng(terrain.rng_seed)
    step = scenario.step

    phases: list[_Phase] = []
    current_angles = (0.0, 0.0, 0.0, 0.0)
    vx_steps: list[float] = []
    vy_steps: list[float] = []
    wz_steps: list[float] = []
    for segment in scenario.profile:
        if segment.duration <= 0:
            raise ConfigError("non-positive segment duration")
        commands = inverse_kinematics(segment.twist, segment.mode, config)
        targets = tuple(cmd.steering_angle for cmd in commands)
        deltas = tuple(b - a for a, b in zip(current_angles, targets))
        move_times = tuple(abs(d) / config.steering_rate for d in deltas)
        if max(move_times) > _ANGLE_TOL:
            n = math.ceil(max(move_times) / step - 1e-9)
            phases.append(_Phase(n, current_angles, deltas, move_times, None))
            vx_steps.extend([0.0] * n)
            vy_steps.extend([0.0] * n)
            wz_steps.extend([0.0] * n)
            current_angles = targets
        n = max(1, round(segment.duration / step))
        _, breakdown = drive_power(commands, terrain, config, power, False)
        speeds = tuple(cmd.drive_speed for cmd in commands)
        phases.append(
            _Phase(
                n,
                targets,
                (0.0,) * 4,
                (0.0,) * 4,
                (segment.twist, segment.twist, breakdown, speeds, targets),
            )
        )
        if terrain.noise_std > 0.0:
            twists = [
                apply_slip(segment.twist, segment.mode, terrain, rng)
                for _ in range(n)
            ]
        else:
            twists = [apply_slip(segment.twist, segment.mode, terrain)] * n
        vx_steps.extend(tw.vx for tw in twists)
        vy_steps.extend(tw.vy for tw in twists)
        wz_steps.extend(tw.wz for tw in twists)

    xs, ys, ths = integrate_track(
        np.array(vx_steps), np.array(vy_steps), np.array(wz_steps), step
    )

    zero = BodyTwist()
    idle = {f"drive_{w.value.lower()}": power.idle_power_per_drive for w in WHEEL_ORDER}

    def reposition_sample(phase: _Phase, tau: float):
        angles = tuple(
            a + math.copysign(min(tau * config.steering_rate, abs(d)), d)
            for a, d in zip(phase.start_angles, phase.deltas)
        )
        breakdown = dict(idle)
        for wheel, mt in zip(WHEEL_ORDER, phase.move_times):
            breakdown[f"steer_{wheel.value.lower()}"] = (
                power.steering_move_power
                if tau < mt - 1e-12
                else power.steering_hold_power
            )
        return zero, zero, breakdown, (0.0,) * 4, angles

    records: list[TelemetryRecord] = []
    k = 0  # global sample index
    for phase in phases:
        for j in range(phase.n_steps):
            if phase.motion is None:
                odo, cmd, breakdown, speeds, angles = reposition_sample(
                    phase, j * step
                )
            else:
                odo, cmd, breakdown, speeds, angles = phase.motion
            pose = (float(xs[k]), float(ys[k]), float(ths[k]))
            records.append(
                _record(
                    k * step, pose, scenario.marker_offset, odo, cmd,
                    breakdown, speeds, angles,
                )
            )
            k += 1
    # final sample carries the last motion phase's end state
    last = phases[-1]
    if last.motion is None:
        odo, cmd, breakdown, speeds, angles = reposition_sample(
            last, last.n_steps * step
        )
    else:
        odo, cmd, breakdown, speeds, angles = last.motion
    pose = (float(xs[k]), float(ys[k]), float(ths[k]))
    records.append(
        _record(
            k * step, pose, scenario.marker_offset, odo, cmd,
            breakdown, speeds, angles,
        )
    )
    return records


def model_cot(
    power: PowerModelParams, config: RoverConfig, slope_deg: float, v: float
) -> float:
    """Cost of transport of straight driving at speed v on the given slope."""
    theta = math.radians(slope_deg)
    mg = config.mass * config.gravity
    total = 4.0 * power.idle_power_per_drive + (
        (power.rolling_resistance_coeff * math.cos(theta) + math.sin(theta)) * mg * v
        + 4.0 * power.speed_quadratic_coeff * v * v
        + power.drawbar_force * v
    ) / power.drivetrain_efficiency
    return total / (mg * v)


def calibrate_power(
    rows: list[tuple[float, float, float]], config: RoverConfig
) -> tuple[PowerModelParams, list[float]]:
    """Fit (idle power, rolling resistance, quadratic coefficient) to CoT rows.

    rows are (slope_deg, velocity m/s, measured CoT). The fit minimizes
    squared CoT residuals subject to non-negative parameters; the slope
    gravity term is fixed by the physics, not fitted. Returns the fitted
    params (drivetrain efficiency pinned at 1) and per-row residuals
    (predicted minus measured).
    """
    if len(rows) < 3:
        raise CalibrationError("underdetermined calibration")
    mg = config.mass * config.gravity
    design = np.zeros((len(rows), 3))
    target = np.zeros(len(rows))
    for i, (slope_deg, v, cot) in enumerate(rows):
        if v <= 0:
            raise CalibrationError("non-positive velocity in calibration row")
        theta = math.radians(slope_deg)
        design[i] = (4.0 / (mg * v), math.cos(theta), 4.0 * v / mg)
        target[i] = cot - math.sin(theta)
    solution, _ = nnls(design, target)
    idle, rolling, quad = (float(c) for c in solution)
    params = replace(
        PowerModelParams(),
        idle_power_per_drive=idle,
        rolling_resistance_coeff=rolling,
        speed_quadratic_coeff=quad,
        drivetrain_efficiency=1.0,
    )
    residuals = [
        model_cot(params, config, slope_deg, v) - cot for slope_deg, v, cot in rows
    ]
    return params, residuals


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario file: `key = value` lines, then a [profile] CSV block."""
    text = Path(path).read_text().splitlines()
    try:
        split = text.index("[profile]")
    except ValueError:
        raise ConfigError(f"{path}: missing [profile] section") from None
    import csv as _csv
    import io

    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text[:split], start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value

    config_kw: dict[str, float] = {}
    terrain_kw: dict[str, float] = {}
    power_kw: dict[str, float] = {}
    name = pairs.pop("name", Path(path).stem)
    step = float(pairs.pop("step", "0.01"))
    marker = (
        float(pairs.pop("marker_offset_x", "0")),
        float(pairs.pop("marker_offset_y", "0")),
    )
    for key, value in pairs.items():
        if key.startswith("config."):
            bucket, field_name = config_kw, key[len("config.") :]
            known = RoverConfig.__dataclass_fields__
        elif key.startswith("terrain."):
            bucket, field_name = terrain_kw, key[len("terrain.") :]
            known = TerrainParams.__dataclass_fields__
        elif key.startswith("power."):
            bucket, field_name = power_kw, key[len("power.") :]
            known = PowerModelParams.__dataclass_fields__
        else:
            raise ConfigError(f"{path}: unknown scenario key {key!r}")
        if field_name not in known:
            raise ConfigError(f"{path}: unknown scenario key {key!r}")
        bucket[field_name] = float(value)
    if "rng_seed" in terrain_kw:
        terrain_kw["rng_seed"] = int(terrain_kw["rng_seed"])

    profile_csv = "\n".join(text[split + 1 :])
    reader = _csv.DictReader(io.StringIO(profile_csv))
    expected = ["duration_s", "vx", "vy", "wz", "mode"]
    if reader.fieldnames != expected:
        raise ConfigError(f"{path}: profile header must be {','.join(expected)}")
    profile = [
        ProfileSegment(
            float(row["duration_s"]),
            BodyTwist(float(row["vx"]), float(row["vy"]), float(row["wz"])),
            LocomotionMode.parse(row["mode"]),
        )
        for row in reader
    ]
    return Scenario(
        profile=profile,
        terrain=validate_terrain(TerrainParams(**terrain_kw)),
        config=validate_config(replace(RoverConfig(), **config_kw)),
        power=validate_power(PowerModelParams(**power_kw)),
        marker_offset=marker,
        step=step,
        name=name,
    )
