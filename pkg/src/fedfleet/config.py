"""Experiment configuration: one versioned JSON file describing the fleet,
physics, model, training, federation, scaling and reporting of a full run.

Validation errors carry the path of the offending field (e.g.
``fleet.vehicles[3].mass_kg``). The default fleet instantiates per-vehicle
heterogeneity: masses evenly spaced over [2000, 2500] kg, distinct driver
profiles and a mix of flat, constant-grade and rolling-hill terrains.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ScalingSpec
from .drivecycle import DriverProfile, TerrainModel
from .nn import Hyperparams, ModelConfig
from .powertrain import ControllerParams, VehicleParams

SCHEMA_VERSION = 1
FLEET_MASS_RANGE = (2000.0, 2500.0)


class ConfigError(ValueError):
    """Raised when a run config fails validation; message names the field."""


@dataclass
class VehicleSpec:
    """Per-vehicle generation settings."""

    vehicle_id: str
    mass_kg: float
    driver: DriverProfile
    terrain: TerrainModel
    trips: int = 3
    trip_duration_s: float = 540.0


@dataclass
class RunConfig:
    """Everything one experiment needs, fanned out from a single master seed."""

    master_seed: int
    vehicles: list[VehicleSpec]
    vehicle_defaults: dict = field(default_factory=dict)  # VehicleParams overrides
    controller: ControllerParams = field(default_factory=ControllerParams)
    soc0: float = 0.9
    model: ModelConfig = field(default_factory=ModelConfig)
    local_hyper: Hyperparams = field(default_factory=Hyperparams)
    optimizer: str = "adam"
    val_fraction: float = 0.2
    participation: float = 1.0
    rounds: int = 25
    fed_epochs: int = 10
    workers: int = 1
    scaling: ScalingSpec = field(default_factory=ScalingSpec)
    report_local_model: int = 0
    report_holdout_vehicle: int | None = None  # defaults to the last vehicle

    def vehicle_params(self, spec: VehicleSpec) -> VehicleParams:
        return VehicleParams(mass=spec.mass_kg, **self.vehicle_defaults)

    @property
    def n_clients(self) -> int:
        return len(self.vehicles)


def _ctx(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)

def _get(obj: dict, key: str, kind, path: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{_ctx(path, key)}: missing required field")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{_ctx(path, key)}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_terrain(obj: dict, path: str) -> TerrainModel:
    kind = _get(obj, "kind", str, path, required=True)
    try:
        if kind == "flat":
            return TerrainModel.flat()
        if kind == "constant_grade":
            grade = obj.get("grade_percent")
            if grade is not None:
                return TerrainModel.constant(math.atan(float(grade) / 100.0))
            return TerrainModel.constant(_get(obj, "grade_rad", float, path, required=True))
        if kind == "synthetic_hills":
            hills = _get(obj, "hills", list, path, required=True)
            return TerrainModel(kind=kind, hills=tuple(tuple(h) for h in hills))
        if kind == "table":
            table = _get(obj, "table", list, path, required=True)
            return TerrainModel(kind=kind, table=tuple(tuple(p) for p in table))
        raise ConfigError(f"{_ctx(path, 'kind')}: unknown terrain kind {kind!r}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_vehicle(obj: dict, idx: int, allow_any_mass: bool) -> VehicleSpec:
    path = f"fleet.vehicles[{idx}]"
    mass = _get(obj, "mass_kg", float, path, required=True)
    if not allow_any_mass and not FLEET_MASS_RANGE[0] <= mass <= FLEET_MASS_RANGE[1]:
        raise ConfigError(
            f"{path}.mass_kg: {mass} outside fleet range {FLEET_MASS_RANGE}; "
            "set fleet.allow_mass_outside_range to override"
        )
    driver_obj = _get(obj, "driver", dict, path, required=True)
    try:
        driver = DriverProfile(
            max_accel=_get(driver_obj, "max_accel", float, f"{path}.driver", required=True),
            max_decel=_get(driver_obj, "max_decel", float, f"{path}.driver", required=True),
            cruise_speeds=tuple(_get(driver_obj, "cruise_speeds", list, f"{path}.driver", required=True)),
            stop_fraction=_get(driver_obj, "stop_fraction", float, f"{path}.driver", default=0.3),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}.driver: {exc}") from None
    terrain = _parse_terrain(_get(obj, "terrain", dict, path, required=True), f"{path}.terrain")
    trips = _get(obj, "trips", int, path, default=3)
    if trips < 1:
        raise ConfigError(f"{path}.trips: must be >= 1")
    duration = _get(obj, "trip_duration_s", float, path, default=540.0)
    if duration < 60.0:
        raise ConfigError(f"{path}.trip_duration_s: must be >= 60")
    return VehicleSpec(
        vehicle_id=_get(obj, "vehicle_id", str, path, default=f"bev{idx:02d}"),
        mass_kg=mass,
        driver=driver,
        terrain=terrain,
        trips=trips,
        trip_duration_s=duration,
    )


def parse_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    version = _get(obj, "schema_version", int, "", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: {version} unsupported (expected {SCHEMA_VERSION})")
    master_seed = _get(obj, "master_seed", int, "", required=True)

    fleet = _get(obj, "fleet", dict, "", required=True)
    vehicle_objs = _get(fleet, "vehicles", list, "fleet", required=True)
    if not vehicle_objs:
        raise ConfigError("fleet.vehicles: must not be empty")
    allow_any_mass = _get(fleet, "allow_mass_outside_range", bool, "fleet", default=False)
    vehicles = [_parse_vehicle(v, i, allow_any_mass) for i, v in enumerate(vehicle_objs)]
    ids = [v.vehicle_id for v in vehicles]
    if len(set(ids)) != len(ids):
        raise ConfigError("fleet.vehicles: vehicle_id values must be unique")

    physics = _get(obj, "physics", dict, "", default={})
    vehicle_defaults = _get(physics, "vehicle_defaults", dict, "physics", default={})
    try:
        VehicleParams(mass=2200.0, **vehicle_defaults)  # field names/ranges check
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"physics.vehicle_defaults: {exc}") from None
    ctrl_obj = _get(physics, "controller", dict, "physics", default={})
    try:
        controller = ControllerParams(**ctrl_obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"physics.controller: {exc}") from None
    soc0 = _get(physics, "soc0", float, "physics", default=0.9)
    if not 0.0 < soc0 <= 1.0:
        raise ConfigError("physics.soc0: must lie in (0, 1]")

    model_obj = _get(obj, "model", dict, "", default={})
    try:
        model = ModelConfig(
            window=_get(model_obj, "window", int, "model", default=30),
            input_dim=2,
            hidden=tuple(_get(model_obj, "hidden", list, "model", default=[50, 50])),
            dropout_rate=_get(model_obj, "dropout_rate", float, "model", default=0.2),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None

    training = _get(obj, "training", dict, "", default={})
    try:
        local_hyper = Hyperparams(
            batch_count=_get(training, "batch_count", int, "training", default=5),
            epochs=_get(training, "epochs", int, "training", default=100),
            lr=_get(training, "lr", float, "training", default=1e-3),
            weight_decay=_get(training, "weight_decay", float, "training", default=1e-5),
        )
    except ValueError as exc:
        raise ConfigError(f"training: {exc}") from None
    optimizer = _get(training, "optimizer", str, "training", default="adam")
    if optimizer not in ("adam", "sgd"):
        raise ConfigError(f"training.optimizer: must be 'adam' or 'sgd', got {optimizer!r}")
    val_fraction = _get(training, "val_fraction", float, "training", default=0.2)
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError("training.val_fraction: must lie in (0, 1)")

    federation = _get(obj, "federation", dict, "", default={})
    participation = _get(federation, "participation", float, "federation", default=1.0)
    if not 0.0 < participation <= 1.0:
        raise ConfigError("federation.participation: must lie in (0, 1]")
    rounds = _get(federation, "rounds", int, "federation", default=25)
    if rounds < 0:
        raise ConfigError("federation.rounds: must be >= 0")
    fed_epochs = _get(federation, "local_epochs", int, "federation", default=10)
    if fed_epochs < 0:
        raise ConfigError("federation.local_epochs: must be >= 0")
    workers = _get(federation, "workers", int, "federation", default=1)
    if workers < 1:
        raise ConfigError("federation.workers: must be >= 1")

    scaling_obj = _get(obj, "scaling", dict, "", default={})
    try:
        scaling = ScalingSpec(
            speed_scale=_get(scaling_obj, "speed_scale", float, "scaling", default=36.1),
            grade_scale=_get(scaling_obj, "grade_scale", float, "scaling", default=0.15),
            label_scale=_get(scaling_obj, "label_scale", float, "scaling", default=250.0),
        )
    except ValueError as exc:
        raise ConfigError(f"scaling: {exc}") from None

    report = _get(obj, "report", dict, "", default={})
    local_model = _get(report, "local_model", int, "report", default=0)
    if not 0 <= local_model < len(vehicles):
        raise ConfigError(f"report.local_model: must index a vehicle (0..{len(vehicles) - 1})")
    holdout = _get(report, "holdout_vehicle", int, "report", default=len(vehicles) - 1)
    if not 0 <= holdout < len(vehicles):
        raise ConfigError(f"report.holdout_vehicle: must index a vehicle (0..{len(vehicles) - 1})")

    return RunConfig(
        master_seed=master_seed,
        vehicles=vehicles,
        vehicle_defaults=vehicle_defaults,
        controller=controller,
        soc0=soc0,
        model=model,
        local_hyper=local_hyper,
        optimizer=optimizer,
        val_fraction=val_fraction,
        participation=participation,
        rounds=rounds,
        fed_epochs=fed_epochs,
        workers=workers,
        scaling=scaling,
        report_local_model=local_model,
        report_holdout_vehicle=holdout,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(obj)


# terrain rotation for the default fleet; hill slopes stay below ~4% so the
# default 250 Wh label scale dominates every 30 s window with margin
_DEFAULT_TERRAINS = (
    {"kind": "flat"},
    {"kind": "constant_grade", "grade_percent": 1.5},
    {"kind": "synthetic_hills", "hills": [[4.0, 700.0, 0.0]]},
    {"kind": "constant_grade", "grade_percent": 3.0},
    {"kind": "synthetic_hills", "hills": [[6.0, 1000.0, 1.0]]},
    {"kind": "flat"},
    {"kind": "synthetic_hills", "hills": [[8.0, 1500.0, 2.0]]},
    {"kind": "constant_grade", "grade_percent": 2.0},
    {"kind": "synthetic_hills", "hills": [[3.0, 600.0, 0.5], [5.0, 1800.0, 1.5]]},
    {"kind": "synthetic_hills", "hills": [[10.0, 2000.0, 0.8]]},
)

_DEFAULT_CRUISE_SETS = (
    [6.0, 9.0, 12.0],
    [7.0, 10.0, 12.5],
    [8.0, 10.5, 13.0],
    [6.5, 9.5, 13.5],
    [7.5, 11.0, 14.0],
    [8.5, 11.5, 13.5],
    [7.0, 10.0, 14.0],
    [9.0, 12.0, 14.0],
    [6.0, 10.5, 13.0],
    [8.0, 11.0, 14.0],
)


def default_config_dict(
    n_vehicles: int = 10,
    trips: int = 3,
    trip_duration_s: float = 540.0,
    rounds: int = 25,
    fed_epochs: int = 10,
    master_seed: int = 2024,
) -> dict:
    """A ready-to-run heterogeneous fleet config as a plain JSON-able dict."""
    vehicles = []
    for i in range(n_vehicles):
        frac = i / max(n_vehicles - 1, 1)
        vehicles.append(
            {
                "vehicle_id": f"bev{i:02d}",
                "mass_kg": round(FLEET_MASS_RANGE[0] + frac * (FLEET_MASS_RANGE[1] - FLEET_MASS_RANGE[0]), 1),
                "driver": {
                    "max_accel": round(0.8 + 1.2 * frac, 3),
                    "max_decel": round(1.0 + 1.6 * frac, 3),
                    "cruise_speeds": _DEFAULT_CRUISE_SETS[i % len(_DEFAULT_CRUISE_SETS)],
                    "stop_fraction": round(0.15 + 0.35 * frac, 3),
                },
                "terrain": _DEFAULT_TERRAINS[i % len(_DEFAULT_TERRAINS)],
                "trips": trips,
                "trip_duration_s": trip_duration_s,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "master_seed": master_seed,
        "fleet": {"vehicles": vehicles},
        "physics": {"soc0": 0.9},
        "model": {"window": 30, "hidden": [50, 50], "dropout_rate": 0.2},
        "training": {"batch_count": 5, "epochs": 100, "lr": 1e-3, "weight_decay": 1e-5,
                     "optimizer": "adam", "val_fraction": 0.2},
        "federation": {"participation": 1.0, "rounds": rounds, "local_epochs": fed_epochs, "workers": 1},
        "scaling": {"speed_scale": 36.1, "grade_scale": 0.15, "label_scale": 250.0},
        "report": {"local_model": 0, "holdout_vehicle": n_vehicles - 1},
    }
