"""Per-vehicle trip generation: reference speed profiles and road grade.

Trips are synthesized as piecewise-trapezoidal urban profiles (accelerate to a
cruise speed, hold, decelerate to a stop, dwell) parameterized per driver, or
imported from 1 Hz cycle CSV files (e.g. an FTP-75 trace). Grade is a function
of cumulative distance travelled, supplied by a :class:`TerrainModel`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DT = 1.0                 # s, fixed step everywhere
MAX_GRADE_RAD = 0.15     # bound on |grade| for any terrain
SPEED_CEILING = 36.1     # m/s, 130 km/h legal ceiling


class CycleImportError(ValueError):
    """Raised when a cycle CSV file cannot be parsed; names the offending row."""


@dataclass(frozen=True)
class DriverProfile:
    """Driving style knobs used by the trip synthesizer.

    max_accel/max_decel bound the per-step speed change; cruise_speeds is the
    menu of target speeds a trip draws from; stop_fraction scales how long the
    vehicle dwells at stops.
    """

    max_accel: float
    max_decel: float
    cruise_speeds: tuple[float, ...]
    stop_fraction: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "cruise_speeds", tuple(float(v) for v in self.cruise_speeds))
        if not 0.5 <= self.max_accel <= 2.5:
            raise ValueError(f"max_accel {self.max_accel} outside [0.5, 2.5] m/s^2")
        if not 0.5 <= self.max_decel <= 3.5:
            raise ValueError(f"max_decel {self.max_decel} outside [0.5, 3.5] m/s^2")
        if not self.cruise_speeds:
            raise ValueError("cruise_speeds must not be empty")
        for v in self.cruise_speeds:
            if v < 0.0 or v > SPEED_CEILING:
                raise ValueError(f"cruise speed {v} outside [0, {SPEED_CEILING}] m/s")
        if not 0.0 <= self.stop_fraction <= 1.0:
            raise ValueError(f"stop_fraction {self.stop_fraction} outside [0, 1]")


@dataclass(frozen=True)
class TerrainModel:
    """Road grade as a function of distance travelled.

    Kinds:
      flat            -- grade 0 everywhere
      constant_grade  -- fixed grade_const radians
      synthetic_hills -- elevation is a sum of sinusoids in distance,
                         hills = ((amplitude m, wavelength m, phase rad), ...)
      table           -- piecewise-linear elevation over (distance m, elevation m)
                         knots; grade is the segment slope, clamped to the
                         nearest segment outside the table range
    """

    kind: str
    grade_const: float = 0.0
    hills: tuple[tuple[float, float, float], ...] = ()
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("flat", "constant_grade", "synthetic_hills", "table"):
            raise ValueError(f"unknown terrain kind {self.kind!r}")
        object.__setattr__(self, "hills", tuple((float(a), float(w), float(p)) for a, w, p in self.hills))
        object.__setattr__(self, "table", tuple((float(d), float(e)) for d, e in self.table))
        if self.kind == "constant_grade" and abs(self.grade_const) > MAX_GRADE_RAD:
            raise ValueError(f"|grade_const| {abs(self.grade_const):.4f} exceeds {MAX_GRADE_RAD} rad")
        if self.kind == "synthetic_hills":
            if not self.hills:
                raise ValueError("synthetic_hills terrain needs at least one hill component")
            slope_max = 0.0
            for amp, wavelength, _ in self.hills:
                if wavelength <= 0.0:
                    raise ValueError("hill wavelength must be positive")
                slope_max += abs(amp) * 2.0 * math.pi / wavelength
            if slope_max > math.tan(MAX_GRADE_RAD):
                raise ValueError(
                    f"hill slopes peak at {slope_max:.4f}, exceeding the "
                    f"{MAX_GRADE_RAD} rad grade bound"
                )
        if self.kind == "table":
            if len(self.table) < 2:
                raise ValueError("table terrain needs at least two (distance, elevation) points")
            dist = [d for d, _ in self.table]
            if any(b <= a for a, b in zip(dist, dist[1:])):
                raise ValueError("table distances must be strictly increasing")
            for (d0, e0), (d1, e1) in zip(self.table, self.table[1:]):
                if abs(math.atan2(e1 - e0, d1 - d0)) > MAX_GRADE_RAD:
                    raise ValueError(
                        f"table segment [{d0}, {d1}] slope exceeds the {MAX_GRADE_RAD} rad bound"
                    )

    @classmethod
    def flat(cls) -> "TerrainModel":
        return cls(kind="flat")

    @classmethod
    def constant(cls, grade_rad: float) -> "TerrainModel":
        return cls(kind="constant_grade", grade_const=grade_rad)


@dataclass
class DriveCycle:
    """Time-indexed reference speed and road grade for one trip (1 Hz)."""

    trip_id: str
    vehicle_id: str
    speed_ref: np.ndarray  # m/s
    grade: np.ndarray      # rad
    dt: float = DT

    def __post_init__(self):
        self.speed_ref = np.asarray(self.speed_ref, dtype=float)
        self.grade = np.asarray(self.grade, dtype=float)
        if self.dt != DT:
            raise ValueError(f"dt is fixed at {DT} s")
        if self.speed_ref.ndim != 1 or self.speed_ref.shape != self.grade.shape:
            raise ValueError("speed_ref and grade must be 1-D arrays of identical length")
        if len(self.speed_ref) < 1:
            raise ValueError("cycle must contain at least one step")
        if np.any(self.speed_ref < 0.0):
            raise ValueError("reference speeds must be non-negative")
        if np.any(np.abs(self.grade) > MAX_GRADE_RAD):
            raise ValueError(f"|grade| must not exceed {MAX_GRADE_RAD} rad")
        if self.speed_ref[0] != 0.0 or self.speed_ref[-1] != 0.0:
            raise ValueError("trips must start and end at rest")

    def __len__(self) -> int:
        return len(self.speed_ref)


def synthesize_speed_profile(profile: DriverProfile, duration: float, seed: int) -> np.ndarray:
    """Random trapezoidal 1 Hz speed profile of ``duration`` seconds.

    Sequence of (accelerate to a cruise speed, hold, decelerate to stop,
    dwell) segments drawn from a seeded RNG; the trailing gap that cannot fit
    a full segment is spent at rest. Deterministic in (profile, duration,
    seed); per-step speed change never exceeds max(max_accel, max_decel)*dt.
    """
    if duration < 60.0:
        raise ValueError(f"duration {duration} s is below the 60 s minimum")
    n = int(round(duration / DT))

    positive = [v for v in profile.cruise_speeds if v > 0.0]
    if positive:
        v_min = min(positive)
        min_cycle = math.ceil(v_min / profile.max_accel) + 1 + math.ceil(v_min / profile.max_decel) + 1
        if n < min_cycle:
            raise ValueError(
                f"duration {duration} s cannot fit one accelerate-stop cycle "
                f"({min_cycle} s needed for cruise speed {v_min} m/s)"
            )

    rng = np.random.default_rng(seed)
    dwell_max = max(1, int(round(profile.stop_fraction * 60.0)))
    out = [0.0]
    while len(out) < n:
        target = float(rng.choice(profile.cruise_speeds))
        hold = int(rng.integers(5, 31))
        dwell = 1 + int(rng.integers(0, dwell_max))
        if target <= 0.0:
            out.extend([0.0] * min(dwell, n - len(out)))
            continue
        up = []
        v = out[-1]
        while v < target:
            v = min(v + profile.max_accel * DT, target)
            up.append(v)
        down = []
        v = target
        while v > 0.0:
            v = max(v - profile.max_decel * DT, 0.0)
            down.append(v)
        # the last sample of `down` is the mandatory final rest step
        if len(out) + len(up) + hold + len(down) > n:
            break
        out.extend(up)
        out.extend([target] * hold)
        out.extend(down)
        out.extend([0.0] * min(dwell, n - len(out)))
    out.extend([0.0] * (n - len(out)))
    return np.asarray(out[:n], dtype=float)


def grade_at(terrain: TerrainModel, distance):
    """Road grade in radians at ``distance`` metres from the trip origin.

    Accepts a scalar or an array of distances. Table terrains clamp
    out-of-range distances to the nearest endpoint segment.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("distance must be non-negative")
    if terrain.kind == "flat":
        g = np.zeros_like(d)
    elif terrain.kind == "constant_grade":
        g = np.full_like(d, terrain.grade_const)
    elif terrain.kind == "synthetic_hills":
        slope = np.zeros_like(d)
        for amp, wavelength, phase in terrain.hills:
            k = 2.0 * math.pi / wavelength
            slope = slope + amp * k * np.cos(k * d + phase)
        g = np.arctan(slope)
    else:  # table
        dist = np.array([p[0] for p in terrain.table])
        elev = np.array([p[1] for p in terrain.table])
        dc = np.clip(d, dist[0], dist[-1])
        idx = np.clip(np.searchsorted(dist, dc, side="right") - 1, 0, len(dist) - 2)
        slope = (elev[idx + 1] - elev[idx]) / (dist[idx + 1] - dist[idx])
        g = np.arctan(slope)
    return float(g) if np.isscalar(distance) or np.ndim(distance) == 0 else g


def build_cycle(
    profile: DriverProfile,
    terrain: TerrainModel,
    duration: float,
    seed: int,
    trip_id: str = "trip",
    vehicle_id: str = "vehicle",
) -> DriveCycle:
    """Synthesize a full DriveCycle: speed from the driver profile, grade from
    the terrain evaluated at cumulative distance d[k] = sum(speed * dt)."""
    speed = synthesize_speed_profile(profile, duration, seed)
    distance = np.cumsum(speed) * DT
    grade = grade_at(terrain, distance)
    return DriveCycle(trip_id=trip_id, vehicle_id=vehicle_id, speed_ref=speed, grade=np.asarray(grade))


def import_cycle(
    path,
    terrain: TerrainModel,
    trip_id: str | None = None,
    vehicle_id: str = "vehicle",
) -> DriveCycle:
    """Load a 1 Hz cycle CSV (header ``t,speed_mps`` or ``t,speed_kmh``).

    Speeds in km/h are converted to m/s. Malformed rows, negative speeds and
    non-monotone or non-1 Hz time stamps are rejected with the row number.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CycleImportError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header == ["t", "speed_mps"]:
            factor = 1.0
        elif header == ["t", "speed_kmh"]:
            factor = 1.0 / 3.6
        else:
            raise CycleImportError(f"{path}: expected header 't,speed_mps' or 't,speed_kmh', got {header}")
        speeds = []
        t_prev = None
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise CycleImportError(f"{path}: row {lineno}: expected 2 fields, got {len(row)}")
            try:
                t = float(row[0])
                v = float(row[1]) * factor
            except ValueError:
                raise CycleImportError(f"{path}: row {lineno}: non-numeric value") from None
            if v < 0.0:
                raise CycleImportError(f"{path}: row {lineno}: negative speed {row[1]}")
            if t_prev is not None and not math.isclose(t - t_prev, DT, rel_tol=0.0, abs_tol=1e-9):
                raise CycleImportError(f"{path}: row {lineno}: time must advance by {DT} s per row")
            t_prev = t
            speeds.append(v)
    if not speeds:
        raise CycleImportError(f"{path}: no data rows")
    speed = np.asarray(speeds)
    distance = np.cumsum(speed) * DT
    grade = np.asarray(grade_at(terrain, distance))
    return DriveCycle(
        trip_id=trip_id if trip_id is not None else path.stem,
        vehicle_id=vehicle_id,
        speed_ref=speed,
        grade=grade,
    )


def write_cycle_csv(cycle: DriveCycle, path) -> None:
    """Write the reference speed trace as ``t,speed_mps`` (1 Hz, LF, UTF-8)."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("t,speed_mps\n")
        for k, v in enumerate(cycle.speed_ref):
            fh.write(f"{float(k * cycle.dt)!r},{float(v)!r}\n")
