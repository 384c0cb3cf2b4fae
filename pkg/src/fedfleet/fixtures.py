"""Bundled deterministic drive-cycle fixtures.

``ftp75_like()`` is a synthetic 1 Hz urban cycle shaped after the FTP-75 city
test: a cold-transient phase with one fast hill peaking at 25.35 m/s followed
by a stabilized phase of gentler stop-and-go hills. It is used to calibrate
speed tracking and for the grade-sweep energy comparisons.
"""

from __future__ import annotations

import numpy as np

from .drivecycle import DriveCycle, TerrainModel, grade_at

# (accel m/s^2, peak m/s, hold s, decel m/s^2, idle s) per stop-to-stop hill
_HILLS = (
    # cold transient phase
    (1.2, 11.2, 25, 1.4, 18),
    (1.3, 15.6, 40, 1.5, 12),
    (1.1, 25.35, 90, 1.2, 25),
    (1.4, 17.9, 35, 1.5, 15),
    (1.2, 13.4, 20, 1.3, 30),
    # stabilized phase
    (0.9, 8.9, 15, 1.1, 14),
    (1.0, 11.6, 28, 1.2, 20),
    (1.1, 13.4, 30, 1.3, 16),
    (0.8, 10.3, 18, 1.0, 22),
    (1.0, 14.8, 45, 1.2, 18),
    (1.2, 12.5, 26, 1.4, 12),
    (0.9, 9.4, 14, 1.1, 25),
    (1.1, 15.2, 38, 1.3, 15),
    (1.0, 11.2, 22, 1.2, 20),
    (0.8, 8.0, 12, 1.0, 16),
    (1.2, 13.9, 32, 1.4, 14),
    (1.0, 10.7, 20, 1.2, 24),
)

_LEAD_IDLE = 20


def ftp75_like_speed() -> np.ndarray:
    """The fixture's 1 Hz reference speed trace in m/s."""
    out = [0.0] * _LEAD_IDLE
    for accel, peak, hold, decel, idle in _HILLS:
        v = out[-1]
        while v < peak:
            v = min(v + accel, peak)
            out.append(v)
        out.extend([peak] * hold)
        v = peak
        while v > 0.0:
            v = max(v - decel, 0.0)
            out.append(v)
        out.extend([0.0] * idle)
    return np.asarray(out, dtype=float)


def ftp75_like_cycle(
    terrain: TerrainModel | None = None,
    trip_id: str = "ftp75-like",
    vehicle_id: str = "fixture",
) -> DriveCycle:
    """The fixture as a DriveCycle with terrain-derived grade (flat default)."""
    if terrain is None:
        terrain = TerrainModel.flat()
    speed = ftp75_like_speed()
    distance = np.cumsum(speed)
    grade = np.asarray(grade_at(terrain, distance))
    return DriveCycle(trip_id=trip_id, vehicle_id=vehicle_id, speed_ref=speed, grade=grade)
