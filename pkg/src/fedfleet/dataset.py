"""Trip matrices, sliding-window samples, scaling, splits and persistence.

A trip is a per-second feature/label matrix with columns (time, speed, grade,
energy); the energy column is the label. Windowed samples pair the past-m
(speed, grade) rows with the summed window energy as a scalar label. Windows
never span trip boundaries.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "fedfleet-dataset"
MANIFEST_VERSION = 1
TRIP_CSV_HEADER = ["t", "v_mps", "grade_rad", "e_step_wh"]


class DatasetFormatError(ValueError):
    """Raised for unreadable, corrupt or version-mismatched dataset files."""


@dataclass
class TripRecord:
    """Per-second feature/label matrix for one simulated trip.

    Columns share one length; energy (Wh per step, the last column) is the
    label. soc_start/soc_end/depleted carry the battery bookkeeping of the
    simulation that produced the trip.
    """

    trip_id: str
    vehicle_id: str
    t: np.ndarray
    speed: np.ndarray
    grade: np.ndarray
    energy: np.ndarray
    soc_start: float | None = None
    soc_end: float | None = None
    depleted: bool = False

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.speed = np.asarray(self.speed, dtype=float)
        self.grade = np.asarray(self.grade, dtype=float)
        self.energy = np.asarray(self.energy, dtype=float)
        lengths = {len(self.t), len(self.speed), len(self.grade), len(self.energy)}
        if len(lengths) != 1:
            raise ValueError(f"trip columns must share one length, got {sorted(lengths)}")
        if len(self.t) < 1:
            raise ValueError("trip must contain at least one step")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TripRecord):
            return NotImplemented
        return (
            self.trip_id == other.trip_id
            and self.vehicle_id == other.vehicle_id
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.speed, other.speed)
            and np.array_equal(self.grade, other.grade)
            and np.array_equal(self.energy, other.energy)
            and self.soc_start == other.soc_start
            and self.soc_end == other.soc_end
            and self.depleted == other.depleted
        )


@dataclass
class LocalDataset:
    """One vehicle's collection of trips (the local training corpus)."""

    vehicle_id: str
    trips: list[TripRecord] = field(default_factory=list)

    def __post_init__(self):
        for trip in self.trips:
            if trip.vehicle_id != self.vehicle_id:
                raise ValueError(
                    f"trip {trip.trip_id} belongs to {trip.vehicle_id}, not {self.vehicle_id}"
                )

    def window_count(self, m: int) -> int:
        """Number of windowed samples this dataset yields for window length m."""
        return sum(max(0, len(trip) - m + 1) for trip in self.trips)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LocalDataset):
            return NotImplemented
        return self.vehicle_id == other.vehicle_id and self.trips == other.trips


@dataclass
class WindowedSample:
    """m-step (speed, grade) feature window plus the window-energy label."""

    features: np.ndarray  # (m, 2)
    label: float          # Wh, sum of the window's per-step energies
    origin: tuple[str, int]  # (trip_id, 1-based end index)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[1] != 2:
            raise ValueError(f"features must have shape (m, 2), got {self.features.shape}")


@dataclass(frozen=True)
class ScalingSpec:
    """Feature/label scales mapping physical units into the tanh range."""

    speed_scale: float = 36.1   # m/s
    grade_scale: float = 0.15   # rad
    label_scale: float = 250.0  # Wh

    def __post_init__(self):
        for name in ("speed_scale", "grade_scale", "label_scale"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def trip_windows(trip: TripRecord, m: int) -> list[WindowedSample]:
    """Sliding windows of one trip: one sample per end index k in {m..l}."""
    if m < 1:
        raise ValueError("window length m must be >= 1")
    l = len(trip)
    if l < m:
        log.warning("trip %s (length %d) is shorter than the window %d; skipped", trip.trip_id, l, m)
        return []
    feats = np.stack([trip.speed, trip.grade], axis=1)
    out = []
    for k in range(m, l + 1):
        out.append(
            WindowedSample(
                features=feats[k - m : k].copy(),
                label=float(np.sum(trip.energy[k - m : k])),
                origin=(trip.trip_id, k),
            )
        )
    return out


def build_windows(ds: LocalDataset, m: int) -> list[WindowedSample]:
    """All windowed samples of a local dataset; trips shorter than m are skipped."""
    out = []
    for trip in ds.trips:
        out.extend(trip_windows(trip, m))
    return out


def scale(sample: WindowedSample, spec: ScalingSpec) -> WindowedSample:
    """Componentwise feature division by (speed_scale, grade_scale); label by
    label_scale. Rejects labels that leave the open tanh range (-1, 1)."""
    y = sample.label / spec.label_scale
    if abs(y) >= 1.0:
        raise ValueError(
            f"scaled label {y:.4f} from {sample.origin} leaves (-1, 1); "
            f"raise label_scale above {abs(sample.label):.1f} Wh"
        )
    return WindowedSample(
        features=sample.features / np.array([spec.speed_scale, spec.grade_scale]),
        label=y,
        origin=sample.origin,
    )


def unscale_label(y: float, spec: ScalingSpec) -> float:
    """Exact inverse of the label scaling."""
    return y * spec.label_scale


def to_arrays(samples: list[WindowedSample], spec: ScalingSpec):
    """Stack samples into scaled arrays (X: (n, m, 2), y: (n,)) for training.

    Applies the same corpus-level label bound check as :func:`scale`.
    """
    if not samples:
        raise ValueError("empty sample list")
    x = np.stack([s.features for s in samples])
    x /= np.array([spec.speed_scale, spec.grade_scale])
    y_wh = np.array([s.label for s in samples])
    y = y_wh / spec.label_scale
    worst = np.argmax(np.abs(y))
    if abs(y[worst]) >= 1.0:
        raise ValueError(
            f"scaled label {y[worst]:.4f} from {samples[worst].origin} leaves (-1, 1); "
            f"raise label_scale above {abs(y_wh[worst]):.1f} Wh"
        )
    return x, y


def split(samples: list[WindowedSample], val_fraction: float, seed: int):
    """Deterministic shuffled (train, validation) partition.

    Train gets ceil(n * (1 - val_fraction)) samples, validation the remainder;
    both sides must be non-empty.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie in (0, 1)")
    n = len(samples)
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    n_train = math.ceil(n * (1.0 - val_fraction))
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} samples at {val_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    train = [samples[i] for i in perm[:n_train]]
    val = [samples[i] for i in perm[n_train:]]
    return train, val


def write_trip_csv(trip: TripRecord, path) -> None:
    """TripRecord CSV export: ``t,v_mps,grade_rad,e_step_wh``, one row per second."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(TRIP_CSV_HEADER) + "\n")
        for k in range(len(trip)):
            fh.write(
                f"{float(trip.t[k])!r},{float(trip.speed[k])!r},"
                f"{float(trip.grade[k])!r},{float(trip.energy[k])!r}\n"
            )


def read_trip_csv(path, trip_id: str, vehicle_id: str, **meta) -> TripRecord:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIP_CSV_HEADER:
            raise DatasetFormatError(f"{path}: expected header {TRIP_CSV_HEADER}, got {header}")
        cols = [[], [], [], []]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DatasetFormatError(f"{path}: row {lineno}: expected 4 fields")
            try:
                for col, value in zip(cols, row):
                    col.append(float(value))
            except ValueError:
                raise DatasetFormatError(f"{path}: row {lineno}: non-numeric value") from None
    if not cols[0]:
        raise DatasetFormatError(f"{path}: no data rows")
    return TripRecord(trip_id=trip_id, vehicle_id=vehicle_id, t=cols[0], speed=cols[1], grade=cols[2], energy=cols[3], **meta)


def save_dataset(ds: LocalDataset, directory, scaling: ScalingSpec) -> Path:
    """Persist a LocalDataset as a JSON manifest plus one CSV per trip."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for trip in ds.trips:
        name = f"{trip.trip_id}.csv"
        if "/" in trip.trip_id or "\\" in trip.trip_id:
            raise ValueError(f"trip_id {trip.trip_id!r} is not filesystem-safe")
        write_trip_csv(trip, directory / name)
        entries.append(
            {
                "trip_csv": name,
                "length": len(trip),
                "trip_id": trip.trip_id,
                "soc_start": trip.soc_start,
                "soc_end": trip.soc_end,
                "depleted": trip.depleted,
            }
        )
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "vehicle_id": ds.vehicle_id,
        "trips": entries,
        "scaling": {
            "speed_scale": scaling.speed_scale,
            "grade_scale": scaling.grade_scale,
            "label_scale": scaling.label_scale,
        },
    }
    manifest_path = directory / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_dataset(directory) -> tuple[LocalDataset, ScalingSpec]:
    """Load a dataset saved by :func:`save_dataset`; exact round-trip."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetFormatError(f"{manifest_path}: manifest not found")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{manifest_path}: invalid JSON ({exc})") from None
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise DatasetFormatError(f"{manifest_path}: not a {MANIFEST_FORMAT} manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise DatasetFormatError(
            f"{manifest_path}: version {manifest.get('version')} unsupported "
            f"(expected {MANIFEST_VERSION})"
        )
    vehicle_id = manifest["vehicle_id"]
    trips = []
    for entry in manifest["trips"]:
        trip = read_trip_csv(
            directory / entry["trip_csv"],
            trip_id=entry["trip_id"],
            vehicle_id=vehicle_id,
            soc_start=entry.get("soc_start"),
            soc_end=entry.get("soc_end"),
            depleted=entry.get("depleted", False),
        )
        if len(trip) != entry["length"]:
            raise DatasetFormatError(
                f"{directory / entry['trip_csv']}: length {len(trip)} does not match "
                f"manifest ({entry['length']})"
            )
        trips.append(trip)
    scaling = ScalingSpec(**manifest["scaling"])
    return LocalDataset(vehicle_id=vehicle_id, trips=trips), scaling
