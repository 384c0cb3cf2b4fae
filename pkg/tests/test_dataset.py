import json
import math

import numpy as np
import pytest

from fedfleet.dataset import (
    DatasetFormatError,
    LocalDataset,
    ScalingSpec,
    TripRecord,
    WindowedSample,
    build_windows,
    load_dataset,
    save_dataset,
    scale,
    split,
    to_arrays,
    trip_windows,
    unscale_label,
)


def make_trip(length, trip_id="t0", vehicle_id="v0", seed=0):
    rng = np.random.default_rng(seed)
    return TripRecord(
        trip_id=trip_id,
        vehicle_id=vehicle_id,
        t=np.arange(length, dtype=float),
        speed=rng.uniform(0.0, 15.0, length),
        grade=rng.uniform(-0.05, 0.05, length),
        energy=rng.uniform(-2.0, 8.0, length),
        soc_start=0.9,
        soc_end=0.85,
    )


class TestBuildWindows:
    def test_trip_of_window_length_yields_one_sample(self):
        ds = LocalDataset("v0", [make_trip(30)])
        assert len(build_windows(ds, 30)) == 1

    def test_count_law(self):
        ds = LocalDataset("v0", [make_trip(40, "a"), make_trip(29, "b"), make_trip(35, "c")])
        windows = build_windows(ds, 30)
        assert len(windows) == (40 - 30 + 1) + 0 + (35 - 30 + 1)
        assert ds.window_count(30) == len(windows)

    def test_constant_energy_gives_constant_labels(self):
        trip = make_trip(60)
        trip.energy = np.full(60, 0.5)
        ds = LocalDataset("v0", [trip])
        for sample in build_windows(ds, 30):
            assert sample.label == pytest.approx(15.0, rel=1e-15)

    def test_label_is_exact_window_sum(self):
        trip = make_trip(80, seed=5)
        for sample in trip_windows(trip, 30):
            k = sample.origin[1]
            oracle = math.fsum(trip.energy[k - 30 : k])
            assert sample.label == pytest.approx(oracle, rel=1e-12)

    def test_windows_never_cross_trips(self):
        ds = LocalDataset("v0", [make_trip(31, "a", seed=1), make_trip(31, "b", seed=2)])
        windows = build_windows(ds, 30)
        assert [w.origin[0] for w in windows] == ["a", "a", "b", "b"]

    def test_features_are_speed_and_grade_rows(self):
        trip = make_trip(35, seed=3)
        sample = trip_windows(trip, 30)[2]  # ends at k=32
        assert np.array_equal(sample.features[:, 0], trip.speed[2:32])
        assert np.array_equal(sample.features[:, 1], trip.grade[2:32])

    def test_short_trip_warns_not_raises(self, caplog):
        with caplog.at_level("WARNING"):
            assert trip_windows(make_trip(10), 30) == []
        assert "shorter than the window" in caplog.text


class TestScaling:
    SPEC = ScalingSpec()

    def test_zero_sample_stays_zero(self):
        sample = WindowedSample(np.zeros((30, 2)), 0.0, ("t", 30))
        scaled = scale(sample, self.SPEC)
        assert np.array_equal(scaled.features, np.zeros((30, 2)))
        assert scaled.label == 0.0

    def test_label_arithmetic(self):
        sample = WindowedSample(np.zeros((30, 2)), 125.0, ("t", 30))
        assert scale(sample, self.SPEC).label == pytest.approx(0.5, rel=1e-15)

    def test_roundtrip_is_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            label = float(rng.uniform(-240.0, 240.0))
            sample = WindowedSample(rng.uniform(-1, 20, (30, 2)), label, ("t", 30))
            back = unscale_label(scale(sample, self.SPEC).label, self.SPEC)
            assert back == pytest.approx(label, rel=1e-12)

    def test_out_of_range_label_rejected_with_hint(self):
        sample = WindowedSample(np.zeros((30, 2)), 260.0, ("t", 30))
        with pytest.raises(ValueError, match="raise label_scale"):
            scale(sample, self.SPEC)
        with pytest.raises(ValueError, match="raise label_scale"):
            to_arrays([sample], self.SPEC)

    def test_to_arrays_matches_per_sample_scale(self):
        rng = np.random.default_rng(1)
        samples = [
            WindowedSample(rng.uniform(0, 15, (30, 2)), float(rng.uniform(-50, 200)), ("t", 30 + i))
            for i in range(7)
        ]
        x, y = to_arrays(samples, self.SPEC)
        assert x.shape == (7, 30, 2) and y.shape == (7,)
        for i, s in enumerate(samples):
            scaled = scale(s, self.SPEC)
            assert np.allclose(x[i], scaled.features, rtol=1e-15)
            assert y[i] == pytest.approx(scaled.label, rel=1e-15)


class TestSplit:
    def samples(self, n):
        return [WindowedSample(np.zeros((5, 2)), float(i), ("t", i + 5)) for i in range(n)]

    def test_sizes_ceil_rule(self):
        train, val = split(self.samples(10), 0.2, seed=0)
        assert len(train) == 8 and len(val) == 2

    def test_half_split_of_four(self):
        train, val = split(self.samples(4), 0.5, seed=1)
        assert len(train) == 2 and len(val) == 2
        labels = sorted(s.label for s in train + val)
        assert labels == [0.0, 1.0, 2.0, 3.0]

    def test_deterministic_partition(self):
        samples = self.samples(25)
        a = split(samples, 0.2, seed=9)
        b = split(samples, 0.2, seed=9)
        assert [s.label for s in a[0]] == [s.label for s in b[0]]
        assert [s.label for s in a[1]] == [s.label for s in b[1]]
        train_set = {s.label for s in a[0]}
        val_set = {s.label for s in a[1]}
        assert train_set.isdisjoint(val_set)
        assert len(train_set | val_set) == 25

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            split(self.samples(1), 0.2, seed=0)
        with pytest.raises(ValueError):
            split(self.samples(10), 1.5, seed=0)
        with pytest.raises(ValueError):
            split(self.samples(3), 0.01, seed=0)  # validation side empty


class TestPersistence:
    def test_roundtrip_bit_exact(self, tmp_path):
        ds = LocalDataset("v0", [make_trip(40, "t0", seed=1), make_trip(33, "t1", seed=2)])
        scaling = ScalingSpec(label_scale=300.0)
        save_dataset(ds, tmp_path / "d", scaling)
        back, back_scaling = load_dataset(tmp_path / "d")
        assert back == ds
        assert back_scaling == scaling

    def test_empty_trip_list_roundtrips(self, tmp_path):
        ds = LocalDataset("v9", [])
        save_dataset(ds, tmp_path / "d", ScalingSpec())
        back, _ = load_dataset(tmp_path / "d")
        assert back == ds

    def test_altered_magic_rejected(self, tmp_path):
        ds = LocalDataset("v0", [make_trip(31)])
        save_dataset(ds, tmp_path / "d", ScalingSpec())
        manifest = tmp_path / "d" / "manifest.json"
        obj = json.loads(manifest.read_text())
        obj["format"] = "something-else"
        manifest.write_text(json.dumps(obj))
        with pytest.raises(DatasetFormatError, match="manifest"):
            load_dataset(tmp_path / "d")

    def test_version_mismatch_rejected(self, tmp_path):
        ds = LocalDataset("v0", [make_trip(31)])
        save_dataset(ds, tmp_path / "d", ScalingSpec())
        manifest = tmp_path / "d" / "manifest.json"
        obj = json.loads(manifest.read_text())
        obj["version"] = 99
        manifest.write_text(json.dumps(obj))
        with pytest.raises(DatasetFormatError, match="version"):
            load_dataset(tmp_path / "d")

    def test_corrupt_trip_csv_names_file(self, tmp_path):
        ds = LocalDataset("v0", [make_trip(31, "t0")])
        save_dataset(ds, tmp_path / "d", ScalingSpec())
        csv_path = tmp_path / "d" / "t0.csv"
        csv_path.write_text("t,v_mps,grade_rad,e_step_wh\n0,not-a-number,0,0\n")
        with pytest.raises(DatasetFormatError, match="t0.csv"):
            load_dataset(tmp_path / "d")

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(DatasetFormatError, match="manifest"):
            load_dataset(tmp_path / "nowhere")


class TestTripRecord:
    def test_column_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TripRecord("t", "v", t=[0.0, 1.0], speed=[0.0], grade=[0.0, 0.0], energy=[0.0, 0.0])

    def test_vehicle_mismatch_rejected_by_dataset(self):
        with pytest.raises(ValueError):
            LocalDataset("v0", [make_trip(31, vehicle_id="other")])
