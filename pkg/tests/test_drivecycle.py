import math

import numpy as np
import pytest

from fedfleet.drivecycle import (
    CycleImportError,
    DriveCycle,
    DriverProfile,
    TerrainModel,
    build_cycle,
    grade_at,
    import_cycle,
    synthesize_speed_profile,
    write_cycle_csv,
)


def profile(**kw):
    base = dict(max_accel=1.0, max_decel=1.4, cruise_speeds=(8.0, 11.0, 14.0), stop_fraction=0.3)
    base.update(kw)
    return DriverProfile(**base)


class TestSpeedProfile:
    def test_ramp_is_closed_form_trapezoid(self):
        # single cruise speed 10 m/s at 1 m/s^2: the ramp must hit 10 in
        # exactly 10 steps of +1 m/s each
        prof = profile(max_accel=1.0, cruise_speeds=(10.0,))
        v = synthesize_speed_profile(prof, 300.0, seed=1)
        start = np.flatnonzero(v > 0.0)[0]
        ramp = v[start - 1 : start + 10]
        assert np.array_equal(ramp, np.arange(11.0))

    def test_zero_cruise_speed_gives_all_zero_profile(self):
        prof = profile(cruise_speeds=(0.0,))
        v = synthesize_speed_profile(prof, 120.0, seed=3)
        assert np.array_equal(v, np.zeros(120))

    def test_deterministic_in_seed(self):
        prof = profile()
        a = synthesize_speed_profile(prof, 600.0, seed=42)
        b = synthesize_speed_profile(prof, 600.0, seed=42)
        assert np.array_equal(a, b)
        c = synthesize_speed_profile(prof, 600.0, seed=43)
        assert not np.array_equal(a, c)

    def test_rejects_short_duration(self):
        with pytest.raises(ValueError):
            synthesize_speed_profile(profile(), 59.0, seed=0)

    def test_rejects_duration_too_short_for_one_cycle(self):
        # 36 m/s at 0.5 m/s^2 needs 72 s up plus the stop: cannot fit in 80 s
        prof = profile(max_accel=0.5, max_decel=0.5, cruise_speeds=(36.0,))
        with pytest.raises(ValueError, match="accelerate-stop"):
            synthesize_speed_profile(prof, 80.0, seed=0)

    def test_per_step_speed_change_bounded(self):
        for seed in range(20):
            prof = profile(max_accel=0.8 + 0.05 * seed, max_decel=1.0 + 0.05 * seed)
            v = synthesize_speed_profile(prof, 400.0, seed=seed)
            bound = max(prof.max_accel, prof.max_decel) + 1e-12
            assert np.max(np.abs(np.diff(v))) <= bound
            assert v[0] == 0.0 and v[-1] == 0.0
            assert np.all(v >= 0.0)
            assert len(v) == 400


class TestGradeAt:
    def test_flat_is_zero_everywhere(self):
        terrain = TerrainModel.flat()
        for d in (0.0, 1.0, 5000.0):
            assert grade_at(terrain, d) == 0.0

    def test_constant_ten_percent(self):
        terrain = TerrainModel.constant(math.atan(0.10))
        assert grade_at(terrain, 0.0) == pytest.approx(math.atan(0.10), rel=1e-15)
        assert grade_at(terrain, 12345.0) == pytest.approx(math.atan(0.10), rel=1e-15)

    def test_table_linear_interpolation(self):
        terrain = TerrainModel(kind="table", table=((0.0, 0.0), (100.0, 5.0)))
        assert grade_at(terrain, 50.0) == pytest.approx(math.atan(0.05), rel=1e-12)

    def test_table_clamps_outside_range(self):
        terrain = TerrainModel(kind="table", table=((10.0, 0.0), (20.0, 1.0), (30.0, 1.0)))
        assert grade_at(terrain, 0.0) == pytest.approx(math.atan(0.1))
        assert grade_at(terrain, 500.0) == 0.0

    def test_hills_slope_is_derivative_of_elevation(self):
        terrain = TerrainModel(kind="synthetic_hills", hills=((5.0, 800.0, 0.3),))
        d = 137.0
        eps = 1e-4

        def elev(x):
            a, w, p = terrain.hills[0]
            return a * math.sin(2 * math.pi * x / w + p)

        fd_slope = (elev(d + eps) - elev(d - eps)) / (2 * eps)
        assert grade_at(terrain, d) == pytest.approx(math.atan(fd_slope), rel=1e-6)

    def test_rejects_negative_distance(self):
        with pytest.raises(ValueError):
            grade_at(TerrainModel.flat(), -1.0)

    def test_grade_bounded_for_all_terrains(self):
        terrains = [
            TerrainModel.flat(),
            TerrainModel.constant(0.14),
            TerrainModel(kind="synthetic_hills", hills=((8.0, 600.0, 0.1), (4.0, 900.0, 2.0))),
            TerrainModel(kind="table", table=((0.0, 0.0), (50.0, 5.0), (100.0, -2.0))),
        ]
        d = np.linspace(0.0, 5000.0, 2001)
        for terrain in terrains:
            g = np.asarray(grade_at(terrain, d))
            assert np.all(np.abs(g) <= 0.15 + 1e-12)

    def test_terrain_validation_rejects_steep_models(self):
        with pytest.raises(ValueError):
            TerrainModel.constant(0.2)
        with pytest.raises(ValueError):
            TerrainModel(kind="synthetic_hills", hills=((100.0, 600.0, 0.0),))
        with pytest.raises(ValueError):
            TerrainModel(kind="table", table=((0.0, 0.0), (10.0, 5.0)))
        with pytest.raises(ValueError):
            TerrainModel(kind="table", table=((0.0, 0.0), (0.0, 1.0)))


class TestBuildCycle:
    def test_flat_terrain_grades_are_zero(self):
        cycle = build_cycle(profile(), TerrainModel.flat(), 300.0, seed=7)
        assert np.array_equal(cycle.grade, np.zeros(len(cycle)))

    def test_zero_speed_profile_keeps_origin_grade(self):
        terrain = TerrainModel(kind="table", table=((0.0, 0.0), (100.0, 3.0)))
        cycle = build_cycle(profile(cruise_speeds=(0.0,)), terrain, 120.0, seed=0)
        assert np.all(cycle.grade == grade_at(terrain, 0.0))

    def test_deterministic(self):
        terrain = TerrainModel(kind="synthetic_hills", hills=((5.0, 700.0, 0.0),))
        a = build_cycle(profile(), terrain, 400.0, seed=5)
        b = build_cycle(profile(), terrain, 400.0, seed=5)
        assert np.array_equal(a.speed_ref, b.speed_ref)
        assert np.array_equal(a.grade, b.grade)

    def test_invariants_enforced_by_type(self):
        with pytest.raises(ValueError):
            DriveCycle("t", "v", np.array([0.0, -1.0, 0.0]), np.zeros(3))
        with pytest.raises(ValueError):
            DriveCycle("t", "v", np.array([0.0, 1.0, 0.5]), np.zeros(3))
        with pytest.raises(ValueError):
            DriveCycle("t", "v", np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.2, 0.0]))


class TestImportCycle:
    def test_three_row_file(self, tmp_path):
        path = tmp_path / "mini.csv"
        path.write_text("t,speed_mps\n0,0\n1,5\n2,0\n")
        cycle = import_cycle(path, TerrainModel.flat())
        assert len(cycle) == 3
        assert np.array_equal(cycle.speed_ref, [0.0, 5.0, 0.0])

    def test_kmh_header_converts(self, tmp_path):
        path = tmp_path / "kmh.csv"
        path.write_text("t,speed_kmh\n0,0\n1,36\n2,0\n")
        cycle = import_cycle(path, TerrainModel.flat())
        assert cycle.speed_ref[1] == pytest.approx(10.0)

    def test_same_speeds_different_grade_under_terrains(self, tmp_path):
        path = tmp_path / "c.csv"
        rows = "\n".join(f"{t},{v}" for t, v in enumerate([0, 3, 6, 6, 3, 0]))
        path.write_text("t,speed_mps\n" + rows + "\n")
        flat = import_cycle(path, TerrainModel.flat())
        steep = import_cycle(path, TerrainModel.constant(math.atan(0.10)))
        assert np.array_equal(flat.speed_ref, steep.speed_ref)
        assert not np.array_equal(flat.grade, steep.grade)

    def test_negative_speed_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,speed_mps\n0,0\n1,-1\n2,0\n")
        with pytest.raises(CycleImportError, match="row 3"):
            import_cycle(path, TerrainModel.flat())

    def test_non_monotone_time_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,speed_mps\n0,0\n2,5\n1,0\n")
        with pytest.raises(CycleImportError, match="row"):
            import_cycle(path, TerrainModel.flat())

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,speed\n0,0\n")
        with pytest.raises(CycleImportError):
            import_cycle(path, TerrainModel.flat())

    def test_roundtrip_through_csv(self, tmp_path):
        cycle = build_cycle(profile(), TerrainModel.flat(), 200.0, seed=9)
        path = tmp_path / "out.csv"
        write_cycle_csv(cycle, path)
        back = import_cycle(path, TerrainModel.flat())
        assert np.array_equal(back.speed_ref, cycle.speed_ref)
