import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.errors import DegenerateGeometryError, ParameterError
from gazekit.geometry import (
    DEFAULT_RADII_CM,
    GazeDirection,
    Target,
    build_grid,
    build_scene,
    gaze_to_target,
    snap_to_target,
    visual_angle_between,
)

ORIGIN = np.zeros(3)


def test_grid_constants():
    grid = build_grid()
    assert len(grid) == 52
    assert grid.radii_cm == (29.4, 49.7, 60.6, 96.1)
    assert grid.eye_height_cm == 35.0
    assert grid.column_step_deg == 10.0


def test_center_column_positions():
    grid = build_grid()
    t = grid.target(4, 7)
    assert np.allclose(t.position, [0.0, -35.0, 96.1])
    # Elementary trigonometry oracle for the elevation.
    expected_el = -math.degrees(math.atan(35.0 / 96.1))
    d = gaze_to_target(ORIGIN, t)
    assert d.azimuth_deg == 0.0
    assert d.elevation_deg == pytest.approx(expected_el, abs=1e-9)
    assert d.elevation_deg == pytest.approx(-20.01, abs=0.01)


def test_extreme_column_azimuths():
    grid = build_grid()
    assert gaze_to_target(ORIGIN, grid.target(1, 1)).azimuth_deg == pytest.approx(-60.0)
    assert gaze_to_target(ORIGIN, grid.target(1, 13)).azimuth_deg == pytest.approx(60.0)


def test_grid_mirror_symmetry():
    grid = build_grid()
    for row in range(1, 5):
        for col in range(1, 14):
            az = gaze_to_target(ORIGIN, grid.target(row, col)).azimuth_deg
            az_mirror = gaze_to_target(ORIGIN, grid.target(row, 14 - col)).azimuth_deg
            assert az == pytest.approx(-az_mirror, abs=1e-9)


def test_row_elevation_gap_rows_3_to_4():
    grid = build_grid()
    el3 = gaze_to_target(ORIGIN, grid.target(3, 7)).elevation_deg
    el4 = gaze_to_target(ORIGIN, grid.target(4, 7)).elevation_deg
    oracle = math.degrees(math.atan(35.0 / 60.6) - math.atan(35.0 / 96.1))
    assert el4 - el3 == pytest.approx(oracle, abs=1e-9)
    assert el4 - el3 == pytest.approx(10.0, abs=0.05)


def test_rows_1_to_3_gaps_do_not_match_the_nominal_10_degrees():
    # The stated radii give ~14.9 and ~5.1 degree gaps for rows 1-2 and
    # 2-3; the grid implements the radii verbatim and exposes the angles.
    grid = build_grid()
    els = [gaze_to_target(ORIGIN, grid.target(r, 7)).elevation_deg for r in (1, 2, 3)]
    assert els[1] - els[0] == pytest.approx(14.9, abs=0.1)
    assert els[2] - els[1] == pytest.approx(5.1, abs=0.1)


def test_gaze_to_target_axis_aligned():
    t = Target(row=1, col=7, position=(0.0, 0.0, 5.0))
    d = gaze_to_target((0.0, 0.0, 4.0), t)
    assert (d.x, d.y, d.z) == (0.0, 0.0, 1.0)


def test_gaze_to_target_coincident_raises():
    t = Target(row=1, col=7, position=(1.0, 2.0, 3.0))
    with pytest.raises(DegenerateGeometryError):
        gaze_to_target((1.0, 2.0, 3.0), t)


def test_visual_angle_identity_and_rows():
    grid = build_grid()
    a, b = grid.target(3, 7), grid.target(4, 7)
    assert visual_angle_between(ORIGIN, a, a) == 0.0
    oracle = math.degrees(math.atan(35.0 / 60.6) - math.atan(35.0 / 96.1))
    assert visual_angle_between(ORIGIN, a, b) == pytest.approx(oracle, abs=1e-9)
    assert visual_angle_between(ORIGIN, a, b) == pytest.approx(10.0, abs=0.1)


def test_visual_angle_adjacent_columns_row_4():
    # Brute-force dot-product oracle: the 10 degree table-surface step
    # subtends about 9.4 degrees of visual angle from the eye position.
    grid = build_grid()
    u = grid.target(4, 7).position
    v = grid.target(4, 8).position
    cosang = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    oracle = math.degrees(math.acos(cosang))
    got = visual_angle_between(ORIGIN, grid.target(4, 7), grid.target(4, 8))
    assert got == pytest.approx(oracle, abs=1e-9)
    assert got == pytest.approx(9.4, abs=0.05)


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(st.integers(1, 4), st.integers(1, 13)),
    st.tuples(st.integers(1, 4), st.integers(1, 13)),
    st.tuples(st.integers(1, 4), st.integers(1, 13)),
)
def test_visual_angle_symmetry_and_triangle_inequality(ka, kb, kc):
    grid = build_grid()
    a, b, c = (grid.target(*k) for k in (ka, kb, kc))
    ab = visual_angle_between(ORIGIN, a, b)
    ba = visual_angle_between(ORIGIN, b, a)
    assert ab == ba
    ac = visual_angle_between(ORIGIN, a, c)
    cb = visual_angle_between(ORIGIN, c, b)
    assert ab <= ac + cb + 1e-9


def test_snap_round_trip_all_targets():
    scene = build_scene()
    eye = scene.looker_eye_center
    for t in scene.grid:
        assert snap_to_target(gaze_to_target(eye, t), eye, scene.grid) == t


def test_snap_upward_ray_returns_none():
    grid = build_grid()
    assert snap_to_target(GazeDirection.from_azel(0.0, 5.0), ORIGIN, grid) is None
    assert snap_to_target(GazeDirection.from_azel(0.0, 0.0), ORIGIN, grid) is None


def test_snap_perturbed_direction_stays_on_target():
    grid = build_grid()
    true_dir = gaze_to_target(ORIGIN, grid.target(4, 7))
    perturbed = GazeDirection.from_azel(true_dir.azimuth_deg + 2.0, true_dir.elevation_deg)
    snapped = snap_to_target(perturbed, ORIGIN, grid)

    # Independent nearest-target oracle: intersect the plane by hand and
    # scan all 52 table distances.
    d = perturbed.as_array()
    t = -35.0 / d[1]
    hit = t * d
    dists = {
        (tt.row, tt.col): (hit[0] - tt.position[0]) ** 2 + (hit[2] - tt.position[2]) ** 2
        for tt in grid
    }
    best = min(dists, key=lambda k: (dists[k], k))
    assert (snapped.row, snapped.col) == best == (4, 7)


def test_gaze_direction_accessors_and_validation():
    d = GazeDirection.from_azel(30.0, -10.0)
    assert d.azimuth_deg == pytest.approx(30.0)
    assert d.elevation_deg == pytest.approx(-10.0)
    assert np.linalg.norm(d.as_array()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        GazeDirection(1.0, 1.0, 0.0)
    with pytest.raises(DegenerateGeometryError):
        GazeDirection.from_vector((0.0, 0.0, 0.0))


def test_target_validation():
    with pytest.raises(ParameterError):
        Target(row=0, col=1, position=(0, 0, 1))
    with pytest.raises(ParameterError):
        Target(row=1, col=14, position=(0, 0, 1))
    with pytest.raises(ParameterError):
        Target(row=1, col=1, position=(0, 0, float("nan")))


def test_scene_layout():
    scene = build_scene()
    assert len(scene.observer_positions) == 4
    # Seats 1/4 and 2/3 mirror across the midline at the stated ranges.
    p1, p2, p3, p4 = scene.observer_positions
    assert np.linalg.norm(p1) == pytest.approx(180.0)
    assert np.linalg.norm(p2) == pytest.approx(138.0)
    assert np.allclose(p1 * [-1, 1, 1], p4)
    assert np.allclose(p2 * [-1, 1, 1], p3)
    az1 = math.degrees(math.atan2(p1[0], p1[2]))
    az2 = math.degrees(math.atan2(p2[0], p2[2]))
    assert az1 == pytest.approx(-47.7)
    assert az2 == pytest.approx(-28.6)
    with pytest.raises(ParameterError):
        scene.observer_position(5)


def test_grid_equality_and_lookup():
    g1, g2 = build_grid(), build_grid()
    assert g1 == g2
    assert g1.target(2, 3).row == 2
    with pytest.raises(ParameterError):
        g1.target(5, 1)
    assert build_scene() == build_scene()
