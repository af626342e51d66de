import math

import numpy as np
import pytest

from manetsim.core.errors import TrackingError
from manetsim.core.geometry import Position, angle_diff, bearing_deg
from manetsim.core.models import TrackStatus
from manetsim.core.tracking import (
    TrackerState,
    TrackingZone,
    build_zone,
    coast_position,
    contour_index,
    fuse_fix,
    observe,
    plt_step,
    predict_heading,
    track_epoch,
)


def zone(**kwargs):
    params = dict(apex=Position(0, 0), heading=0.0, r1=10.0, n_contours=4)
    params.update(kwargs)
    return TrackingZone(**params)


def tracker(first=Position(-10, 0), second=Position(0, 0), **kwargs):
    return TrackerState.start(1, 0, (0.0, first), (1.0, second), **kwargs)


@pytest.mark.parametrize(
    "p_prev, p_curr, expected",
    [((0, 0), (10, 0), 0.0), ((0, 0), (0, -5), 270.0), ((3, 4), (6, 8), 53.130102)],
)
def test_predict_heading(p_prev, p_curr, expected):
    assert predict_heading(Position(*p_prev), Position(*p_curr)) == pytest.approx(expected, abs=1e-6)


def test_predict_heading_coincident_points():
    assert predict_heading(Position(1, 1), Position(1, 1), previous_heading=30.0) == 30.0
    with pytest.raises(TrackingError):
        predict_heading(Position(1, 1), Position(1, 1))


def test_build_zone_radii_table():
    z = build_zone(Position(-1, 0), Position(0, 0), r1=10.0, n_contours=4)
    assert z.apex == Position(0, 0)
    assert z.heading == pytest.approx(0.0)
    assert z.radii == pytest.approx([10.0, 14.142136, 17.320508, 20.0])
    assert z.annulus_areas() == pytest.approx([100 * math.pi] * 4)
    assert build_zone(Position(-1, 0), Position(0, 0), n_contours=1).radii.tolist() == [10.0]


@pytest.mark.parametrize("kwargs", [{"r1": 0.0}, {"n_contours": 0}, {"half_angle": 0.0}, {"half_angle": 91.0}])
def test_zone_validation(kwargs):
    with pytest.raises(TrackingError):
        zone(**kwargs)


def test_equal_area_contours_up_to_one_hundred():
    for n in range(1, 101):
        z = zone(n_contours=n, r1=7.5)
        areas = z.annulus_areas()
        assert np.max(np.abs(areas - areas[0])) / areas[0] <= 1e-9
        radii = z.radii
        assert np.all(np.diff(radii) > 0)
        expected = 7.5 * np.sqrt(np.arange(1, n + 1))
        assert np.max(np.abs(radii - expected) / expected) <= 1e-12


@pytest.mark.parametrize("received, expected", [(1 / 144, 2), (1.0, 1), (1 / 625, None)])
def test_contour_index(received, expected):
    assert contour_index(zone(), received) == expected


def test_contour_index_rejects_non_positive_energy():
    with pytest.raises(TrackingError):
        contour_index(zone(), 0.0)


def test_plt_step_midpoint_rule():
    state = tracker(r1=10.0, n_contours=2)
    estimate, state = plt_step(state, 0.0, 1, 2.0)
    assert (estimate.position.x, estimate.position.y) == pytest.approx((5.0, 0.0))
    assert state.status == TrackStatus.LOCKED
    assert state.last_two[1] == (2.0, estimate.position)


def test_plt_step_second_band_at_45_degrees():
    state = tracker(r1=10.0, n_contours=2)
    estimate, _ = plt_step(state, 45.0, 2, 2.0)
    assert (estimate.position.x, estimate.position.y) == pytest.approx((8.535534, 8.535534), abs=1e-6)


def test_bearing_outside_cone_coasts_and_widens():
    state = tracker(half_angle=30.0)
    estimate, state = plt_step(state, 90.0, 1, 2.0)
    assert estimate is None
    assert state.status == TrackStatus.COASTING
    assert state.zone.half_angle == pytest.approx(60.0)
    plt_step(state, 180.0, 1, 3.0)
    assert state.zone.half_angle == pytest.approx(90.0)


def test_coasting_runs_out_to_lost():
    state = tracker(max_coast=3)
    for t in range(4):
        plt_step(state, 180.0, 1, 2.0 + t)
    assert state.status == TrackStatus.LOST


def test_outside_last_contour_is_lost():
    estimate, state = plt_step(tracker(), 0.0, None, 2.0)
    assert estimate is None
    assert state.status == TrackStatus.LOST


def test_coast_position_extrapolates_constant_velocity():
    state = tracker(first=Position(0, 0), second=Position(10, 0))
    assert coast_position(state, 3.0) == Position(30.0, 0.0)


def test_unordered_seed_is_rejected():
    with pytest.raises(TrackingError):
        TrackerState.start(1, 0, (2.0, Position(0, 0)), (1.0, Position(1, 0)))


def test_fuse_fix_keeps_only_consistent_fixes():
    z = zone()
    band = Position(5, 0)
    assert fuse_fix(z, 1, band, Position(7, 1), 0.0) == Position(7, 1)
    assert fuse_fix(z, 1, band, Position(13, 0), 0.0) == band
    assert fuse_fix(z, 1, band, Position(13, 0), 4.0) == Position(13, 0)
    assert fuse_fix(z, 1, band, Position(0, 8), 0.0) == band
    assert fuse_fix(z, 1, band, None, 0.0) == band


def test_observe_from_the_apex(ideal_radio):
    bearing, k = observe(zone(), Position(0, 12), ideal_radio)
    assert bearing == pytest.approx(90.0)
    assert k == 2


def test_straight_line_error_is_bounded_by_half_r1(ideal_radio):
    state = tracker(first=Position(0, 0), second=Position(10, 0), r1=10.0, n_contours=10)
    for step in range(2, 60):
        truth = Position(10.0 * step, 0.0)
        bearing, k = observe(state.zone, truth, ideal_radio)
        estimate, state = plt_step(state, bearing, k, float(step))
        assert estimate is not None
        assert estimate.position.distance_to(truth) <= 5.0 + 1e-9


def test_estimates_stay_in_the_cone(ideal_radio):
    rng = np.random.default_rng(4)
    state = tracker(first=Position(0, 0), second=Position(5, 0), half_angle=45.0)
    position = Position(5, 0)
    for step in range(2, 80):
        position = position.offset(5.0, float(rng.uniform(-30, 30)))
        active = state.zone
        bearing, k = observe(active, position, ideal_radio, rng, bearing_noise_deg=2.0)
        estimate, state = plt_step(state, bearing, k, float(step))
        if estimate is not None:
            drift = abs(angle_diff(bearing_deg(active.apex, estimate.position), active.heading))
            assert drift <= active.half_angle + 1e-6
        if state.status == TrackStatus.LOST:
            break


def test_tracking_is_deterministic(ideal_radio):
    def run():
        rng = np.random.default_rng(8)
        state = tracker(first=Position(0, 0), second=Position(5, 5))
        out = []
        for step in range(2, 30):
            truth = Position(5.0 * step, 5.0 * step)
            bearing, k = observe(state.zone, truth, ideal_radio, rng, bearing_noise_deg=3.0)
            position, state = track_epoch(state, bearing, k, float(step), fix=truth)
            out.append(position)
        return out

    assert run() == run()


def test_track_epoch_reacquires_a_lost_tracker():
    state = tracker()
    plt_step(state, 0.0, None, 2.0)
    fix = Position(40, 3)
    position, state = track_epoch(state, 0.0, None, 3.0, fix=fix)
    assert position == fix
    assert state.status == TrackStatus.LOCKED
    assert state.last_two[1] == (3.0, fix)


def test_track_epoch_reports_coasting_extrapolation():
    state = tracker(first=Position(-10, 0), second=Position(0, 0))
    position, state = track_epoch(state, 180.0, 1, 2.0)
    assert state.status == TrackStatus.COASTING
    assert position == Position(10.0, 0.0)
