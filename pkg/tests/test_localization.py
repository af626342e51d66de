import numpy as np
import pytest

from manetsim.core.errors import GeometryError, InsufficientDataError, LocalizationError
from manetsim.core.geometry import Position, bearing_deg, triangle_area
from manetsim.core.localization import (
    ReferenceFix,
    derive_distance_via_origin,
    localize_malicious,
    localize_mutual_references,
    mean_flight_time,
    multilaterate,
    multilaterate_leave_one_out,
    select_neighbors,
    triangulate,
)
from manetsim.core.models import EstimateMethod
from manetsim.core.nodes import NodeState
from manetsim.core.radio import RadioModel

from .conftest import random_points

C = 3.0e8
TRIANGLE = [Position(0, 0), Position(100, 0), Position(0, 100)]
SQUARE = [Position(0, 0), Position(100, 0), Position(0, 100), Position(100, 100), Position(50, 50)]


def exact_fixes(refs, target, with_aoa=False):
    return [
        ReferenceFix(
            p,
            p.distance_to(target),
            bearing_deg(p, target) if with_aoa and p.distance_to(target) > 0 else None,
            k,
        )
        for k, p in enumerate(refs)
    ]


def node(node_id, x, y):
    return NodeState(node_id, Position(x, y), Position(x, y), 0.0)


def test_triangulate_exact_distances():
    estimate = triangulate(exact_fixes(TRIANGLE, Position(30, 40)))
    assert estimate.method == EstimateMethod.TRIANGULATION
    assert estimate.position.x == pytest.approx(30.0, abs=1e-6)
    assert estimate.position.y == pytest.approx(40.0, abs=1e-6)
    assert estimate.residual == pytest.approx(0.0, abs=1e-9)
    assert estimate.fix_ids == (0, 1, 2)


def test_triangulate_target_on_a_reference():
    estimate = triangulate(exact_fixes(TRIANGLE, Position(100, 0)))
    assert estimate.position.x == pytest.approx(100.0, abs=1e-6)
    assert estimate.position.y == pytest.approx(0.0, abs=1e-6)


def test_triangulate_rejects_collinear_references():
    refs = [Position(0, 0), Position(50, 0), Position(100, 0)]
    with pytest.raises(GeometryError):
        triangulate(exact_fixes(refs, Position(30, 40)))


def test_triangulate_needs_three_fixes():
    with pytest.raises(InsufficientDataError):
        triangulate(exact_fixes(TRIANGLE[:2], Position(30, 40)))


def test_triangulate_under_one_meter_perturbation():
    rng = np.random.default_rng(2024)
    truth = Position(30, 40)
    errors = []
    for _ in range(1000):
        fixes = [
            ReferenceFix(f.position, max(0.0, f.distance + rng.uniform(-1.0, 1.0)))
            for f in exact_fixes(TRIANGLE, truth)
        ]
        errors.append(triangulate(fixes).position.distance_to(truth))
    assert np.percentile(errors, 95) <= 3.0


def test_aoa_picks_the_mirror_solution():
    # target near the reference line y = 0: both mirror images fit the ranges closely
    refs = [Position(0, 0), Position(100, 0), Position(50, 0.5)]
    truth = Position(40, 30)
    estimate = triangulate(exact_fixes(refs, truth, with_aoa=True))
    assert estimate.position.distance_to(truth) < 1e-3


def test_multilaterate_3d():
    refs = [Position(0, 0, 0), Position(100, 0, 0), Position(0, 100, 0), Position(0, 0, 100)]
    estimate = multilaterate(exact_fixes(refs, Position(20, 30, 40)))
    assert estimate.method == EstimateMethod.MULTILATERATION
    assert (estimate.position.x, estimate.position.y, estimate.position.z) == pytest.approx(
        (20.0, 30.0, 40.0), abs=1e-6
    )
    assert estimate.n_fixes == 4


def test_multilaterate_target_on_a_reference():
    estimate = multilaterate(exact_fixes(SQUARE[:4], Position(100, 100)))
    assert (estimate.position.x, estimate.position.y) == pytest.approx((100.0, 100.0), abs=1e-6)


def test_multilaterate_rejects_degenerate_geometry():
    with pytest.raises(InsufficientDataError):
        multilaterate(exact_fixes(SQUARE[:3], Position(30, 40)))
    collinear = [Position(0, 0), Position(10, 0), Position(20, 0), Position(30, 0)]
    with pytest.raises(GeometryError):
        multilaterate(exact_fixes(collinear, Position(30, 40)))
    coplanar = [Position(0, 0, 5), Position(100, 0, 5), Position(0, 100, 5), Position(100, 100, 5)]
    with pytest.raises(GeometryError):
        multilaterate(exact_fixes(coplanar, Position(30, 40, 20)))


def test_leave_one_out_drops_the_corrupted_fix():
    truth = Position(30, 40)
    fixes = exact_fixes(SQUARE, truth)
    fixes[3] = ReferenceFix(fixes[3].position, fixes[3].distance + 20.0, None, 3)
    assert multilaterate(fixes).residual > 1.0
    estimate = multilaterate_leave_one_out(fixes)
    assert estimate.position.distance_to(truth) < 1e-3
    assert 3 not in estimate.fix_ids


def test_noiseless_exactness_over_random_geometries():
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 1000:
        a, b, c, d, truth = random_points(rng, 5)
        if triangle_area(a, b, c) < 1000.0:
            continue
        tri = triangulate(exact_fixes([a, b, c], truth, with_aoa=True))
        multi = multilaterate(exact_fixes([a, b, c, d], truth))
        assert tri.position.distance_to(truth) < 1e-6
        assert multi.position.distance_to(truth) < 1e-6
        checked += 1


def test_estimates_are_translation_and_rotation_equivariant():
    rng = np.random.default_rng(5)
    truth = Position(30, 40)
    fixes = [ReferenceFix(f.position, f.distance + rng.normal(0, 1.0)) for f in exact_fixes(SQUARE, truth)]
    base = multilaterate(fixes).position

    angle = np.radians(30.0)
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    shift = np.array([250.0, -75.0])

    def move(p):
        return Position.from_array(rotation @ p.as_array(2) + shift)

    moved = multilaterate([ReferenceFix(move(f.position), f.distance) for f in fixes]).position
    assert moved.distance_to(move(base)) < 1e-6


def test_residual_is_zero_only_for_consistent_distances():
    truth = Position(30, 40)
    assert multilaterate(exact_fixes(SQUARE, truth)).residual <= 1e-9
    bent = [ReferenceFix(f.position, f.distance + (2.0 if k == 0 else 0.0)) for k, f in enumerate(exact_fixes(SQUARE, truth))]
    assert multilaterate(bent).residual > 1e-3


def test_multilateration_beats_triangulation_under_equal_noise():
    rng = np.random.default_rng(11)
    truth = Position(30, 40)
    tri_errors, multi_errors = [], []
    for _ in range(300):
        noisy = [ReferenceFix(f.position, max(0.0, f.distance + rng.normal(0, 1.0))) for f in exact_fixes(SQUARE, truth)]
        tri_errors.append(triangulate(noisy[:3]).position.distance_to(truth))
        multi_errors.append(multilaterate(noisy).position.distance_to(truth))
    assert np.mean(multi_errors) < np.mean(tri_errors)


def test_reference_fix_rejects_negative_distance():
    with pytest.raises(GeometryError):
        ReferenceFix(Position(0, 0), -1.0)


def test_derive_distance_via_origin():
    assert derive_distance_via_origin(100e-9, 200e-9, 200e-9, C) == pytest.approx(30.0)
    assert derive_distance_via_origin(0.0, 150e-9, 150e-9, C) == pytest.approx(0.0)
    m, n, origin = Position(30, 0), Position(0, 40), Position(0, 0)
    derived = derive_distance_via_origin(
        m.distance_to(n) / C, m.distance_to(origin) / C, origin.distance_to(n) / C, C
    )
    assert derived == pytest.approx(40.0)
    assert derived != pytest.approx(m.distance_to(n))


def test_derive_distance_via_origin_clamps_and_validates():
    assert derive_distance_via_origin(0.0, 0.0, 100e-9, C) == 0.0
    with pytest.raises(LocalizationError):
        derive_distance_via_origin(-1e-9, 0.0, 0.0, C)


def test_mean_flight_time():
    assert mean_flight_time([(0.0, 1e-7), (1.0, 1.0 + 3e-7)]) == pytest.approx(2e-7)
    with pytest.raises(InsufficientDataError):
        mean_flight_time([])


NEIGHBOURS = [
    node(1, 0, 0), node(2, 120, 0), node(3, 0, 120), node(4, 120, 120),
    node(5, 60, -60), node(6, -60, 60), node(7, 180, 60), node(8, 60, 180),
]


def test_localize_malicious_noiseless(rng, ideal_radio):
    target = Position(59, 41)
    estimate = localize_malicious(NEIGHBOURS, 99, target, target, ideal_radio, rng)
    assert estimate.method == EstimateMethod.MULTILATERATION
    assert (estimate.position.x, estimate.position.y) == pytest.approx((59.0, 41.0), abs=1e-6)
    assert sorted(estimate.fix_ids) == [1, 2, 3, 4]
    assert not estimate.remeasured
    assert len(estimate.measurements) == 4


def test_select_neighbors_excludes_the_target_itself():
    target = node(99, 59, 41)
    pool = select_neighbors(NEIGHBOURS + [target], 99, target.position, 300.0)
    assert 99 not in [n.id for n in pool]
    assert [n.id for n in pool][:4] == [1, 2, 3, 4]


def test_select_neighbors_applies_authentication():
    pool = select_neighbors(NEIGHBOURS, 99, Position(59, 41), 300.0, authenticated=lambda n: n.id % 2 == 0)
    assert all(n.id % 2 == 0 for n in pool)


def test_localize_malicious_needs_four_neighbours(rng, ideal_radio):
    with pytest.raises(InsufficientDataError):
        localize_malicious(NEIGHBOURS[:3], 99, Position(59, 41), Position(59, 41), ideal_radio, rng)


def test_stale_stamps_trigger_remeasurement(rng, ideal_radio):
    target = Position(59, 41)
    estimate = localize_malicious(
        NEIGHBOURS, 99, target, target, ideal_radio, rng,
        forged_offsets={1: 50.0 / C}, residual_limit=1.0,
    )
    assert estimate.remeasured
    assert 1 not in estimate.fix_ids
    assert estimate.position.distance_to(target) < 1e-6


def test_mutual_reference_localization(rng, ideal_radio):
    references = [node(10, 0, 0), node(11, 150, 20), node(12, 40, 130)]
    estimates = localize_mutual_references(references, ideal_radio, rng)
    assert sorted(estimates) == [10, 11, 12]
    for ref in references:
        assert estimates[ref.id].position.distance_to(ref.position) < 1e-6
        assert estimates[ref.id].n_fixes == 2


def test_estimate_row_columns():
    row = triangulate(exact_fixes(TRIANGLE, Position(30, 40))).as_row(target_id=5)
    assert set(row) == {"t", "target_id", "method", "x", "y", "z", "residual", "n_fixes"}
    assert row["method"] == "triangulation"
