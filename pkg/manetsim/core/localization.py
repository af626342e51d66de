"""Triangulation, multilateration and malicious-node localization"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Delaunay, QhullError

from . import config as defaults
from .config import debug_logger
from .errors import ConvergenceError, GeometryError, InsufficientDataError, LocalizationError, OutOfRangeError
from .geometry import Position, angle_diff, bearing_deg, triangle_area
from .models import EstimateMethod
from .radio import RadioModel, TimestampPair
from .ranging import Located, RangeMeasurement, measure_range


@dataclass(frozen=True)
class ReferenceFix:
    position: Position
    distance: float
    aoa: Optional[float] = None  # bearing from this reference to the target
    node_id: Optional[int] = None

    def __post_init__(self):
        if not self.distance >= 0:
            raise GeometryError(f"Reference fix distance must be >= 0, got {self.distance}")


@dataclass
class PositionEstimate:
    position: Position
    residual: float
    method: EstimateMethod
    epoch: float = 0.0
    n_fixes: int = 0
    fix_ids: Tuple[int, ...] = ()
    inter_cluster: bool = False
    remeasured: bool = False
    measurements: List[RangeMeasurement] = field(default_factory=list, repr=False)

    def as_row(self, target_id: int) -> dict:
        return {
            "t": self.epoch,
            "target_id": target_id,
            "method": self.method.value,
            "x": self.position.x,
            "y": self.position.y,
            "z": self.position.z,
            "residual": self.residual,
            "n_fixes": self.n_fixes,
        }


def _rms_residual(point: np.ndarray, refs: np.ndarray, distances: np.ndarray) -> float:
    errors = np.linalg.norm(refs - point, axis=1) - distances
    return float(np.sqrt(np.mean(errors**2)))


def gauss_newton(
    start: np.ndarray,
    refs: np.ndarray,
    distances: np.ndarray,
    tolerance: float = defaults.SOLVER_TOLERANCE,
    max_iterations: int = defaults.SOLVER_MAX_ITERATIONS,
) -> np.ndarray:
    """Minimize sum((|p - ref_i| - d_i)^2) from `start`, with step halving"""
    x = np.array(start, dtype=float)

    def cost(p: np.ndarray) -> float:
        return float(np.sum((np.linalg.norm(refs - p, axis=1) - distances) ** 2))

    current = cost(x)
    for iteration in range(1, max_iterations + 1):
        delta = x - refs
        norms = np.linalg.norm(delta, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        jacobian = np.where(norms[:, None] > 0.0, delta / safe[:, None], 0.0)
        step, *_ = np.linalg.lstsq(jacobian, distances - norms, rcond=None)

        scale = 1.0
        while True:
            candidate = x + scale * step
            candidate_cost = cost(candidate)
            if candidate_cost <= current or scale < 1e-6:
                break
            scale /= 2.0
        if candidate_cost > current:
            # no descent left along the Gauss-Newton direction
            return x
        moved = float(np.linalg.norm(candidate - x))
        x, current = candidate, candidate_cost
        if moved <= tolerance or current == 0.0:
            return x
    raise ConvergenceError(
        f"Gauss-Newton did not converge in {max_iterations} iterations",
        diagnostics={"last_point": x.tolist(), "cost": current, "iterations": max_iterations},
    )


def _linear_seed(refs: np.ndarray, distances: np.ndarray) -> np.ndarray:
    """Subtract the first range equation to cancel the quadratic term, then least squares"""
    a = 2.0 * (refs[1:] - refs[0])
    b = (
        distances[0] ** 2
        - distances[1:] ** 2
        + np.sum(refs[1:] ** 2, axis=1)
        - np.sum(refs[0] ** 2)
    )
    solution, *_ = np.linalg.lstsq(a, b, rcond=None)
    return solution


def _rank_subsets(refs: np.ndarray, distances: np.ndarray, iterations: int = 8) -> np.ndarray:
    """RMS residual of a stack of reference sets, each solved by linear seed plus plain Gauss-Newton.

    refs has shape (subsets, k, dim). Degenerate or diverging sets score inf.
    """
    dim = refs.shape[2]
    spread = np.linalg.svd(refs[:, 1:] - refs[:, :1], compute_uv=False)
    usable = spread[:, dim - 1] > defaults.COLLINEAR_EPS * np.maximum(1.0, spread[:, 0])

    a = refs[:, 1:] - refs[:, :1]
    b = 0.5 * (
        distances[:, :1] ** 2
        - distances[:, 1:] ** 2
        + np.sum(refs[:, 1:] ** 2, axis=2)
        - np.sum(refs[:, :1] ** 2, axis=2)
    )
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        seed = (np.linalg.pinv(a) @ b[..., None])[..., 0]
        x = seed
        for _ in range(iterations):
            delta = x[:, None, :] - refs
            norms = np.linalg.norm(delta, axis=2)
            jacobian = delta / np.where(norms > 0.0, norms, 1.0)[..., None]
            stepped = x + (np.linalg.pinv(jacobian) @ (distances - norms)[..., None])[..., 0]
            # a set that overflows falls back to its linear seed
            x = np.where(np.isfinite(stepped).all(axis=1, keepdims=True), stepped, seed)
        errors = np.linalg.norm(x[:, None, :] - refs, axis=2) - distances
        residual = np.sqrt(np.mean(errors**2, axis=1))
    return np.where(usable & np.isfinite(residual), residual, np.inf)


def _reflect(point: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    direction = (b - a) / np.linalg.norm(b - a)
    foot = a + np.dot(point - a, direction) * direction
    return 2.0 * foot - point


def _inside_hull(point: np.ndarray, hull: Optional[Delaunay]) -> bool:
    return hull is not None and bool(hull.find_simplex(point) >= 0)


def _build_hull(points: Optional[Sequence[Position]]) -> Optional[Delaunay]:
    if not points or len(points) < 3:
        return None
    try:
        return Delaunay(np.array([[p.x, p.y] for p in points]))
    except QhullError:
        return None


def triangulate(
    fixes: Sequence[ReferenceFix],
    *,
    extra_fix: Optional[ReferenceFix] = None,
    hull: Optional[Sequence[Position]] = None,
    epoch: float = 0.0,
) -> PositionEstimate:
    """2D fix from exactly three references.

    Candidate solutions within the mirror-ambiguity margin of the best
    residual are resolved by AoA when the fixes carry it, otherwise by the
    fourth-nearest node's range, otherwise by membership of the cluster hull.
    """
    if len(fixes) != 3:
        raise InsufficientDataError(f"triangulate needs exactly 3 fixes, got {len(fixes)}")
    a, b, c = (f.position for f in fixes)
    if triangle_area(a, b, c) <= defaults.COLLINEAR_EPS:
        raise GeometryError("Reference nodes are collinear")

    refs = np.array([f.position.as_array(2) for f in fixes])
    distances = np.array([f.distance for f in fixes])
    best = gauss_newton(_linear_seed(refs, distances), refs, distances)

    candidates = [best]
    for i, j in combinations(range(3), 2):
        mirrored = _reflect(best, refs[i], refs[j])
        if np.linalg.norm(mirrored - best) > defaults.MIRROR_AMBIGUITY:
            try:
                candidates.append(gauss_newton(mirrored, refs, distances))
            except ConvergenceError:
                continue

    scored = sorted(
        ((_rms_residual(p, refs, distances), k, p) for k, p in enumerate(candidates)),
        key=lambda item: (item[0], item[1]),
    )
    floor = scored[0][0]
    contenders = []
    for residual, _, point in scored:
        if residual - floor > defaults.MIRROR_AMBIGUITY:
            continue
        if any(np.linalg.norm(point - other) <= defaults.MIRROR_AMBIGUITY for _, other in contenders):
            continue
        contenders.append((residual, point))

    residual, point = _disambiguate(contenders, fixes, extra_fix, hull)
    return PositionEstimate(
        position=Position(float(point[0]), float(point[1])),
        residual=residual,
        method=EstimateMethod.TRIANGULATION,
        epoch=epoch,
        n_fixes=3,
        fix_ids=tuple(f.node_id for f in fixes if f.node_id is not None),
    )


def _disambiguate(
    contenders: List[Tuple[float, np.ndarray]],
    fixes: Sequence[ReferenceFix],
    extra_fix: Optional[ReferenceFix],
    hull: Optional[Sequence[Position]],
) -> Tuple[float, np.ndarray]:
    if len(contenders) == 1:
        return contenders[0]

    with_aoa = [f for f in fixes if f.aoa is not None]
    if with_aoa:

        def bearing_error(point: np.ndarray) -> float:
            p = Position(float(point[0]), float(point[1]))
            total = 0.0
            for f in with_aoa:
                if f.position.distance_to(p) > 0.0:
                    total += abs(angle_diff(bearing_deg(f.position, p), f.aoa))
            return total

        return min(contenders, key=lambda item: (bearing_error(item[1]), item[0]))

    if extra_fix is not None:
        anchor = extra_fix.position.as_array(2)
        return min(
            contenders,
            key=lambda item: (abs(np.linalg.norm(item[1] - anchor) - extra_fix.distance), item[0]),
        )

    triangles = _build_hull(hull)
    inside = [item for item in contenders if _inside_hull(item[1], triangles)]
    if len(inside) == 1:
        return inside[0]
    return min(inside or contenders, key=lambda item: item[0])


def multilaterate(fixes: Sequence[ReferenceFix], *, epoch: float = 0.0) -> PositionEstimate:
    """Linearized least squares refined by Gauss-Newton; 3D when any reference has z != 0"""
    if len(fixes) < 4:
        raise InsufficientDataError(f"multilaterate needs at least 4 fixes, got {len(fixes)}")
    dim = 3 if any(f.position.z != 0.0 for f in fixes) else 2
    refs = np.array([f.position.as_array(dim) for f in fixes])
    distances = np.array([f.distance for f in fixes])

    spread = np.linalg.svd(refs[1:] - refs[0], compute_uv=False)
    if len(spread) < dim or spread[dim - 1] <= defaults.COLLINEAR_EPS * max(1.0, spread[0]):
        raise GeometryError(
            "Reference nodes are " + ("coplanar" if dim == 3 else "collinear")
        )

    point = gauss_newton(_linear_seed(refs, distances), refs, distances)
    return PositionEstimate(
        position=Position.from_array(point),
        residual=_rms_residual(point, refs, distances),
        method=EstimateMethod.MULTILATERATION,
        epoch=epoch,
        n_fixes=len(fixes),
        fix_ids=tuple(f.node_id for f in fixes if f.node_id is not None),
    )


def multilaterate_leave_one_out(fixes: Sequence[ReferenceFix], *, epoch: float = 0.0) -> PositionEstimate:
    """Best of the leave-one-out subsets (needs >= 5 fixes); drops a single outlier"""
    if len(fixes) < 5:
        raise InsufficientDataError("Leave-one-out multilateration needs at least 5 fixes")
    best: Optional[PositionEstimate] = None
    for skip in range(len(fixes)):
        subset = [f for k, f in enumerate(fixes) if k != skip]
        try:
            estimate = multilaterate(subset, epoch=epoch)
        except (GeometryError, ConvergenceError):
            continue
        if best is None or estimate.residual < best.residual:
            best = estimate
    if best is None:
        raise GeometryError("Every leave-one-out subset is degenerate")
    return best


def mean_flight_time(pairs: Sequence[TimestampPair]) -> float:
    """Mean one-way propagation time of a packet batch, in seconds"""
    if not pairs:
        raise InsufficientDataError("mean_flight_time needs at least one (ToD, ToA) pair")
    return math.fsum(toa - tod for tod, toa in pairs) / len(pairs)


def derive_distance_via_origin(t_mn: float, t_mc: float, t_cn: float, speed: float) -> float:
    """s * (T_mn + T_mC - T_Cn) over mean one-way times; negative results clamp to 0"""
    if min(t_mn, t_mc, t_cn) < 0:
        raise LocalizationError("Propagation times must be >= 0")
    distance = speed * (t_mn + t_mc - t_cn)
    if distance < 0.0:
        debug_logger.info(f"Derived distance {distance:.6f} m clamped to 0")
        return 0.0
    return distance


def _range_fixes(
    neighbors: Sequence,
    target_id: int,
    target: Located,
    radio: RadioModel,
    rng: np.random.Generator,
    ranging: Dict,
    forged_offsets: Dict[int, float],
) -> Tuple[List[ReferenceFix], List[RangeMeasurement]]:
    fixes, measurements = [], []
    for node in neighbors:
        try:
            measurement = measure_range(
                node.position,
                target,
                radio,
                rng,
                reference_id=node.id,
                target_id=target_id,
                forged_offset=forged_offsets.get(node.id, 0.0),
                **ranging,
            )
        except OutOfRangeError:
            continue
        measurements.append(measurement)
        if measurement.usable:
            fixes.append(ReferenceFix(node.position, measurement.distance, measurement.aoa, node.id))
    return fixes, measurements


def select_neighbors(
    neighbors: Sequence,
    target_id: int,
    last_known: Position,
    transmission_range: float,
    authenticated: Optional[Callable[[object], bool]] = None,
) -> List:
    """Authenticated, unflagged nodes in range of the last-known position, nearest first (ties by id)"""
    usable = [
        n
        for n in neighbors
        if n.id != target_id
        and not n.flagged
        and (authenticated is None or authenticated(n))
        and n.position.distance_to(last_known) <= transmission_range
    ]
    return sorted(usable, key=lambda n: (n.position.distance_to(last_known), n.id))


def localize_malicious(
    neighbors: Sequence,
    target_id: int,
    target: Located,
    last_known: Position,
    radio: RadioModel,
    rng: np.random.Generator,
    *,
    authenticated: Optional[Callable[[object], bool]] = None,
    ranging: Optional[Dict] = None,
    forged_offsets: Optional[Dict[int, float]] = None,
    residual_limit: float = defaults.RESIDUAL_REMEASURE,
    max_pool: int = 8,
    refine: int = 3,
    epoch: float = 0.0,
) -> PositionEstimate:
    """Multilateration fix of a flagged node from its 4 nearest authenticated neighbours.

    A residual above `residual_limit` triggers a re-measurement with a wider
    pool of neighbours. Every 4-subset of the pool is scored in one batch,
    the `refine` best are solved in full and the lowest residual wins.
    """
    ranging = dict(ranging or {})
    ranging.setdefault("exchange_start", epoch)
    forged_offsets = forged_offsets or {}
    pool = select_neighbors(neighbors, target_id, last_known, radio.transmission_range, authenticated)
    if len(pool) < 4:
        raise InsufficientDataError(f"Only {len(pool)} usable neighbours around node {target_id}")

    fixes, measurements = [], []
    cursor = 0
    while len(fixes) < 4 and cursor < len(pool):
        batch = pool[cursor : cursor + 4 - len(fixes)]
        cursor += len(batch)
        new_fixes, new_measurements = _range_fixes(batch, target_id, target, radio, rng, ranging, forged_offsets)
        fixes.extend(new_fixes)
        measurements.extend(new_measurements)
    if len(fixes) < 4:
        raise InsufficientDataError(f"Only {len(fixes)} neighbours produced a range to node {target_id}")

    estimate = multilaterate(fixes, epoch=epoch)
    estimate.measurements = measurements
    if estimate.residual <= residual_limit:
        return estimate

    debug_logger.info(
        f"Localization: node {target_id} residual {estimate.residual:.3f} m exceeds "
        f"{residual_limit} m, re-measuring with a wider neighbour set"
    )
    wider = pool[: max(max_pool, 5)]
    fixes, more = _range_fixes(wider, target_id, target, radio, rng, ranging, forged_offsets)
    measurements.extend(more)
    best = estimate
    subsets = list(combinations(range(len(fixes)), 4))
    if subsets:
        dim = 3 if any(f.position.z != 0.0 for f in fixes) else 2
        refs = np.array([[fixes[k].position.as_array(dim) for k in s] for s in subsets])
        ranges = np.array([[fixes[k].distance for k in s] for s in subsets])
        scores = _rank_subsets(refs, ranges)
        for index in np.argsort(scores, kind="stable")[:refine]:
            if not np.isfinite(scores[index]):
                break
            try:
                candidate = multilaterate([fixes[k] for k in subsets[index]], epoch=epoch)
            except (GeometryError, ConvergenceError):
                continue
            if candidate.residual < best.residual:
                best = candidate
    best.remeasured = True
    best.measurements = measurements
    return best


def localize_mutual_references(
    references: Sequence,
    radio: RadioModel,
    rng: np.random.Generator,
    *,
    aoa_noise_deg: float = 0.0,
    ranging: Optional[Dict] = None,
    epoch: float = 0.0,
) -> Dict[int, PositionEstimate]:
    """Each of three references placed from the other two by range plus AoA"""
    if len(references) != 3:
        raise InsufficientDataError("Mutual reference localization needs exactly 3 references")
    ranging = dict(ranging or {})
    ranging.setdefault("exchange_start", epoch)
    estimates = {}
    for k, node in enumerate(references):
        first, second = (references[(k + 1) % 3], references[(k + 2) % 3])
        m1 = measure_range(
            first.position, node.position, radio, rng,
            reference_id=first.id, target_id=node.id, aoa_noise_deg=aoa_noise_deg, **ranging,
        )
        m2 = measure_range(
            second.position, node.position, radio, rng,
            reference_id=second.id, target_id=node.id, **ranging,
        )
        if not (m1.usable and m2.usable):
            raise InsufficientDataError(f"Reference {node.id} could not be ranged by its peers")
        candidates = _circle_intersections(first.position, m1.distance, second.position, m2.distance)
        if not candidates:
            candidates = [first.position.offset(m1.distance, m1.aoa)]
        point = min(candidates, key=lambda p: abs(angle_diff(bearing_deg(first.position, p), m1.aoa)))
        refs = np.array([first.position.as_array(2), second.position.as_array(2)])
        residual = _rms_residual(point.as_array(2), refs, np.array([m1.distance, m2.distance]))
        estimates[node.id] = PositionEstimate(
            position=point,
            residual=residual,
            method=EstimateMethod.TRIANGULATION,
            epoch=epoch,
            n_fixes=2,
            fix_ids=(first.id, second.id),
            measurements=[m1, m2],
        )
    return estimates


def _circle_intersections(c1: Position, r1: float, c2: Position, r2: float) -> List[Position]:
    d = c1.distance_to(c2)
    if d == 0.0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1**2 - r2**2 + d**2) / (2 * d)
    h = math.sqrt(max(r1**2 - a**2, 0.0))
    mx = c1.x + a * (c2.x - c1.x) / d
    my = c1.y + a * (c2.y - c1.y) / d
    ox = h * (c2.y - c1.y) / d
    oy = h * (c2.x - c1.x) / d
    return [Position(mx + ox, my - oy), Position(mx - ox, my + oy)]
