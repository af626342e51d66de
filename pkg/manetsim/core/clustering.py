"""Seeded geographic cluster formation.

Non-normative stand-in: nodes are grouped by k-means over positions, with
equidistant nodes going to the cluster whose members are most similar in
mobility, residual energy and connection degree.
"""

import math
import warnings
from typing import Optional, Tuple

import numpy as np
from scipy.cluster.vq import kmeans2

from .config import debug_logger
from .errors import InsufficientDataError
from .geometry import Position

MAX_ITERATIONS = 25
TIE_EPS = 1e-9


def form_clusters(
    positions: np.ndarray,
    n_clusters: int,
    rng: np.random.Generator,
    previous_centroids: Optional[np.ndarray] = None,
    attributes: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Assign each row of `positions` (n x 2) to one of `n_clusters` clusters.

    Returns (labels, centroids). `attributes` (n x m) are the similarity
    features used only to break distance ties. Warm-starts from
    `previous_centroids` so membership is stable across epochs.
    """
    n = len(positions)
    if n < n_clusters:
        raise InsufficientDataError(f"{n} nodes cannot form {n_clusters} clusters")
    data = np.asarray(positions, dtype=float)
    if previous_centroids is not None and len(previous_centroids) == n_clusters:
        initial = np.array(previous_centroids, dtype=float)
    else:
        initial = data[np.sort(rng.choice(n, size=n_clusters, replace=False))]

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        centroids, labels = kmeans2(data, initial, iter=MAX_ITERATIONS, minit="matrix", missing="warn")
    if caught:
        debug_logger.info(f"Clustering: {caught[0].message}")
    if attributes is not None:
        labels = _break_ties(data, centroids, labels, attributes)
    return labels, centroids


def _break_ties(
    positions: np.ndarray,
    centroids: np.ndarray,
    labels: np.ndarray,
    attributes: np.ndarray,
) -> np.ndarray:
    distances = np.linalg.norm(positions[:, None, :] - centroids[None, :, :], axis=2)
    best = distances[np.arange(len(positions)), labels]
    tied_rows = np.flatnonzero(np.sum(distances <= best[:, None] + TIE_EPS, axis=1) > 1)
    if len(tied_rows) == 0:
        return labels
    labels = labels.copy()
    profile = _cluster_profiles(attributes, labels, len(centroids))
    for i in tied_rows:
        tied = np.flatnonzero(distances[i] <= best[i] + TIE_EPS)
        gaps = np.linalg.norm(profile[tied] - attributes[i], axis=1)
        labels[i] = tied[int(np.argmin(gaps))]
    return labels


def _cluster_profiles(attributes: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    profile = np.zeros((k, attributes.shape[1]))
    for c in range(k):
        members = attributes[labels == c]
        if len(members):
            profile[c] = members.mean(axis=0)
    return profile


def hop_count(node_position: Position, cluster_centroid: Position, transmission_range: float) -> int:
    """Hops from the cluster centroid: ceil(distance / transmission range)"""
    return math.ceil(node_position.distance_to(cluster_centroid) / transmission_range)
