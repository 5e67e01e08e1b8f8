"""Material identification from reconstructed property maps.

A reconstructed scene is a cloud of (eps_r, sigma) points, one per pixel,
dominated by background pixels near air. The cloud is whitened by the
inverse square root of its own sample covariance, which puts the two very
differently scaled properties on equal footing, and split into two clusters
in the whitened plane. The cluster closer to air is discarded; the other
cluster's centroid is matched against the material database under the same
whitening (a Mahalanobis nearest-record rule).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .scene import MaterialRecord

logger = logging.getLogger(__name__)

# Property-plane coordinates of the background medium.
AIR_POINT = np.array([1.0, 0.0])

# Relative ridge added to the sample covariance before inversion.
COV_RIDGE = 1.0e-8

_KMEANS_MAX_ITER = 100


def whitening_transform(points: np.ndarray) -> np.ndarray:
    """Inverse square root of the sample covariance of a 2D point cloud.

    A ridge of ``COV_RIDGE * (trace/2)`` keeps near-degenerate clouds
    invertible; a cloud with zero spread maps to the identity transform.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError(f"expected an (n, 2) point cloud, got shape {pts.shape}")
    if pts.shape[0] < 2:
        return np.eye(2)
    cov = np.cov(pts, rowvar=False)
    scale = float(np.trace(cov)) / 2.0
    if scale == 0.0:
        return np.eye(2)
    cov = cov + COV_RIDGE * scale * np.eye(2)
    lam, q = np.linalg.eigh(cov)
    return (q / np.sqrt(lam)[np.newaxis, :]) @ q.T


@dataclass
class ClusterResult:
    """Air/target split of a property point cloud.

    Attributes
    ----------
    labels : np.ndarray
        (n,) integer labels, 0 for the air cluster and 1 for the target.
    centroid_air : np.ndarray
        Air-cluster centroid in raw (eps_r, sigma) coordinates.
    centroid_target : np.ndarray | None
        Target-cluster centroid, or ``None`` when the cloud is degenerate
        (constant input: everything is labeled air).
    whitening : np.ndarray
        (2, 2) whitening transform estimated from the cloud; reused for
        database matching.
    n_iter : int
        Lloyd iterations until the assignment fixed point.
    degenerate : bool
        True when no target cluster could be formed.
    """

    labels: np.ndarray = field(repr=False)
    centroid_air: np.ndarray
    centroid_target: np.ndarray | None
    whitening: np.ndarray
    n_iter: int
    degenerate: bool


def whitened_kmeans2(points: np.ndarray, rng_seed: int = 0) -> ClusterResult:
    """Two-means clustering of property points in the whitened plane.

    Initialization is deterministic: one centroid starts at air, the other
    at the point farthest from air in whitened distance, so the result does
    not depend on ``rng_seed`` (the parameter is accepted for interface
    stability). The cluster whose final centroid lies closer to air is
    reported as background.
    """
    del rng_seed  # deterministic initialization; kept for API stability
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError(f"expected an (n, 2) point cloud, got shape {pts.shape}")
    n = pts.shape[0]
    if n == 0:
        raise ConfigError("cannot cluster an empty point cloud")

    wt = whitening_transform(pts)
    white = pts @ wt.T
    air_w = AIR_POINT @ wt.T

    d_air = np.linalg.norm(white - air_w, axis=1)
    if float(d_air.max()) == float(d_air.min()):
        # Constant cloud: no second cluster exists.
        labels = np.zeros(n, dtype=int)
        return ClusterResult(
            labels=labels,
            centroid_air=pts.mean(axis=0),
            centroid_target=None,
            whitening=wt,
            n_iter=0,
            degenerate=True,
        )

    centers = np.vstack([air_w, white[int(np.argmax(d_air))]])
    labels = np.zeros(n, dtype=int)
    n_iter = 0
    for it in range(_KMEANS_MAX_ITER):
        n_iter = it + 1
        d0 = np.linalg.norm(white - centers[0], axis=1)
        d1 = np.linalg.norm(white - centers[1], axis=1)
        new_labels = (d1 < d0).astype(int)
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        if not labels.any() or labels.all():
            # One cluster swallowed everything; treat as degenerate.
            return ClusterResult(
                labels=np.zeros(n, dtype=int),
                centroid_air=pts.mean(axis=0),
                centroid_target=None,
                whitening=wt,
                n_iter=n_iter,
                degenerate=True,
            )
        centers = np.vstack([white[labels == 0].mean(axis=0), white[labels == 1].mean(axis=0)])

    # Report the cluster nearer to air as background.
    if np.linalg.norm(centers[1] - air_w) < np.linalg.norm(centers[0] - air_w):
        labels = 1 - labels
    raw_air = pts[labels == 0].mean(axis=0)
    raw_target = pts[labels == 1].mean(axis=0)
    return ClusterResult(
        labels=labels,
        centroid_air=raw_air,
        centroid_target=raw_target,
        whitening=wt,
        n_iter=n_iter,
        degenerate=False,
    )


def classify_material(
    centroid_target: np.ndarray | None,
    database: list[MaterialRecord],
    whitening: np.ndarray,
) -> tuple[str | None, float]:
    """Nearest material record to a target centroid in whitened distance.

    Returns ``(name, distance)``; ties resolve to the lowest-index record.
    A ``None`` centroid (degenerate clustering) yields ``(None, inf)``, the
    explicit no-target outcome.
    """
    if not database:
        raise ConfigError("material database is empty")
    if centroid_target is None:
        return None, np.inf
    c = np.asarray(centroid_target, dtype=float).ravel()
    if c.shape != (2,):
        raise ConfigError(f"centroid must be a 2-vector, got shape {c.shape}")
    wt = np.asarray(whitening, dtype=float)
    if wt.shape != (2, 2):
        raise ConfigError(f"whitening must be 2x2, got shape {wt.shape}")

    best_name = None
    best_dist = np.inf
    for rec in database:
        delta = wt @ (c - np.array([rec.eps_r, rec.sigma]))
        dist = float(np.linalg.norm(delta))
        if dist < best_dist:
            best_dist = dist
            best_name = rec.name
    return best_name, best_dist
