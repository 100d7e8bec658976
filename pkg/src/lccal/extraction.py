"""Board-plane extraction from raw LiDAR clouds.

Pipeline: per-point PCA normals -> density clustering with a compound
(distance AND normal-angle) neighborhood -> per-cluster RANSAC plane fit ->
tilt-angle filter against the sensor viewing axis -> selection by the
camera-derived range prior with point density as tie-breaker.

All randomized steps draw from a seeded generator applied after the cloud
has been put into a canonical (lexicographic) order, so results do not
depend on input point order.
"""
from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateNormalError,
    ExtractionError,
    InsufficientPointsError,
    NoPlaneError,
)
from .geometry import Frame, PointCloud


@dataclass(frozen=True)
class ExtractionParams:
    knn_k: int = 20
    dbscan_eps: float = 0.15  # meters
    dbscan_min_pts: int = 10
    normal_angle_merge_deg: float = 10.0
    ransac_threshold: float = 0.02  # meters
    ransac_iterations: int = 500
    theta_deg: float = 45.0  # tilt-angle filter threshold
    reference_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)  # sensor viewing axis
    distance_tolerance: float = 0.3  # meters

    def __post_init__(self):
        if min(self.knn_k, self.dbscan_min_pts, self.ransac_iterations) <= 0:
            raise ValueError("integer parameters must be positive")
        if min(
            self.dbscan_eps,
            self.normal_angle_merge_deg,
            self.ransac_threshold,
            self.distance_tolerance,
        ) <= 0:
            raise ValueError("thresholds must be positive")
        if not (0.0 < self.theta_deg < 90.0):
            raise ValueError("theta_deg must lie in (0, 90)")
        axis = np.asarray(self.reference_axis, dtype=float)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise ValueError("reference_axis must be non-zero")
        object.__setattr__(self, "reference_axis", tuple(axis / n))


@dataclass(frozen=True, eq=False)
class NormalEstimate:
    """Per-point unit normals oriented toward the sensor, plus local density weights."""

    normals: np.ndarray  # (N, 3)
    neighbor_count: np.ndarray  # (N,) neighbors within dbscan_eps


@dataclass(frozen=True, eq=False)
class Cluster:
    members: np.ndarray  # indices into the cloud
    representative_normal: np.ndarray  # unit


@dataclass(frozen=True, eq=False)
class PlaneCandidate:
    """Fitted plane normal . p = offset with its inlier support and priors."""

    normal: np.ndarray
    offset: float
    inliers: np.ndarray  # indices into the cloud
    alpha_deg: float = float("nan")  # tilt angle vs the reference axis
    distance: float = float("nan")  # centroid range from the sensor
    density: int = 0  # = len(inliers)


@dataclass(frozen=True, eq=False)
class BoardSelection:
    candidate: PlaneCandidate
    index: int  # position in the filtered candidate list
    low_confidence: bool  # True when no candidate fell inside the distance window


@dataclass
class ExtractionDiagnostics:
    cluster_count: int = 0
    candidates: list[dict] = field(default_factory=list)
    selected_index: int = -1
    low_confidence: bool = False


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points lexicographically by (x, y, z)."""
    return np.lexsort((points[:, 2], points[:, 1], points[:, 0]))


def estimate_normals(
    cloud: PointCloud, k: int, density_radius: float = 0.15
) -> NormalEstimate:
    """PCA normals over k nearest neighbors, oriented toward the sensor origin.

    neighbor_count holds the number of points within density_radius and is
    later used as the density weight of each point's normal.
    """
    pts = cloud.points
    n = len(pts)
    if k < 3:
        raise ValueError("k must be >= 3")
    if n < k + 1:
        raise InsufficientPointsError(f"need at least {k + 1} points, got {n}")
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k + 1)  # first neighbor is the point itself
    neigh = pts[idx]
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    covs = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(covs)
    normals = vecs[:, :, 0]
    # orient toward the sensor: dot(normal, -p) >= 0
    flip = np.einsum("ij,ij->i", normals, pts) > 0
    normals[flip] *= -1.0
    counts = tree.query_ball_point(pts, r=density_radius, return_length=True)
    return NormalEstimate(normals, np.asarray(counts, dtype=int))


def cluster_points(
    cloud: PointCloud, normals: NormalEstimate, params: ExtractionParams
) -> list[Cluster]:
    """DBSCAN with a compound neighborhood predicate.

    Two points are neighbors iff they are within dbscan_eps of each other AND
    their normals differ by at most normal_angle_merge_deg. Expansion runs in
    canonical point order so clustering is independent of input order.
    """
    pts = cloud.points
    n = len(pts)
    if normals.normals.shape[0] != n:
        raise ValueError("normals were computed for a different cloud")
    tree = cKDTree(pts)
    pairs = tree.query_pairs(r=params.dbscan_eps, output_type="ndarray")
    cos_thresh = np.cos(np.deg2rad(params.normal_angle_merge_deg))
    nrm = normals.normals
    if len(pairs):
        dots = np.einsum("ij,ij->i", nrm[pairs[:, 0]], nrm[pairs[:, 1]])
        pairs = pairs[dots >= cos_thresh]
    # symmetric CSR-style adjacency (self-neighborhood is implicit)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order_adj = np.argsort(src, kind="stable")
    src, dst = src[order_adj], dst[order_adj]
    starts = np.searchsorted(src, np.arange(n))
    ends = np.searchsorted(src, np.arange(n) + 1)
    neighbors = [dst[starts[i] : ends[i]] for i in range(n)]
    core = (ends - starts) >= params.dbscan_min_pts

    order = canonical_order(pts)
    labels = np.full(n, -1, dtype=int)
    visited = np.zeros(n, dtype=bool)
    clusters: list[np.ndarray] = []
    for start in order:
        if visited[start] or not core[start]:
            continue
        cid = len(clusters)
        queue = deque([start])
        visited[start] = True
        labels[start] = cid
        members = [start]
        while queue:
            p = queue.popleft()
            if not core[p]:
                continue
            for q in neighbors[p]:
                if labels[q] == -1:
                    labels[q] = cid
                    members.append(q)
                if not visited[q]:
                    visited[q] = True
                    queue.append(q)
        clusters.append(np.sort(np.asarray(members, dtype=int)))

    out = []
    for members in clusters:
        rep = representative_normal_of(members, normals)
        out.append(Cluster(members, rep))
    return out


def representative_normal_of(
    members: np.ndarray, normals: NormalEstimate
) -> np.ndarray:
    """Density-weighted normalized mean of the member normals."""
    if len(members) == 0:
        raise DegenerateNormalError("empty cluster")
    w = normals.neighbor_count[members].astype(float)
    s = (w[:, None] * normals.normals[members]).sum(axis=0)
    norm = np.linalg.norm(s)
    if norm < 1e-12:
        raise DegenerateNormalError("member normals cancel; no representative direction")
    return s / norm


def representative_normal(cluster: Cluster, normals: NormalEstimate) -> np.ndarray:
    return representative_normal_of(cluster.members, normals)


def _plane_lsq(pts: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares plane through pts: unit normal and offset (normal.p = offset)."""
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    normal = Vt[-1]
    return normal, float(normal @ centroid)


def _inlier_digest(pts: np.ndarray, inliers: np.ndarray) -> bytes:
    key = np.sort(inliers)
    return hashlib.sha1(pts[key].tobytes()).digest()


def fit_plane_ransac(
    cluster: Cluster,
    cloud: PointCloud,
    params: ExtractionParams,
    rng: np.random.Generator | None = None,
) -> PlaneCandidate:
    """RANSAC plane fit over the cluster, refit on inliers.

    The best model maximizes inlier count; ties break on the lower hash of the
    sorted inlier coordinates so the winner does not depend on sample order.
    """
    members = np.asarray(cluster.members, dtype=int)
    if len(members) < 3:
        raise NoPlaneError("cluster has fewer than 3 points")
    pts = cloud.points[members]
    order = canonical_order(pts)
    canon = pts[order]
    if rng is None:
        rng = np.random.default_rng(0)

    scale = float(np.linalg.norm(canon.max(axis=0) - canon.min(axis=0))) or 1.0
    best_count = -1
    best_digest = b"\xff" * 20
    best_mask = None
    best_plane = None
    for _ in range(params.ransac_iterations):
        sample = rng.choice(len(canon), size=3, replace=False)
        a, b, c = canon[sample]
        normal = np.cross(b - a, c - a)
        nn = np.linalg.norm(normal)
        if nn < 1e-9 * scale * scale:
            continue  # collinear sample; resample
        normal = normal / nn
        offset = float(normal @ a)
        dist = np.abs(canon @ normal - offset)
        mask = dist <= params.ransac_threshold
        count = int(mask.sum())
        if count < 3:
            continue
        if count > best_count:
            digest = _inlier_digest(canon, np.flatnonzero(mask))
            best_count, best_digest, best_mask, best_plane = count, digest, mask, (normal, offset)
        elif count == best_count:
            digest = _inlier_digest(canon, np.flatnonzero(mask))
            if digest < best_digest:
                best_digest, best_mask, best_plane = digest, mask, (normal, offset)

    if best_mask is None or best_count < 0.2 * len(canon):
        raise NoPlaneError(
            f"best inlier ratio {max(best_count, 0) / len(canon):.2f} below 20%"
        )

    # refit on inliers, then re-collect so the inlier invariant holds exactly
    normal, offset = best_plane
    for _ in range(2):
        inl = np.flatnonzero(np.abs(canon @ normal - offset) <= params.ransac_threshold)
        if len(inl) < 3:
            break
        normal, offset = _plane_lsq(canon[inl])
    inl = np.flatnonzero(np.abs(canon @ normal - offset) <= params.ransac_threshold)
    inlier_idx = np.sort(members[order[inl]])
    return PlaneCandidate(
        normal=normal, offset=offset, inliers=inlier_idx, density=len(inlier_idx)
    )


def tilt_angle(n: np.ndarray, reference_axis: np.ndarray) -> float:
    """Angle in degrees between a plane normal and the reference axis, in [0, 90]."""
    n = np.asarray(n, dtype=float)
    axis = np.asarray(reference_axis, dtype=float)
    c = abs(float(n @ axis)) / (np.linalg.norm(n) * np.linalg.norm(axis))
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))


def filter_planes(
    candidates: list[PlaneCandidate], params: ExtractionParams
) -> list[PlaneCandidate]:
    """Keep candidates whose tilt angle does not exceed theta_deg; order preserved."""
    return [c for c in candidates if c.alpha_deg <= params.theta_deg]


def plane_distance(candidate: PlaneCandidate, cloud: PointCloud) -> float:
    """Range prior of a candidate: Euclidean norm of its inlier centroid."""
    if len(candidate.inliers) == 0:
        raise ValueError("candidate has no inliers")
    s = cloud.points[candidate.inliers].sum(axis=0)
    return float(np.linalg.norm(s) / len(candidate.inliers))


def select_board_plane(
    filtered: list[PlaneCandidate], l: float, params: ExtractionParams
) -> BoardSelection:
    """Pick the board among filtered candidates using the range prior l.

    Within the distance window, highest density wins (ties to the smaller
    |d - l|). If nothing is inside the window the closest candidate is
    returned flagged low-confidence.
    """
    if not filtered:
        raise ExtractionError("selection", "no candidates to select from")
    gaps = [abs(c.distance - l) for c in filtered]
    in_window = [i for i, g in enumerate(gaps) if g <= params.distance_tolerance]
    if in_window:
        best = max(in_window, key=lambda i: (filtered[i].density, -gaps[i]))
        return BoardSelection(filtered[best], best, False)
    best = int(np.argmin(gaps))
    return BoardSelection(filtered[best], best, True)


def build_candidates(
    cloud: PointCloud,
    clusters: list[Cluster],
    params: ExtractionParams,
    rng: np.random.Generator,
) -> list[PlaneCandidate]:
    """RANSAC each cluster and annotate tilt angle, range and density."""
    axis = np.asarray(params.reference_axis)
    out = []
    for cluster in clusters:
        try:
            cand = fit_plane_ransac(cluster, cloud, params, rng)
        except NoPlaneError:
            continue
        cand = replace(
            cand,
            alpha_deg=tilt_angle(cand.normal, axis),
            distance=plane_distance(cand, cloud),
        )
        out.append(cand)
    return out


def extract_board_points(
    cloud: PointCloud,
    l: float,
    params: ExtractionParams,
    seed: int = 0,
    diagnostics: ExtractionDiagnostics | None = None,
) -> PointCloud:
    """Full extraction pipeline; returns the selected plane's inlier points.

    Raises ExtractionError tagged with the stage at which the pipeline ran dry,
    including when no filtered candidate lies within the distance window of l.
    """
    if len(cloud) == 0:
        raise ExtractionError("input", "empty cloud")
    diag = diagnostics if diagnostics is not None else ExtractionDiagnostics()
    normals = estimate_normals(cloud, params.knn_k, params.dbscan_eps)
    clusters = cluster_points(cloud, normals, params)
    diag.cluster_count = len(clusters)
    if not clusters:
        raise ExtractionError("clustering", "no clusters above min_pts density")
    rng = np.random.default_rng(seed)
    candidates = build_candidates(cloud, clusters, params, rng)
    if not candidates:
        raise ExtractionError("plane_fit", "no cluster yielded a supported plane")
    filtered = filter_planes(candidates, params)
    diag.candidates = [
        {
            "alpha_deg": c.alpha_deg,
            "distance_m": c.distance,
            "density": c.density,
            "passed_angle_filter": c.alpha_deg <= params.theta_deg,
        }
        for c in candidates
    ]
    if not filtered:
        raise ExtractionError("angle_filter", "all candidates exceeded theta")
    selection = select_board_plane(filtered, l, params)
    diag.low_confidence = selection.low_confidence
    if selection.low_confidence:
        raise ExtractionError(
            "selection",
            f"no candidate within {params.distance_tolerance} m of the range prior "
            f"l = {l:.3f} m (closest at {selection.candidate.distance:.3f} m)",
        )
    diag.selected_index = next(
        i for i, c in enumerate(candidates) if c is selection.candidate
    )
    return PointCloud(cloud.points[selection.candidate.inliers], cloud.frame)
