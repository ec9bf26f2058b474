"""Geometry and topology of a set of policy vectors.

k-nearest-neighbour graphs, graph geodesics, classical MDS, the residual
variance curve used to read off intrinsic dimension, and chart detection as
connected components of the neighbour graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

log = logging.getLogger(__name__)

ZERO_EDGE_WEIGHT = 1e-12


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.shape[0] < 2:
            raise ValueError("a point cloud needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud has non-finite coordinates")
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape[0] != pts.shape[0]:
                raise ValueError("one label per point required")
            object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric sparse graph; an edge weight is the Euclidean length (>0)."""

    adjacency: csr_matrix
    k: int

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)


@dataclass
class Embedding:
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    requested_dim: int
    truncated: bool = False
    residual_variance: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.coordinates.shape[1]


@dataclass
class ChartAssignment:
    num_charts: int
    chart_of: np.ndarray
    chart_sizes: np.ndarray
    k_used: int
    fallback: bool = False
    merged_points: int = 0

    def members(self, chart: int) -> np.ndarray:
        return np.flatnonzero(self.chart_of == chart)


def knn_graph(cloud: PointCloud | np.ndarray, k: int) -> NeighborGraph:
    """Connect every point to its ``k`` nearest neighbours (ties by lower index)."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    m = pts.shape[0]
    if not 1 <= k < m:
        raise ValueError(f"k must satisfy 1 <= k < {m}, got {k}")
    dist = cdist(pts, pts)
    np.fill_diagonal(dist, np.inf)
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(m), k)
    cols = nbrs.ravel()
    w = np.maximum(dist[rows, cols], ZERO_EDGE_WEIGHT)
    dense = np.zeros((m, m))
    dense[rows, cols] = w
    dense[cols, rows] = w
    return NeighborGraph(csr_matrix(dense), k)


def geodesic_distances(graph: NeighborGraph) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest paths by one heap Dijkstra per source.

    Returns (distances, component_labels); pairs in different components are inf.
    """
    n_comp, labels = connected_components(graph.adjacency, directed=False)
    dist = dijkstra(graph.adjacency, directed=False)
    np.fill_diagonal(dist, 0.0)
    return dist, labels


def classical_mds(distances, d: int) -> Embedding:
    """Embed a finite distance matrix in ``d`` dimensions.

    Double-centres ``-0.5 * D**2`` and keeps the top eigenpairs; negative
    eigenvalues are treated as zero. If fewer than ``d`` eigenvalues are
    positive, the achievable dimension is returned with ``truncated=True``.
    """
    dmat = np.asarray(distances, dtype=float)
    if dmat.ndim != 2 or dmat.shape[0] != dmat.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.all(np.isfinite(dmat)):
        raise ValueError("distance matrix must be finite (one connected component)")
    if d < 1:
        raise ValueError("target dimension must be >= 1")
    m = dmat.shape[0]
    sq = dmat**2
    gram = -0.5 * (sq - sq.mean(axis=0) - sq.mean(axis=1)[:, None] + sq.mean())
    gram = 0.5 * (gram + gram.T)
    vals, vecs = np.linalg.eigh(gram)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    tol = max(m, 1) * np.finfo(float).eps * max(abs(vals[0]), 1.0)
    n_pos = int(np.sum(vals > tol))
    use = min(d, n_pos)
    # deterministic sign: largest-magnitude entry of each eigenvector is positive
    vecs = vecs[:, :use]
    if use:
        pivots = np.argmax(np.abs(vecs), axis=0)
        vecs = vecs * np.sign(vecs[pivots, np.arange(use)])
    coords = vecs * np.sqrt(np.maximum(vals[:use], 0.0))
    return Embedding(coords, np.maximum(vals[:max(use, 1)], 0.0)[:use], d, truncated=use < d)


def _upper(dmat: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(dmat.shape[0], 1)
    return dmat[iu]


def residual_variance(geodesic, embeddings) -> np.ndarray:
    """1 - rho**2 between geodesic and embedded distances, one entry per embedding."""
    g = _upper(np.asarray(geodesic, dtype=float))
    out = []
    for emb in embeddings:
        coords = emb.coordinates if isinstance(emb, Embedding) else np.asarray(emb, dtype=float)
        e = _upper(cdist(coords, coords)) if coords.shape[1] else np.zeros_like(g)
        if np.ptp(g) == 0.0 or np.ptp(e) == 0.0:
            # constant distances carry no structure to explain
            out.append(0.0)
            continue
        rho = np.corrcoef(g, e)[0, 1]
        out.append(float(min(max(1.0 - rho * rho, 0.0), 1.0)))
    return np.minimum.accumulate(np.array(out))


def isomap(points, k: int, max_dim: int) -> Embedding:
    """ISOMAP of one connected set of points with the residual curve for d = 1..max_dim."""
    pts = np.asarray(points, dtype=float)
    k = min(k, pts.shape[0] - 1)
    geo, labels = geodesic_distances(knn_graph(pts, k))
    if labels.max() > 0:
        raise ValueError("isomap needs a connected neighbour graph; raise k or split into charts")
    full = classical_mds(geo, max_dim)
    curve = residual_variance(geo, [full.coordinates[:, :d] for d in range(1, full.dim + 1)])
    # unreachable dimensions add nothing over the last achievable one
    if curve.size < max_dim:
        curve = np.concatenate((curve, np.full(max_dim - curve.size, curve[-1] if curve.size else 0.0)))
    full.residual_variance = curve
    return full


def estimate_dimension(curve, threshold: float = 0.1, min_drop: float = 0.02) -> int:
    """Elbow of a residual-variance curve indexed from d = 1.

    The smallest d whose residual is below ``threshold``; failing that, the
    smallest d after which one more dimension lowers the residual by less
    than ``min_drop``.
    """
    r = np.asarray(curve, dtype=float)
    if r.size == 0:
        raise ValueError("empty residual curve")
    for d in range(1, r.size + 1):
        if r[d - 1] < threshold:
            return d
        if d < r.size and r[d - 1] - r[d] < min_drop:
            return d
    return int(r.size)


def _components(pts: np.ndarray, k: int) -> np.ndarray:
    return connected_components(knn_graph(pts, k).adjacency, directed=False)[1]


def _fragmented(labels: np.ndarray) -> bool:
    counts = np.bincount(labels)
    return counts.max() < 0.6 * labels.size and counts.size >= 3


def detect_charts(cloud: PointCloud | np.ndarray, k: int = 7, min_chart_size: int = 3,
                  adaptive: bool = True, k_max: int = 15, k_step: int = 2) -> ChartAssignment:
    """Charts as connected components of the k-NN graph.

    Components smaller than ``min_chart_size`` join the large component they
    are closest to (minimum point-to-point distance). When ``adaptive`` is
    set and the graph looks fragmented (largest component under 60% of the
    points, three or more components), k grows by ``k_step`` up to ``k_max``.
    Charts are numbered 1..D in order of their lowest point index.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    m = pts.shape[0]
    if not 1 <= k < m:
        raise ValueError(f"k must satisfy 1 <= k < {m}, got {k}")
    if min_chart_size < 1:
        raise ValueError("min_chart_size must be >= 1")
    labels = _components(pts, k)
    while adaptive and _fragmented(labels) and k + k_step <= min(k_max, m - 1):
        k += k_step
        labels = _components(pts, k)
        log.info("neighbour graph fragmented; retrying with k=%d", k)
    counts = np.bincount(labels)
    large = np.flatnonzero(counts >= min_chart_size)
    fallback = False
    merged = 0
    if large.size == 0:
        log.warning("no component reaches min_chart_size=%d; using one chart", min_chart_size)
        labels = np.zeros(m, dtype=int)
        fallback = True
    else:
        dist = cdist(pts, pts)
        big_mask = np.isin(labels, large)
        for comp in np.flatnonzero(counts < min_chart_size):
            idx = np.flatnonzero(labels == comp)
            sub = dist[np.ix_(idx, np.flatnonzero(big_mask))]
            target = labels[np.flatnonzero(big_mask)[np.unravel_index(np.argmin(sub), sub.shape)[1]]]
            labels[idx] = target
            merged += idx.size
    # dense 1..D numbering by first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = {int(labels[first[o]]): i + 1 for i, o in enumerate(order)}
    chart_of = np.array([remap[int(v)] for v in labels], dtype=int)
    sizes = np.bincount(chart_of)[1:]
    return ChartAssignment(len(sizes), chart_of, sizes, k, fallback, merged)


def chart_dimensions(points, assignment: ChartAssignment, k: int | None = None,
                     max_dim: int = 6, threshold: float = 0.1,
                     min_drop: float = 0.02) -> list[dict]:
    """Residual curve and elbow estimate for every chart with enough points."""
    pts = np.asarray(points, dtype=float)
    out = []
    for c in range(1, assignment.num_charts + 1):
        idx = assignment.members(c)
        rec = {"chart": c, "size": int(idx.size), "residual_variance": None, "dimension": None}
        if idx.size >= 3:
            kk = k or assignment.k_used
            kk = min(kk, idx.size - 1)
            sub = pts[idx]
            while kk < idx.size - 1 and _components(sub, kk).max() > 0:
                kk += 1
            emb = isomap(sub, kk, min(max_dim, idx.size - 1))
            rec["residual_variance"] = [float(v) for v in emb.residual_variance]
            rec["dimension"] = estimate_dimension(emb.residual_variance, threshold, min_drop)
            rec["k"] = kk
        out.append(rec)
    return out


def save_matrix(path, matrix) -> None:
    """Comma-separated rows at full round-trip precision."""
    np.savetxt(path, np.atleast_2d(np.asarray(matrix, dtype=float)), delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", dtype=float))


def save_assignment(path, assignment: ChartAssignment) -> None:
    with open(path, "w") as fh:
        fh.write("point,chart\n")
        for i, c in enumerate(assignment.chart_of):
            fh.write(f"{i},{int(c)}\n")


def load_assignment(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=int, ndmin=2)
    chart_of = np.empty(data.shape[0], dtype=int)
    chart_of[data[:, 0]] = data[:, 1]
    return chart_of
