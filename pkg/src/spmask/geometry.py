"""Point-cloud container, k-NN graph, normals, ball query, and FPS."""
from dataclasses import dataclass
import logging

import numpy as np
from scipy.spatial import cKDTree

from . import kernels

log = logging.getLogger(__name__)

# sign-rule components this close to zero count as zero
_SIGN_EPS = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """N points with positions in meters, colors in [0, 1], optional unit normals."""

    positions: np.ndarray
    colors: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (N, 3), got {pos.shape}")
        if pos.shape[0] == 0:
            raise ValueError("empty input")
        if not np.isfinite(pos).all():
            raise ValueError("invalid coordinate")
        col = self.colors
        col = np.zeros_like(pos) if col is None else np.ascontiguousarray(col, dtype=np.float64)
        if col.shape != pos.shape:
            raise ValueError(f"colors must have shape {pos.shape}, got {col.shape}")
        if not np.isfinite(col).all() or col.min() < 0.0 or col.max() > 1.0:
            raise ValueError("colors must lie in [0, 1]")
        nrm = self.normals
        if nrm is not None:
            nrm = np.ascontiguousarray(nrm, dtype=np.float64)
            if nrm.shape != pos.shape:
                raise ValueError(f"normals must have shape {pos.shape}, got {nrm.shape}")
            if np.abs(np.linalg.norm(nrm, axis=1) - 1.0).max() > 1e-6:
                raise ValueError("normals must be unit vectors")
            nrm.flags.writeable = False
        pos.flags.writeable = False
        col.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        object.__setattr__(self, "normals", nrm)

    def __len__(self):
        return self.positions.shape[0]

    def with_normals(self, normals):
        return PointCloud(self.positions, self.colors, normals)

    def permuted(self, perm):
        nrm = None if self.normals is None else self.normals[perm]
        return PointCloud(self.positions[perm], self.colors[perm], nrm)


@dataclass(frozen=True)
class NeighborGraph:
    """Per-point k nearest neighbors, sorted by (squared distance, index).

    Row ``i`` of ``indices``/``sq_dists`` is the adjacency list of point ``i``;
    every row has exactly ``min(k_nn, N - 1)`` entries and never contains ``i``.
    """

    indices: np.ndarray
    sq_dists: np.ndarray
    k_nn: int

    def __len__(self):
        return self.indices.shape[0]

    def edges(self):
        """Undirected edge list ``(i, j)`` with ``i < j``, deduplicated, row-major order."""
        n, k = self.indices.shape
        src = np.repeat(np.arange(n, dtype=np.int64), k)
        dst = self.indices.ravel()
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
        return pairs[:, 0], pairs[:, 1]


def _exact_row(pos, tree, i, k, radius2):
    cand = tree.query_ball_point(pos[i], np.sqrt(radius2) * (1 + 1e-9))
    cand = np.asarray(cand, dtype=np.int64)
    cand = cand[cand != i]
    d = pos[cand] - pos[i]
    d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    order = np.lexsort((cand, d2))[:k]
    return cand[order], d2[order]


def build_knn_graph(cloud, k_nn):
    """Exact k-NN graph with ties broken by lower index.

    A k-d tree proposes ``k + 2`` candidates per point. Rows where the k-th
    kept distance is not strictly below the farthest proposed one (a tie may
    have been cut off) are redone with an exact radius search.
    """
    if k_nn < 1:
        raise ValueError("k_nn must be >= 1")
    pos = cloud.positions
    n = pos.shape[0]
    if n == 0:
        raise ValueError("empty input")
    k = min(k_nn, n - 1)
    if k == 0:
        return NeighborGraph(np.empty((n, 0), np.int64), np.empty((n, 0)), k_nn)

    tree = cKDTree(pos)
    kq = min(k + 2, n)
    _, cand = tree.query(pos, k=kq)
    cand = np.asarray(cand, dtype=np.int64).reshape(n, kq)
    d = pos[cand] - pos[:, None, :]
    d2 = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1] + d[..., 2] * d[..., 2]
    farthest = d2.max(axis=1)
    rows = np.repeat(np.arange(n), kq).reshape(n, kq)
    d2_key = np.where(cand == rows, np.inf, d2)
    order = np.lexsort((cand.ravel(), d2_key.ravel(), rows.ravel())).reshape(n, kq)
    idx = cand.ravel()[order][:, :k].copy()
    sq = d2.ravel()[order][:, :k].copy()
    if kq < n:
        suspect = ~(sq[:, -1] < farthest * (1.0 - 1e-9))
        for i in np.flatnonzero(suspect):
            idx[i], sq[i] = _exact_row(pos, tree, i, k, max(sq[i, -1], farthest[i]))
    idx.flags.writeable = False
    sq.flags.writeable = False
    return NeighborGraph(idx, sq, k_nn)


def _fix_sign(normals):
    out = normals.copy()
    out[np.abs(out) < _SIGN_EPS] = 0.0
    x, y, z = out[:, 0], out[:, 1], out[:, 2]
    flip = (z < 0) | ((z == 0) & (y < 0)) | ((z == 0) & (y == 0) & (x < 0))
    out[flip] *= -1.0
    return out


def estimate_normals(cloud, graph, return_degenerate=False):
    """Unit normals from the smallest-eigenvalue eigenvector of each neighborhood.

    The neighborhood of point ``i`` is ``i`` plus its graph neighbors. Signs are
    fixed so z >= 0 (then y, then x as tie-breakers). Neighborhoods whose points
    all coincide get (0, 0, 1); pass ``return_degenerate=True`` to also get the
    boolean mask of those points.
    """
    pos = cloud.positions
    n = pos.shape[0]
    if len(graph) != n:
        raise ValueError("graph was built over a different cloud")
    nbr = np.concatenate([np.arange(n)[:, None], graph.indices], axis=1)
    pts = pos[nbr]
    centered = pts - pts.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / nbr.shape[1]
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    spread = np.abs(centered).max(axis=(1, 2))
    degenerate = spread == 0.0
    normals = _fix_sign(normals)
    normals[degenerate] = (0.0, 0.0, 1.0)
    if degenerate.any():
        log.warning("%d degenerate neighborhoods; normal set to +z", int(degenerate.sum()))
    if return_degenerate:
        return normals, degenerate
    return normals


def ball_query(centers, ref_positions, radius, samples):
    """Up to ``samples`` reference indices strictly within ``radius`` of each center.

    Returns ``(index_table, fallback)``. Indices are ordered by distance, ties
    by lower index. Short rows repeat their nearest in-radius index; rows with
    nothing in radius are filled with the globally nearest reference and flagged
    in ``fallback``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    refs = np.ascontiguousarray(ref_positions, dtype=np.float64).reshape(-1, 3)
    if refs.shape[0] == 0:
        raise ValueError("no reference points")
    ctr = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
    return kernels.ball_query(ctr, refs, float(radius), int(samples))


def fps_sample(cloud, n, seed=0):
    """Farthest point sampling starting at index ``seed mod N``; ties go to the lower index."""
    npts = len(cloud)
    if n > npts:
        raise ValueError("sample larger than population")
    if n < 1:
        raise ValueError("n must be >= 1")
    return kernels.fps(cloud.positions, int(n), int(seed) % npts)
