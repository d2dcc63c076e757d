"""Superpoint generation by graph-based oversegmentation.

The point -> superpoint label array produced here is the mapping used to
lift superpoint-level masks back to full resolution.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import build_knn_graph, estimate_normals


@dataclass(frozen=True)
class OversegmentParams:
    k_nn: int = 8
    merge_threshold: float = 0.05
    min_segment_size: int = 20
    use_color: bool = False
    color_weight: float = 1.0

    def __post_init__(self):
        if self.k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        if not self.merge_threshold > 0:
            raise ValueError("merge_threshold must be > 0")
        if self.min_segment_size < 1:
            raise ValueError("min_segment_size must be >= 1")
        if self.color_weight < 0:
            raise ValueError("color_weight must be >= 0")


@dataclass(frozen=True)
class SuperpointPartition:
    """Per-point labels in ``[0, m)`` plus per-segment sizes and centroids."""

    labels: np.ndarray
    segment_sizes: np.ndarray
    centroids: np.ndarray

    @property
    def m(self):
        return self.segment_sizes.shape[0]

    def __len__(self):
        return self.labels.shape[0]

    @classmethod
    def from_labels(cls, labels, positions):
        """Build from raw labels; renumbers them by first occurrence."""
        labels = _first_occurrence_labels(np.asarray(labels))
        pos = np.asarray(positions, dtype=np.float64)
        if pos.shape != (labels.shape[0], 3):
            raise ValueError("positions do not match labels")
        m = int(labels.max()) + 1 if labels.size else 0
        sizes = np.bincount(labels, minlength=m)
        sums = np.zeros((m, 3))
        np.add.at(sums, labels, pos)
        centroids = sums / sizes[:, None]
        for arr in (labels, sizes, centroids):
            arr.flags.writeable = False
        return cls(labels, sizes, centroids)


def _first_occurrence_labels(labels):
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        return labels.astype(np.int64)
    uniq, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(uniq.shape[0], dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(uniq.shape[0])
    return rank[inverse.ravel()]


def compactify(partition):
    """Renumber labels to ``[0, m)`` in first-occurrence order. Idempotent."""
    labels = _first_occurrence_labels(partition.labels)
    m = int(labels.max()) + 1 if labels.size else 0
    sizes = np.bincount(labels, minlength=m)
    # centroids move with their segment; keep the ones already computed
    old_for_new = np.empty(m, dtype=np.int64)
    old_for_new[labels] = partition.labels
    centroids = np.asarray(partition.centroids)[old_for_new]
    for arr in (labels, sizes, centroids):
        arr.flags.writeable = False
    return SuperpointPartition(labels, sizes, centroids)


def edge_weights(cloud, ei, ej, params):
    """Dissimilarity ``(1 - n_i . n_j) + color_weight * |c_i - c_j|`` per edge."""
    nrm = cloud.normals
    w = 1.0 - np.einsum("ij,ij->i", nrm[ei], nrm[ej])
    if params.use_color:
        w = w + params.color_weight * np.linalg.norm(cloud.colors[ei] - cloud.colors[ej], axis=1)
    return w


def sorted_edges(cloud, graph, params):
    """Undirected k-NN edges sorted by (weight, i, j)."""
    ei, ej = graph.edges()
    w = edge_weights(cloud, ei, ej, params)
    order = np.lexsort((ej, ei, w))
    return ei[order], ej[order], w[order]


def oversegment(cloud, params=None, graph=None):
    """Felzenszwalb-Huttenlocher segmentation of the k-NN graph.

    Normals are estimated when the cloud has none. Components smaller than
    ``min_segment_size`` are absorbed along their cheapest remaining edge.
    """
    params = params or OversegmentParams()
    if graph is None:
        graph = build_knn_graph(cloud, params.k_nn)
    elif len(graph) != len(cloud):
        raise ValueError("graph was built over a different cloud")
    if cloud.normals is None:
        cloud = cloud.with_normals(estimate_normals(cloud, graph))
    ei, ej, w = sorted_edges(cloud, graph, params)
    roots = kernels.fh_segment(
        len(cloud), ei, ej, w, float(params.merge_threshold), int(params.min_segment_size)
    )
    return SuperpointPartition.from_labels(roots, cloud.positions)
