"""Token/query producers and the superpoint mask branch.

``produce_tokens`` and ``select_queries`` are deterministic stand-ins for a
trained encoder/decoder: they only need to hand the mask branch tensors of
the right shape that depend on the scene geometry.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import expit

from .flops import DIST_FLOPS, IDW_WEIGHT_FLOPS, SIGMOID_FLOPS
from .geometry import ball_query, fps_sample

TOKEN_POOL_RADIUS = 0.2
TOKEN_POOL_SAMPLES = 8
QUERY_BOX_SIDE = 0.5
# keeps sigmoid outputs strictly inside (0, 1) once logits saturate float64
PROB_EPS = 1e-12
IDW_EPS = 1e-8


def _readonly(*arrays):
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class TokenSet:
    positions: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        feat = np.ascontiguousarray(self.features, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"token positions must be (n, 3) with n >= 1, got {pos.shape}")
        if feat.ndim != 2 or feat.shape[0] != pos.shape[0] or feat.shape[1] < 1:
            raise ValueError(f"token features must be (n, d), got {feat.shape}")
        if not (np.isfinite(pos).all() and np.isfinite(feat).all()):
            raise ValueError("tokens must be finite")
        _readonly(pos, feat)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "features", feat)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class QuerySet:
    """Query embeddings, boxes as (cx, cy, cz, sx, sy, sz), and referring scores."""

    embeddings: np.ndarray
    boxes: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        emb = np.ascontiguousarray(self.embeddings, dtype=np.float64)
        boxes = np.ascontiguousarray(self.boxes, dtype=np.float64)
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        k = emb.shape[0]
        if emb.ndim != 2 or k < 1:
            raise ValueError("need at least one query embedding")
        if boxes.shape != (k, 6) or scores.shape != (k,):
            raise ValueError("boxes must be (k, 6) and scores (k,)")
        if not (boxes[:, 3:] > 0).all():
            raise ValueError("box sizes must be positive")
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        _readonly(emb, boxes, scores)
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "scores", scores)

    @property
    def k(self):
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class Mlp:
    """Two affine layers with a ReLU in between."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __call__(self, x):
        return np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2

    @property
    def d(self):
        return self.w1.shape[0]

    def is_finite(self):
        return all(np.isfinite(a).all() for a in (self.w1, self.b1, self.w2, self.b2))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d), np.eye(d), np.zeros(d))

    @classmethod
    def random(cls, d, rng):
        scale = 1.0 / np.sqrt(d)
        return cls(
            rng.standard_normal((d, d)) * scale,
            rng.standard_normal(d) * 0.1,
            rng.standard_normal((d, d)) * scale,
            rng.standard_normal(d) * 0.1,
        )


@dataclass(frozen=True)
class MlpParams:
    superpoint: Mlp
    query: Mlp

    @classmethod
    def identity(cls, d):
        return cls(Mlp.identity(d), Mlp.identity(d))

    @classmethod
    def random(cls, d, seed=0):
        rng = np.random.default_rng([seed, 2])
        return cls(Mlp.random(d, rng), Mlp.random(d, rng))


@dataclass(frozen=True)
class MaskPrediction:
    """Superpoint mask (m x k) and/or its full-resolution lift (N x k)."""

    superpoint_mask: np.ndarray | None = None
    full_mask: np.ndarray | None = None


@dataclass(frozen=True)
class Referent:
    mask: np.ndarray
    box: np.ndarray
    query_index: int
    score: float


def canonical_start(cloud, seed):
    """Index of the ``seed``-th point in (x, y, z, r, g, b) lexicographic order.

    Starting FPS here instead of at ``seed mod N`` makes the token set
    independent of the order the points arrive in.
    """
    keys = np.column_stack([cloud.positions, cloud.colors])
    order = np.lexsort(keys.T[::-1])
    return int(order[seed % len(cloud)])


def produce_tokens(cloud, n=1024, d=32, seed=0):
    """FPS token positions with max-pooled random-projection features."""
    if n > len(cloud):
        raise ValueError("sample larger than population")
    sel = fps_sample(cloud, n, seed=canonical_start(cloud, seed))
    rng = np.random.default_rng([seed, 0])
    weight = rng.standard_normal((6, d)) / np.sqrt(6.0)
    bias = rng.standard_normal(d) * 0.1
    raw = np.column_stack([cloud.positions, cloud.colors]) @ weight + bias
    centers = cloud.positions[sel]
    idx, _ = ball_query(centers, cloud.positions, TOKEN_POOL_RADIUS, TOKEN_POOL_SAMPLES)
    return TokenSet(centers, raw[idx].max(axis=1))


def top_k(scores, k):
    """Indices of the ``k`` largest scores, descending, ties to the lower index."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")[:k]


def select_queries(tokens, k=256, seed=0):
    if k > tokens.n:
        raise ValueError(f"cannot select {k} queries from {tokens.n} tokens")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng([seed, 1])
    proj = rng.standard_normal(tokens.d) / np.sqrt(tokens.d)
    scores = tokens.features @ proj
    sel = top_k(scores, k)
    centers = tokens.positions[sel]
    sizes = np.full((k, 3), QUERY_BOX_SIDE)
    return QuerySet(tokens.features[sel], np.hstack([centers, sizes]), scores[sel])


def superpoint_embeddings(tokens, partition, radius=0.2, samples=2, counter=None):
    """Max-pool of the ball-queried token features around each superpoint centroid."""
    idx, _ = ball_query(partition.centroids, tokens.positions, radius, samples)
    if counter is not None:
        counter.add("ball_query", DIST_FLOPS * idx.shape[0] * tokens.n)
        counter.add("max_pool", idx.shape[0] * (idx.shape[1] - 1) * tokens.d)
    return tokens.features[idx].max(axis=1)


def _mlp_cost(x, mlp):
    rows = x.shape[0]
    return rows * (2 * mlp.w1.size + 2 * mlp.w2.size + 3 * mlp.w2.shape[1])


def _mask_head(feats, queries, params, counter, row_stage):
    if not (params.superpoint.is_finite() and params.query.is_finite()):
        raise ValueError("non-finite MLP parameters")
    if feats.shape[1] != params.superpoint.d or queries.embeddings.shape[1] != params.query.d:
        raise ValueError("feature dimension does not match MLP parameters")
    left = params.superpoint(feats)
    right = params.query(queries.embeddings)
    if left.shape[1] != right.shape[1]:
        raise ValueError("MLP output widths disagree")
    logits = left @ right.T
    if counter is not None:
        counter.add(row_stage, _mlp_cost(feats, params.superpoint))
        counter.add("mlp_query", _mlp_cost(queries.embeddings, params.query))
        counter.add("logits", 2 * left.shape[1] * logits.size)
        counter.add("sigmoid", SIGMOID_FLOPS * logits.size)
    return np.clip(expit(logits), PROB_EPS, 1.0 - PROB_EPS)


def predict_masks(v_s, queries, params, counter=None):
    """``sigmoid(MLP_s(V_s) @ MLP_q(Q).T)`` -> superpoint mask of shape (m, k)."""
    v_s = np.asarray(v_s, dtype=np.float64)
    return MaskPrediction(superpoint_mask=_mask_head(v_s, queries, params, counter, "mlp_superpoint"))


def upsample_mask(mask, partition, counter=None):
    sp = mask.superpoint_mask
    if sp is None or sp.shape[0] != partition.m:
        raise ValueError("superpoint mask rows do not match the partition")
    if counter is not None:
        counter.add("upsample", 0)
    return MaskPrediction(superpoint_mask=sp, full_mask=sp[partition.labels])


def interpolate_features(tokens, points, neighbors=3):
    """Inverse-distance blend of the nearest tokens; exact copy at zero distance."""
    kk = min(neighbors, tokens.n)
    dist, idx = cKDTree(tokens.positions).query(points, k=kk)
    dist = np.asarray(dist).reshape(len(points), kk)
    idx = np.asarray(idx).reshape(len(points), kk)
    w = 1.0 / (dist + IDW_EPS)
    w /= w.sum(axis=1, keepdims=True)
    feats = np.einsum("nk,nkd->nd", w, tokens.features[idx])
    hit = dist[:, 0] == 0.0
    feats[hit] = tokens.features[idx[hit, 0]]
    return feats


def dense_mask_baseline(tokens, cloud, queries, params, counter=None):
    """Full-resolution masks from interpolated token features (no superpoints)."""
    feats = interpolate_features(tokens, cloud.positions)
    if counter is not None:
        npts = feats.shape[0]
        counter.add("knn", DIST_FLOPS * npts * tokens.n)
        counter.add("interpolate", npts * (IDW_WEIGHT_FLOPS + (2 * min(3, tokens.n) - 1) * tokens.d))
    return MaskPrediction(full_mask=_mask_head(feats, queries, params, counter, "mlp_point"))


def select_referent(mask, queries, threshold=0.5):
    """Pick the highest-scoring query; binarise its full-resolution mask column."""
    if mask.full_mask is None:
        raise ValueError("full_mask is required; call upsample_mask first")
    q = int(np.argmax(queries.scores))
    return Referent(
        mask=mask.full_mask[:, q] >= threshold,
        box=queries.boxes[q].copy(),
        query_index=q,
        score=float(queries.scores[q]),
    )
