"""Floating-point operation accounting for the two mask branches.

Conventions (per scalar op): a squared 3D distance costs 8 (3 sub, 3 mul,
2 add); neighbour searches are costed as exhaustive scans so the count does
not depend on the spatial index; a two-layer MLP over ``r`` rows of width
``d`` costs ``r * (4 d^2 + 3 d)`` (two matmuls, two bias adds, one ReLU); a
sigmoid costs 4. Gathers (max-pool index lookups, label upsampling) are free
apart from the comparisons they imply.
"""
from collections import OrderedDict

DIST_FLOPS = 8
SIGMOID_FLOPS = 4
# per point: 3 sqrt, 3 eps-adds, 3 reciprocals, 2 sums, 3 normalising divides
IDW_WEIGHT_FLOPS = 14


class FlopCounter:
    """Accumulates op counts per stage as the instrumented code runs."""

    def __init__(self):
        self.stages = OrderedDict()

    def add(self, stage, count):
        self.stages[stage] = self.stages.get(stage, 0) + int(count)

    @property
    def total(self):
        return sum(self.stages.values())

    def __repr__(self):
        return f"FlopCounter(total={self.total}, stages={dict(self.stages)})"


def mlp_flops(rows, d):
    return rows * (4 * d * d + 3 * d)


def superpoint_branch_flops(m, n, d, k, samples):
    """Superpoint query + mask prediction + upsampling, staged."""
    return OrderedDict(
        [
            ("ball_query", DIST_FLOPS * m * n),
            ("max_pool", m * (samples - 1) * d),
            ("mlp_superpoint", mlp_flops(m, d)),
            ("mlp_query", mlp_flops(k, d)),
            ("logits", 2 * d * m * k),
            ("sigmoid", SIGMOID_FLOPS * m * k),
            ("upsample", 0),
        ]
    )


def dense_branch_flops(N, n, d, k, neighbors=3):
    """Inverse-distance upsampling of tokens + full-resolution mask prediction."""
    return OrderedDict(
        [
            ("knn", DIST_FLOPS * N * n),
            ("interpolate", N * (IDW_WEIGHT_FLOPS + (2 * neighbors - 1) * d)),
            ("mlp_point", mlp_flops(N, d)),
            ("mlp_query", mlp_flops(k, d)),
            ("logits", 2 * d * N * k),
            ("sigmoid", SIGMOID_FLOPS * N * k),
        ]
    )
