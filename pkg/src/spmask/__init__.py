"""Superpoint mask branch: oversegmentation, ball-query pooling, mask prediction,
losses, grounding metrics and a two-lane pipeline executor."""
from ._accel import BACKEND
from .geometry import NeighborGraph, PointCloud, ball_query, build_knn_graph, estimate_normals, fps_sample
from .grounding import (
    MaskPrediction,
    Mlp,
    MlpParams,
    QuerySet,
    TokenSet,
    dense_mask_baseline,
    predict_masks,
    produce_tokens,
    select_queries,
    select_referent,
    superpoint_embeddings,
    upsample_mask,
)
from .losses import (
    LossValueGrad,
    LossWeights,
    combine_decoder_loss,
    dice_loss,
    finite_difference_check,
    focal_loss,
    giou_loss_3d,
    smooth_l1,
    total_loss,
)
from .metrics import EvalReport, EvalSample, box_iou_3d, evaluate, mask_iou
from .oversegment import OversegmentParams, SuperpointPartition, compactify, oversegment
from .pipeline import PipelineConfig, TimingReport, bench, flops_report, run_pipeline

__version__ = "0.1.0"
