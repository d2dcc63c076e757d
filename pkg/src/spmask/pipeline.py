"""Two-lane executor: superpoints on one lane, tokens/queries on the other.

Lane A (the CPU role) oversegments the scene; lane B (the accelerator role)
produces tokens and selects queries. The tail joins both and runs the mask
branch. Optional synthetic delays pad each stage to a minimum duration so
the overlap structure can be measured independently of host speed.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import json
import time

import numpy as np

from .flops import dense_branch_flops, superpoint_branch_flops
from .grounding import (
    MlpParams,
    dense_mask_baseline,
    predict_masks,
    produce_tokens,
    select_queries,
    select_referent,
    superpoint_embeddings,
    upsample_mask,
)
from .oversegment import OversegmentParams, oversegment

MODES = ("parallel", "serial")


@dataclass(frozen=True)
class PipelineConfig:
    n: int = 1024
    d: int = 32
    k: int = 256
    radius: float = 0.2
    samples: int = 2
    oversegment: OversegmentParams = field(default_factory=OversegmentParams)
    seed: int = 0
    synthetic_delays: tuple | None = None  # (lane_a_ms, lane_b_ms, tail_ms)
    mode: str = "parallel"
    threshold: float = 0.5
    dense_baseline: bool = False

    def __post_init__(self):
        if min(self.n, self.d, self.k, self.samples) < 1:
            raise ValueError("n, d, k and samples must be positive")
        if self.k > self.n:
            raise ValueError("k must not exceed n")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.synthetic_delays is not None:
            delays = tuple(float(x) for x in self.synthetic_delays)
            if len(delays) != 3 or min(delays) < 0:
                raise ValueError("synthetic_delays must be three non-negative values")
            object.__setattr__(self, "synthetic_delays", delays)


@dataclass(frozen=True)
class TimingReport:
    lane_a_ms: float
    lane_b_ms: float
    tail_ms: float
    total_ms: float
    mode: str

    @property
    def overhead_ratio(self):
        """(total - tail) / slower lane; 1.0 means perfect overlap."""
        return (self.total_ms - self.tail_ms) / max(self.lane_a_ms, self.lane_b_ms)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_text(self):
        lines = [f"mode {self.mode}"]
        for key in ("lane_a_ms", "lane_b_ms", "tail_ms", "total_ms"):
            lines.append(f"{key} {getattr(self, key):.6g}")
        return "\n".join(lines)


@dataclass(frozen=True)
class PipelineResult:
    referent: object
    prediction: object
    partition: object
    queries: object
    timing: TimingReport


def _pad(t0, target_ms):
    if target_ms:
        remaining = target_ms / 1000.0 - (time.perf_counter() - t0)
        if remaining > 0:
            time.sleep(remaining)
    return (time.perf_counter() - t0) * 1000.0


def _delays(config):
    return config.synthetic_delays or (0.0, 0.0, 0.0)


def _lane_a(cloud, config):
    t0 = time.perf_counter()
    partition = oversegment(cloud, config.oversegment)
    return partition, _pad(t0, _delays(config)[0])


def _lane_b(cloud, config):
    t0 = time.perf_counter()
    tokens = produce_tokens(cloud, config.n, config.d, config.seed)
    queries = select_queries(tokens, config.k, config.seed)
    return (tokens, queries), _pad(t0, _delays(config)[1])


def run_pipeline(cloud, config=None):
    """Run both lanes (concurrently or one after the other), then the mask branch.

    Numerical outputs do not depend on ``config.mode``.
    """
    config = config or PipelineConfig()
    start = time.perf_counter()
    if config.mode == "parallel":
        with ThreadPoolExecutor(max_workers=2, thread_name_prefix="spmask-lane") as pool:
            fut_a = pool.submit(_lane_a, cloud, config)
            fut_b = pool.submit(_lane_b, cloud, config)
            partition, ms_a = fut_a.result()
            (tokens, queries), ms_b = fut_b.result()
    else:
        partition, ms_a = _lane_a(cloud, config)
        (tokens, queries), ms_b = _lane_b(cloud, config)

    t_tail = time.perf_counter()
    params = MlpParams.random(config.d, config.seed)
    if config.dense_baseline:
        prediction = dense_mask_baseline(tokens, cloud, queries, params)
    else:
        v_s = superpoint_embeddings(tokens, partition, config.radius, config.samples)
        prediction = upsample_mask(predict_masks(v_s, queries, params), partition)
    referent = select_referent(prediction, queries, config.threshold)
    ms_tail = _pad(t_tail, _delays(config)[2])
    total = (time.perf_counter() - start) * 1000.0
    timing = TimingReport(ms_a, ms_b, ms_tail, total, config.mode)
    return PipelineResult(referent, prediction, partition, queries, timing)


@dataclass(frozen=True)
class TimingStats:
    mode: str
    reports: tuple

    def _series(self, key):
        return np.array([getattr(r, key) for r in self.reports])

    def median(self, key):
        return float(np.median(self._series(key)))

    def p95(self, key):
        return float(np.percentile(self._series(key), 95))

    @property
    def overhead_ratio(self):
        """Median over repetitions of the per-run overhead ratio."""
        return float(np.median([r.overhead_ratio for r in self.reports]))

    def to_dict(self):
        out = {"mode": self.mode, "repetitions": len(self.reports)}
        for key in ("lane_a_ms", "lane_b_ms", "tail_ms", "total_ms"):
            out[key] = {"median": self.median(key), "p95": self.p95(key)}
        out["overhead_ratio"] = self.overhead_ratio
        return out


@dataclass(frozen=True)
class BenchResult:
    stats: dict  # mode -> TimingStats

    def __getitem__(self, mode):
        return self.stats[mode]

    def to_json(self):
        return json.dumps({m: s.to_dict() for m, s in self.stats.items()}, sort_keys=True)

    def to_text(self):
        lines = [f"{'mode':<9} {'stage':<10} {'median_ms':>10} {'p95_ms':>10}"]
        for mode, st in self.stats.items():
            for key in ("lane_a_ms", "lane_b_ms", "tail_ms", "total_ms"):
                lines.append(f"{mode:<9} {key[:-3]:<10} {st.median(key):>10.6g} {st.p95(key):>10.6g}")
        if "parallel" in self.stats:
            lines.append(f"parallel overhead ratio {self.stats['parallel'].overhead_ratio:.4g}")
        return "\n".join(lines)


def bench(config, repetitions, cloud=None, modes=MODES, warmup=True):
    """Repeat ``run_pipeline`` per mode (interleaved) and collect timing statistics.

    ``cloud`` defaults to a small synthetic room. One untimed warm-up run per
    mode absorbs JIT compilation.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if cloud is None:
        from .scenes import synthetic_room

        cloud = synthetic_room(n_points=max(2 * config.n, 2000), seed=config.seed).cloud
    configs = {mode: replace(config, mode=mode) for mode in modes}
    if warmup:
        for cfg in configs.values():
            run_pipeline(cloud, replace(cfg, synthetic_delays=None))
    reports = {mode: [] for mode in modes}
    for _ in range(repetitions):
        for mode, cfg in configs.items():
            reports[mode].append(run_pipeline(cloud, cfg).timing)
    return BenchResult({mode: TimingStats(mode, tuple(r)) for mode, r in reports.items()})


@dataclass(frozen=True)
class FlopsReport:
    superpoint: dict
    dense: dict

    @property
    def superpoint_total(self):
        return sum(self.superpoint.values())

    @property
    def dense_total(self):
        return sum(self.dense.values())

    @property
    def ratio(self):
        return self.dense_total / self.superpoint_total

    def to_text(self):
        lines = [f"{'branch':<11} {'stage':<15} {'flops':>14}"]
        for name, stages in (("superpoint", self.superpoint), ("dense", self.dense)):
            for stage, count in stages.items():
                lines.append(f"{name:<11} {stage:<15} {count:>14d}")
            lines.append(f"{name:<11} {'total':<15} {sum(stages.values()):>14d}")
        lines.append(f"dense/superpoint ratio {self.ratio:.4g}")
        return "\n".join(lines)


def flops_report(config, N, m):
    """Analytic op counts of both mask branches for a scene of ``N`` points and ``m`` superpoints."""
    return FlopsReport(
        superpoint=superpoint_branch_flops(m, config.n, config.d, config.k, config.samples),
        dense=dense_branch_flops(N, config.n, config.d, config.k),
    )
