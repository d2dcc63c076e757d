import json
import threading

import numpy as np
import pytest

from spmask.flops import dense_branch_flops, superpoint_branch_flops
from spmask.oversegment import OversegmentParams
from spmask.pipeline import PipelineConfig, TimingReport, bench, flops_report, run_pipeline
from spmask import pipeline as pipeline_mod

SMALL = dict(n=256, d=16, k=64)
DELAYS = (180.0, 172.0, 36.0)


def same_outputs(a, b):
    np.testing.assert_array_equal(a.referent.mask, b.referent.mask)
    np.testing.assert_array_equal(a.referent.box, b.referent.box)
    assert a.referent.score == b.referent.score
    assert a.referent.query_index == b.referent.query_index
    np.testing.assert_array_equal(a.prediction.full_mask, b.prediction.full_mask)
    np.testing.assert_array_equal(a.partition.labels, b.partition.labels)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0},
            {"k": 300, "n": 256},
            {"radius": 0.0},
            {"mode": "gpu"},
            {"threshold": 1.0},
            {"synthetic_delays": (1, 2)},
            {"synthetic_delays": (1, -2, 3)},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)

    def test_delays_normalised_to_floats(self):
        assert PipelineConfig(synthetic_delays=[1, 2, 3]).synthetic_delays == (1.0, 2.0, 3.0)


class TestRunPipeline:
    @pytest.mark.parametrize("seed", range(3))
    def test_modes_bit_identical(self, room, seed):
        a = run_pipeline(room.cloud, PipelineConfig(**SMALL, seed=seed, mode="parallel"))
        b = run_pipeline(room.cloud, PipelineConfig(**SMALL, seed=seed, mode="serial"))
        same_outputs(a, b)

    def test_dense_baseline_modes_identical(self, room):
        cfg = PipelineConfig(**SMALL, dense_baseline=True)
        a = run_pipeline(room.cloud, cfg)
        b = run_pipeline(room.cloud, PipelineConfig(**SMALL, dense_baseline=True, mode="serial"))
        same_outputs(a, b)
        assert a.prediction.superpoint_mask is None

    def test_output_shapes(self, room):
        res = run_pipeline(room.cloud, PipelineConfig(**SMALL))
        n = len(room.cloud)
        assert res.prediction.full_mask.shape == (n, 64)
        assert res.prediction.superpoint_mask.shape == (res.partition.m, 64)
        assert res.referent.mask.shape == (n,)
        assert res.referent.mask.dtype == bool
        assert res.referent.box.shape == (6,)
        assert res.referent.query_index == int(np.argmax(res.queries.scores))

    def test_lanes_run_concurrently(self, room, monkeypatch):
        """Both lanes are in flight at once in parallel mode."""
        barrier = threading.Barrier(2, timeout=10)
        real_a, real_b = pipeline_mod._lane_a, pipeline_mod._lane_b

        def lane_a(*args):
            barrier.wait()
            return real_a(*args)

        def lane_b(*args):
            barrier.wait()
            return real_b(*args)

        monkeypatch.setattr(pipeline_mod, "_lane_a", lane_a)
        monkeypatch.setattr(pipeline_mod, "_lane_b", lane_b)
        run_pipeline(room.cloud, PipelineConfig(**SMALL))

    def test_inputs_not_mutated(self, room):
        before = room.cloud.positions.copy()
        run_pipeline(room.cloud, PipelineConfig(**SMALL))
        np.testing.assert_array_equal(room.cloud.positions, before)


class TestTiming:
    def test_parallel_with_delays(self, room):
        res = run_pipeline(room.cloud, PipelineConfig(**SMALL, synthetic_delays=DELAYS))
        t = res.timing
        assert t.lane_a_ms >= 180 and t.lane_b_ms >= 172 and t.tail_ms >= 36
        assert 216 <= t.total_ms <= 238
        assert t.total_ms >= t.tail_ms

    def test_serial_with_delays(self, room):
        t = run_pipeline(room.cloud, PipelineConfig(**SMALL, synthetic_delays=DELAYS, mode="serial")).timing
        assert t.total_ms >= 388
        stages = t.lane_a_ms + t.lane_b_ms + t.tail_ms
        assert abs(t.total_ms - stages) <= 0.05 * stages

    def test_bench_statistics(self, room):
        res = bench(PipelineConfig(**SMALL, synthetic_delays=DELAYS), 5, cloud=room.cloud)
        par, ser = res["parallel"], res["serial"]
        assert len(par.reports) == len(ser.reports) == 5
        for p, s in zip(par.reports, ser.reports):
            assert p.total_ms <= s.total_ms
        assert 216 <= par.median("total_ms") <= 238
        assert ser.median("total_ms") >= 388
        assert par.overhead_ratio <= 1.10
        for r in ser.reports:
            stages = r.lane_a_ms + r.lane_b_ms + r.tail_ms
            assert abs(r.total_ms - stages) <= 0.05 * stages
        assert par.p95("total_ms") >= par.median("total_ms")
        doc = json.loads(res.to_json())
        assert set(doc) == {"parallel", "serial"}
        assert doc["parallel"]["repetitions"] == 5
        assert "parallel overhead ratio" in res.to_text()

    def test_bench_rejects_zero_reps(self):
        with pytest.raises(ValueError):
            bench(PipelineConfig(**SMALL), 0)

    def test_report_json_keys(self):
        rep = TimingReport(1.0, 2.0, 3.0, 6.5, "serial")
        assert json.loads(rep.to_json()) == {
            "lane_a_ms": 1.0, "lane_b_ms": 2.0, "tail_ms": 3.0, "total_ms": 6.5, "mode": "serial"
        }

    def test_report_text_six_significant_digits(self):
        rep = TimingReport(180.123456789, 1.0, 2.0, 216.98765432, "parallel")
        text = rep.to_text().splitlines()
        assert text[0] == "mode parallel"
        assert "lane_a_ms 180.123" in text
        assert "total_ms 216.988" in text

    def test_overhead_ratio(self):
        assert TimingReport(180, 172, 36, 216, "parallel").overhead_ratio == 1.0


class TestFlops:
    def test_full_scale_ratio(self):
        rep = flops_report(PipelineConfig(), 50_000, 2_000)
        assert rep.ratio >= 10
        assert rep.superpoint_total == sum(superpoint_branch_flops(2000, 1024, 32, 256, 2).values())
        assert rep.dense_total == sum(dense_branch_flops(50_000, 1024, 32, 256).values())
        assert "dense/superpoint ratio" in rep.to_text()

    def test_hand_count(self):
        # m=1, n=1, d=1, k=1, samples=2: 8 + 1 + 7 + 7 + 2 + 4
        assert sum(superpoint_branch_flops(1, 1, 1, 1, 2).values()) == 29
        # N=1, n=1, d=1, k=1: 8 + (14 + 5) + 7 + 7 + 2 + 4
        assert sum(dense_branch_flops(1, 1, 1, 1).values()) == 47

    def test_same_order_when_m_equals_n(self):
        rep = flops_report(PipelineConfig(), 50_000, 50_000)
        assert 0.5 <= rep.ratio <= 2.0

    def test_affine_in_k(self):
        cfg = lambda k: PipelineConfig(k=k)  # noqa: E731
        for branch in ("superpoint_total", "dense_total"):
            vals = [getattr(flops_report(cfg(k), 50_000, 2_000), branch) for k in (64, 128, 192, 256)]
            steps = np.diff(vals)
            assert (steps == steps[0]).all() and steps[0] > 0


class TestOversegmentConfig:
    def test_custom_params_flow_through(self, room):
        coarse = run_pipeline(room.cloud, PipelineConfig(**SMALL, oversegment=OversegmentParams(merge_threshold=1.0)))
        fine = run_pipeline(room.cloud, PipelineConfig(**SMALL, oversegment=OversegmentParams(merge_threshold=0.001)))
        assert coarse.partition.m <= fine.partition.m
