"""The numba and numpy kernel flavours must agree bit for bit."""
import importlib.util
from pathlib import Path

import numpy as np
import pytest

from spmask import kernels
from spmask._accel import HAVE_NUMBA

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _pair(name):
    return kernels.get(name, "numba"), kernels.get(name, "numpy")


class TestBackendEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_fps(self, seed):
        rng = np.random.default_rng(seed)
        pos = rng.random((700, 3))
        fast, slow = _pair("fps")
        np.testing.assert_array_equal(fast(pos, 200, seed), slow(pos, 200, seed))

    def test_fps_with_duplicates(self):
        pos = np.repeat(np.random.default_rng(0).random((20, 3)), 3, axis=0)
        fast, slow = _pair("fps")
        np.testing.assert_array_equal(fast(pos, 60, 4), slow(pos, 60, 4))

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("radius,samples", [(0.05, 2), (0.2, 8), (0.01, 1)])
    def test_ball_query(self, seed, radius, samples):
        rng = np.random.default_rng(seed)
        refs = rng.random((800, 3))
        centers = rng.random((300, 3)) * 1.2 - 0.1
        fast, slow = _pair("ball_query")
        i1, f1 = fast(centers, refs, radius, samples)
        i2, f2 = slow(centers, refs, radius, samples)
        np.testing.assert_array_equal(i1, i2)
        np.testing.assert_array_equal(f1, f2)

    def test_ball_query_lattice_ties(self):
        g = np.arange(6) * 0.1
        refs = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
        fast, slow = _pair("ball_query")
        for got, want in zip(fast(refs, refs, 0.15, 7), slow(refs, refs, 0.15, 7)):
            np.testing.assert_array_equal(got, want)

    @pytest.mark.parametrize("seed", range(5))
    def test_fh_segment(self, seed):
        rng = np.random.default_rng(seed)
        npts, ne = 400, 1600
        ei = rng.integers(0, npts, ne)
        ej = rng.integers(0, npts, ne)
        keep = ei != ej
        ei, ej = ei[keep], ej[keep]
        w = np.round(rng.random(ei.size), 2)  # coarse weights force ties
        order = np.lexsort((ej, ei, w))
        args = (npts, ei[order], ej[order], w[order], 0.3, 4)
        fast, slow = _pair("fh_segment")
        np.testing.assert_array_equal(fast(*args), slow(*args))


class TestSelection:
    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.get("fps", "cuda")

    def test_unknown_kernel(self):
        with pytest.raises(KeyError):
            kernels.get("nope", "numpy")


class TestBenchmarkScript:
    def test_runs_and_reports_identical(self):
        path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_backends.py"
        spec = importlib.util.spec_from_file_location("bench_backends", path)
        mod = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(mod)
        rows = mod.run(points=1500, tokens=64, reps=1)
        assert [r["stage"] for r in rows] == ["fps", "ball_query", "fh_segment", "pipeline"]
        assert all(r["identical"] for r in rows)
