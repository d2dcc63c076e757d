"""Numba vs pure-numpy kernels, plus the end-to-end pipeline under each.

Usage::

    python benchmarks/bench_backends.py [--points 20000] [--reps 5] [--json]

Every kernel is warmed up once (JIT compile, cache load) before timing, and
the two backends' outputs are checked for equality on the way.
"""
import argparse
import json
import time

import numpy as np

from spmask import kernels
from spmask._accel import HAVE_NUMBA
from spmask.geometry import build_knn_graph, estimate_normals
from spmask.oversegment import OversegmentParams, sorted_edges
from spmask.pipeline import PipelineConfig, run_pipeline
from spmask.scenes import synthetic_room


def _time(fn, reps):
    fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1000.0)
    return float(np.median(samples))


def _workloads(points, tokens):
    scene = synthetic_room(n_points=points, seed=0)
    pos = scene.cloud.positions
    params = OversegmentParams()
    graph = build_knn_graph(scene.cloud, params.k_nn)
    cloud = scene.cloud.with_normals(estimate_normals(scene.cloud, graph))
    ei, ej, w = sorted_edges(cloud, graph, params)
    centers = pos[:: max(1, points // tokens)][:tokens]
    return scene, {
        "fps": (pos, tokens, 0),
        "ball_query": (centers, pos, 0.2, 8),
        "fh_segment": (len(cloud), ei, ej, w, params.merge_threshold, params.min_segment_size),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def run(points, tokens, reps):
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    scene, loads = _workloads(points, tokens)
    rows = []
    for name, args in loads.items():
        outs, times = {}, {}
        for be in backends:
            fn = kernels.get(name, be)
            outs[be] = fn(*args)
            times[be] = _time(lambda: fn(*args), reps)
        rows.append({"stage": name, "ms": times, "identical": _same(*outs.values()) if len(outs) > 1 else True})

    config = PipelineConfig(n=tokens, k=min(256, tokens))
    original = {n: getattr(kernels, n) for n in ("fps", "ball_query", "fh_segment")}
    times, masks = {}, {}
    try:
        for be in backends:
            for n in original:
                setattr(kernels, n, kernels.get(n, be))
            masks[be] = run_pipeline(scene.cloud, config).prediction.full_mask
            times[be] = _time(lambda: run_pipeline(scene.cloud, config), reps)
    finally:
        for n, fn in original.items():
            setattr(kernels, n, fn)
    same = len(masks) < 2 or np.array_equal(*masks.values())
    rows.append({"stage": "pipeline", "ms": times, "identical": same})
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--tokens", type=int, default=1024)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    rows = run(args.points, args.tokens, args.reps)
    if args.json:
        print(json.dumps(rows, indent=2))
        return 0
    print(f"N={args.points} tokens={args.tokens} reps={args.reps} (median ms)")
    print(f"{'stage':<11} {'numba':>10} {'numpy':>10} {'speedup':>8}  identical")
    for r in rows:
        nb, npy = r["ms"].get("numba"), r["ms"]["numpy"]
        speed = f"{npy / nb:8.2f}" if nb else f"{'-':>8}"
        nb_txt = f"{nb:10.2f}" if nb is not None else f"{'-':>10}"
        print(f"{r['stage']:<11} {nb_txt} {npy:10.2f} {speed}  {r['identical']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
