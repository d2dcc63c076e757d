"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
import argparse
import json
import os
import sys
from pathlib import Path

from . import formats
from .gradcheck import run_gradcheck
from .metrics import EvalSample, evaluate
from .oversegment import OversegmentParams, oversegment
from .pipeline import PipelineConfig, bench, flops_report, run_pipeline

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


def _float_list(text, count=None):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {len(vals)}")
    return vals


def _seed(args):
    env = os.environ.get("SPG_SEED")
    if env is None or not env.strip():
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise _UsageError(f"SPG_SEED must be an integer, got {env!r}") from None


def _emit(text, path=None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii")


def _overseg_params(args):
    return OversegmentParams(k_nn=args.knn, merge_threshold=args.threshold, min_segment_size=args.min_size)


def cmd_oversegment(args):
    cloud = formats.parse_scene(args.scene)
    part = oversegment(cloud, _overseg_params(args))
    _emit("".join(f"{v}\n" for v in part.labels), args.output)
    print(f"points {len(part)} superpoints {part.m}", file=sys.stderr)
    return EXIT_OK


def cmd_infer(args):
    cloud = formats.parse_scene(args.scene)
    config = PipelineConfig(
        n=args.tokens,
        d=args.dim,
        k=args.queries,
        radius=args.radius,
        samples=args.samples,
        oversegment=_overseg_params(args),
        seed=_seed(args),
        mode=args.mode,
        threshold=args.mask_threshold,
        dense_baseline=args.dense_baseline,
    )
    result = run_pipeline(cloud, config)
    ref = result.referent
    pred = formats.prediction_text(ref.mask, ref.box, ref.score)
    if args.output:
        _emit(pred, args.output)
    else:
        sys.stdout.write(pred)
    print(result.timing.to_text())
    if args.timing_json:
        Path(args.timing_json).write_text(result.timing.to_json() + "\n", encoding="ascii")
    return EXIT_OK


def cmd_eval(args):
    records = formats.parse_gt(args.gt_file)
    pred_dir = Path(args.pred_dir)
    samples = []
    missing = []
    for rec in records:
        path = pred_dir / f"{rec.sample_id}.pred"
        if not path.is_file():
            missing.append(rec.sample_id)
            continue
        mask, box, _ = formats.parse_prediction(path)
        if mask.size != rec.mask.size:
            raise ValueError(f"{path}: mask covers {mask.size} points, ground truth has {rec.mask.size}")
        samples.append(EvalSample(mask, rec.mask, box, rec.box, rec.category))
    if missing:
        raise ValueError(f"missing predictions for: {', '.join(missing[:10])}")
    report = evaluate(samples, args.thresholds)
    if args.json:
        out = {"thresholds": list(report.thresholds)}
        for name, st in report.strata.items():
            out[name] = None if st is None else {
                "count": st.count,
                "acc": {f"{t:g}": round(v, 6) for t, v in st.acc.items()},
                "miou": round(st.miou, 6),
            }
        print(json.dumps(out, sort_keys=True))
    else:
        print(report.to_table())
    return EXIT_OK


def cmd_bench(args):
    config = PipelineConfig(n=args.tokens, k=args.queries, d=args.dim, seed=_seed(args),
                            synthetic_delays=tuple(args.delays))
    cloud = formats.parse_scene(args.scene) if args.scene else None
    result = bench(config, args.reps, cloud=cloud)
    print(result.to_json() if args.json else result.to_text())
    return EXIT_OK


def cmd_flops(args):
    config = PipelineConfig(n=args.tokens, k=args.queries, d=args.dim, samples=args.samples)
    print(flops_report(config, args.points, args.superpoints).to_text())
    return EXIT_OK


def cmd_gradcheck(args):
    worst = run_gradcheck(args.trials, args.eps, _seed(args))
    ok = True
    for name, err in worst.items():
        status = "ok" if err < args.tol else "FAIL"
        ok &= err < args.tol
        print(f"{name:<14} max_rel_err {err:.3g} {status}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_synth(args):
    from .scenes import synthetic_room

    scene = synthetic_room(args.points, _seed(args))
    formats.write_scene(args.output, scene.cloud, binary=args.binary)
    if args.gt:
        counts = {c: scene.classes.count(c) for c in scene.classes}
        recs = [
            formats.GroundTruth(
                f"obj{oid}",
                "unique" if counts[cls] == 1 else "multiple",
                scene.boxes[oid],
                scene.instance == oid,
            )
            for oid, cls in enumerate(scene.classes)
        ]
        formats.write_gt(args.gt, recs)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_overseg_flags(p):
    p.add_argument("--knn", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--min-size", type=int, default=20)


def build_parser():
    parser = _Parser(prog="spmask", description="Superpoint mask branch toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("oversegment", help="emit superpoint labels, one per line")
    p.add_argument("scene")
    _add_overseg_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oversegment)

    p = sub.add_parser("infer", help="run the two-lane pipeline and emit a prediction")
    p.add_argument("scene")
    p.add_argument("--tokens", type=int, default=1024)
    p.add_argument("--queries", type=int, default=256)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--radius", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("parallel", "serial"), default="parallel")
    p.add_argument("--dense-baseline", action="store_true")
    p.add_argument("--mask-threshold", type=float, default=0.5)
    _add_overseg_flags(p)
    p.add_argument("-o", "--output", help="prediction file (default: stdout)")
    p.add_argument("--timing-json")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score <id>.pred files against a ground-truth file")
    p.add_argument("pred_dir")
    p.add_argument("gt_file")
    p.add_argument("--thresholds", type=_float_list, default=[0.25, 0.5])
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="pipeline timing statistics in both modes")
    p.add_argument("--delays", type=lambda s: _float_list(s, 3), default=[180.0, 172.0, 36.0])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--scene")
    p.add_argument("--tokens", type=int, default=1024)
    p.add_argument("--queries", type=int, default=256)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("flops", help="analytic op counts, superpoint vs dense branch")
    p.add_argument("--points", type=int, default=50000)
    p.add_argument("--superpoints", type=int, default=2000)
    p.add_argument("--tokens", type=int, default=1024)
    p.add_argument("--queries", type=int, default=256)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--samples", type=int, default=2)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("gradcheck", help="finite-difference check of every loss gradient")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic room scene (and optional ground truth)")
    p.add_argument("output")
    p.add_argument("--points", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--gt")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"spmask: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"spmask {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
