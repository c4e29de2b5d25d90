"""Command line entry point ``hit``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from hit.ablation import AblationSpec
from hit.backbone import ModelConfig
from hit.bench import io
from hit.bench.cost import BACKBONE_PARTS, cost_report
from hit.bench.latency import measure_latency, measure_throughput
from hit.bench.metrics import eval_sequence
from hit.bench.synth import MOTIONS, synth_sequence
from hit.model import HiT
from hit.tracker import BBox, run_sequence

# Reference totals per variant: (params in M, MACs in G)
REFERENCE = {"base": (42.14, 4.34), "small": (11.03, 1.13), "tiny": (9.59, 0.99)}


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("HIT_SEED", "0"))


def _spec(args) -> AblationSpec:
    return AblationSpec.parse(args.ablation) if getattr(args, "ablation", None) else AblationSpec()


def _model(args) -> HiT:
    if getattr(args, "weights", None):
        return io.load_weights(args.weights)
    return HiT.init(ModelConfig.named(args.variant), _spec(args), seed=_seed(args))


def _print_breakdown(title: str, breakdown: dict[str, int], total: int, unit: float, suffix: str) -> None:
    print(title)
    for part, value in breakdown.items():
        print(f"  {part:<8} {value / unit:10.4f}{suffix}  {100 * value / total:5.1f}%")
    bb = sum(breakdown.get(p, 0) for p in BACKBONE_PARTS)
    print(f"  {'backbone':<8} {bb / unit:10.4f}{suffix}  {100 * bb / total:5.1f}%")
    print(f"  {'total':<8} {total / unit:10.4f}{suffix}")


def cmd_paramcount(args) -> int:
    rep = cost_report(ModelConfig.named(args.variant), _spec(args))
    ref = REFERENCE[args.variant][0]
    _print_breakdown(f"HiT-{args.variant.capitalize()} parameters", rep.param_breakdown, rep.params, 1e6, "M")
    print(f"  reference {ref:.2f}M  deviation {100 * (rep.params / 1e6 / ref - 1):+.2f}%")
    return 0


def cmd_macs(args) -> int:
    rep = cost_report(ModelConfig.named(args.variant), _spec(args))
    ref = REFERENCE[args.variant][1]
    _print_breakdown(f"HiT-{args.variant.capitalize()} MACs (one template+search forward)", rep.mac_breakdown, rep.macs, 1e9, "G")
    print(f"  reference {ref:.2f}G  deviation {100 * (rep.macs / 1e9 / ref - 1):+.2f}%")
    return 0


def cmd_bench(args) -> int:
    model = _model(args)
    stats = measure_latency(model, iters=args.iters, warmup=args.warmup, seed=_seed(args))
    stats.pop("samples_ms")
    if args.threads > 1:
        stats["throughput"] = measure_throughput(model, args.threads, iters=args.iters, seed=_seed(args))
    print(json.dumps(stats, indent=2))
    return 0


def cmd_track(args) -> int:
    model = _model(args)
    t0 = time.perf_counter()
    boxes = run_sequence(model, io.read_frames(args.frames), BBox.parse(args.init))
    io.write_trajectory(args.out, boxes)
    print(f"tracked {len(boxes)} frames in {time.perf_counter() - t0:.2f}s -> {args.out}")
    return 0


def cmd_selfcheck(args) -> int:
    from hit.bench import selfcheck

    return 0 if selfcheck.run() else 1


def cmd_synth(args) -> int:
    frames, gt = synth_sequence(_seed(args), args.frames, args.motion)
    out = Path(args.out)
    io.write_frames(out, frames)
    io.write_trajectory(out / "groundtruth.csv", gt)
    print(f"wrote {len(frames)} frames and groundtruth.csv to {out}")
    return 0


def cmd_eval(args) -> int:
    res = eval_sequence(io.read_trajectory(args.pred), io.read_trajectory(args.gt))
    curve = res.pop("curve")
    res["success_curve"] = [round(float(v), 6) for v in curve.success]
    print(json.dumps(res, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hit", description="Hierarchical-transformer tracker and its cost/metric tooling")
    sub = p.add_subparsers(dest="command", required=True)

    def variant(sp):
        sp.add_argument("--variant", choices=sorted(REFERENCE), default="base")

    def ablation(sp):
        sp.add_argument("--ablation", nargs="+", metavar="KEY=VALUE",
                        help="e.g. bridge=max,mid pos=ver downsample=subsample g=off")

    def seed(sp):
        sp.add_argument("--seed", type=int, default=None, help="weight-init seed (fallback: $HIT_SEED, then 0)")

    sp = sub.add_parser("paramcount", help="parameter count with per-module breakdown")
    variant(sp), ablation(sp)
    sp.set_defaults(func=cmd_paramcount)

    sp = sub.add_parser("macs", help="multiply-accumulate count with per-module breakdown")
    variant(sp), ablation(sp)
    sp.set_defaults(func=cmd_macs)

    sp = sub.add_parser("bench", help="forward-pass latency")
    variant(sp), ablation(sp), seed(sp)
    sp.add_argument("--iters", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=2)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--weights")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("track", help="track a directory of PPM frames")
    variant(sp), ablation(sp), seed(sp)
    sp.add_argument("--weights")
    sp.add_argument("--frames", required=True)
    sp.add_argument("--init", required=True, metavar="X,Y,W,H")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_track)

    sp = sub.add_parser("selfcheck", help="run the invariant sweep")
    sp.set_defaults(func=cmd_selfcheck)

    sp = sub.add_parser("synth", help="write a synthetic sequence")
    seed(sp)
    sp.add_argument("--frames", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--motion", choices=MOTIONS, default="linear")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("eval", help="score a trajectory against ground truth")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
