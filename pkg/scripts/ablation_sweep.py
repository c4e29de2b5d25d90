"""Build every ablation variant, run one forward pass, and write a CSV of costs and latency.

    python3 scripts/ablation_sweep.py --variant tiny --out ablation.csv
"""
import argparse
import csv
import time

import numpy as np

from hit.ablation import all_specs, build_variant
from hit.backbone import ModelConfig
from hit.bench.cost import cost_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--variant", default="tiny", choices=["base", "small", "tiny"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="ablation.csv")
    args = ap.parse_args()

    cfg = ModelConfig.named(args.variant)
    rng = np.random.default_rng(args.seed)
    z = rng.random((cfg.template_size,) * 2 + (3,), dtype=np.float32)
    x = rng.random((cfg.search_size,) * 2 + (3,), dtype=np.float32)
    rows = []
    for spec in all_specs():
        model = build_variant(cfg, spec, seed=args.seed)
        t0 = time.perf_counter()
        box = model(z, x)
        ms = (time.perf_counter() - t0) * 1e3
        rep = cost_report(cfg, spec)
        rows.append({
            "bridge": spec.bridge.label, "pos": spec.pos_enc.value, "downsample": spec.downsample,
            "g": int(spec.use_g), "params": rep.params, "macs": rep.macs, "forward_ms": round(ms, 2),
            "box": " ".join(f"{v:.4f}" for v in box.as_array()),
        })
        print(f"{spec.describe():<60} {rep.params / 1e6:6.2f}M {rep.macs / 1e9:6.3f}G {ms:7.1f}ms")
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
