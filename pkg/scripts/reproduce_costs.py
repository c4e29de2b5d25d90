"""Parameter and MAC table for the three variants, with an instrumented-forward cross-check.

    python3 scripts/reproduce_costs.py [--verify]
"""
import argparse

import numpy as np

from hit import tensor as T
from hit.backbone import ModelConfig
from hit.bench.cost import cost_report
from hit.cli import REFERENCE
from hit.model import HiT


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--verify", action="store_true", help="also run one forward per variant and compare MACs")
    args = ap.parse_args()

    print(f"{'variant':<8}{'params':>12}{'ref':>8}{'dev':>8}{'MACs':>10}{'ref':>7}{'dev':>8}{'bb params':>11}{'bb MACs':>9}")
    for variant in ("base", "small", "tiny"):
        cfg = ModelConfig.named(variant)
        rep = cost_report(cfg)
        rp, rm = REFERENCE[variant]
        print(
            f"{variant:<8}{rep.params / 1e6:>11.2f}M{rp:>7.2f}M{rep.params / 1e6 / rp - 1:>+8.1%}"
            f"{rep.macs / 1e9:>9.3f}G{rm:>6.2f}G{rep.macs / 1e9 / rm - 1:>+8.1%}"
            f"{rep.backbone_params / rep.params:>11.1%}{rep.backbone_macs / rep.macs:>9.1%}"
        )
        if args.verify:
            rng = np.random.default_rng(0)
            z = rng.random((cfg.template_size,) * 2 + (3,), dtype=np.float32)
            x = rng.random((cfg.search_size,) * 2 + (3,), dtype=np.float32)
            with T.count_macs() as counter:
                HiT.init(cfg)(z, x)
            status = "match" if counter.total == rep.macs else f"MISMATCH ({counter.total})"
            print(f"{'':<8}instrumented forward: {status}")


if __name__ == "__main__":
    main()
