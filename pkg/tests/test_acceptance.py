"""End-to-end acceptance checks, one test and one printed PASS/FAIL line per criterion."""
import itertools
import re
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from hit import oracles
from hit import tensor as T
from hit.ablation import AblationSpec, all_specs, build_variant
from hit.attention import mha_forward, shrink_forward
from hit.backbone import ModelConfig
from hit.bench.cost import cost_report
from hit.bench.metrics import eval_sequence
from hit.bench.synth import synth_sequence
from hit.head import BoxNorm, FixedHead
from hit.loss import giou, loss_grad, total_loss
from hit.model import HiT
from hit.oracles import central_difference
from hit.posenc import Arrangement, BiasTable, Image, Kind, build_bias_matrix, coordinate_overlap, global_coord
from hit.tracker import run_sequence

import test_attention as ta
import test_loss as tl
from conftest import cached_model, image_pair

REFERENCE = {"base": (42.14e6, 4.34e9), "small": (11.03e6, 1.13e9), "tiny": (9.59e6, 0.99e9)}
README = Path(__file__).resolve().parents[1] / "README.md"


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _cli(*args):
    t0 = time.perf_counter()
    out = subprocess.run([sys.executable, "-m", "hit.cli", *args], capture_output=True, text=True, check=True).stdout
    return out, time.perf_counter() - t0


def _cli_runtime(*args):
    # in-process timing of the command body (interpreter start-up excluded)
    from hit.cli import main

    t0 = time.perf_counter()
    main(list(args))
    return time.perf_counter() - t0


def test_01_parameter_counts(report, capsys):
    parts, ok = [], True
    for variant, (ref, _) in REFERENCE.items():
        out, _ = _cli("paramcount", "--variant", variant)
        secs = _cli_runtime("paramcount", "--variant", variant)
        capsys.readouterr()
        total = float(re.search(r"total\s+([\d.]+)M", out).group(1)) * 1e6
        share = float(re.search(r"backbone\s+[\d.]+M\s+([\d.]+)%", out).group(1))
        dev = total / ref - 1
        has_breakdown = all(p in out for p in ("embed", "stage1", "sa1", "stage2", "sa2", "stage3", "bridge", "head"))
        v_ok = abs(dev) < 0.05 and share > 85 and has_breakdown and secs < 1
        ok &= v_ok
        parts.append(f"{variant} {total / 1e6:.2f}M ({dev:+.1%}) backbone {share:.1f}% {secs * 1e3:.0f}ms")
    report(1, ok, "; ".join(parts) + " [needs |dev|<5%, backbone>85%, <1s]")


def test_02_mac_counts(report, capsys):
    parts, ok = [], True
    for variant, (_, ref) in REFERENCE.items():
        out, _ = _cli("macs", "--variant", variant)
        secs = _cli_runtime("macs", "--variant", variant)
        capsys.readouterr()
        total = float(re.search(r"total\s+([\d.]+)G", out).group(1)) * 1e9
        dev = total / ref - 1
        ok &= abs(dev) < 0.10 and secs < 1
        parts.append(f"{variant} {total / 1e9:.3f}G ({dev:+.1%}) {secs * 1e3:.0f}ms")
    report(2, ok, "; ".join(parts))


def test_03_base_shape_pipeline(report):
    cfg = ModelConfig.base()
    fp, os = cached_model("base").features(*image_pair(0, cfg))
    got = {"s_max": fp.s_max.shape, "s_mid": fp.s_mid.shape, "s_min": fp.s_min.shape, "g": fp.g.shape, "o_s": os.shape}
    want = {"s_max": (16, 16, 384), "s_mid": (8, 8, 512), "s_min": (4, 4, 768), "g": (1, 768), "o_s": (16, 16, 384)}
    report(3, got == want, " ".join(f"{k}={'x'.join(map(str, v))}" for k, v in got.items()))


def test_04_position_encoding_invariants(report):
    diag = Arrangement(Kind.DIAGONAL, (16, 16), (8, 8))
    disjoint = all(
        s[0] != t[0] and s[1] != t[1]
        for s in (global_coord(diag, Image.SEARCH, p) for p in itertools.product(range(16), range(16)))
        for t in (global_coord(diag, Image.TEMPLATE, p) for p in itertools.product(range(8), range(8)))
    )
    expected = {Kind.DIAGONAL: (False, False), Kind.SEPARATE: (True, True),
                Kind.VERTICAL: (True, False), Kind.HORIZONTAL: (False, True)}
    overlaps = all(coordinate_overlap(Arrangement(k, (16, 16), (8, 8))) == v for k, v in expected.items())
    rng = np.random.default_rng(0)
    sym = trans = True
    for kind in expected:
        arr = Arrangement(kind, (16, 16), (8, 8))
        table = BiasTable(rng.normal(size=(2, *arr.table_extent())).astype(np.float32))
        from hit.posenc import token_coords

        c = token_coords(arr)
        for h in range(2):
            m = build_bias_matrix(arr, table, h)
            sym &= np.array_equal(m, m.T)
            trans &= np.array_equal(table.lookup(c + 7, c + 7)[h], m)
    ok = disjoint and overlaps and sym and trans
    report(4, ok, f"diagonal disjoint={disjoint} overlaps={overlaps} symmetric={sym} translation={trans}")


def test_05_oracle_equivalence(report):
    rng = np.random.default_rng(5)
    kinds = list(Kind)[:4]
    worst_mha = worst_sa = worst_tc = 0.0
    for i in range(100):
        arr = Arrangement(kinds[i % 4], tuple(rng.integers(1, 4, 2)), tuple(rng.integers(1, 3, 2)))
        layer = ta._mha(rng, 5, int(rng.integers(1, 4)), int(rng.integers(1, 4)), arr)
        x = ta.rand(rng, arr.tokens, 5)
        bias = ta._oracle_bias(layer.bias_table.table, ta._pts(arr), ta._pts(arr))
        worst_mha = max(worst_mha, float(np.abs(mha_forward(layer, x, arr) - ta._run_oracle(layer, x, x, bias)).max()))

        arr = Arrangement(kinds[i % 4], tuple(2 * rng.integers(1, 4, 2)), tuple(2 * rng.integers(1, 3, 2)))
        layer = ta._shrink(rng, 4, 6, int(rng.integers(1, 3)), int(rng.integers(1, 4)), arr)
        x = ta.rand(rng, arr.tokens, 4)
        bias = ta._oracle_bias(layer.bias_table.table, ta._pts(arr, step=2), ta._pts(arr))
        out, _ = shrink_forward(layer, x, arr)
        worst_sa = max(worst_sa, float(np.abs(out - ta._run_oracle(layer, ta._even_tokens(x, arr), x, bias)).max()))

        xt = ta.rand(rng, *rng.integers(1, 5, 2), int(rng.integers(1, 4)))
        w = ta.rand(rng, 2, 2, xt.shape[2], int(rng.integers(1, 4)))
        b = ta.rand(rng, w.shape[3])
        worst_tc = max(worst_tc, float(np.abs(T.transpose_conv2d(xt, w, b) - oracles.transpose_conv_zero_insert(xt, w, b)).max()))
    ok = max(worst_mha, worst_sa, worst_tc) <= 1e-5
    report(5, ok, f"100 configs each: mha {worst_mha:.1e}, shrink {worst_sa:.1e}, transpose-conv {worst_tc:.1e} max-abs")


def test_06_loss(report):
    t0 = time.perf_counter()
    examples = [(tl.DISJOINT, -0.5), (tl.NESTED, 0.25)]
    ex_ok = all(abs(giou(*p) - e) < 1e-12 and abs(tl._torchvision_giou(*p) - e) < 1e-12 for p, e in examples)
    total = total_loss(*tl.DISJOINT)
    worst = 0.0
    for gt, pred in tl._random_pairs(1000, 11):
        fd = central_difference(lambda p: total_loss(gt, p), pred)
        worst = max(worst, float(np.max(np.abs(loss_grad(gt, pred) - fd) / np.maximum(np.abs(fd), 1e-8))))
    secs = time.perf_counter() - t0
    ok = ex_ok and abs(total - 13) < 1e-12 and worst < 1e-3 and secs < 10
    report(6, ok, f"examples={ex_ok} total_loss={total:g} grad rel err {worst:.1e} over 1000 pairs, {secs:.1f}s")


def test_07_end_to_end_rigged(report):
    frames, gt = synth_sequence(0, 100, "static")
    model = HiT.init(ModelConfig.base(), AblationSpec(), seed=0)
    model.head = FixedHead(BoxNorm(0.375, 0.375, 0.625, 0.625))
    t0 = time.perf_counter()
    a = run_sequence(model, frames, gt[0])
    secs = time.perf_counter() - t0
    b = run_sequence(model, frames, gt[0])
    err = max(max(abs(p - q) for p, q in zip(box.corners(), gt[0].corners())) for box in a)
    ok = err <= 0.5 and a == b and secs < 30
    report(7, ok, f"Base, 100 frames in {secs:.1f}s, max corner error {err:.2e}px, runs identical={a == b}")


def test_08_ablation_constructibility(report):
    cfg = ModelConfig.base()
    z, x = image_pair(0, cfg)
    t0 = time.perf_counter()
    bad = []
    for spec in all_specs():
        box = build_variant(cfg, spec, seed=0)(z, x)
        if not (isinstance(box, BoxNorm) and box.ordered and box.in_range):
            bad.append(spec.describe())
    secs = time.perf_counter() - t0
    report(8, not bad and secs < 300, f"140 specs at Base scale in {secs:.0f}s, invalid outputs: {len(bad)}")


def test_09_metrics(report):
    _, gt = synth_sequence(3, 50, "random")
    r = eval_sequence(gt, gt)
    rng = np.random.default_rng(9)
    mono = True
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        g = rng.uniform(1, 100, size=(n, 4))
        p = g + rng.normal(0, 15, size=(n, 4))
        p[:, 2:] = np.abs(p[:, 2:]) + 1
        mono &= bool(np.all(np.diff(eval_sequence(p, g)["curve"].success) <= 0))
    ok = r["auc"] == 1.0 and r["precision"] == 1.0 and mono
    report(9, ok, f"pred==gt auc={r['auc']} precision={r['precision']}; monotone over 1000 trajectories={mono}")


def test_10_out_of_scope_stated(report):
    text = README.read_text()
    section = text.split("## Not reproduced", 1)[-1] if "## Not reproduced" in text else ""
    needed = ["64.6", "80.0", "64.0", "fps"]
    ok = bool(section) and all(n in section for n in needed)
    report(10, ok, "README lists the accuracy and speed figures that need trained weights or specific hardware")
