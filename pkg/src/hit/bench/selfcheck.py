"""Fast invariant sweep run by ``hit selfcheck``: one line per check, nonzero exit on failure."""
from __future__ import annotations

import time
import traceback

import numpy as np

from hit import oracles
from hit import tensor as T
from hit.ablation import AblationSpec
from hit.attention import Linear, MhaLayer, ShrinkLayer, mha_forward, shrink_forward
from hit.backbone import ModelConfig
from hit.bench.cost import cost_report
from hit.bench.metrics import eval_sequence, success_curve
from hit.bench.synth import synth_sequence
from hit.head import BoxNorm
from hit.loss import giou, loss_grad, total_loss
from hit.model import HiT
from hit.oracles import central_difference
from hit.posenc import (
    Arrangement,
    BiasTable,
    Image,
    Kind,
    build_bias_matrix,
    coordinate_overlap,
    global_coord,
    token_coords,
)
from hit.tracker import BBox, CropTransform

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _lin(rng, i, o):
    return Linear(rng.normal(size=(i, o)).astype(np.float32) * 0.5, rng.normal(size=o).astype(np.float32) * 0.1)


@check
def softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    x = (rng.normal(size=(50, 17)) * 30).astype(np.float32)
    return np.abs(T.softmax_rows(x).sum(axis=1) - 1).max() <= 1e-6


@check
def transpose_conv_matches_zero_insertion():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 3, 2)).astype(np.float32)
    w = rng.normal(size=(2, 2, 2, 3)).astype(np.float32)
    return np.abs(T.transpose_conv2d(x, w) - oracles.transpose_conv_zero_insert(x, w)).max() <= 1e-5


@check
def diagonal_arrangement_has_no_shared_coordinates():
    arr = Arrangement(Kind.DIAGONAL, (16, 16), (8, 8))
    sx = {global_coord(arr, Image.SEARCH, (x, y))[0] for x in range(16) for y in range(16)}
    sy = {global_coord(arr, Image.SEARCH, (x, y))[1] for x in range(16) for y in range(16)}
    tx = {global_coord(arr, Image.TEMPLATE, (x, y))[0] for x in range(8) for y in range(8)}
    ty = {global_coord(arr, Image.TEMPLATE, (x, y))[1] for x in range(8) for y in range(8)}
    return not (sx & tx) and not (sy & ty) and coordinate_overlap(arr) == (False, False)


@check
def ablation_arrangements_overlap_as_expected():
    exp = {Kind.VERTICAL: (True, False), Kind.HORIZONTAL: (False, True), Kind.SEPARATE: (True, True)}
    return all(coordinate_overlap(Arrangement(k, (16, 16), (8, 8))) == v for k, v in exp.items())


@check
def bias_matrix_symmetric():
    rng = np.random.default_rng(2)
    arr = Arrangement(Kind.DIAGONAL, (4, 4), (2, 2))
    table = BiasTable(rng.normal(size=(2, *arr.table_extent())).astype(np.float32))
    m = build_bias_matrix(arr, table, 1)
    return np.array_equal(m, m.T)


@check
def mha_matches_loop_oracle():
    rng = np.random.default_rng(3)
    arr = Arrangement(Kind.DIAGONAL, (2, 2), (1, 1))
    c, n, d = 6, 2, 3
    layer = MhaLayer(n, d, _lin(rng, c, n * d), _lin(rng, c, n * d), _lin(rng, c, 2 * n * d), _lin(rng, 2 * n * d, c),
                     BiasTable(rng.normal(size=(n, *arr.table_extent())).astype(np.float32)))
    x = rng.normal(size=(arr.tokens, c)).astype(np.float32)
    bias = layer.bias_table.lookup(token_coords(arr), token_coords(arr))
    ref = oracles.attention_loop(x, x, layer.wq.w, layer.wq.b, layer.wk.w, layer.wk.b, layer.wv.w, layer.wv.b,
                                 layer.wo.w, layer.wo.b, n, d, bias)
    return np.abs(mha_forward(layer, x, arr) - ref).max() <= 1e-5


@check
def shrink_token_arithmetic():
    rng = np.random.default_rng(4)
    arr = Arrangement(Kind.DIAGONAL, (4, 4), (2, 2))
    c, cn, n, d = 4, 6, 1, 2
    layer = ShrinkLayer(n, d, _lin(rng, c, n * d), _lin(rng, c, n * d), _lin(rng, c, 4 * n * d), _lin(rng, 4 * n * d, cn))
    out, arr2 = shrink_forward(layer, rng.normal(size=(arr.tokens, c)).astype(np.float32), arr)
    return out.shape == (5, cn) and arr2.search_extent == (2, 2) and arr2.template_extent == (1, 1)


@check
def giou_and_loss_examples():
    return (
        abs(giou((0, 0, 0.5, 0.5), (0.5, 0.5, 1, 1)) + 0.5) < 1e-12
        and abs(giou((0, 0, 1, 1), (0.25, 0.25, 0.75, 0.75)) - 0.25) < 1e-12
        and abs(total_loss((0, 0, 0.5, 0.5), (0.5, 0.5, 1, 1)) - 13) < 1e-12
    )


def _rand_box(rng):
    xs, ys = np.sort(rng.uniform(0, 1, 2)), np.sort(rng.uniform(0, 1, 2))
    return np.array([xs[0], ys[0], xs[1], ys[1]])


@check
def loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        gt, pred = _rand_box(rng), _rand_box(rng)
        if min(pred[2] - pred[0], pred[3] - pred[1], gt[2] - gt[0], gt[3] - gt[1]) < 0.02:
            continue
        if np.min(np.abs(gt[:, None] - pred[None, :])) < 1e-2:
            continue
        g = loss_grad(gt, pred)
        fd = central_difference(lambda p: total_loss(gt, p), pred)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-8))))
    return worst < 1e-3


@check
def analytic_costs_match_instrumented_forward():
    cfg = ModelConfig.tiny()
    model = HiT.init(cfg, AblationSpec(), seed=0)
    rng = np.random.default_rng(6)
    z = rng.random((128, 128, 3), dtype=np.float32)
    x = rng.random((256, 256, 3), dtype=np.float32)
    with T.count_macs() as counter:
        model(z, x)
    rep = cost_report(cfg)
    return counter.total == rep.macs and model.num_params == rep.params


@check
def crop_transform_round_trip():
    tf = CropTransform(240.0, 160.0, 160.0, 256)
    box = BBox(300, 220, 40, 40)
    back = tf.to_frame(tf.to_crop(box))
    return max(abs(a - b) for a, b in zip(back, box.corners())) <= 0.5


@check
def perfect_trajectory_scores_one():
    _, gt = synth_sequence(0, 20, "random")
    r = eval_sequence(gt, gt)
    return r["auc"] == 1.0 and r["precision"] == 1.0


@check
def success_curve_monotone():
    rng = np.random.default_rng(7)
    s = success_curve(rng.uniform(0, 1, size=100)).success
    return bool(np.all(np.diff(s) <= 0))


@check
def head_output_ordered_and_in_range():
    model = HiT.init(ModelConfig.tiny(), AblationSpec(), seed=3)
    rng = np.random.default_rng(8)
    b = model(rng.random((128, 128, 3), dtype=np.float32), rng.random((256, 256, 3), dtype=np.float32))
    return isinstance(b, BoxNorm) and b.ordered and b.in_range


def run(out=print) -> bool:
    ok = True
    for fn in CHECKS:
        t0 = time.perf_counter()
        try:
            passed = bool(fn())
            detail = ""
        except Exception:  # report and keep going
            passed = False
            detail = " " + traceback.format_exc().strip().splitlines()[-1]
        ok &= passed
        out(f"{'PASS' if passed else 'FAIL'}  {fn.__name__}  ({time.perf_counter() - t0:.2f}s){detail}")
    return ok
