import json

import pytest

from hit.cli import main


def test_paramcount_prints_breakdown(capsys):
    assert main(["paramcount", "--variant", "tiny"]) == 0
    out = capsys.readouterr().out
    for part in ("embed", "stage1", "sa1", "bridge", "head", "backbone", "deviation"):
        assert part in out


def test_macs_with_ablation(capsys):
    assert main(["macs", "--variant", "small", "--ablation", "downsample=subsample"]) == 0
    assert "G" in capsys.readouterr().out


def test_synth_track_eval_loop(tmp_path, capsys):
    seq = tmp_path / "seq"
    assert main(["synth", "--seed", "2", "--frames", "3", "--out", str(seq), "--motion", "static"]) == 0
    gt_line = (seq / "groundtruth.csv").read_text().splitlines()[1]
    _, x, y, w, h = gt_line.split(",")
    pred = tmp_path / "pred.csv"
    assert main(["track", "--variant", "tiny", "--frames", str(seq), "--init", f"{x},{y},{w},{h}",
                 "--out", str(pred), "--ablation", "bridge=max,mid", "pos=ver", "g=off"]) == 0
    capsys.readouterr()
    assert main(["eval", "--pred", str(seq / "groundtruth.csv"), "--gt", str(seq / "groundtruth.csv")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["auc"] == 1.0 and len(res["success_curve"]) == 21


def test_bench_reports_json(capsys):
    assert main(["bench", "--variant", "tiny", "--iters", "1", "--warmup", "0"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert {"mean_ms", "p50", "p95", "fps"} <= set(stats)


def test_seed_env_fallback(monkeypatch, tmp_path):
    monkeypatch.setenv("HIT_SEED", "5")
    a, b = tmp_path / "a", tmp_path / "b"
    main(["synth", "--frames", "1", "--out", str(a)])
    main(["synth", "--frames", "1", "--out", str(b), "--seed", "5"])
    assert (a / "groundtruth.csv").read_text() == (b / "groundtruth.csv").read_text()


def test_selfcheck_passes(capsys):
    assert main(["selfcheck"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_bad_ablation_is_an_error():
    with pytest.raises(ValueError):
        main(["paramcount", "--ablation", "pos=polar"])
