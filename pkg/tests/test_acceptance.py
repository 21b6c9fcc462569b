"""Acceptance gate, one test per criterion at the stated tolerances.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints a PASS/FAIL line per criterion.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from evmforge import cli, detect, evm, pulse, pyramid, ssim, synth, tfilter
from evmforge.detect import ClipRecord
from evmforge.evm import MagParams
from evmforge.tfilter import BandSpec, TimeSeries

criterion = pytest.mark.criterion


@criterion(1, "pyramid perfect reconstruction, 50 frames, < 10 s")
def test_pyramid_reconstruction(backend):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    depths = set()
    for i in range(50):
        h, w = int(rng.integers(16, 130)), int(rng.integers(16, 98))
        if i == 0:
            h, w = 16, 16
        elif i == 1:
            h, w = 129, 97
        # deepest depth the size admits, capped at 5
        top = min(5, 1 + int(np.floor(np.log2(min(h, w) / 2))))
        depth = top if i < 2 else int(rng.integers(1, top + 1))
        depths.add(depth)
        f = rng.random((h, w, 3))
        rec = pyramid.collapse(pyramid.build_laplacian(f, depth))
        worst = max(worst, float(np.abs(rec - f).max()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6
    assert depths == {1, 2, 3, 4, 5}
    assert elapsed < 10.0


@criterion(2, "ideal bandpass selectivity on bin-aligned tones")
def test_ideal_selectivity():
    fps, n = 30.0, 128  # bins every 0.234375 Hz
    t = np.arange(n)
    band = BandSpec(0.8, 1.0)
    inside = np.sin(2 * np.pi * 4 * t / n + 0.4)  # 0.9375 Hz
    outside = np.sin(2 * np.pi * 9 * t / n + 0.4)  # 2.109 Hz
    y_in = tfilter.ideal_bandpass(inside, fps, band)
    assert np.linalg.norm(y_in - inside) / np.linalg.norm(inside) < 1e-9
    assert np.abs(tfilter.ideal_bandpass(outside, fps, band)).max() < 1e-9
    y_dc = tfilter.ideal_bandpass(np.full(n, 0.6) + inside, fps, band)
    assert abs(y_dc.mean()) < 1e-15
    assert np.abs(tfilter.ideal_bandpass(np.full(n, 0.6), fps, band)).max() < 1e-15


@criterion(3, "magnification oracle, amplitude within 10% of (1+alpha)*eps")
def test_magnification_oracle(backend):
    eps, alpha = 0.004, 50
    seq = synth.sine_brightness(frames=64, width=32, height=32, freq=0.9375, amplitude=eps)
    out = evm.magnify(seq, MagParams(mode="COLOR", alpha=alpha, band=BandSpec(0.8, 1.0)))
    series = out.frames.mean(axis=(1, 2, 3))
    t = np.arange(64)
    amp = 2 * abs(np.dot(series - series.mean(), np.exp(-2j * np.pi * 2 * t / 64))) / 64
    assert abs(amp - (1 + alpha) * eps) <= 0.10 * (1 + alpha) * eps

    still = synth.static(frames=64)
    assert np.abs(evm.magnify(still, MagParams(alpha=alpha)).frames - still.frames).max() < 1e-6
    for mode in evm.MODES:
        same = evm.magnify(seq, MagParams(mode=mode, alpha=0))
        assert np.abs(same.frames - seq.frames).max() < 1e-6


def _ssim_loops(x, y, n=8, c1=1e-4, c2=9e-4):
    h, w = x.shape
    total, count = 0.0, 0
    for i in range(h - n + 1):
        for j in range(w - n + 1):
            px = x[i:i + n, j:j + n].ravel().tolist()
            py = y[i:i + n, j:j + n].ravel().tolist()
            mx, my = sum(px) / len(px), sum(py) / len(py)
            vx = sum((a - mx) ** 2 for a in px) / len(px)
            vy = sum((b - my) ** 2 for b in py) / len(py)
            cxy = sum((a - mx) * (b - my) for a, b in zip(px, py)) / len(px)
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
            count += 1
    return total / count


@criterion(4, "SSIM matches the direct double-loop oracle")
def test_ssim_oracle(backend):
    rng = np.random.default_rng(99)
    for _ in range(20):
        x = rng.random((16, 16))
        y = rng.random((16, 16)) if rng.random() < 0.5 else np.clip(x + rng.normal(0, 0.05, x.shape), 0, 1)
        assert abs(ssim.ssim_pair(x, y) - _ssim_loops(x, y)) < 1e-10
    assert ssim.ssim_pair(x, x) == 1.0
    c1 = 1e-4
    assert abs(ssim.ssim_pair(np.zeros((16, 16)), np.ones((16, 16))) - c1 / (1 + c1)) < 1e-12


@criterion(5, "pulse of a 1.096 Hz clip is 65.76 +- 0.5 bpm, < 30 s")
def test_pulse_reproduction(backend):
    start = time.perf_counter()
    band = BandSpec(1.0, 1.33)
    seq = synth.sine_brightness(frames=300, fps=30.0, freq=1.096, amplitude=0.004)
    out = evm.magnify(seq, MagParams(mode="COLOR", alpha=50, band=band))
    est = pulse.estimate_bpm(pulse.mean_series(out, channel="Y"), band)
    elapsed = time.perf_counter() - start
    assert abs(est.bpm - 65.76) <= 0.5
    assert elapsed < 30.0


@criterion(6, "classifier gradient, separable, XOR tree, hand-counted metrics")
def test_classifier_correctness():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(10, 7)), (rng.random(10) < 0.5).astype(float)
    w, b, h = rng.normal(size=7), -0.2, 1e-5
    _, dw, db = detect.logistic_loss_and_grad(w, b, X, y)
    num = []
    for k in range(8):
        e = np.zeros(8)
        e[k] = h
        f = [detect.logistic_loss_and_grad(w + s * e[:7], b + s * e[7], X, y)[0] for s in (1, -1)]
        num.append((f[0] - f[1]) / (2 * h))
    num = np.array(num)
    rel = np.abs(np.append(dw, db) - num) / np.maximum(np.abs(num), 1e-8)
    assert rel.max() < 1e-4

    recs = []
    for i in range(20):
        label = "FAKE" if i % 2 else "REAL"
        f = rng.normal(0, 0.3, 7)
        f[0] += 1.0 if label == "FAKE" else -1.0
        recs.append(ClipRecord(f"s{i}", label, f))
    model = detect.train_logistic(recs, {"learning_rate": 0.1, "epochs": 500})
    assert detect.evaluate(model, recs, split=None).accuracy == 1.0

    xor = [ClipRecord(f"x{i}", lab, (a, c, 0, 0, 0, 0, 0))
           for i, (a, c, lab) in enumerate([(0, 0, "REAL"), (0, 1, "FAKE"), (1, 0, "FAKE"), (1, 1, "REAL")])]
    tree = detect.train_tree(xor, {"max_depth": 2})
    assert detect.evaluate(tree, xor, split=None).accuracy == 1.0

    truth = [True] * 4 + [False] * 6
    prob = [1, 1, 1, 0] + [1, 1] + [0, 0, 0, 0]
    m = detect.metrics_from_predictions(truth, prob)
    assert m.confusion == {"TP": 3, "FN": 1, "FP": 2, "TN": 4}
    assert (m.precision, m.recall, m.accuracy) == (0.6, 0.75, 0.7)


@criterion(7, "80.75/19.25 manifest balanced to parity on TRAIN, TEST untouched")
def test_imbalance(tmp_path):
    rng = np.random.default_rng(1925)
    n, n_fake = 400, 323  # 80.75% FAKE, 19.25% REAL
    labels = ["FAKE"] * n_fake + ["REAL"] * (n - n_fake)
    order = rng.permutation(n)
    entries = [{"clip_id": f"v{i:03d}", "path": f"v{i:03d}", "label": labels[k],
                "split": "TEST" if i % 5 == 0 else "TRAIN"} for i, k in enumerate(order)]
    (tmp_path / "m.json").write_text(json.dumps(entries))
    manifest = cli.load_manifest(tmp_path / "m.json")
    records = [ClipRecord(e.clip_id, e.label, rng.random(7), e.split) for e in manifest]

    a = detect.oversample_minority(records, seed=7)
    b = detect.oversample_minority(records, seed=7)
    assert a == b
    train = [r for r in a if r.split == "TRAIN"]
    assert sum(r.label == "FAKE" for r in train) == sum(r.label == "REAL" for r in train)
    assert [r for r in a if r.split == "TEST"] == [r for r in records if r.split == "TEST"]
    assert {r.features for r in train} == {r.features for r in records if r.split == "TRAIN"}


def _pipeline(root: Path):
    def run(*argv):
        assert cli.main([str(a) for a in argv]) == 0, argv

    clips = []
    for i in range(6):
        kind, label = ("glitch", "FAKE") if i % 2 else ("sine_translation", "REAL")
        run("synth", kind, "--out", root / "clips" / f"c{i}", "--frames", 32, "--seed", i)
        clips.append({"clip_id": f"c{i}", "path": f"clips/c{i}", "label": label,
                      "split": "TEST" if i >= 4 else "TRAIN"})
    (root / "manifest.json").write_text(json.dumps(clips))
    m = root / "manifest.json"
    run("magnify", "--manifest", m, "--out", root / "mag", "--alpha", 20)
    run("features", "--manifest", m, "--out", root / "feat", "--alpha", 20)
    run("train", "--features", root / "feat" / "features.csv", "--manifest", m,
        "--out", root / "model", "--seed", 3)
    run("eval", "--features", root / "feat" / "features.csv", "--manifest", m,
        "--model-file", root / "model" / "model.json", "--out", root / "eval")
    return {p.relative_to(root): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.suffix in (".csv", ".json")}


@criterion(8, "end-to-end pipeline reruns are byte-identical")
def test_end_to_end_determinism(tmp_path):
    first = _pipeline(tmp_path / "a")
    second = _pipeline(tmp_path / "b")
    assert Path("eval/metrics.json") in first and Path("model/model.json") in first
    assert first.keys() == second.keys()
    for k in first:
        assert first[k] == second[k], k


@criterion(9, "mean EVM SSIM non-increasing over alpha 10..50 on glitch clips")
def test_noise_trend(backend):
    alphas = [10, 20, 30, 40, 50]
    for seed in range(3):
        seq = synth.glitch(frames=64, seed=seed)
        means = [ssim.features(ssim.ssim_series(out, source="EVM")).mean
                 for out in evm.sweep_alpha(seq, MagParams(), alphas)]
        assert all(b <= a for a, b in zip(means, means[1:])), (seed, means)
