"""Release gate: one test per acceptance criterion, each printing a verdict."""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from spinemetrics import kernels
from spinemetrics.cli import main as cli_main
from spinemetrics.instancing import label_chain, nms, split_fused
from spinemetrics.mask_core import (Instance, InstanceSet, mask_iou,
                                    rle_decode, rle_encode)
from spinemetrics.metrics import (DatasetSummary, compute_metrics,
                                  confusion_matrix, evaluate_pair)
from spinemetrics.report import render_report
from spinemetrics.synthgen import PerturbSpec, SynthSpec, generate_spine, perturb
from spinemetrics.taxonomy import DEFAULT_TAXONOMY as TAX

LUMBAR = TAX.index_of("vertebra_lumbar")


def verdict(name, passed):
    print(f"ACCEPTANCE {'PASS' if passed else 'FAIL'}: {name}")
    assert passed, name


def brute_force_metrics(gt, pred, n_cl):
    h, w = gt.shape
    n = [[0] * n_cl for _ in range(n_cl)]
    for y in range(h):
        for x in range(w):
            n[gt[y, x]][pred[y, x]] += 1
    t = [sum(n[i]) for i in range(n_cl)]
    pixel_acc = sum(n[i][i] for i in range(n_cl)) / sum(t)
    present = [i for i in range(n_cl) if t[i] > 0]
    accs = [n[i][i] / t[i] for i in present]
    ious = []
    for i in present:
        denom = t[i] + sum(n[j][i] for j in range(n_cl)) - n[i][i]
        ious.append(n[i][i] / denom if denom else 0.0)
    fw = sum(t[i] * iou for i, iou in zip(present, ious)) / sum(t[i] for i in present)
    return pixel_acc, sum(accs) / len(accs), sum(ious) / len(ious), fw


def test_metric_oracle_equivalence():
    start = time.perf_counter()
    ok = True
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n_cl = int(rng.integers(2, 6))
        h, w = int(rng.integers(2, 33)), int(rng.integers(2, 33))
        gt = rng.integers(0, n_cl, (h, w))
        pred = rng.integers(0, n_cl, (h, w))
        rec = compute_metrics(confusion_matrix(gt, pred, n_cl))
        exp = brute_force_metrics(gt, pred, n_cl)
        got = (rec.pixel_accuracy, rec.mean_accuracy, rec.mean_iou, rec.fw_iou)
        if any(abs(g - e) > 1e-12 for g, e in zip(got, exp)):
            ok = False
            break
    elapsed = time.perf_counter() - start
    verdict("metric oracle equivalence (1000 pairs, 1e-12)", ok and elapsed < 10.0)


def test_identity_on_synthetic_spines():
    ok = True
    for seed in range(100):
        gt, _, _, _ = generate_spine(SynthSpec(lordosis_curve=float(seed % 60)),
                                     seed=seed)
        rec = evaluate_pair(gt, gt, "binary")
        if (rec.pixel_accuracy, rec.mean_accuracy, rec.mean_iou, rec.fw_iou) \
                != (1.0, 1.0, 1.0, 1.0):
            ok = False
            break
    verdict("identity metrics on 100 synthetic spines", ok)


def test_exact_pixel_accuracy_arithmetic():
    rng = np.random.default_rng(0)
    gt = (rng.random((16, 16)) < 0.5).astype(int)
    ok = True
    for k in (1, 5, 17):
        pred = gt.copy().ravel()
        pred[:k] = 1 - pred[:k]
        rec = compute_metrics(confusion_matrix(gt, pred.reshape(16, 16), 2))
        if rec.pixel_accuracy != 1 - k / 256:
            ok = False
    verdict("exact pixel-accuracy flip arithmetic k in {1,5,17}", ok)


def test_published_table_reproduction():
    published = {
        "U-Net": (0.9817, 0.8864, 0.9265, 0.9648),
        "Mask R-CNN": (0.9658, 0.8678, 0.9025, 0.9347),
        "PSPNet": (0.9788, 0.8650, 0.9091, 0.9593),
        "DeepLabV3": (0.9800, 0.8814, 0.9225, 0.9616),
        "YOLACT": (0.9784, 0.9164, 0.9443, 0.9584),
    }
    summaries = {n: DatasetSummary(pa, ma, mi, fw, [])
                 for n, (pa, ma, mi, fw) in published.items()}
    text = render_report(summaries, list(published))
    lines = text.splitlines()
    ok = (len(lines) == 5
          and lines[1].split()[-5:] == ["98.17", "96.58", "97.88", "98.00", "97.84"]
          and lines[2].split()[-5:] == ["92.65", "90.25", "90.91", "92.25", "94.43"]
          and lines[3].split()[-5:] == ["88.64", "86.78", "86.50", "88.14", "91.64"]
          and lines[4].split()[-5:] == ["96.48", "93.47", "95.93", "96.16", "95.84"])
    verdict("published comparison table reproduced to 2 decimals", ok)


def test_nms_postcondition():
    def rect(x, y, w, h):
        m = np.zeros((64, 64), np.uint8)
        m[y:y + h, x:x + w] = 1
        return m

    ok = True
    for seed in range(200):
        rng = np.random.default_rng(seed)
        insts = []
        for i in range(int(rng.integers(2, 10))):
            x, y = rng.integers(0, 44, 2)
            w, h = rng.integers(4, 20, 2)
            insts.append(Instance(i, int(rng.integers(1, 4)),
                                  rect(int(x), int(y), int(w), int(h)),
                                  score=float(rng.random())))
        threshold = float(rng.uniform(0.2, 0.7))
        kept = nms(InstanceSet(64, 64, insts), threshold, class_aware=True)
        for a in kept.instances:
            for b in kept.instances:
                if a.id < b.id and a.class_index == b.class_index:
                    if mask_iou(a.mask, b.mask) > threshold:
                        ok = False
    verdict("NMS post-condition over 200 seeded sets", ok)


def test_anatomical_labeling_clean():
    correct = 0
    for seed in range(100):
        spec = SynthSpec(lumbar_count=3 + seed % 4, include_th12=(seed % 2 == 1),
                         height=640, lordosis_curve=float(10 + (seed * 7) % 50),
                         overlap_fraction=(0.0, 0.3), gap=(0.0, 0.0))
        gt, _, chain, _ = generate_spine(spec, seed=seed)
        if label_chain(gt, TAX).labels() == chain.labels():
            correct += 1
    verdict(f"anatomical labeling 100% clean ({correct}/100)", correct == 100)


def test_anatomical_labeling_fused_recovery():
    recovered = 0
    for seed in range(100):
        spec = SynthSpec(lordosis_curve=50.0, gap=(4.0, 8.0))
        gt, _, chain, _ = generate_spine(spec, seed=seed)
        insts = list(gt.instances)
        rng = np.random.default_rng(seed + 999)
        j = int(rng.integers(1, len(insts) - 1))  # lumbar-lumbar pair
        a, b = insts[j], insts[j + 1]
        union = kernels.closing(((a.mask != 0) | (b.mask != 0)).astype(np.uint8), 3)
        merged = [i for i in insts if i.id not in (a.id, b.id)]
        merged.append(Instance(a.id, a.class_index, union))
        repaired = []
        for inst in merged:
            parts, _ = split_fused(inst)
            repaired.extend(parts.instances)
        for new_id, inst in enumerate(repaired):
            inst.id = new_id
        try:
            got = label_chain(InstanceSet(gt.width, gt.height, repaired), TAX)
            if got.labels() == chain.labels():
                recovered += 1
        except Exception:
            pass
    verdict(f"fused-pair recovery >= 90 ({recovered}/100)", recovered >= 90)


def test_endplate_angle_recovery():
    from spinemetrics.morphometry import approximate_endplates

    def rotated_rect(theta):
        th = np.radians(theta)
        u = np.array([np.cos(th), np.sin(th)])
        up = np.array([np.sin(th), -np.cos(th)])
        c = np.array([64.0, 64.0])
        pts = [c + 14 * up - 25 * u, c + 14 * up + 25 * u,
               c - 14 * up + 25 * u, c - 14 * up - 25 * u]
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        return Instance(0, LUMBAR, kernels.fill_polygon(xs, ys, 128, 128))

    errors = []
    for theta in (-30, -15, 0, 15, 30):
        sup, inf = approximate_endplates(rotated_rect(theta))
        errors.append(abs(sup.angle - theta))
        errors.append(abs(inf.angle - theta))
    mae = float(np.mean(errors))
    verdict(f"endplate mean abs angle error {mae:.3f} <= 1.5 deg", mae <= 1.5)


def test_lordosis_recovery():
    from spinemetrics.morphometry import lordosis_angle
    within = 0
    for seed in range(50):
        curve = 60.0 * seed / 49.0
        spec = SynthSpec(lordosis_curve=curve, gap=(4.0, 8.0))
        _, _, chain, con = generate_spine(spec, seed=seed)
        if abs(lordosis_angle(chain) - con.lordosis_angle) <= 2.0:
            within += 1
    verdict(f"lordosis within 2 deg in {within}/50 (need >= 48)", within >= 48)


def test_osteophyte_detection():
    from spinemetrics.morphometry import detect_osteophytes
    captured_ok = examined = 0
    seed = 0
    while examined < 50:  # 50 vertebrae that actually carry spurs
        gt, _, chain, con = generate_spine(SynthSpec(spur_probability=1.0),
                                           seed=seed)
        seed += 1
        for entry, truth in zip(chain.entries, con.vertebrae):
            spur = truth.osteophytes.residue_mask
            if not spur.any() or examined >= 50:
                continue
            examined += 1
            rep = detect_osteophytes(entry.instance)
            if (rep.residue_mask & spur).sum() >= 0.90 * spur.sum():
                captured_ok += 1

    clean_ok = examined = 0
    seed = 0
    while examined < 50:  # 50 spur-free vertebrae
        gt, _, chain, _ = generate_spine(SynthSpec(), seed=seed)
        seed += 1
        for entry in chain.entries:
            if examined >= 50:
                continue
            examined += 1
            rep = detect_osteophytes(entry.instance)
            if rep.residue_mask.sum() < 0.01 * entry.instance.mask.sum():
                clean_ok += 1
    verdict(f"osteophyte capture ({captured_ok}/50) and clean residue "
            f"({clean_ok}/50)", captured_ok == 50 and clean_ok == 50)


def test_rle_round_trip():
    ok = True
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        h, w = int(rng.integers(1, 65)), int(rng.integers(1, 65))
        m = (rng.random((h, w)) < rng.random()).astype(np.uint8)
        if not np.array_equal(rle_decode(rle_encode(m)), m):
            ok = False
            break
    verdict("RLE round trip on 1000 masks", ok)


def test_degradation_monotonicity():
    means = []
    for amplitude in (0, 1, 2, 3, 4):
        vals = []
        for seed in range(50):
            gt, _, _, _ = generate_spine(SynthSpec(), seed=seed)
            pred = perturb(gt, PerturbSpec(jitter_px=float(amplitude)),
                           seed=seed + 5000)
            vals.append(evaluate_pair(gt, pred, "binary").mean_iou)
        means.append(float(np.mean(vals)))
    monotone = all(means[i + 1] <= means[i] + 0.01 for i in range(4))
    verdict(f"jitter degradation monotone {['%.4f' % m for m in means]}",
            monotone and means[0] == 1.0)


def test_eval_determinism_across_workers(tmp_path):
    runner = CliRunner()
    out = tmp_path / "ds"
    result = runner.invoke(cli_main, ["synth", "--out-dir", str(out),
                                      "--count", "20", "--seed", "300",
                                      "--pred-jitter", "1.5"],
                           catch_exceptions=False)
    assert result.exit_code == 0, result.output
    csvs = []
    for workers in ("1", "8"):
        path = tmp_path / f"w{workers}.csv"
        result = runner.invoke(cli_main, ["eval", "--gt-dir", str(out / "gt"),
                                          "--pred-dir", str(out / "pred"),
                                          "--out", str(path),
                                          "--workers", workers],
                               catch_exceptions=False)
        assert result.exit_code == 0, result.output
        csvs.append(path.read_bytes())
    verdict("eval CSV byte-identical for 1 vs 8 workers", csvs[0] == csvs[1])
