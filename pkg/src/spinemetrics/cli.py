"""Command-line pipeline: rasterize, eval, instances, label, morph, synth,
overlay, report.

Options can come from a key=value config file (--config); explicit flags win.
All file outputs are written atomically (temp file + rename).
"""

import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import annotation_io, instancing, metrics, morphometry, render, report, synthgen
from .errors import SpineMetricsError
from .mask_core import (load_mask_png, merge_to_binary, save_mask_png,
                        sidecar_dumps, sidecar_loads)
from .taxonomy import DEFAULT_TAXONOMY, LabelTaxonomy


def _write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _save_png_atomic(path, array, mode):
    import io
    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    _write_atomic(path, buf.getvalue())


def _load_config(ctx, param, value):
    """Parse a key = value config file into the context's default map."""
    if value is None:
        return None
    overrides = {}
    for lineno, line in enumerate(Path(value).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        overrides[key.strip().replace("-", "_")] = raw.strip()
    ctx.default_map = dict(ctx.default_map or {})
    for sub in ("rasterize", "eval", "instances", "label", "morph",
                "synth", "overlay", "report"):
        ctx.default_map.setdefault(sub, {})
        ctx.default_map[sub].update(overrides)
    return value


def _taxonomy_from(path):
    if path is None:
        return DEFAULT_TAXONOMY
    names = tuple(n for n in Path(path).read_text().split() if n)
    return LabelTaxonomy(names)


@click.group()
@click.option("--config", type=click.Path(exists=True), callback=_load_config,
              expose_value=False, is_eager=True,
              help="key = value file supplying option defaults; flags win.")
def main():
    """Segmentation evaluation and lumbar morphometry for spine radiographs."""


@main.command()
@click.argument("via_json", type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--image-width", type=int, default=0)
@click.option("--image-height", type=int, default=0)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def rasterize(via_json, out_dir, image_width, image_height, taxonomy_file):
    """Rasterize a VIA v2 export into semantic PNGs and instance sidecars."""
    taxonomy = _taxonomy_from(taxonomy_file)
    default_size = (image_width, image_height) if image_width and image_height else None
    document = Path(via_json).read_text()
    failed = []
    for ann in annotation_io.parse_via(document, taxonomy, default_size=default_size):
        stem = Path(ann.image_id).stem
        try:
            semantic, iset = annotation_io.rasterize(ann, taxonomy)
        except SpineMetricsError as e:
            failed.append((ann.image_id, str(e)))
            continue
        _save_png_atomic(Path(out_dir) / f"{stem}_semantic.png",
                         semantic.astype(np.uint8), "L")
        _write_atomic(Path(out_dir) / f"{stem}_instances.json",
                      sidecar_dumps(iset, taxonomy))
    if failed:
        for image_id, msg in failed:
            click.echo(f"FAILED {image_id}: {msg}", err=True)
        sys.exit(1)


def _eval_one(stem, gt_path, pred_path, taxonomy, mode, n_cl):
    gt, _ = sidecar_loads(gt_path.read_text(), taxonomy)
    pred, _ = sidecar_loads(pred_path.read_text(), taxonomy)
    return stem, metrics.evaluate_pair(gt, pred, mode=mode, n_cl=n_cl)


@main.command(name="eval")
@click.option("--gt-dir", required=True, type=click.Path(exists=True))
@click.option("--pred-dir", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["binary", "per_class"]), default="binary")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--report-out", type=click.Path(), default=None)
@click.option("--workers", type=int, default=1)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def eval_cmd(gt_dir, pred_dir, mode, out_csv, report_out, workers, taxonomy_file):
    """Evaluate prediction sidecars against ground-truth sidecars."""
    taxonomy = _taxonomy_from(taxonomy_file)
    n_cl = 2 if mode == "binary" else taxonomy.n_classes
    gt_files = {p.stem: p for p in sorted(Path(gt_dir).glob("*.json"))}
    pred_files = {p.stem: p for p in sorted(Path(pred_dir).glob("*.json"))}
    stems = sorted(set(gt_files) & set(pred_files))
    if not stems:
        click.echo("no matching sidecar pairs", err=True)
        sys.exit(1)

    results = {}
    failed = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {stem: pool.submit(_eval_one, stem, gt_files[stem],
                                     pred_files[stem], taxonomy, mode, n_cl)
                   for stem in stems}
        for stem in stems:
            try:
                _, rec = futures[stem].result()
                results[stem] = rec
            except Exception as e:  # per-image failures must not kill the run
                failed.append((stem, str(e)))

    records = sorted(results.items())
    if records:
        _write_atomic(out_csv, metrics.metrics_csv(records, n_cl))
        if report_out:
            summary = metrics.aggregate(records)
            _write_atomic(report_out,
                          report.render_report({"model": summary}, ["model"]))
    if failed:
        for stem, msg in failed:
            click.echo(f"FAILED {stem}: {msg}", err=True)
        sys.exit(1)


@main.command()
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--min-area", type=int, default=instancing.DEFAULT_MIN_AREA)
@click.option("--split/--no-split", default=True,
              help="split fused blobs by erosion before emitting instances")
@click.option("--max-erosions", type=int, default=instancing.DEFAULT_MAX_EROSIONS)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def instances(mask_path, out, min_area, split, max_erosions, taxonomy_file):
    """Extract instances from a semantic mask PNG into a sidecar document."""
    taxonomy = _taxonomy_from(taxonomy_file)
    semantic = load_mask_png(mask_path)
    h, w = semantic.shape
    collected = []
    for class_index in sorted(int(v) for v in np.unique(semantic) if v != 0):
        comp = instancing.connected_components(
            (semantic == class_index).astype(np.uint8), class_index, min_area)
        for inst in comp.instances:
            if split:
                parts, _ = instancing.split_fused(inst, max_erosions, min_area)
                collected.extend(parts.instances)
            else:
                collected.append(inst)
    for new_id, inst in enumerate(collected):
        inst.id = new_id
    iset = instancing.InstanceSet(w, h, collected)
    _write_atomic(out, sidecar_dumps(iset, taxonomy))


@main.command()
@click.option("--sidecar", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--iou-threshold", type=float, default=instancing.DEFAULT_IOU_THRESHOLD)
@click.option("--nms/--no-nms", "apply_nms", default=True)
@click.option("--max-gap-factor", type=float, default=instancing.DEFAULT_MAX_GAP_FACTOR)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def label(sidecar, out, iou_threshold, apply_nms, max_gap_factor, taxonomy_file):
    """Anatomically label a sidecar's vertebra instances (S1, L5..L1, ...)."""
    taxonomy = _taxonomy_from(taxonomy_file)
    iset, _ = sidecar_loads(Path(sidecar).read_text(), taxonomy)
    if apply_nms:
        iset = instancing.nms(iset, iou_threshold, class_aware=True)
    chain = instancing.label_chain(iset, taxonomy, max_gap_factor)
    labels = {e.instance.id: e.label for e in chain.entries}
    _write_atomic(out, sidecar_dumps(iset, taxonomy, labels=labels))


@main.command()
@click.option("--sidecar", required=True, type=click.Path(exists=True),
              help="labeled sidecar produced by the label command")
@click.option("--out", required=True, type=click.Path())
@click.option("--csv-out", type=click.Path(), default=None)
@click.option("--kernel", type=int, default=morphometry.DEFAULT_OSTEOPHYTE_KERNEL)
@click.option("--scale", type=float, default=1.0,
              help="mm per pixel, applied to serialized distances only")
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def morph(sidecar, out, csv_out, kernel, scale, taxonomy_file):
    """Measure a labeled chain: endplates, osteophytes, lordosis, gaps."""
    taxonomy = _taxonomy_from(taxonomy_file)
    iset, labels = sidecar_loads(Path(sidecar).read_text(), taxonomy)
    chain = instancing.chain_from_labels(iset, labels)
    record = morphometry.measure_chain(chain, kernel=kernel)
    _write_atomic(out, morphometry.record_to_json(record, scale=scale))
    if csv_out:
        _write_atomic(csv_out, morphometry.record_to_csv(record, scale=scale))


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--count", type=int, default=1)
@click.option("--seed", type=int, default=0)
@click.option("--canvas-width", type=int, default=256)
@click.option("--canvas-height", type=int, default=512)
@click.option("--lumbar-count", type=int, default=5)
@click.option("--lordosis-curve", type=float, default=30.0)
@click.option("--include-th12", is_flag=True, default=False)
@click.option("--spur-probability", type=float, default=0.0)
@click.option("--cages", is_flag=True, default=False)
@click.option("--screws", is_flag=True, default=False)
@click.option("--pred-jitter", type=float, default=0.0,
              help="also emit perturbed prediction sidecars with this jitter")
@click.option("--pred-drop", type=float, default=0.0)
@click.option("--pred-extras", type=int, default=0)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def synth(out_dir, count, seed, canvas_width, canvas_height, lumbar_count,
          lordosis_curve, include_th12, spur_probability, cages, screws,
          pred_jitter, pred_drop, pred_extras, taxonomy_file):
    """Generate synthetic spine fixtures (masks, sidecars, construction truth)."""
    taxonomy = _taxonomy_from(taxonomy_file)
    spec = synthgen.SynthSpec(
        width=canvas_width, height=canvas_height, lumbar_count=lumbar_count,
        lordosis_curve=lordosis_curve, include_th12=include_th12,
        spur_probability=spur_probability, with_cages=cages, with_screws=screws,
    )
    pspec = synthgen.PerturbSpec(jitter_px=pred_jitter, drop_probability=pred_drop,
                                 extra_instance_count=pred_extras)
    emit_pred = pred_jitter > 0 or pred_drop > 0 or pred_extras > 0
    out = Path(out_dir)
    gt_dir = out / "gt"
    pred_dir = out / "pred"
    for i in range(count):
        s = seed + i
        stem = f"spine_{s:04d}"
        gt, semantic, chain, construction = synthgen.generate_spine(spec, s, taxonomy)
        _save_png_atomic(gt_dir / f"{stem}_semantic.png", semantic, "L")
        _write_atomic(gt_dir / f"{stem}.json", sidecar_dumps(
            gt, taxonomy, labels={e.instance.id: e.label for e in chain.entries}))
        _write_atomic(gt_dir / f"{stem}_truth.json",
                      morphometry.record_to_json(construction))
        if emit_pred:
            pred = synthgen.perturb(gt, pspec, seed=s + 10_000)
            _write_atomic(pred_dir / f"{stem}.json", sidecar_dumps(pred, taxonomy))


@main.command()
@click.option("--sidecar", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--image", "image_path", type=click.Path(exists=True), default=None)
@click.option("--taxonomy-file", type=click.Path(exists=True), default=None)
def overlay(sidecar, out, image_path, taxonomy_file):
    """Render instances (colored by anatomical label when present) to a PNG."""
    taxonomy = _taxonomy_from(taxonomy_file)
    iset, labels = sidecar_loads(Path(sidecar).read_text(), taxonomy)
    chain = instancing.chain_from_labels(iset, labels) if labels else None
    base = load_mask_png(image_path) if image_path else None
    rgb = render.render_overlay(base, iset, chain)
    _save_png_atomic(out, rgb, "RGB")


@main.command(name="report")
@click.argument("inputs", nargs=-1, required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--csv-out", type=click.Path(), default=None)
def report_cmd(inputs, out, csv_out):
    """Render the model comparison table from NAME=METRICS_CSV inputs."""
    import csv as _csv
    summaries = {}
    names = []
    for item in inputs:
        if "=" not in item:
            raise click.BadParameter(f"expected NAME=CSV, got {item!r}")
        name, _, path = item.partition("=")
        with open(path, newline="") as f:
            rows = list(_csv.DictReader(f))
        records = [
            (r["image_id"], metrics.MetricsRecord(
                float(r["pixel_accuracy"]), float(r["mean_accuracy"]),
                float(r["mean_iou"]), float(r["fw_iou"])))
            for r in rows
        ]
        summaries[name] = metrics.aggregate(records)
        names.append(name)
    _write_atomic(out, report.render_report(summaries, names))
    if csv_out:
        _write_atomic(csv_out, report.report_csv(summaries, names))


if __name__ == "__main__":
    main()
