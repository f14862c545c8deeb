"""Core mask types and arithmetic: binary masks, instances, RLE, IoU, merge.

Masks are 2D numpy arrays of shape (height, width): label masks hold class
indices, binary masks hold {0, 1}.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import CorruptRle, DimensionMismatch


@dataclass
class Instance:
    id: int
    class_index: int
    mask: np.ndarray  # uint8 (H, W)
    score: float | None = None


@dataclass
class InstanceSet:
    width: int
    height: int
    instances: list = field(default_factory=list)


@dataclass
class RleMask:
    """Row-major run lengths, alternating background/foreground, background first."""
    width: int
    height: int
    runs: list


def merge_to_binary(iset):
    """Union of all instance masks as a single {0,1} mask."""
    out = np.zeros((iset.height, iset.width), dtype=np.uint8)
    for inst in iset.instances:
        out |= (inst.mask != 0).astype(np.uint8)
    return out


def mask_iou(a, b):
    """Jaccard index of two binary masks; 1.0 when both are empty."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    fa = a != 0
    fb = b != 0
    union = np.count_nonzero(fa | fb)
    if union == 0:
        return 1.0
    return np.count_nonzero(fa & fb) / union


def rle_encode(mask):
    flat = (np.asarray(mask).ravel() != 0).astype(np.int8)
    h, w = mask.shape
    if flat.size == 0:
        return RleMask(w, h, [0])
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:  # leading empty background run keeps the alternation fixed
        runs = [0] + runs
    return RleMask(w, h, runs)


def rle_decode(rle):
    total = sum(rle.runs)
    if total != rle.width * rle.height:
        raise CorruptRle(
            f"runs sum to {total}, expected {rle.width * rle.height}"
        )
    if any(r < 0 for r in rle.runs):
        raise CorruptRle("negative run length")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    for i, run in enumerate(rle.runs):
        if i % 2 == 1:
            flat[pos:pos + run] = 1
        pos += run
    return flat.reshape(rle.height, rle.width)


# --- instance sidecar interchange format ---

def sidecar_dumps(iset, taxonomy, labels=None):
    """Serialize an InstanceSet to the sidecar JSON document.

    ``labels`` optionally maps instance id -> anatomical label string; when
    given, each record carries an extra "anatomical_label" field.
    """
    records = []
    for inst in iset.instances:
        rle = rle_encode(inst.mask)
        rec = {
            "id": inst.id,
            "class_name": taxonomy.name_of(inst.class_index),
            "score": inst.score,
            "rle": {"width": rle.width, "height": rle.height, "runs": rle.runs},
        }
        if labels is not None and inst.id in labels:
            rec["anatomical_label"] = labels[inst.id]
        records.append(rec)
    doc = {"width": iset.width, "height": iset.height, "instances": records}
    return json.dumps(doc, indent=2) + "\n"


def sidecar_loads(text, taxonomy):
    """Parse a sidecar document; returns (InstanceSet, labels dict)."""
    doc = json.loads(text)
    width, height = doc["width"], doc["height"]
    instances = []
    labels = {}
    for rec in doc["instances"]:
        class_index = taxonomy.index_of(rec["class_name"])
        if class_index is None:
            raise CorruptRle(f"unknown class in sidecar: {rec['class_name']!r}")
        rle = RleMask(rec["rle"]["width"], rec["rle"]["height"], rec["rle"]["runs"])
        if rle.width != width or rle.height != height:
            raise DimensionMismatch("instance RLE dimensions differ from set")
        inst = Instance(rec["id"], class_index, rle_decode(rle), rec.get("score"))
        instances.append(inst)
        if "anatomical_label" in rec:
            labels[inst.id] = rec["anatomical_label"]
    return InstanceSet(width, height, instances), labels


# --- PNG mask I/O ---

def save_mask_png(path, mask, binary=False):
    """Write a single-channel 8-bit PNG; binary masks are scaled to 0/255."""
    arr = np.asarray(mask)
    if binary:
        arr = np.where(arr != 0, 255, 0)
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def load_mask_png(path, binary=False):
    arr = np.array(Image.open(path).convert("L"))
    if binary:
        arr = (arr != 0).astype(np.uint8)
    return arr
