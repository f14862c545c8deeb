"""Instance cleanup and anatomical labeling.

NMS over scored predictions, connected-component extraction for semantic
masks, erosion-based splitting of fused blobs, and sacrum-anchored chain
labeling (S1, L5..L1, Th12, Th11, ...).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BrokenChain, MultipleSacralAnchors, NoSacralAnchor
from .mask_core import Instance, InstanceSet, mask_iou

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_MIN_AREA = 32
DEFAULT_MAX_EROSIONS = 10
DEFAULT_MAX_GAP_FACTOR = 2.0

# caudal-to-cranial label sequence anchored at the sacrum
_LUMBAR = ("L5", "L4", "L3", "L2", "L1")


def anatomical_sequence(n):
    """First n labels above the sacrum: L5..L1 then Th12, Th11, ..."""
    labels = list(_LUMBAR[:n])
    thoracic = 12
    while len(labels) < n:
        labels.append(f"Th{thoracic}")
        thoracic -= 1
    return labels


@dataclass
class ChainEntry:
    instance: Instance
    label: str
    centroid: tuple  # (x, y)
    endplates: tuple | None = None  # (superior, inferior), filled by morphometry


@dataclass
class VertebraChain:
    """Vertebra instances ordered caudal to cranial, sacrum first."""
    entries: list = field(default_factory=list)

    def labels(self):
        return [e.label for e in self.entries]

    def find(self, label):
        for e in self.entries:
            if e.label == label:
                return e
        return None

    def __len__(self):
        return len(self.entries)


def chain_order_key(label):
    """Sort key placing labels caudal to cranial: S1, L5..L1, Th12, Th11, ..."""
    if label == "S1":
        return 0
    seq = anatomical_sequence(32)
    return seq.index(label) + 1 if label in seq else 99


def chain_from_labels(iset, labels):
    """Rebuild a VertebraChain from a sidecar's anatomical_label mapping."""
    entries = []
    for inst in iset.instances:
        label = labels.get(inst.id)
        if label:
            entries.append(ChainEntry(inst, label, centroid_of(inst.mask)))
    entries.sort(key=lambda e: chain_order_key(e.label))
    return VertebraChain(entries)


def centroid_of(mask):
    ys, xs = np.nonzero(mask)
    return (float(xs.mean()), float(ys.mean()))


def nms(iset, iou_threshold=DEFAULT_IOU_THRESHOLD, class_aware=True):
    """Greedy non-maximum suppression by descending score.

    Scoreless instances act as score 1.0; ties break toward the lower id.
    """
    order = sorted(
        iset.instances,
        key=lambda inst: (-(inst.score if inst.score is not None else 1.0), inst.id),
    )
    kept = []
    for cand in order:
        suppressed = False
        for keeper in kept:
            if class_aware and keeper.class_index != cand.class_index:
                continue
            if mask_iou(keeper.mask, cand.mask) > iou_threshold:
                suppressed = True
                break
        if not suppressed:
            kept.append(cand)
    kept.sort(key=lambda inst: inst.id)
    return InstanceSet(iset.width, iset.height, kept)


def connected_components(mask, class_index, min_area=DEFAULT_MIN_AREA):
    """One instance per 8-connected foreground component of at least min_area.

    Ids follow raster-scan order of each component's first pixel.
    """
    labels = kernels.label_components(np.asarray(mask))
    n = int(labels.max())
    h, w = labels.shape
    instances = []
    next_id = 0
    for comp in range(1, n + 1):
        comp_mask = (labels == comp).astype(np.uint8)
        if int(comp_mask.sum()) < min_area:
            continue
        instances.append(Instance(next_id, class_index, comp_mask))
        next_id += 1
    return InstanceSet(w, h, instances)


def split_fused(inst, max_erosions=DEFAULT_MAX_EROSIONS, min_area=DEFAULT_MIN_AREA):
    """Split a fused blob by iterative erosion and geodesic regrowth.

    Returns (InstanceSet, did_split). At the first erosion depth where the
    blob falls apart into >= 2 components of at least min_area each, the
    components are grown back inside the original mask; contested pixels go
    to the nearer seed (ties to the lower seed id). If no depth within
    max_erosions separates the blob, the original instance is returned
    unsplit.
    """
    original = (inst.mask != 0).astype(np.uint8)
    h, w = original.shape
    eroded = original
    for _ in range(max_erosions + 1):
        labels = kernels.label_components(eroded)
        n = int(labels.max())
        if n >= 2:
            areas = np.bincount(labels.ravel(), minlength=n + 1)
            big = [c for c in range(1, n + 1) if areas[c] >= min_area]
            if len(big) >= 2:
                seeds = np.zeros_like(labels)
                for new_id, c in enumerate(big, start=1):
                    seeds[labels == c] = new_id
                grown = kernels.grow_seeds(original, seeds)
                # pixels disconnected from every seed fall to the first part
                leftover = (original != 0) & (grown == 0)
                grown[leftover] = 1
                parts = []
                for new_id in range(1, len(big) + 1):
                    part = (grown == new_id).astype(np.uint8)
                    parts.append(Instance(inst.id * 1000 + new_id - 1,
                                          inst.class_index, part, inst.score))
                return InstanceSet(w, h, parts), True
        eroded = kernels.erode(eroded, 3)
        if not eroded.any():
            break
    return InstanceSet(w, h, [inst]), False


def _bbox_height(mask):
    ys, _ = np.nonzero(mask)
    return int(ys.max() - ys.min() + 1)


def label_chain(iset, taxonomy, max_gap_factor=DEFAULT_MAX_GAP_FACTOR):
    """Order vertebra instances caudal to cranial from the sacrum and label them.

    Requires exactly one sacral instance; other classes (implants) are ignored.
    The walk takes the nearest unvisited vertebra centroid at each step and
    fails with BrokenChain when a step exceeds max_gap_factor times the median
    vertebra height.
    """
    sacral_idx = taxonomy.index_of("vertebra_sacral")
    lumbar_idx = taxonomy.index_of("vertebra_lumbar")

    sacral = [i for i in iset.instances if i.class_index == sacral_idx]
    vertebrae = [i for i in iset.instances if i.class_index == lumbar_idx]
    if not sacral:
        raise NoSacralAnchor("no sacral instance to anchor the chain")
    if len(sacral) > 1:
        raise MultipleSacralAnchors(f"{len(sacral)} sacral instances after NMS")

    anchor = sacral[0]
    heights = [_bbox_height(i.mask) for i in [anchor] + vertebrae]
    max_gap = max_gap_factor * float(np.median(heights))

    entries = [ChainEntry(anchor, "S1", centroid_of(anchor.mask))]
    remaining = sorted(vertebrae, key=lambda i: i.id)
    current = np.array(entries[0].centroid)
    seq = anatomical_sequence(len(remaining))
    for label in seq:
        dists = [float(np.hypot(*(np.array(centroid_of(i.mask)) - current)))
                 for i in remaining]
        j = int(np.argmin(dists))
        if dists[j] > max_gap:
            raise BrokenChain(
                f"gap of {dists[j]:.1f}px to next vertebra exceeds {max_gap:.1f}px"
            )
        nxt = remaining.pop(j)
        c = centroid_of(nxt.mask)
        entries.append(ChainEntry(nxt, label, c))
        current = np.array(c)
    return VertebraChain(entries)
