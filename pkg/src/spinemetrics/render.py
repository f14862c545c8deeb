"""Overlay rendering: translucent instance fills, contours and labels."""

import numpy as np
from PIL import Image, ImageDraw

from .errors import DimensionMismatch
from .instancing import centroid_of
from .morphometry import extract_contour

# fixed palette in anatomical order; extras cycle
LABEL_ORDER = ("S1", "L5", "L4", "L3", "L2", "L1", "Th12", "Th11", "Th10")
_PALETTE = (
    (228, 26, 28), (55, 126, 184), (77, 175, 74), (152, 78, 163),
    (255, 127, 0), (255, 255, 51), (166, 86, 40), (247, 129, 191),
    (153, 153, 153), (0, 206, 209), (124, 252, 0), (219, 112, 147),
)

FILL_ALPHA = 0.5


def color_for(label, fallback_index=0):
    if label in LABEL_ORDER:
        return _PALETTE[LABEL_ORDER.index(label)]
    return _PALETTE[fallback_index % len(_PALETTE)]


def render_overlay(image, iset, chain=None):
    """Render instances over a grayscale base image (or black canvas).

    Returns an (H, W, 3) uint8 array. Fill colors are deterministic per
    anatomical label; unlabeled instances cycle the palette by position.
    """
    if image is None:
        base = np.zeros((iset.height, iset.width), dtype=np.uint8)
    else:
        base = np.asarray(image, dtype=np.uint8)
        if base.shape != (iset.height, iset.width):
            raise DimensionMismatch(
                f"image {base.shape} vs instance set {(iset.height, iset.width)}"
            )
    out = np.stack([base] * 3, axis=-1).astype(np.float64)

    labels = {}
    if chain is not None:
        labels = {e.instance.id: e.label for e in chain.entries}

    for pos, inst in enumerate(iset.instances):
        color = np.array(color_for(labels.get(inst.id), pos), dtype=np.float64)
        fg = inst.mask != 0
        out[fg] = (1.0 - FILL_ALPHA) * out[fg] + FILL_ALPHA * color

    out = out.round().astype(np.uint8)

    for pos, inst in enumerate(iset.instances):
        color = color_for(labels.get(inst.id), pos)
        for x, y in extract_contour(inst):
            out[y, x] = color

    img = Image.fromarray(out, mode="RGB")
    draw = ImageDraw.Draw(img)
    for pos, inst in enumerate(iset.instances):
        text = labels.get(inst.id)
        if text:
            cx, cy = centroid_of(inst.mask)
            draw.text((cx, cy), text, fill=(255, 255, 255), anchor="mm")
    return np.array(img)
