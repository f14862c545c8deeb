"""VIA v2 project parsing and polygon rasterization.

Accepts both the flat ``via_region_data`` export and the wrapped
``_via_img_metadata`` project form. Only polygon and polyline (auto-closed)
regions are supported; the class name is read from the first region attribute
whose value resolves in the taxonomy.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegeneratePolygon, MalformedDocument, UnknownClass, UnsupportedShape
from .mask_core import Instance, InstanceSet


@dataclass
class PolygonAnnotation:
    points: list  # [(x, y), ...], >= 3 points
    class_name: str


@dataclass
class AnnotationSet:
    image_id: str
    width: int
    height: int
    regions: list = field(default_factory=list)


def _resolve_class(region_attributes, taxonomy, image_id, region_idx):
    matches = []
    for value in region_attributes.values():
        if isinstance(value, str) and value in taxonomy:
            matches.append(value)
        elif isinstance(value, dict):
            # checkbox-style attribute: {"vertebra_lumbar": true}
            matches.extend(k for k, v in value.items() if v and k in taxonomy)
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise UnknownClass(
            f"image {image_id!r} region {region_idx}: no attribute value "
            f"resolves in the taxonomy (attributes: {region_attributes!r})"
        )
    raise UnknownClass(
        f"image {image_id!r} region {region_idx}: ambiguous class attributes {matches!r}"
    )


def parse_via(document, taxonomy, default_size=None):
    """Parse a VIA v2 export into one AnnotationSet per image entry.

    VIA exports do not carry image dimensions, so ``default_size`` (width,
    height) supplies them; per-image ``file_attributes`` named ``width`` /
    ``height`` take precedence when present.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise MalformedDocument("top level of a VIA export must be an object")
    if "_via_img_metadata" in doc:
        doc = doc["_via_img_metadata"]
        if not isinstance(doc, dict):
            raise MalformedDocument("_via_img_metadata must be an object")

    out = []
    for key, entry in doc.items():
        if not isinstance(entry, dict) or "filename" not in entry:
            raise MalformedDocument(f"image entry {key!r} has no filename")
        image_id = entry["filename"]
        fattrs = entry.get("file_attributes") or {}
        try:
            width = int(fattrs.get("width", (default_size or (0, 0))[0]))
            height = int(fattrs.get("height", (default_size or (0, 0))[1]))
        except (TypeError, ValueError) as e:
            raise MalformedDocument(f"image {image_id!r}: bad width/height") from e
        if width <= 0 or height <= 0:
            raise MalformedDocument(
                f"image {image_id!r}: unknown dimensions; pass default_size or "
                "set width/height file attributes"
            )

        regions = entry.get("regions") or []
        if isinstance(regions, dict):  # very old VIA exports keyed regions by index
            regions = [regions[k] for k in sorted(regions, key=int)]
        parsed = []
        for idx, region in enumerate(regions):
            shape = region.get("shape_attributes") or {}
            name = shape.get("name")
            if name not in ("polygon", "polyline"):
                raise UnsupportedShape(
                    f"image {image_id!r} region {idx}: shape {name!r} is not supported"
                )
            xs = shape.get("all_points_x") or []
            ys = shape.get("all_points_y") or []
            if len(xs) != len(ys):
                raise MalformedDocument(
                    f"image {image_id!r} region {idx}: point arrays differ in length"
                )
            points = [(float(x), float(y)) for x, y in zip(xs, ys)]
            if name == "polyline" and len(points) > 1 and points[0] == points[-1]:
                points = points[:-1]
            # drop consecutive duplicates, which VIA emits on double clicks
            deduped = [p for i, p in enumerate(points) if i == 0 or p != points[i - 1]]
            if len(deduped) > 1 and deduped[0] == deduped[-1]:
                deduped = deduped[:-1]
            if len(deduped) < 3:
                raise MalformedDocument(
                    f"image {image_id!r} region {idx}: fewer than 3 distinct points"
                )
            class_name = _resolve_class(region.get("region_attributes") or {},
                                        taxonomy, image_id, idx)
            parsed.append(PolygonAnnotation(deduped, class_name))
        out.append(AnnotationSet(image_id, width, height, parsed))
    return out


def rasterize(ann, taxonomy):
    """Rasterize an AnnotationSet into (semantic LabelMask, InstanceSet).

    Fill rule: a pixel is filled iff its center lies inside or on the clipped
    polygon. Semantic overlap resolves by document order (last region wins).
    """
    semantic = np.zeros((ann.height, ann.width), dtype=np.uint8)
    instances = []
    for idx, region in enumerate(ann.regions):
        xs = np.array([p[0] for p in region.points], dtype=np.float64)
        ys = np.array([p[1] for p in region.points], dtype=np.float64)
        mask = kernels.fill_polygon(xs, ys, ann.width, ann.height)
        if not mask.any():
            raise DegeneratePolygon(
                f"image {ann.image_id!r} region {idx}: no pixels after clipping"
            )
        class_index = taxonomy.index_of(region.class_name)
        if class_index is None:
            raise UnknownClass(f"class {region.class_name!r} not in taxonomy")
        instances.append(Instance(idx, class_index, mask))
        semantic[mask != 0] = class_index
    return semantic, InstanceSet(ann.width, ann.height, instances)
