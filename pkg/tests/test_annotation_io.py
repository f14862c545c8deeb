import json

import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from spinemetrics.annotation_io import AnnotationSet, PolygonAnnotation, parse_via, rasterize
from spinemetrics.errors import (DegeneratePolygon, MalformedDocument,
                                 UnknownClass, UnsupportedShape)
from spinemetrics.taxonomy import DEFAULT_TAXONOMY as TAX


def via_doc(regions, filename="img001.png", wrapped=False, width=32, height=32):
    entry = {
        "filename": filename,
        "size": 1234,
        "regions": regions,
        "file_attributes": {"width": width, "height": height},
    }
    doc = {f"{filename}1234": entry}
    if wrapped:
        doc = {"_via_img_metadata": doc, "_via_settings": {}}
    return json.dumps(doc)


def polygon_region(xs, ys, class_name="vertebra_lumbar", shape="polygon"):
    return {
        "shape_attributes": {"name": shape, "all_points_x": xs, "all_points_y": ys},
        "region_attributes": {"type": class_name},
    }


class TestParse:
    def test_single_polygon(self):
        xs = [3, 10, 14, 15, 13, 9, 4, 2, 1, 1, 2, 3]
        ys = [2, 1, 3, 8, 13, 15, 14, 12, 9, 6, 4, 3]
        doc = via_doc([polygon_region(xs, ys)])
        sets = parse_via(doc, TAX)
        assert len(sets) == 1
        assert sets[0].image_id == "img001.png"
        assert len(sets[0].regions) == 1
        assert len(sets[0].regions[0].points) == 12
        assert sets[0].regions[0].class_name == "vertebra_lumbar"

    def test_wrapped_form(self):
        doc = via_doc([polygon_region([0, 5, 5], [0, 0, 5])], wrapped=True)
        sets = parse_via(doc, TAX)
        assert len(sets) == 1 and len(sets[0].regions) == 1

    def test_rect_region_rejected_with_index(self):
        rect = {"shape_attributes": {"name": "rect", "x": 1, "y": 1,
                                     "width": 4, "height": 4},
                "region_attributes": {"type": "cage"}}
        doc = via_doc([polygon_region([0, 5, 5], [0, 0, 5]), rect])
        with pytest.raises(UnsupportedShape, match="region 1"):
            parse_via(doc, TAX)

    def test_two_images_second_empty(self):
        entries = {
            "a.png1": {"filename": "a.png", "size": 1,
                       "regions": [polygon_region([0, 5, 5], [0, 0, 5])],
                       "file_attributes": {"width": 16, "height": 16}},
            "b.png2": {"filename": "b.png", "size": 2, "regions": [],
                       "file_attributes": {"width": 16, "height": 16}},
        }
        sets = parse_via(json.dumps(entries), TAX)
        assert len(sets) == 2
        assert sets[1].image_id == "b.png"
        assert sets[1].regions == []

    def test_unknown_class(self):
        doc = via_doc([polygon_region([0, 5, 5], [0, 0, 5], class_name="femur")])
        with pytest.raises(UnknownClass):
            parse_via(doc, TAX)

    def test_checkbox_attribute(self):
        region = polygon_region([0, 5, 5], [0, 0, 5])
        region["region_attributes"] = {"class": {"screw": True, "cage": False}}
        sets = parse_via(via_doc([region]), TAX)
        assert sets[0].regions[0].class_name == "screw"

    def test_not_json(self):
        with pytest.raises(MalformedDocument):
            parse_via("not json at all {", TAX)

    def test_polyline_auto_closed(self):
        region = polygon_region([0, 5, 5, 0], [0, 0, 5, 0], shape="polyline")
        sets = parse_via(via_doc([region]), TAX)
        assert len(sets[0].regions[0].points) == 3


def ann(points, class_name="vertebra_lumbar", width=4, height=4):
    return AnnotationSet("t", width, height, [PolygonAnnotation(points, class_name)])


class TestRasterize:
    def test_unit_square_fills_four_pixels(self):
        semantic, iset = rasterize(ann([(0, 0), (2, 0), (2, 2), (0, 2)]), TAX)
        filled = set(map(tuple, np.argwhere(iset.instances[0].mask)))
        assert filled == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_polygon_outside_canvas(self):
        with pytest.raises(DegeneratePolygon):
            rasterize(ann([(10, 10), (14, 10), (14, 14), (10, 14)]), TAX)

    def test_two_disjoint_classes(self):
        a = PolygonAnnotation([(0, 0), (3, 0), (3, 3), (0, 3)], "vertebra_lumbar")
        b = PolygonAnnotation([(5, 5), (8, 5), (8, 8), (5, 8)], "cage")
        semantic, iset = rasterize(AnnotationSet("t", 10, 10, [a, b]), TAX)
        values = set(np.unique(semantic).tolist())
        assert values == {0, TAX.index_of("vertebra_lumbar"), TAX.index_of("cage")}
        assert len(iset.instances) == 2

    def test_deterministic(self):
        points = [(1.2, 0.7), (9.4, 2.1), (8.8, 9.3), (0.5, 7.7)]
        s1, i1 = rasterize(ann(points, width=12, height=12), TAX)
        s2, i2 = rasterize(ann(points, width=12, height=12), TAX)
        assert np.array_equal(s1, s2)
        assert np.array_equal(i1.instances[0].mask, i2.instances[0].mask)

    def test_last_region_wins_overlap(self):
        a = PolygonAnnotation([(0, 0), (6, 0), (6, 6), (0, 6)], "vertebra_lumbar")
        b = PolygonAnnotation([(3, 3), (8, 3), (8, 8), (3, 8)], "cage")
        semantic, _ = rasterize(AnnotationSet("t", 10, 10, [a, b]), TAX)
        assert semantic[4, 4] == TAX.index_of("cage")

    def test_semantic_equals_instance_union_when_disjoint(self):
        a = PolygonAnnotation([(0, 0), (4, 0), (4, 4), (0, 4)], "vertebra_sacral")
        b = PolygonAnnotation([(6, 6), (9, 6), (9, 9), (6, 9)], "screw")
        semantic, iset = rasterize(AnnotationSet("t", 12, 12, [a, b]), TAX)
        rebuilt = np.zeros_like(semantic)
        for inst in iset.instances:
            rebuilt[inst.mask != 0] = inst.class_index
        assert np.array_equal(semantic, rebuilt)

    @pytest.mark.parametrize("seed", range(40))
    def test_fill_matches_point_in_polygon_oracle(self, seed):
        # independent oracle: shapely covers() at every pixel center
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 9))
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
        r = rng.uniform(3, 20, n)
        cx, cy = rng.uniform(10, 50, 2)
        points = [(cx + rr * np.cos(a), cy + rr * np.sin(a)) for rr, a in zip(r, angles)]
        poly = Polygon(points)
        if not poly.is_valid or poly.area < 4:
            pytest.skip("degenerate random polygon")
        _, iset = rasterize(ann(points, width=64, height=64), TAX)
        mask = iset.instances[0].mask
        for y in range(64):
            for x in range(64):
                expected = poly.covers(Point(x + 0.5, y + 0.5))
                assert bool(mask[y, x]) == expected, (x, y)

    def test_convex_fill_area_close_to_geometric(self):
        # |pixel count - area| bounded by the perimeter
        points = [(2.3, 1.1), (20.7, 3.4), (22.1, 18.8), (4.2, 21.5)]
        poly = Polygon(points)
        _, iset = rasterize(ann(points, width=32, height=32), TAX)
        count = int(iset.instances[0].mask.sum())
        assert abs(count - poly.area) <= poly.length
