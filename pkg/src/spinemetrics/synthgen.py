"""Seeded synthetic spine ground truth and prediction perturbations.

Vertebrae are chamfered convex quadrilaterals stacked along a curved arc.
The generator emits construction truth (endplate angles, lordosis, gaps,
spur pixels) alongside the masks so geometric tests never re-derive expected
values from the measurement code.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InfeasibleLayout
from .instancing import ChainEntry, VertebraChain, anatomical_sequence, centroid_of
from .mask_core import Instance, InstanceSet
from .morphometry import (Endplate, MorphometryRecord, OsteophyteReport,
                          VertebraMeasurement, extract_contour, _normalize_angle,
                          _signed_angle_diff)
from .taxonomy import DEFAULT_TAXONOMY


@dataclass
class SynthSpec:
    width: int = 256
    height: int = 512
    lumbar_count: int = 5
    include_sacrum: bool = True
    include_th12: bool = False
    lordosis_curve: float = 30.0
    vertebra_width: tuple = (40.0, 60.0)
    vertebra_height: tuple = (24.0, 32.0)
    gap: tuple = (4.0, 10.0)
    overlap_fraction: tuple = (0.0, 0.0)
    edge_slant: float = 3.0       # max independent top/bottom slant, degrees
    spur_probability: float = 0.0  # per corner
    spur_width: tuple = (2.0, 3.0)
    spur_length: tuple = (5.0, 9.0)
    with_cages: bool = False
    with_screws: bool = False
    chamfer: float = 2.0
    margin: float = 8.0

    def validate(self):
        if not (3 <= self.lumbar_count <= 6):
            raise ValueError("lumbar_count must be in 3..6")
        for lo, hi in (self.vertebra_width, self.vertebra_height, self.gap,
                       self.overlap_fraction, self.spur_width, self.spur_length):
            if hi < lo:
                raise ValueError("empty range in SynthSpec")
        if not (0.0 <= self.spur_probability <= 1.0):
            raise ValueError("spur_probability must be in [0, 1]")
        if self.lordosis_curve < 0.0:
            raise ValueError("lordosis_curve must be >= 0")


@dataclass
class PerturbSpec:
    jitter_px: float = 0.0
    drop_probability: float = 0.0
    extra_instance_count: int = 0
    fuse_adjacent_probability: float = 0.0
    assign_scores: bool = False
    score_mean: float = 0.9
    score_std: float = 0.05

    def validate(self):
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")
        for p in (self.drop_probability, self.fuse_adjacent_probability):
            if not (0.0 <= p <= 1.0):
                raise ValueError("probabilities must be in [0, 1]")


def _axes(theta_deg):
    th = np.radians(theta_deg)
    u = np.array([np.cos(th), np.sin(th)])
    up = np.array([np.sin(th), -np.cos(th)])
    return u, up


def _chamfer(points, r):
    if r <= 0:
        return list(points)
    out = []
    n = len(points)
    for i, p in enumerate(points):
        p = np.asarray(p, dtype=float)
        a = np.asarray(points[(i - 1) % n], dtype=float)
        b = np.asarray(points[(i + 1) % n], dtype=float)
        da = (a - p) / np.linalg.norm(a - p)
        db = (b - p) / np.linalg.norm(b - p)
        out.append(tuple(p + r * da))
        out.append(tuple(p + r * db))
    return out


@dataclass
class _VertebraGeom:
    center: np.ndarray
    theta: float
    top_angle: float
    bot_angle: float
    corners: list       # [TL, TR, BR, BL] before chamfer
    width: float
    height: float


def _layout(spec, rng):
    n_up = spec.lumbar_count + (1 if spec.include_th12 else 0)
    count = n_up + (1 if spec.include_sacrum else 0)
    curve = spec.lordosis_curve
    geoms = []
    cursor = np.zeros(2)
    for i in range(count):
        theta = -curve / 2.0 + curve * i / max(spec.lumbar_count, 1)
        if not spec.include_sacrum:
            theta = -curve / 2.0 + curve * (i + 1) / max(spec.lumbar_count, 1)
        w = rng.uniform(*spec.vertebra_width)
        h = rng.uniform(*spec.vertebra_height)
        if spec.include_th12 and i == count - 1:
            w *= 0.9
            h *= 0.9
        dt = rng.uniform(-spec.edge_slant, spec.edge_slant)
        db = rng.uniform(-spec.edge_slant, spec.edge_slant)
        _, up = _axes(theta)
        center = cursor + (h / 2.0) * up
        u_top, _ = _axes(theta + dt)
        u_bot, _ = _axes(theta + db)
        mid_top = center + (h / 2.0) * up
        mid_bot = center - (h / 2.0) * up
        tl = mid_top - (w / 2.0) * u_top
        tr = mid_top + (w / 2.0) * u_top
        br = mid_bot + (w / 2.0) * u_bot
        bl = mid_bot - (w / 2.0) * u_bot
        geoms.append(_VertebraGeom(center, theta, theta + dt, theta + db,
                                   [tl, tr, br, bl], w, h))
        overlap = rng.uniform(*spec.overlap_fraction)
        if overlap > 0:
            step = -overlap * h
        else:
            step = rng.uniform(*spec.gap)
        cursor = cursor + (h + step) * up

    all_pts = np.array([c for g in geoms for c in g.corners])
    lo = all_pts.min(axis=0)
    hi = all_pts.max(axis=0)
    span = hi - lo
    if span[0] > spec.width - 2 * spec.margin or span[1] > spec.height - 2 * spec.margin:
        raise InfeasibleLayout(
            f"chain extent {span} exceeds canvas {spec.width}x{spec.height}"
        )
    # center the chain on the canvas
    offset = np.array([spec.width, spec.height]) / 2.0 - (lo + hi) / 2.0
    for g in geoms:
        g.center = g.center + offset
        g.corners = [np.asarray(c) + offset for c in g.corners]
    return geoms


def _rasterize_poly(points, width, height):
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    return kernels.fill_polygon(xs, ys, width, height)


def generate_spine(spec, seed, taxonomy=DEFAULT_TAXONOMY):
    """Build one synthetic spine; deterministic per (spec, seed).

    Returns (gt InstanceSet, semantic label mask, truth VertebraChain,
    construction MorphometryRecord).
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    geoms = _layout(spec, rng)

    sacral_idx = taxonomy.index_of("vertebra_sacral")
    lumbar_idx = taxonomy.index_of("vertebra_lumbar")

    instances = []
    measurements = []
    labels = (["S1"] if spec.include_sacrum else []) + anatomical_sequence(
        len(geoms) - (1 if spec.include_sacrum else 0))

    for i, g in enumerate(geoms):
        poly = _chamfer(g.corners, spec.chamfer)
        mask = _rasterize_poly(poly, spec.width, spec.height)
        body = mask.copy()

        spur_pixels = np.zeros_like(mask)
        spur_candidates = []
        _, up = _axes(g.theta)
        for ci, corner in enumerate(g.corners):
            if rng.random() >= spec.spur_probability:
                continue
            edge_angle = g.top_angle if ci in (0, 1) else g.bot_angle
            u_edge, _ = _axes(edge_angle)
            outward = u_edge if ci in (1, 2) else -u_edge
            t_s = rng.uniform(*spec.spur_width)
            l_s = rng.uniform(*spec.spur_length)
            base = np.asarray(corner) - 1.5 * outward  # overlap body to stay attached
            p0 = base + (t_s / 2.0) * up
            p1 = base - (t_s / 2.0) * up
            p2 = p1 + (l_s + 1.5) * outward
            p3 = p0 + (l_s + 1.5) * outward
            spur_mask = _rasterize_poly([p0, p1, p2, p3], spec.width, spec.height)
            only = spur_mask & ~body
            if only.any():
                mask |= spur_mask
                spur_pixels |= only
                ys, xs = np.nonzero(only)
                spur_candidates.append(((float(xs.mean()), float(ys.mean())),
                                        int(only.sum())))

        class_index = sacral_idx if (spec.include_sacrum and i == 0) else lumbar_idx
        instances.append(Instance(i, class_index, mask))

        tl, tr, br, bl = [np.asarray(c) for c in g.corners]
        sup_ant, sup_post = (tl, tr) if tl[0] <= tr[0] else (tr, tl)
        inf_ant, inf_post = (bl, br) if bl[0] <= br[0] else (br, bl)
        sup = Endplate("superior", tuple(sup_ant), tuple(sup_post),
                       _normalize_angle(g.top_angle))
        inf = Endplate("inferior", tuple(inf_ant), tuple(inf_post),
                       _normalize_angle(g.bot_angle))
        osteo = OsteophyteReport(spur_pixels, spur_candidates, 0)
        measurements.append(VertebraMeasurement(labels[i], sup, inf, osteo))

    # implants painted after the vertebrae
    implant_instances = []
    next_id = len(instances)
    if spec.with_cages and len(geoms) >= 2:
        j = int(rng.integers(0, len(geoms) - 1))
        a, b = geoms[j], geoms[j + 1]
        mid = (a.center + b.center) / 2.0
        u, up = _axes((a.theta + b.theta) / 2.0)
        cw, ch = a.width * 0.4, a.height * 0.3
        quad = [mid - (cw / 2) * u + (ch / 2) * up, mid + (cw / 2) * u + (ch / 2) * up,
                mid + (cw / 2) * u - (ch / 2) * up, mid - (cw / 2) * u - (ch / 2) * up]
        m = _rasterize_poly(quad, spec.width, spec.height)
        if m.any():
            implant_instances.append(Instance(next_id, taxonomy.index_of("cage"), m))
            next_id += 1
    if spec.with_screws:
        j = int(rng.integers(0, len(geoms)))
        g = geoms[j]
        u, up = _axes(g.theta + 25.0)
        sw, sl = 3.0, g.width * 0.8
        quad = [g.center - (sl / 2) * u + (sw / 2) * up,
                g.center + (sl / 2) * u + (sw / 2) * up,
                g.center + (sl / 2) * u - (sw / 2) * up,
                g.center - (sl / 2) * u - (sw / 2) * up]
        m = _rasterize_poly(quad, spec.width, spec.height)
        if m.any():
            implant_instances.append(Instance(next_id, taxonomy.index_of("screw"), m))
            next_id += 1

    all_instances = instances + implant_instances
    semantic = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for inst in all_instances:
        semantic[inst.mask != 0] = inst.class_index

    chain_truth = VertebraChain([
        ChainEntry(inst, labels[i], centroid_of(inst.mask))
        for i, inst in enumerate(instances)
    ])

    lordosis = None
    sup_angles = {m.label: m.superior.angle for m in measurements}
    if "S1" in sup_angles and "L1" in sup_angles:
        lordosis = _signed_angle_diff(sup_angles["L1"], sup_angles["S1"])

    gaps = []
    for i in range(len(geoms) - 1):
        lower_m, upper_m = measurements[i], measurements[i + 1]
        d = geoms[i].center - geoms[i + 1].center
        dhat = d / np.linalg.norm(d)
        ant = float(np.dot(np.array(lower_m.superior.anterior)
                           - np.array(upper_m.inferior.anterior), dhat))
        post = float(np.dot(np.array(lower_m.superior.posterior)
                            - np.array(upper_m.inferior.posterior), dhat))
        gaps.append(((lower_m.label, upper_m.label), ant, post))

    construction = MorphometryRecord(measurements, lordosis, gaps)
    gt = InstanceSet(spec.width, spec.height, all_instances)
    return gt, semantic, chain_truth, construction


def _jitter_instance(inst, amplitude, width, height, rng):
    contour = extract_contour(inst)
    if len(contour) < 6:
        return inst.mask
    pts = np.array(contour[::3], dtype=np.float64)
    center = pts.mean(axis=0)
    rel = pts - center
    norms = np.linalg.norm(rel, axis=1)
    norms[norms < 1e-9] = 1.0
    radial = rel / norms[:, None]
    disp = rng.uniform(-amplitude, amplitude, size=pts.shape[0])
    moved = pts + radial * disp[:, None]
    mask = _rasterize_poly([tuple(p) for p in moved], width, height)
    return mask if mask.any() else inst.mask


def perturb(gt, spec, seed):
    """Simulate prediction errors on a ground-truth instance set.

    Applies boundary jitter, random instance drops, fusions of adjacent
    vertebrae (union plus 3x3 closing, mimicking semantic-model blobs) and
    spurious extra instances, in that order. Deterministic per (gt, spec,
    seed); an all-zero spec returns the input unchanged.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    out = [copy.deepcopy(i) for i in gt.instances]

    if spec.jitter_px > 0:
        for inst in out:
            inst.mask = _jitter_instance(inst, spec.jitter_px,
                                         gt.width, gt.height, rng)

    if spec.drop_probability > 0:
        out = [i for i in out if rng.random() >= spec.drop_probability]

    if spec.fuse_adjacent_probability > 0 and len(out) >= 2:
        order = sorted(out, key=lambda i: -centroid_of(i.mask)[1])  # caudal first
        fused = []
        i = 0
        while i < len(order):
            same_class = (i + 1 < len(order)
                          and order[i].class_index == order[i + 1].class_index)
            if same_class and rng.random() < spec.fuse_adjacent_probability:
                a, b = order[i], order[i + 1]
                union = ((a.mask != 0) | (b.mask != 0)).astype(np.uint8)
                union = kernels.closing(union, 3)
                fused.append(Instance(min(a.id, b.id), a.class_index, union,
                                      a.score))
                i += 2
            else:
                fused.append(order[i])
                i += 1
        fused.sort(key=lambda inst: inst.id)
        out = fused

    if spec.extra_instance_count > 0:
        next_id = max((i.id for i in out), default=-1) + 1
        for _ in range(spec.extra_instance_count):
            w = rng.uniform(24, 44)
            h = rng.uniform(14, 24)
            cx = rng.uniform(w, gt.width - w)
            cy = rng.uniform(h, gt.height - h)
            theta = rng.uniform(-25, 25)
            u, up = _axes(theta)
            c = np.array([cx, cy])
            quad = [c - (w / 2) * u + (h / 2) * up, c + (w / 2) * u + (h / 2) * up,
                    c + (w / 2) * u - (h / 2) * up, c - (w / 2) * u - (h / 2) * up]
            mask = _rasterize_poly(quad, gt.width, gt.height)
            if mask.any():
                out.append(Instance(next_id, 1, mask))
                next_id += 1

    if spec.assign_scores:
        for inst in out:
            inst.score = float(np.clip(rng.normal(spec.score_mean, spec.score_std),
                                       0.0, 1.0))
    return InstanceSet(gt.width, gt.height, out)
