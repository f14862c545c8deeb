"""Geometric measurements on labeled vertebra instances.

Contour tracing, osteophyte detection by opening residue, endplate line
fitting, the L1/S1 lordosis angle and intervertebral gap estimation. All
values are in pixels; a millimetre scale factor is applied only when records
are serialized.
"""

import json
import io
import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateEndplate, DegenerateShape, KernelTooLarge, MissingLevel

DEFAULT_OSTEOPHYTE_KERNEL = 5
DEFAULT_MIN_OSTEOPHYTE_AREA = 6
ENDPLATE_TRIM_FRACTION = 0.10

# clockwise in image coordinates (y grows downward): E, SE, S, SW, W, NW, N, NE
_MOORE = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass
class Endplate:
    kind: str           # "superior" | "inferior"
    anterior: tuple     # (x, y), anterior = smaller x
    posterior: tuple
    angle: float        # degrees vs image horizontal, in (-90, 90]


@dataclass
class OsteophyteReport:
    residue_mask: np.ndarray
    candidates: list    # [(centroid (x, y), area px)]
    kernel_size: int


@dataclass
class VertebraMeasurement:
    label: str
    superior: Endplate
    inferior: Endplate
    osteophytes: OsteophyteReport | None = None


@dataclass
class MorphometryRecord:
    vertebrae: list = field(default_factory=list)   # VertebraMeasurement
    lordosis_angle: float | None = None
    gaps: list = field(default_factory=list)        # [((lower, upper), ant px, post px)]


def _largest_component(mask):
    labels = kernels.label_components(np.asarray(mask))
    n = int(labels.max())
    if n <= 1:
        return (np.asarray(mask) != 0).astype(np.uint8)
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    best = int(np.argmax(areas[1:])) + 1
    return (labels == best).astype(np.uint8)


def extract_contour(inst):
    """Moore-neighbor boundary trace of the largest foreground component.

    Returns a closed clockwise list of (x, y) pixel coordinates starting at
    the topmost-then-leftmost boundary pixel.
    """
    mask = _largest_component(inst.mask)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return []
    if ys.size == 1:
        return [(int(xs[0]), int(ys[0]))]
    h, w = mask.shape

    def fg(x, y):
        return 0 <= x < w and 0 <= y < h and mask[y, x] != 0

    first = int(np.argmin(ys * w + xs))  # raster order: topmost then leftmost
    sx, sy = int(xs[first]), int(ys[first])
    start = (sx, sy)
    b0 = (sx - 1, sy)  # west neighbor, guaranteed background
    contour = [start]
    c, b = start, b0
    while True:
        d0 = _MOORE.index((b[0] - c[0], b[1] - c[1]))
        nxt = None
        for i in range(1, 9):
            k = (d0 + i) % 8
            cand = (c[0] + _MOORE[k][0], c[1] + _MOORE[k][1])
            if fg(*cand):
                nxt = cand
                prev = _MOORE[(k - 1) % 8]
                b = (c[0] + prev[0], c[1] + prev[1])
                break
        if nxt is None:  # isolated pixel; already handled, defensive
            break
        c = nxt
        if c == start and b == b0:
            break
        contour.append(c)
    return contour


def detect_osteophytes(inst, kernel=DEFAULT_OSTEOPHYTE_KERNEL,
                       min_osteophyte_area=DEFAULT_MIN_OSTEOPHYTE_AREA):
    """Opening residue of the instance mask: mask minus opening(mask, k x k).

    Residue components of at least min_osteophyte_area pixels become
    osteophyte candidates.
    """
    if kernel % 2 == 0 or kernel < 1:
        raise ValueError("kernel size must be odd and >= 1")
    mask = (inst.mask != 0).astype(np.uint8)
    ys, xs = np.nonzero(mask)
    if ys.size:
        bbox_min = min(int(ys.max() - ys.min() + 1), int(xs.max() - xs.min() + 1))
        if kernel > bbox_min:
            raise KernelTooLarge(f"kernel {kernel} exceeds bounding box side {bbox_min}")
    residue = mask & ~kernels.opening(mask, kernel)
    labels = kernels.label_components(residue)
    candidates = []
    for comp in range(1, int(labels.max()) + 1):
        comp_mask = labels == comp
        area = int(comp_mask.sum())
        if area < min_osteophyte_area:
            continue
        cys, cxs = np.nonzero(comp_mask)
        candidates.append(((float(cxs.mean()), float(cys.mean())), area))
    return OsteophyteReport(residue, candidates, kernel)


def _normalize_angle(deg):
    while deg > 90.0:
        deg -= 180.0
    while deg <= -90.0:
        deg += 180.0
    return deg


def approximate_endplates(inst, trim_fraction=ENDPLATE_TRIM_FRACTION):
    """Fit the superior and inferior endplate lines of a vertebra instance.

    The principal (width) axis comes from the pixel second moments; contour
    points split into an upper and a lower band relative to that axis, each
    band is line-fit over the middle (1 - 2*trim) of its width so corner
    osteophytes do not drag the fit, and the endpoints are the band extremes
    projected onto the fitted line.
    """
    mask = (inst.mask != 0).astype(np.uint8)
    pts = np.argwhere(mask)
    if pts.shape[0] < 4:
        raise DegenerateShape("too few pixels to fit endplates")
    xy = pts[:, ::-1].astype(np.float64)
    center = xy.mean(axis=0)
    cov = np.cov(xy.T)
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-9:
        raise DegenerateShape("zero-variance pixel distribution")
    u = evecs[:, 1]
    if u[0] < 0 or (u[0] == 0 and u[1] < 0):
        u = -u
    v = np.array([-u[1], u[0]])
    if v[1] > 0:  # make v point toward smaller image y ("up")
        v = -v

    contour = np.array(extract_contour(inst), dtype=np.float64)
    rel = contour - center
    s = rel @ u
    t = rel @ v

    plates = {}
    for kind, band in (("superior", t > 0), ("inferior", t < 0)):
        bs, bt = s[band], t[band]
        if bs.size < 2:
            raise DegenerateShape(f"no contour points in {kind} band")
        s_lo, s_hi = float(bs.min()), float(bs.max())
        width = s_hi - s_lo
        inner = (bs >= s_lo + trim_fraction * width) & (bs <= s_hi - trim_fraction * width)
        fs, ft = bs[inner], bt[inner]
        if fs.size < 2 or float(fs.max() - fs.min()) < 1e-9:
            raise DegenerateShape(f"{kind} band degenerates under trimming")
        slope, intercept = np.polyfit(fs, ft, 1)

        def line_point(sv):
            p = center + sv * u + (intercept + slope * sv) * v
            return (float(p[0]), float(p[1]))

        p_lo, p_hi = line_point(s_lo), line_point(s_hi)
        anterior, posterior = (p_lo, p_hi) if p_lo[0] <= p_hi[0] else (p_hi, p_lo)
        d = np.array(p_hi) - np.array(p_lo)
        angle = _normalize_angle(np.degrees(np.arctan2(d[1], d[0])))
        plates[kind] = Endplate(kind, anterior, posterior, float(angle))
    return plates["superior"], plates["inferior"]


def attach_endplates(chain):
    """Compute and cache endplates for every chain entry; returns the chain."""
    for entry in chain.entries:
        if entry.endplates is None:
            entry.endplates = approximate_endplates(entry.instance)
    return chain


def _signed_angle_diff(a, b):
    d = a - b
    while d > 180.0:
        d -= 360.0
    while d <= -180.0:
        d += 360.0
    return d


def lordosis_angle(chain):
    """Two-line angle between the L1 and S1 superior endplates, degrees.

    Positive in image coordinates (y down, anterior toward smaller x) for a
    lordotic, posteriorly open configuration.
    """
    s1 = chain.find("S1")
    l1 = chain.find("L1")
    if s1 is None or l1 is None:
        raise MissingLevel("lordosis needs both S1 and L1 in the chain")
    try:
        attach_endplates(chain)
    except DegenerateShape as e:
        raise DegenerateEndplate(str(e)) from e
    return _signed_angle_diff(l1.endplates[0].angle, s1.endplates[0].angle)


def intervertebral_spaces(chain):
    """Anterior/posterior endplate gaps for each adjacent pair, in pixels.

    The gap is the separation of facing endplate endpoints projected on the
    local caudal direction, so overlapping vertebrae give negative values.
    """
    try:
        attach_endplates(chain)
    except DegenerateShape as e:
        raise DegenerateEndplate(str(e)) from e
    gaps = []
    for lower, upper in zip(chain.entries, chain.entries[1:]):
        d = np.array(lower.centroid) - np.array(upper.centroid)
        norm = float(np.hypot(*d))
        if norm < 1e-9:
            raise DegenerateEndplate("coincident vertebra centroids")
        dhat = d / norm
        sup = lower.endplates[0]   # lower vertebra's superior plate faces up
        inf = upper.endplates[1]   # upper vertebra's inferior plate faces down
        ant = float(np.dot(np.array(sup.anterior) - np.array(inf.anterior), dhat))
        post = float(np.dot(np.array(sup.posterior) - np.array(inf.posterior), dhat))
        gaps.append(((lower.label, upper.label), ant, post))
    return gaps


def measure_chain(chain, kernel=DEFAULT_OSTEOPHYTE_KERNEL,
                  min_osteophyte_area=DEFAULT_MIN_OSTEOPHYTE_AREA):
    """Full per-chain measurement record: endplates, osteophytes, lordosis, gaps."""
    try:
        attach_endplates(chain)
    except DegenerateShape as e:
        raise DegenerateEndplate(str(e)) from e
    vertebrae = []
    for entry in chain.entries:
        try:
            osteo = detect_osteophytes(entry.instance, kernel, min_osteophyte_area)
        except KernelTooLarge:
            osteo = None
        vertebrae.append(VertebraMeasurement(
            entry.label, entry.endplates[0], entry.endplates[1], osteo))
    try:
        lordosis = lordosis_angle(chain)
    except MissingLevel:
        lordosis = None
    return MorphometryRecord(vertebrae, lordosis, intervertebral_spaces(chain))


# --- serialization ---

def record_to_json(record, scale=1.0):
    def plate(e):
        return {
            "kind": e.kind,
            "anterior": [e.anterior[0] * scale, e.anterior[1] * scale],
            "posterior": [e.posterior[0] * scale, e.posterior[1] * scale],
            "angle_deg": e.angle,
        }

    doc = {
        "lordosis_angle_deg": record.lordosis_angle,
        "vertebrae": [
            {
                "label": m.label,
                "superior": plate(m.superior),
                "inferior": plate(m.inferior),
                "osteophytes": None if m.osteophytes is None else {
                    "kernel_size": m.osteophytes.kernel_size,
                    "candidates": [
                        {"centroid": [c[0] * scale, c[1] * scale], "area_px": a}
                        for c, a in m.osteophytes.candidates
                    ],
                },
            }
            for m in record.vertebrae
        ],
        "gaps": [
            {"pair": list(pair), "anterior": ant * scale, "posterior": post * scale}
            for pair, ant, post in record.gaps
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def record_to_csv(record, scale=1.0):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "level", "value"])
    if record.lordosis_angle is not None:
        writer.writerow(["lordosis_angle_deg", "L1/S1", f"{record.lordosis_angle:.3f}"])
    for m in record.vertebrae:
        writer.writerow(["superior_angle_deg", m.label, f"{m.superior.angle:.3f}"])
        writer.writerow(["inferior_angle_deg", m.label, f"{m.inferior.angle:.3f}"])
        if m.osteophytes is not None:
            writer.writerow(["osteophyte_count", m.label, len(m.osteophytes.candidates)])
    for pair, ant, post in record.gaps:
        level = f"{pair[0]}-{pair[1]}"
        writer.writerow(["anterior_gap", level, f"{ant * scale:.3f}"])
        writer.writerow(["posterior_gap", level, f"{post * scale:.3f}"])
    return buf.getvalue()
