"""Segmentation evaluation and lumbar morphometry for lateral spine radiographs."""

from .taxonomy import DEFAULT_TAXONOMY, LabelTaxonomy
from .mask_core import (Instance, InstanceSet, RleMask, mask_iou,
                        merge_to_binary, rle_decode, rle_encode)
from .metrics import (ConfusionMatrix, DatasetSummary, MetricsRecord, aggregate,
                      compute_metrics, confusion_matrix, evaluate_pair)
from .instancing import (VertebraChain, connected_components, label_chain, nms,
                         split_fused)
from .morphometry import (approximate_endplates, detect_osteophytes,
                          extract_contour, intervertebral_spaces, lordosis_angle,
                          measure_chain)
from .synthgen import PerturbSpec, SynthSpec, generate_spine, perturb

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TAXONOMY", "LabelTaxonomy",
    "Instance", "InstanceSet", "RleMask", "mask_iou", "merge_to_binary",
    "rle_decode", "rle_encode",
    "ConfusionMatrix", "DatasetSummary", "MetricsRecord", "aggregate",
    "compute_metrics", "confusion_matrix", "evaluate_pair",
    "VertebraChain", "connected_components", "label_chain", "nms", "split_fused",
    "approximate_endplates", "detect_osteophytes", "extract_contour",
    "intervertebral_spaces", "lordosis_angle", "measure_chain",
    "PerturbSpec", "SynthSpec", "generate_spine", "perturb",
]
