"""Gravitational scanpath simulation and visual-attention evaluation toolkit."""

from .agreement import (
    CrowdReport,
    JudgmentMatrix,
    JudgmentRecord,
    crowd_report,
    fleiss_kappa,
    format_report,
    load_store,
)
from .dynamics import (
    IORField,
    SimParams,
    eval_field,
    extract_fixations,
    integrate,
    resample_trajectory,
    step_ior,
)
from .features import FeatureMap, MassField, brightness_gradient, build_mass, temporal_difference
from .io import (
    Manifest,
    StimulusEntry,
    load_frame_sequence,
    load_manifest,
    read_fixation_table,
    read_pgm,
    read_saliency_pgm,
    read_scanpath,
    read_trajectory,
    render_frame,
    write_pgm,
    write_ppm,
    write_scanpath,
)
from .metrics import (
    GridQuantizer,
    MetricReport,
    amplitude_histogram,
    auc_judd,
    evaluate_batch,
    evaluate_pair,
    kl_divergence,
    nss,
    osa_distance,
    saccade_amplitudes,
    stde,
    string_edit,
)
from .model import GravitationalScanpathModel, WinnerTakeAll, scanpath_to_saliency, wta_scanpath
from .types import (
    Fixation,
    Frame,
    FrameSequence,
    Histogram,
    MetricUndefinedError,
    RetinaGrid,
    SaliencyMap,
    Scanpath,
    Trajectory,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "CrowdReport",
    "Fixation",
    "Frame",
    "FrameSequence",
    "FeatureMap",
    "GravitationalScanpathModel",
    "GridQuantizer",
    "Histogram",
    "IORField",
    "JudgmentMatrix",
    "JudgmentRecord",
    "Manifest",
    "MassField",
    "MetricReport",
    "MetricUndefinedError",
    "RetinaGrid",
    "SaliencyMap",
    "Scanpath",
    "SimParams",
    "StimulusEntry",
    "Trajectory",
    "ValidationError",
    "WinnerTakeAll",
    "amplitude_histogram",
    "auc_judd",
    "brightness_gradient",
    "build_mass",
    "crowd_report",
    "eval_field",
    "evaluate_batch",
    "evaluate_pair",
    "extract_fixations",
    "fleiss_kappa",
    "format_report",
    "integrate",
    "kl_divergence",
    "load_frame_sequence",
    "load_manifest",
    "load_store",
    "nss",
    "osa_distance",
    "read_fixation_table",
    "read_pgm",
    "read_saliency_pgm",
    "read_scanpath",
    "read_trajectory",
    "render_frame",
    "resample_trajectory",
    "saccade_amplitudes",
    "scanpath_to_saliency",
    "stde",
    "step_ior",
    "string_edit",
    "temporal_difference",
    "write_pgm",
    "write_ppm",
    "write_scanpath",
    "wta_scanpath",
]
