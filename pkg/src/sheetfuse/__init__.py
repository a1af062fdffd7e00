"""Dual-view light-sheet stack fusion.

Fuses two opposing-illumination views of the same sample by estimating,
per column of each slice, the row where focus hands over from one view
to the other, then splicing the views at that boundary.
"""

__version__ = "0.1.0"

from sheetfuse.boundary import (BoundaryCurve, EmConfig, PolyFitParams,
                                attenuation_profile, clarity_curve,
                                column_clarity, e_step, em_estimate,
                                fit_window_poly, init_boundary,
                                normalize_focus_pair, smoothness_penalty)
from sheetfuse.config import RunConfig, build_config, parse_config_file
from sheetfuse.fusion import (FusionResult, baseline_fuse, compose,
                              fuse_slice, fuse_volume)
from sheetfuse.geometry import (IncidentProfile, bounding_polygon,
                                foreground_mask, incident_profile,
                                otsu_from_histogram, otsu_threshold,
                                sample_geometry)
from sheetfuse.metrics import (MetricsReport, emse, evaluate_pair, q_g,
                               q_mi, q_s, ssim)
from sheetfuse.nsct import (NsctCoeffs, focus_measure, nsct_decompose,
                            nsct_reconstruct)
from sheetfuse.stack_io import (StackError, ViewPair, Volume, load_stack,
                                save_stack, to_canonical, from_canonical,
                                write_boundary_csv)
from sheetfuse.synth import (BlurModel, inject_ghost, simulate_views,
                             textured_phantom)

__all__ = [
    "__version__",
    "BlurModel", "BoundaryCurve", "EmConfig", "FusionResult",
    "IncidentProfile", "MetricsReport", "NsctCoeffs", "PolyFitParams",
    "RunConfig", "StackError", "ViewPair", "Volume",
    "attenuation_profile", "baseline_fuse", "bounding_polygon",
    "build_config", "clarity_curve", "column_clarity", "compose",
    "e_step", "em_estimate", "emse", "evaluate_pair", "fit_window_poly",
    "focus_measure", "foreground_mask", "from_canonical", "fuse_slice",
    "fuse_volume", "incident_profile", "init_boundary", "inject_ghost",
    "load_stack", "normalize_focus_pair", "nsct_decompose",
    "nsct_reconstruct", "otsu_from_histogram", "otsu_threshold", "q_g",
    "q_mi", "q_s", "sample_geometry", "save_stack", "simulate_views",
    "smoothness_penalty", "ssim", "textured_phantom", "to_canonical",
    "write_boundary_csv",
]
