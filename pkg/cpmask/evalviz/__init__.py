"""
Oracle-box evaluation and diagnostic heatmaps
"""
from .heatmaps import affinity_heatmap, colorize, emit_heatmaps, heatmap_values, minmax, normalize_per_image
from .metrics import AP_THRESHOLDS, EvalReport, aggregate, ap_from_ious, evaluate, paste_mask, predict_masks
from .tables import ablation_table, base_count_table, make_table, report_table

__all__ = [
    # Heatmaps
    "affinity_heatmap",
    "colorize",
    "emit_heatmaps",
    "heatmap_values",
    "minmax",
    "normalize_per_image",
    # Metrics
    "AP_THRESHOLDS",
    "EvalReport",
    "aggregate",
    "ap_from_ious",
    "evaluate",
    "paste_mask",
    "predict_masks",
    # Tables
    "ablation_table",
    "base_count_table",
    "make_table",
    "report_table"
]
