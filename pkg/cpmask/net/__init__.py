from .affinity import AffinityModule, compute_affinity, nonlocal_attention, normalize_affinity, zscore
from .checkpoint import FORMAT_VERSION, MAGIC, dump_container, dumps_container, load_container, loads_container
from .model import STRIDE, Backbone, BoundaryModule, CPMaskNet, RoIForward, upsample2

__all__ = [
    # Affinity
    "AffinityModule",
    "compute_affinity",
    "nonlocal_attention",
    "normalize_affinity",
    "zscore",
    # Checkpoint
    "FORMAT_VERSION",
    "MAGIC",
    "dump_container",
    "dumps_container",
    "load_container",
    "loads_container",
    # Model
    "STRIDE",
    "Backbone",
    "BoundaryModule",
    "CPMaskNet",
    "RoIForward",
    "upsample2"
]
