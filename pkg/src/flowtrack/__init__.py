"""flowtrack: sparse-correction point tracking on dense frame-to-frame motion.

Place one seed point, get a full trajectory by bidirectional flow
propagation, then correct only the frames that drift; each correction
rebuilds the adjacent spans by blending forward and backward traces so the
track passes exactly through every manual point.
"""

from .flow import FlowConfig, FlowField, FlowVolume, compute_flow, sample_flow
from .metrics import APPConfig, APPReport, app, dataset_app, point_precision
from .track import (
    Anchor,
    PropagationTrace,
    RebuildStats,
    Track,
    insert_anchor,
    interpolate_linear,
    new_track,
    propagate,
    rebuild_segment,
    rebuild_track,
    remove_anchor,
)
from .video import Frame, Point2D, VideoSequence, load_sequence, rescale_points, rescale_sequence

__version__ = "0.1.0"
