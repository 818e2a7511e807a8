"""Video anomaly detection by visual cloze completion.

Events are spatio-temporal cubes of patches around foreground regions. For
each cube position one network learns to fill in the erased patch (and its
optical flow) from the others; large completion errors flag anomalies.
"""
from .config import PipelineConfig, load_config
from .datasets import GroundTruth, VideoSequence, load_ground_truth, load_sequence, write_synthetic_dataset
from .evaluation import RocCurve, frame_level_roc, pixel_level_roc
from .events import BlockGrid, EventSet, assign_block, build_events
from .geometry import BoundingBox
from .models import CompletionNet, NetSpec
from .roi import RoiThresholds, extract_rois
from .scoring import MetricConfig, rectify, score_events
from .training import ModelSet, TrainConfig, train_all
from .vct import VCT, VCTDataset, make_all_types, make_vct

__version__ = "0.1.0"

__all__ = [
    "BlockGrid", "BoundingBox", "CompletionNet", "EventSet", "GroundTruth", "MetricConfig", "ModelSet", "NetSpec",
    "PipelineConfig", "RocCurve", "RoiThresholds", "TrainConfig", "VCT", "VCTDataset", "VideoSequence",
    "assign_block", "build_events", "extract_rois", "frame_level_roc", "load_config", "load_ground_truth",
    "load_sequence", "make_all_types", "make_vct", "pixel_level_roc", "rectify", "score_events", "train_all",
    "write_synthetic_dataset",
]
