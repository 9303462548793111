"""Camera-compensated two-stage multi-object tracking."""
from .association import Assignment, cost_matrix, linear_assignment, split_detections
from .cmc import CmcParams, FlowResult, MotionEstimator, estimate, laplacian_response, lucas_kanade, ransac_affine, select_keypoints
from .core import AffineTransform, BBox, Detection, GrayFrame, Keypoint, compose, iou
from .kalman import KalmanParams, KalmanState
from .metrics import MetricsReport, clear_metrics, evaluate, id_metrics
from .mot_io import MotRecord, parse_mot, write_mot
from .synth import SynthConfig, synth_sequence
from .tracker import Tracker, TrackerConfig, TrackSnapshot, TrackStatus

__version__ = "0.1.0"
