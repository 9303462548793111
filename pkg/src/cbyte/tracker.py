"""Camera-compensated two-stage (high/low score) tracking-by-detection."""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kalman
from .association import cost_matrix, linear_assignment, split_detections
from .cmc import CmcParams, MotionEstimator
from .core import AffineTransform, BBox, Detection, GrayFrame
from .kalman import KalmanParams, KalmanState

log = logging.getLogger(__name__)

STAGES = ("predict", "cmc", "associate", "bookkeeping")


class FrameOrderError(ValueError):
    pass


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    TRACKED = "tracked"
    LOST = "lost"
    REMOVED = "removed"


@dataclass(frozen=True)
class TrackerConfig:
    cmc: CmcParams = field(default_factory=CmcParams)
    kalman: KalmanParams = field(default_factory=KalmanParams)
    tau_high: float = 0.6
    tau_low: float = 0.1
    primary_max_cost: float = 0.8
    secondary_max_cost: float = 0.5
    max_lost_age: int = 30
    min_hits_to_confirm: int = 2
    enable_cmc: bool = True

    def __post_init__(self):
        if not 0 <= self.tau_low <= self.tau_high <= 1:
            raise ValueError("need 0 <= tau_low <= tau_high <= 1")
        for name in ("primary_max_cost", "secondary_max_cost"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_lost_age < 1:
            raise ValueError("max_lost_age must be >= 1")
        if self.min_hits_to_confirm < 1:
            raise ValueError("min_hits_to_confirm must be >= 1")


@dataclass
class Track:
    id: int
    state: KalmanState
    status: TrackStatus
    score: float
    start_frame: int
    frames_since_update: int = 0
    hit_count: int = 1
    confirmed: bool = False

    @property
    def box(self) -> BBox:
        return self.state.to_bbox()


@dataclass(frozen=True)
class TrackSnapshot:
    frame_index: int
    id: int
    box: BBox
    score: float


class Tracker:
    """One tracker per video stream; ``step`` must be called frame by frame.

    ``last_timings`` holds the per-stage wall-clock time (ms) of the most
    recent step, keyed by :data:`STAGES` plus ``"step"``.
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.tracks: list[Track] = []
        self.history: list[TrackSnapshot] = []
        self.last_timings: dict[str, float] = {}
        self.last_transform = AffineTransform.identity()
        self.last_keypoint_count = 0
        self._next_id = 1
        self._last_frame: int | None = None
        self._motion = MotionEstimator(self.config.cmc) if self.config.enable_cmc else None

    def step(self, frame: GrayFrame, detections: Sequence[Detection]) -> list[TrackSnapshot]:
        cfg = self.config
        if self._last_frame is not None and frame.frame_index <= self._last_frame:
            raise FrameOrderError(f"frame {frame.frame_index} presented after frame {self._last_frame}")
        self._last_frame = frame.frame_index
        clock = time.perf_counter
        t0 = clock()

        live = [t for t in self.tracks if t.status is not TrackStatus.REMOVED]
        for t in live:
            t.state = kalman.predict(t.state, cfg.kalman)
        t1 = clock()

        transform = AffineTransform.identity()
        if self._motion is not None:
            transform = self._motion.step(frame)
            self.last_keypoint_count = len(self._motion.keypoints)
            if not transform.is_identity():
                for t in live:
                    t.state = kalman.apply_affine(t.state, transform)
        self.last_transform = transform
        t2 = clock()

        dets = [d for d in detections if d.box.area > 0]
        high, low = split_detections(dets, cfg.tau_high, cfg.tau_low)
        pred = np.array([t.box.as_array() for t in live]).reshape(-1, 4)
        first = linear_assignment(
            cost_matrix(pred, np.array([d.box.as_array() for d in high]).reshape(-1, 4)), cfg.primary_max_cost
        )
        matches = [(live[r], high[c]) for r, c in first.pairs]
        # low-score evidence may only extend tracks that were being followed
        second_rows = [r for r in first.unmatched_rows if live[r].status is TrackStatus.TRACKED]
        second = linear_assignment(
            cost_matrix(pred[second_rows], np.array([d.box.as_array() for d in low]).reshape(-1, 4)),
            cfg.secondary_max_cost,
        )
        matches += [(live[second_rows[r]], low[c]) for r, c in second.pairs]
        leftover_high = [high[c] for c in first.unmatched_cols]
        t3 = clock()

        matched_ids = set()
        for track, det in matches:
            self._update(track, det)
            matched_ids.add(track.id)
        for track in live:
            if track.id in matched_ids:
                continue
            track.frames_since_update += 1
            if not track.confirmed or track.frames_since_update > cfg.max_lost_age:
                track.status = TrackStatus.REMOVED
            else:
                track.status = TrackStatus.LOST
        for det in leftover_high:
            live.append(self._spawn(det, frame.frame_index))
        self.tracks = [t for t in live if t.status is not TrackStatus.REMOVED]

        out = [
            TrackSnapshot(frame.frame_index, t.id, t.box, t.score)
            for t in sorted(self.tracks, key=lambda t: t.id)
            if t.status is TrackStatus.TRACKED and t.frames_since_update == 0
        ]
        self.history.extend(out)
        t4 = clock()

        self.last_timings = {
            "predict": (t1 - t0) * 1e3,
            "cmc": (t2 - t1) * 1e3 if self._motion is not None else 0.0,
            "associate": (t3 - t2) * 1e3,
            "bookkeeping": (t4 - t3) * 1e3,
            "step": (t4 - t0) * 1e3,
        }
        return out

    def flush(self) -> list[TrackSnapshot]:
        return list(self.history)

    def _update(self, track: Track, det: Detection) -> None:
        try:
            track.state = kalman.update(track.state, det.box, self.config.kalman)
        except kalman.KalmanDegeneracyError:
            log.warning("track %d: degenerate innovation covariance, re-initialising", track.id)
            track.state = kalman.initiate(det.box, self.config.kalman)
        track.score = det.score
        track.frames_since_update = 0
        track.hit_count += 1
        if not track.confirmed and track.hit_count >= self.config.min_hits_to_confirm:
            track.confirmed = True
        track.status = TrackStatus.TRACKED if track.confirmed else TrackStatus.TENTATIVE

    def _spawn(self, det: Detection, frame_index: int) -> Track:
        confirmed = self.config.min_hits_to_confirm <= 1
        track = Track(
            id=self._next_id,
            state=kalman.initiate(det.box, self.config.kalman),
            status=TrackStatus.TRACKED if confirmed else TrackStatus.TENTATIVE,
            score=det.score,
            start_frame=frame_index,
            confirmed=confirmed,
        )
        self._next_id += 1
        return track
