"""Camera motion compensation between consecutive frames.

Keypoints come from thresholding a discrete Laplacian, are tracked with
pyramidal Lucas-Kanade, and the global motion is fitted as a 6-DOF affine
map with RANSAC. Point sets are carried as ``(N, 2)`` float arrays of
(x, y) pixel coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import AffineTransform, GrayFrame

MIN_EIGENVALUE = 1e-4
COLLINEAR_AREA = 1e-6
RANSAC_CONFIDENCE = 0.99


@dataclass(frozen=True)
class CmcParams:
    theta_th: float = 0.9
    num_keypoints: int = 210
    lk_window: int = 21
    # downsampled levels above full resolution (0 = no pyramid)
    lk_pyramid_levels: int = 3
    lk_max_iters: int = 30
    lk_epsilon: float = 0.01
    ransac_inlier_px: float = 2.0
    ransac_max_iters: int = 100
    ransac_min_inliers: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.theta_th > 0:
            raise ValueError("theta_th must be positive")
        if self.num_keypoints < 3:
            raise ValueError("num_keypoints must be >= 3")
        if self.lk_window < 5 or self.lk_window % 2 == 0:
            raise ValueError("lk_window must be odd and >= 5")
        if self.lk_pyramid_levels < 1:
            raise ValueError("lk_pyramid_levels must be >= 1")
        if self.lk_max_iters < 1 or self.ransac_max_iters < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.ransac_min_inliers < 3:
            raise ValueError("ransac_min_inliers must be >= 3")


@dataclass(frozen=True, eq=False)
class FlowResult:
    points: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True, eq=False)
class AffineFit:
    transform: AffineTransform
    inliers: np.ndarray

    @property
    def inlier_count(self) -> int:
        return int(self.inliers.sum())


def _pixels(frame) -> np.ndarray:
    if isinstance(frame, GrayFrame):
        return frame.intensities
    return np.ascontiguousarray(frame, dtype=np.float64)


def laplacian_response(frame: GrayFrame) -> np.ndarray:
    """4-neighbour Laplacian (centre -4, N/S/E/W +1) with replicated borders."""
    return _kernels.laplacian4(_pixels(frame))


def select_keypoints(response: np.ndarray, params: CmcParams = CmcParams()) -> np.ndarray:
    """Pixels with ``|response| > theta_th``, thinned to ``num_keypoints`` by grid stratification."""
    response = np.ascontiguousarray(response, dtype=np.float64)
    return _kernels.stratified_select(response, float(params.theta_th), int(params.num_keypoints))


def build_pyramid(frame, levels: int) -> tuple[np.ndarray, ...]:
    # writable copy: numba types read-only arrays differently, and the tuple must be homogeneous
    pyr = [np.array(_pixels(frame), dtype=np.float64)]
    for _ in range(levels):
        if min(pyr[-1].shape) < 2:
            break
        pyr.append(_kernels.pyr_down(pyr[-1]))
    return tuple(pyr)


def _lk_on_pyramids(prev_pyr, curr_pyr, pts, params: CmcParams) -> FlowResult:
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    n_lvl = min(len(prev_pyr), len(curr_pyr))
    if len(pts) == 0:
        return FlowResult(np.empty((0, 2)), np.zeros(0, dtype=bool))
    out, status = _kernels.pyr_lk(
        prev_pyr[:n_lvl],
        curr_pyr[:n_lvl],
        pts,
        params.lk_window // 2,
        params.lk_max_iters,
        float(params.lk_epsilon),
        MIN_EIGENVALUE,
    )
    return FlowResult(out, status.astype(bool))


def lucas_kanade(prev: GrayFrame, curr: GrayFrame, pts, params: CmcParams = CmcParams()) -> FlowResult:
    """Track ``pts`` from ``prev`` into ``curr``.

    Points whose structure tensor is near singular (mean minimum eigenvalue
    below 1e-4), that leave the frame, or whose iteration blows up are
    returned with ``valid`` False.
    """
    a, b = _pixels(prev), _pixels(curr)
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape[::-1]} vs {b.shape[::-1]}")
    levels = params.lk_pyramid_levels
    return _lk_on_pyramids(build_pyramid(a, levels), build_pyramid(b, levels), pts, params)


def _affine_from_triplets(src: np.ndarray, dst: np.ndarray):
    """Exact affine maps for a batch of 3-point samples, shapes ``(T, 3, 2)``."""
    ones = np.ones(src.shape[:2] + (1,))
    x = np.concatenate([src, ones], axis=2)
    v1 = src[:, 1] - src[:, 0]
    v2 = src[:, 2] - src[:, 0]
    area = 0.5 * np.abs(v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])
    ok = area >= COLLINEAR_AREA
    models = np.zeros((len(src), 3, 2))
    if ok.any():
        models[ok] = np.linalg.solve(x[ok], dst[ok])
    return models, ok


def _sq_residuals(models: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    diff = np.matmul(src, models[:, :2]) + models[:, None, 2] - dst
    return (diff * diff).sum(axis=2)


def _sample_triplets(rng: np.random.Generator, n: int, trials: int) -> np.ndarray:
    idx = rng.integers(0, n, size=(trials, 3))
    while True:
        bad = (idx[:, 0] == idx[:, 1]) | (idx[:, 0] == idx[:, 2]) | (idx[:, 1] == idx[:, 2])
        if not bad.any():
            return idx
        idx[bad] = rng.integers(0, n, size=(int(bad.sum()), 3))


def ransac_affine(
    p_prev, p_curr, valid=None, params: CmcParams = CmcParams(), rng: np.random.Generator | None = None
) -> AffineFit | None:
    """Robustly fit ``p_curr ~ R @ p_prev + d``; ``None`` when no acceptable model exists."""
    src = np.asarray(p_prev, dtype=float).reshape(-1, 2)
    dst = np.asarray(p_curr, dtype=float).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ValueError("correspondence arrays must be parallel")
    keep = np.ones(len(src), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    keep = keep & np.isfinite(src).all(axis=1) & np.isfinite(dst).all(axis=1)
    src, dst = src[keep], dst[keep]
    n = len(src)
    if n < 3:
        return None
    if rng is None:
        rng = np.random.default_rng(params.seed)

    trials = params.ransac_max_iters
    idx = _sample_triplets(rng, n, trials)
    models, ok = _affine_from_triplets(src[idx], dst[idx])
    dets = models[:, 0, 0] * models[:, 1, 1] - models[:, 0, 1] * models[:, 1, 0]
    ok &= dets > 0
    thresh_sq = params.ransac_inlier_px**2
    counts = (_sq_residuals(models, src, dst) <= thresh_sq).sum(axis=1)
    counts[~ok] = -1

    # adaptive early stop: the first trial by which the best-so-far model is confident enough
    running = np.maximum.accumulate(counts)
    ratio = np.clip(running, 0, None) / n
    with np.errstate(divide="ignore"):
        needed = np.log(1 - RANSAC_CONFIDENCE) / np.log1p(-np.minimum(ratio**3, 1 - 1e-16))
    stop = np.flatnonzero((running > 0) & (np.arange(1, trials + 1) >= needed))
    last = stop[0] if len(stop) else trials - 1
    best = int(np.argmax(counts[: last + 1]))
    best_count = int(counts[best])
    if best_count < params.ransac_min_inliers:
        return None

    m = models[best]
    resid = src @ m[:2] + m[2] - dst
    inliers = (resid * resid).sum(axis=1) <= thresh_sq
    design = np.hstack([src[inliers], np.ones((int(inliers.sum()), 1))])
    refit, *_ = np.linalg.lstsq(design, dst[inliers], rcond=None)
    rot = refit[:2].T
    if not np.all(np.isfinite(refit)) or np.linalg.det(rot) <= 0:
        return None
    full = np.zeros(len(keep), dtype=bool)
    full[np.flatnonzero(keep)[inliers]] = True
    return AffineFit(AffineTransform(rot, refit[2]), full)


def estimate(
    prev: GrayFrame,
    curr: GrayFrame,
    p_prev,
    params: CmcParams = CmcParams(),
    rng: np.random.Generator | None = None,
) -> tuple[AffineTransform, np.ndarray]:
    """Camera motion from ``prev`` to ``curr`` plus fresh keypoints taken from ``curr``.

    Falls back to the identity whenever flow or RANSAC cannot produce a model.
    """
    est = MotionEstimator(params, rng=rng)
    est.reset(prev, p_prev)
    return est.step(curr), est.keypoints


@dataclass
class MotionEstimator:
    """Stateful wrapper that reuses the previous frame's pyramid and keypoints."""

    params: CmcParams = field(default_factory=CmcParams)
    rng: np.random.Generator | None = None
    keypoints: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    last_fit: AffineFit | None = None
    _prev_pyr: tuple | None = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.params.seed)

    def reset(self, frame: GrayFrame | None = None, keypoints=None) -> None:
        self._prev_pyr = None if frame is None else build_pyramid(frame, self.params.lk_pyramid_levels)
        self.keypoints = np.empty((0, 2)) if keypoints is None else np.asarray(keypoints, dtype=float).reshape(-1, 2)
        self.last_fit = None

    def step(self, curr: GrayFrame) -> AffineTransform:
        curr_pyr = build_pyramid(curr, self.params.lk_pyramid_levels)
        transform = AffineTransform.identity()
        self.last_fit = None
        if self._prev_pyr is not None and len(self.keypoints):
            if self._prev_pyr[0].shape != curr_pyr[0].shape:
                raise ValueError("frame size changed mid-sequence")
            flow = _lk_on_pyramids(self._prev_pyr, curr_pyr, self.keypoints, self.params)
            fit = ransac_affine(self.keypoints, flow.points, flow.valid, self.params, self.rng)
            if fit is not None:
                transform = fit.transform
                self.last_fit = fit
        self.keypoints = select_keypoints(laplacian_response(curr_pyr[0]), self.params)
        self._prev_pyr = curr_pyr
        return transform
