"""Constant-velocity Kalman filter over box center, size and their velocities.

State layout is ``(cx, cy, w, h, vx, vy, vw, vh)``. All functions are pure:
they return a fresh :class:`KalmanState` and never touch their inputs.
Noise standard deviations scale with the box height.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AffineTransform, BBox

NDIM = 4
MIN_SIZE = 1e-3

_F = np.eye(2 * NDIM)
_F[:NDIM, NDIM:] = np.eye(NDIM)
_H = np.eye(NDIM, 2 * NDIM)


class KalmanDegeneracyError(ArithmeticError):
    """Raised when the innovation covariance cannot be inverted."""


@dataclass(frozen=True)
class KalmanParams:
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160


DEFAULT_PARAMS = KalmanParams()


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.array(self.mean, dtype=float).reshape(2 * NDIM)
        p = np.array(self.covariance, dtype=float).reshape(2 * NDIM, 2 * NDIM)
        m.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", p)

    def to_bbox(self) -> BBox:
        cx, cy, w, h = self.mean[:NDIM]
        return BBox.from_center(cx, cy, w, h)


def _height(mean: np.ndarray) -> float:
    return max(float(mean[3]), MIN_SIZE)


def initiate(measurement: BBox, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    if not measurement.area > 0:
        raise ValueError(f"cannot initiate a track from a zero-area box: {measurement}")
    cx, cy = measurement.center
    mean = np.array([cx, cy, measurement.width, measurement.height, 0, 0, 0, 0], dtype=float)
    h = measurement.height
    std = np.r_[
        np.full(NDIM, 2 * params.std_weight_position * h),
        np.full(NDIM, 10 * params.std_weight_velocity * h),
    ]
    return KalmanState(mean, np.diag(std**2))


def predict(s: KalmanState, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    h = _height(s.mean)
    std = np.r_[
        np.full(NDIM, params.std_weight_position * h),
        np.full(NDIM, params.std_weight_velocity * h),
    ]
    mean = _F @ s.mean
    cov = _F @ s.covariance @ _F.T + np.diag(std**2)
    return KalmanState(mean, (cov + cov.T) / 2)


def project(s: KalmanState, params: KalmanParams = DEFAULT_PARAMS) -> tuple[np.ndarray, np.ndarray]:
    """Measurement-space mean and innovation covariance."""
    r = (params.std_weight_position * _height(s.mean)) ** 2
    cov = s.covariance[:NDIM, :NDIM] + r * np.eye(NDIM)
    return s.mean[:NDIM].copy(), cov


def update(s: KalmanState, measurement: BBox, params: KalmanParams = DEFAULT_PARAMS) -> KalmanState:
    if not measurement.area > 0:
        raise ValueError(f"cannot update with a zero-area box: {measurement}")
    z_pred, S = project(s, params)
    r_var = S[0, 0] - s.covariance[0, 0]
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise KalmanDegeneracyError("innovation covariance is not positive definite") from exc
    if not np.all(np.isfinite(chol)):
        raise KalmanDegeneracyError("innovation covariance is not finite")

    cx, cy = measurement.center
    z = np.array([cx, cy, measurement.width, measurement.height])
    # K = P H^T S^-1 via two triangular solves
    pht = s.covariance[:, :NDIM]
    gain = np.linalg.solve(chol.T, np.linalg.solve(chol, pht.T)).T
    mean = s.mean + gain @ (z - z_pred)
    # Joseph form keeps the posterior symmetric PSD
    ikh = np.eye(2 * NDIM) - gain @ _H
    cov = ikh @ s.covariance @ ikh.T + r_var * (gain @ gain.T)
    cov = (cov + cov.T) / 2
    mean[2] = max(mean[2], MIN_SIZE)
    mean[3] = max(mean[3], MIN_SIZE)
    return KalmanState(mean, cov)


def _block_rotation(r: np.ndarray) -> np.ndarray:
    m = np.zeros((2 * NDIM, 2 * NDIM))
    for i in range(0, 2 * NDIM, 2):
        m[i : i + 2, i : i + 2] = r
    return m


def apply_affine(s: KalmanState, t: AffineTransform) -> KalmanState:
    """Move a predicted state into the current camera frame.

    The linear block multiplies every coordinate pair of the state
    ((cx, cy), (w, h), (vx, vy), (vw, vh)); the displacement shifts only the
    center. The covariance is carried through the same linear map.
    """
    if t.is_identity():
        return s
    m = _block_rotation(t.rotation)
    mean = m @ s.mean
    mean[:2] += t.displacement
    cov = m @ s.covariance @ m.T
    return KalmanState(mean, (cov + cov.T) / 2)
