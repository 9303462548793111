"""Shared fixtures for building images and sequences in tests."""
import numpy as np
from scipy.ndimage import gaussian_filter


def _unit(a: np.ndarray) -> np.ndarray:
    return (a - a.min()) / (np.ptp(a) + 1e-12)


def noise_texture(rng: np.random.Generator, shape, fine: float = 0.3) -> np.ndarray:
    """Random texture in [0, 1] with gradients at several scales; ``fine`` weights raw pixel noise."""
    coarse = _unit(gaussian_filter(rng.random(shape), 4.0))
    mid = _unit(gaussian_filter(rng.random(shape), 1.5))
    raw = rng.random(shape)
    return np.clip((1 - fine) * (0.5 * coarse + 0.5 * mid) + fine * raw, 0.0, 1.0)


def shifted_pair(rng, shape, dx: int, dy: int, margin: int = 16, fine: float = 0.3):
    """Two crops of one texture such that content moves by (+dx, +dy) from the first to the second."""
    h, w = shape
    big = noise_texture(rng, (h + 2 * margin, w + 2 * margin), fine)
    prev = big[margin : margin + h, margin : margin + w]
    curr = big[margin - dy : margin - dy + h, margin - dx : margin - dx + w]
    return np.ascontiguousarray(prev), np.ascontiguousarray(curr)
