"""Synthetic tracking sequences with planted camera motion.

Objects are textured squares living in world coordinates, each bouncing
inside its own cell of a grid so trajectories never cross. The camera pans,
rotates and (optionally) jumps abruptly; every frame is rendered by
resampling a procedural world texture through the current camera pose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .core import AffineTransform, BBox, GrayFrame, compose
from .mot_io import MotRecord


@dataclass(frozen=True)
class SynthConfig:
    frames: int = 100
    width: int = 640
    height: int = 480
    num_objects: int = 10
    object_size: float = 48.0
    object_speed: float = 1.5
    # continuous camera motion, applied every frame
    pan_x: float = 0.0
    pan_y: float = 0.0
    rotation_deg: float = 0.0
    # abrupt jumps every `jump_every` frames (0 disables); sign alternates when jump_alternate
    jump_every: int = 0
    jump_dx: float = 40.0
    jump_dy: float = 0.0
    jump_rotation_deg: float = 2.0
    jump_alternate: bool = True
    # (object id, first frame, last frame), inclusive, 1-based
    occlusions: tuple[tuple[int, int, int], ...] = ()
    texture_amplitude: float = 1.0
    layout_margin: float = 64.0
    det_noise_px: float = 0.0
    det_dropout: float = 0.0
    score_min: float = 0.7
    score_max: float = 1.0
    low_score_fraction: float = 0.0
    low_score_min: float = 0.2
    low_score_max: float = 0.55
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1 or self.width < 8 or self.height < 8:
            raise ValueError("frames must be >= 1 and the image at least 8x8")
        if self.num_objects < 0:
            raise ValueError("num_objects must be >= 0")
        if self.object_size <= 0 or self.object_size >= min(self.width, self.height):
            raise ValueError(f"object_size {self.object_size} does not fit a {self.width}x{self.height} image")
        if not (0 <= self.det_dropout <= 1 and 0 <= self.low_score_fraction <= 1):
            raise ValueError("det_dropout and low_score_fraction must lie in [0, 1]")
        if not (0 <= self.score_min <= self.score_max <= 1 and 0 <= self.low_score_min <= self.low_score_max <= 1):
            raise ValueError("score ranges must be ordered and within [0, 1]")
        if self.jump_every < 0:
            raise ValueError("jump_every must be >= 0")


@dataclass
class SynthSequence:
    config: SynthConfig
    images: list[np.ndarray]
    gt: list[MotRecord]
    dets: list[MotRecord]
    # planted[k] maps image coordinates of frame k+1 to frame k+2 (frames are 1-based)
    planted: list[AffineTransform] = field(default_factory=list)

    def frame(self, number: int) -> GrayFrame:
        return GrayFrame.from_uint8(self.images[number - 1], number)

    def frames(self):
        for n in range(1, len(self.images) + 1):
            yield self.frame(n)

    def detections_by_frame(self) -> dict[int, list[MotRecord]]:
        out: dict[int, list[MotRecord]] = {n: [] for n in range(1, self.config.frames + 1)}
        for r in self.dets:
            out[r.frame].append(r)
        return out


def _value_noise(rng: np.random.Generator, shape: tuple[int, int], cell: float) -> np.ndarray:
    """Uniform [-1, 1] lattice values bilinearly interpolated at ``cell`` pixel spacing."""
    gh = int(math.ceil(shape[0] / cell)) + 2
    gw = int(math.ceil(shape[1] / cell)) + 2
    lattice = rng.uniform(-1.0, 1.0, size=(gh, gw))
    ys = np.arange(shape[0]) / cell
    xs = np.arange(shape[1]) / cell
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return map_coordinates(lattice, [yy, xx], order=1, mode="nearest")


def _texture(rng: np.random.Generator, shape: tuple[int, int], amplitude: float) -> np.ndarray:
    coarse = _value_noise(rng, shape, 24.0)
    mid = _value_noise(rng, shape, 6.0)
    fine = rng.uniform(-1.0, 1.0, size=shape)
    return 0.5 + amplitude * (0.25 * coarse + 0.15 * mid + 0.35 * fine)


def camera_motions(cfg: SynthConfig) -> list[AffineTransform]:
    """Per-frame image-to-image motion; entry k takes frame k+1 to frame k+2."""
    center = ((cfg.width - 1) / 2, (cfg.height - 1) / 2)
    steady = AffineTransform.rotation_about(cfg.rotation_deg, center, (cfg.pan_x, cfg.pan_y))
    motions = []
    n_jumps = 0
    for frame in range(2, cfg.frames + 1):
        m = steady
        if cfg.jump_every and (frame - 1) % cfg.jump_every == 0:
            sign = -1.0 if (cfg.jump_alternate and n_jumps % 2) else 1.0
            jump = AffineTransform.rotation_about(
                sign * cfg.jump_rotation_deg, center, (sign * cfg.jump_dx, sign * cfg.jump_dy)
            )
            m = compose(jump, m)
            n_jumps += 1
        motions.append(m)
    return motions


def _layout(cfg: SynthConfig):
    """Cell rectangles (x0, y0, x1, y1) in first-frame coordinates, one per object."""
    m = cfg.layout_margin
    region_w = cfg.width - 2 * m
    region_h = cfg.height - 2 * m
    if cfg.num_objects == 0:
        return []
    cols = max(1, math.ceil(math.sqrt(cfg.num_objects * region_w / max(region_h, 1))))
    rows = math.ceil(cfg.num_objects / cols)
    cw, ch = region_w / cols, region_h / rows
    if cw < cfg.object_size or ch < cfg.object_size:
        raise ValueError(f"{cfg.num_objects} objects of size {cfg.object_size} do not fit the layout")
    cells = []
    for k in range(cfg.num_objects):
        r, c = divmod(k, cols)
        cells.append((m + c * cw, m + r * ch, m + (c + 1) * cw, m + (r + 1) * ch))
    return cells


def _object_paths(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """World-space centres, shape ``(frames, objects, 2)``; objects bounce inside their cell."""
    half = cfg.object_size / 2
    paths = np.zeros((cfg.frames, cfg.num_objects, 2))
    for k, (x0, y0, x1, y1) in enumerate(_layout(cfg)):
        lo = np.array([x0 + half, y0 + half])
        hi = np.array([x1 - half, y1 - half])
        pos = lo + rng.random(2) * (hi - lo)
        angle = rng.uniform(0, 2 * math.pi)
        vel = cfg.object_speed * np.array([math.cos(angle), math.sin(angle)])
        for t in range(cfg.frames):
            paths[t, k] = pos
            pos = pos + vel
            for axis in range(2):
                if pos[axis] < lo[axis] or pos[axis] > hi[axis]:
                    vel[axis] = -vel[axis]
                    pos[axis] = np.clip(pos[axis], lo[axis], hi[axis])
    return paths


def synth_sequence(cfg: SynthConfig) -> SynthSequence:
    rng = np.random.default_rng(cfg.seed)
    motions = camera_motions(cfg)
    poses = [AffineTransform.identity()]
    for m in motions:
        poses.append(compose(m, poses[-1]))

    # world canvas large enough for every view, with a small border
    corners = np.array([[0, 0], [cfg.width - 1, 0], [0, cfg.height - 1], [cfg.width - 1, cfg.height - 1]], float)
    seen = np.vstack([p.inverse().apply(corners) for p in poses])
    origin = np.floor(seen.min(axis=0)) - 4
    extent = np.ceil(seen.max(axis=0)) + 4 - origin
    world = _texture(rng, (int(extent[1]) + 1, int(extent[0]) + 1), cfg.texture_amplitude)

    size = int(round(cfg.object_size))
    patches = [
        np.clip(rng.uniform(0.15, 0.85) + 0.3 * cfg.texture_amplitude * _value_noise(rng, (size, size), 4.0), 0, 1)
        for _ in range(cfg.num_objects)
    ]
    paths = _object_paths(cfg, rng)
    hidden = {(oid, f) for oid, first, last in cfg.occlusions for f in range(first, last + 1)}

    ys, xs = np.mgrid[0 : cfg.height, 0 : cfg.width].astype(float)
    pix = np.stack([xs.ravel(), ys.ravel()], axis=1)
    images, gt, dets = [], [], []
    for t, pose in enumerate(poses):
        frame_no = t + 1
        wpts = pose.inverse().apply(pix) - origin
        frame_gt = []
        img = map_coordinates(world, [wpts[:, 1], wpts[:, 0]], order=1, mode="nearest").reshape(cfg.height, cfg.width)
        for k in range(cfg.num_objects):
            oid = k + 1
            if (oid, frame_no) in hidden:
                continue
            cx, cy = pose.apply(paths[t, k])
            box = BBox.from_center(cx, cy, cfg.object_size, cfg.object_size)
            vis = _clip(box, cfg.width, cfg.height)
            if vis is None or vis.area < 0.5 * box.area:
                continue
            left, top = int(round(box.left)), int(round(box.top))
            _paste(img, patches[k], left, top)
            frame_gt.append(MotRecord(frame_no, oid, vis.left, vis.top, vis.width, vis.height, 1.0, (1.0, 1.0, 1.0)))
        images.append(np.clip(np.rint(np.clip(img, 0, 1) * 255), 0, 255).astype(np.uint8))
        gt.extend(frame_gt)
        dets.extend(_detections(cfg, rng, frame_gt))
    return SynthSequence(cfg, images, gt, dets, motions)


def _clip(box: BBox, width: int, height: int) -> BBox | None:
    left, top = max(box.left, 0.0), max(box.top, 0.0)
    right, bottom = min(box.right, float(width)), min(box.bottom, float(height))
    if right <= left or bottom <= top:
        return None
    return BBox(left, top, right - left, bottom - top)


def _paste(img: np.ndarray, patch: np.ndarray, left: int, top: int) -> None:
    h, w = img.shape
    ph, pw = patch.shape
    x0, y0 = max(left, 0), max(top, 0)
    x1, y1 = min(left + pw, w), min(top + ph, h)
    if x1 > x0 and y1 > y0:
        img[y0:y1, x0:x1] = patch[y0 - top : y1 - top, x0 - left : x1 - left]


def _detections(cfg: SynthConfig, rng: np.random.Generator, frame_gt: list[MotRecord]) -> list[MotRecord]:
    out = []
    for r in frame_gt:
        drop, low, u_score = rng.random(3)
        noise = rng.normal(0.0, 1.0, size=4) * cfg.det_noise_px
        if drop < cfg.det_dropout:
            continue
        if low < cfg.low_score_fraction:
            score = cfg.low_score_min + u_score * (cfg.low_score_max - cfg.low_score_min)
        else:
            score = cfg.score_min + u_score * (cfg.score_max - cfg.score_min)
        if cfg.det_noise_px > 0:
            left, top = r.left + noise[0], r.top + noise[1]
            w, h = max(r.width + noise[2], 1.0), max(r.height + noise[3], 1.0)
        else:
            left, top, w, h = r.left, r.top, r.width, r.height
        out.append(MotRecord(r.frame, -1, left, top, w, h, float(score)))
    return out
