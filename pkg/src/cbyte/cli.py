"""Command line entry points: track, eval, synth, render."""
from __future__ import annotations

import argparse
import colorsys
import contextlib
import dataclasses
import json
import logging
import os
import shutil
import statistics
import sys
import tempfile
from pathlib import Path

from PIL import Image, ImageDraw

from .config import ConfigError, flatten_config, load_synth_config, load_tracker_config
from .metrics import evaluate
from .mot_io import flatten, list_frames, load_frame, read_mot_file, save_frame, serialize_records, write_mot
from .synth import synth_sequence
from .tracker import STAGES, Tracker

log = logging.getLogger("cbyte")

TRAIL_LENGTH = 15


class CliError(Exception):
    pass


def _configure_logging() -> None:
    level = os.environ.get("CBYTE_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


@contextlib.contextmanager
def _staged_dir(out: Path):
    """Yield a scratch directory that replaces ``out`` only if the block succeeds."""
    out = Path(out)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise CliError(f"output directory {out} exists and is not empty")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}."))
    try:
        yield tmp
        if out.exists():
            out.rmdir()
        tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _summary(values: list[float]) -> dict[str, float]:
    if not values:
        return {"median": 0.0, "mean": 0.0}
    return {"median": statistics.median(values), "mean": statistics.fmean(values)}


def cmd_track(args) -> int:
    cfg = load_tracker_config(args.config)
    if args.no_cmc:
        cfg = dataclasses.replace(cfg, enable_cmc=False)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, cmc=dataclasses.replace(cfg.cmc, seed=args.seed))

    frames = list_frames(args.frames)
    if not frames:
        raise CliError(f"no frame images found in {args.frames}")
    dets = read_mot_file(args.dets)
    missing = sorted(set(dets) - set(frames))
    if missing:
        raise CliError(f"detections reference frame {missing[0]} but no image for it exists in {args.frames}")
    clamped = sum(1 for r in flatten(dets) if not 0 <= r.score <= 1)
    if clamped:
        log.warning("%d detection scores outside [0, 1] were clamped", clamped)

    tracker = Tracker(cfg)
    timings: list[dict[str, float]] = []
    keypoints: list[int] = []
    for number, path in frames.items():
        frame = load_frame(path, number)
        tracker.step(frame, [r.to_detection() for r in dets.get(number, [])])
        timings.append(tracker.last_timings)
        keypoints.append(tracker.last_keypoint_count)
        log.debug("frame %d: %s", number, tracker.last_timings)

    out = Path(args.out)
    manifest = {
        "sequence": Path(args.frames).resolve().name,
        "config": flatten_config(cfg),
        "inputs": {"frames": str(Path(args.frames).resolve()), "dets": str(Path(args.dets).resolve())},
        "frame_count": len(frames),
        "enable_cmc": cfg.enable_cmc,
        "keypoints_per_frame": _summary(keypoints),
        "timings_ms": {k: _summary([t[k] for t in timings]) for k in (*STAGES, "step")},
    }
    _atomic_write(out, write_mot(tracker.flush()))
    _atomic_write(manifest_path(out), json.dumps(manifest, indent=2) + "\n")
    log.info("wrote %s (%d frames)", out, len(frames))
    return 0


def manifest_path(results_path) -> Path:
    p = Path(results_path)
    return p.with_name(p.name + ".manifest.json")


def cmd_eval(args) -> int:
    gt = read_mot_file(args.gt)
    res = read_mot_file(args.results)
    # MOT ground truth marks ignored rows with a zero in the confidence column
    gt = {f: [r for r in recs if r.score != 0] for f, recs in gt.items()}
    if gt and res and (max(gt) < min(res) or max(res) < min(gt)):
        log.warning("ground truth and results cover disjoint frame ranges; scoring over their union")
    report = evaluate(gt, res, args.iou_gate)
    values = report.as_dict()
    print(f"{'metric':<8}{'value':>10}")
    for key, value in values.items():
        print(f"{key:<8}{_fmt(value):>10}")
    for key, value in values.items():
        print(f"{key}={_fmt(value)}")
    return 0


def _fmt(value) -> str:
    return f"{value:.3f}" if isinstance(value, float) else str(value)


def cmd_synth(args) -> int:
    cfg = load_synth_config(args.config)
    seq = synth_sequence(cfg)
    with _staged_dir(Path(args.out)) as tmp:
        (tmp / "frames").mkdir()
        for n, img in enumerate(seq.images, start=1):
            save_frame(tmp / "frames" / f"{n:06d}.pgm", img)
        (tmp / "gt.txt").write_text(serialize_records(seq.gt))
        (tmp / "det.txt").write_text(serialize_records(seq.dets))
        lines = [" ".join(repr(float(v)) for v in m.matrix.ravel()) for m in seq.planted]
        (tmp / "planted_motion.txt").write_text("".join(line + "\n" for line in lines))
    return 0


def id_color(track_id: int) -> tuple[int, int, int]:
    hue = (track_id * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 1.0)
    return int(r * 255), int(g * 255), int(b * 255)


def cmd_render(args) -> int:
    frames = list_frames(args.frames)
    results = read_mot_file(args.results)
    for n in sorted(set(results) - set(frames)):
        log.warning("results mention frame %d but no image exists; skipped", n)
    trails: dict[int, list[tuple[float, float]]] = {}
    with _staged_dir(Path(args.out)) as tmp:
        for n, path in frames.items():
            with Image.open(path) as im:
                canvas = im.convert("RGB")
            draw = ImageDraw.Draw(canvas)
            for r in results.get(n, []):
                color = id_color(r.id)
                trail = trails.setdefault(r.id, [])
                trail.append((r.left + r.width / 2, r.top + r.height / 2))
                del trail[:-TRAIL_LENGTH]
                if len(trail) > 1:
                    draw.line(trail, fill=color, width=2)
                draw.rectangle([r.left, r.top, r.left + r.width, r.top + r.height], outline=color, width=2)
                draw.text((r.left + 2, r.top + 2), str(r.id), fill=color)
            canvas.save(tmp / f"{path.stem}.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbyte", description="Camera-compensated BYTE-style multi-object tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over a frame directory and a MOT detection file")
    p.add_argument("--frames", required=True, type=Path)
    p.add_argument("--dets", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--no-cmc", action="store_true", help="disable camera motion compensation")
    p.add_argument("--seed", type=int, help="RANSAC seed (overrides cmc.seed)")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score MOT results against ground truth")
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--results", required=True, type=Path)
    p.add_argument("--iou-gate", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic sequence with planted camera motion")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="draw tracked boxes and short trails onto frames")
    p.add_argument("--frames", required=True, type=Path)
    p.add_argument("--results", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
