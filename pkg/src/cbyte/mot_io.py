"""MOT Challenge text records and numbered grayscale frame directories."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .core import BBox, Detection, GrayFrame

IMAGE_SUFFIXES = {".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class MotParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class MotRecord:
    frame: int
    id: int
    left: float
    top: float
    width: float
    height: float
    score: float = 1.0
    extra: tuple[float, float, float] = (-1.0, -1.0, -1.0)

    @property
    def box(self) -> BBox:
        return BBox(self.left, self.top, max(self.width, 0.0), max(self.height, 0.0))

    def to_detection(self) -> Detection:
        return Detection(self.box, min(max(self.score, 0.0), 1.0))


def format_number(value: float) -> str:
    """Shortest fixed-point text with at most six decimals (``10.0 -> "10"``)."""
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def format_record(r: MotRecord) -> str:
    fields = [str(r.frame), str(r.id)] + [format_number(v) for v in (r.left, r.top, r.width, r.height, r.score, *r.extra)]
    return ",".join(fields)


def _int_field(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


def parse_mot(text: str) -> dict[int, list[MotRecord]]:
    """Group records by frame (ascending); file order is kept within a frame.

    Lines need at least seven comma-separated fields; missing trailing
    fields default to -1. Blank lines are skipped.
    """
    grouped: dict[int, list[MotRecord]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 7:
            raise MotParseError(line_no, f"expected at least 7 fields, got {len(parts)}")
        try:
            frame = _int_field(parts[0])
            track_id = _int_field(parts[1])
            nums = [float(p) for p in parts[2:10]]
        except ValueError as exc:
            raise MotParseError(line_no, f"unparseable field in {line!r}") from exc
        if frame < 1:
            raise MotParseError(line_no, f"frame numbers start at 1, got {frame}")
        if not all(np.isfinite(nums)):
            raise MotParseError(line_no, "non-finite value")
        nums += [-1.0] * (8 - len(nums))
        rec = MotRecord(frame, track_id, *nums[:5], extra=tuple(nums[5:8]))
        grouped.setdefault(frame, []).append(rec)
    return {f: grouped[f] for f in sorted(grouped)}


def flatten(records: Mapping[int, Sequence[MotRecord]] | Iterable[MotRecord]) -> list[MotRecord]:
    if isinstance(records, Mapping):
        return [r for f in sorted(records) for r in records[f]]
    return list(records)


def group_by_frame(records: Mapping[int, Sequence[MotRecord]] | Iterable[MotRecord]) -> dict[int, list[MotRecord]]:
    grouped: dict[int, list[MotRecord]] = {}
    for r in flatten(records):
        grouped.setdefault(r.frame, []).append(r)
    return {f: grouped[f] for f in sorted(grouped)}


def serialize_records(records: Mapping[int, Sequence[MotRecord]] | Iterable[MotRecord]) -> str:
    """Records in their given (frame-grouped) order, one newline-terminated line each."""
    return "".join(format_record(r) + "\n" for r in flatten(records))


def write_mot(history) -> str:
    """Tracker history (``TrackSnapshot`` items) as MOT text, sorted by frame then id."""
    rows = sorted(history, key=lambda s: (s.frame_index, s.id))
    return "".join(
        format_record(MotRecord(s.frame_index, s.id, s.box.left, s.box.top, s.box.width, s.box.height, s.score))
        + "\n"
        for s in rows
    )


def read_mot_file(path) -> dict[int, list[MotRecord]]:
    return parse_mot(Path(path).read_text())


def list_frames(frames_dir) -> dict[int, Path]:
    """Map frame number (digits in the file stem) to image path."""
    frames: dict[int, Path] = {}
    for p in sorted(Path(frames_dir).iterdir()):
        if p.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        digits = re.findall(r"\d+", p.stem)
        if not digits:
            continue
        n = int(digits[-1])
        if n in frames:
            raise ValueError(f"duplicate frame number {n}: {frames[n].name} and {p.name}")
        frames[n] = p
    return dict(sorted(frames.items()))


def load_frame(path, frame_index: int = 0) -> GrayFrame:
    with Image.open(path) as im:
        pixels = np.asarray(im.convert("L"), dtype=np.uint8)
    return GrayFrame.from_uint8(pixels, frame_index)


def save_frame(path, pixels: np.ndarray) -> None:
    """Write an 8-bit grayscale image; ``.pgm`` produces binary portable graymap."""
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path)
