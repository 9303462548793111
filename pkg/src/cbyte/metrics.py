"""CLEAR-MOT and identity (IDF1) metrics over MOT records."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .association import linear_assignment, solve_assignment
from .core import iou_matrix
from .mot_io import MotRecord, group_by_frame

Records = Mapping[int, Sequence[MotRecord]] | Iterable[MotRecord]


@dataclass(frozen=True)
class ClearResult:
    fp: int
    fn: int
    idsw: int
    gt_count: int
    matches: int

    @property
    def mota(self) -> float:
        # no ground truth: report 0 rather than divide by zero
        if self.gt_count == 0:
            return 0.0
        return 1.0 - (self.fp + self.fn + self.idsw) / self.gt_count


@dataclass(frozen=True)
class IdResult:
    idtp: int
    idfp: int
    idfn: int

    @property
    def idp(self) -> float:
        d = self.idtp + self.idfp
        return self.idtp / d if d else 0.0

    @property
    def idr(self) -> float:
        d = self.idtp + self.idfn
        return self.idtp / d if d else 0.0

    @property
    def idf1(self) -> float:
        d = 2 * self.idtp + self.idfp + self.idfn
        return 2 * self.idtp / d if d else 0.0


@dataclass(frozen=True)
class MetricsReport:
    mota: float
    idf1: float
    idp: float
    idr: float
    fp: int
    fn: int
    idsw: int
    gt_count: int
    idtp: int
    idfp: int
    idfn: int

    def as_dict(self) -> dict:
        return {
            "MOTA": self.mota,
            "IDF1": self.idf1,
            "IDP": self.idp,
            "IDR": self.idr,
            "FP": self.fp,
            "FN": self.fn,
            "IDSW": self.idsw,
            "GT": self.gt_count,
            "IDTP": self.idtp,
            "IDFP": self.idfp,
            "IDFN": self.idfn,
        }


def _boxes(recs: Sequence[MotRecord]) -> np.ndarray:
    return np.array([[r.left, r.top, r.width, r.height] for r in recs], dtype=float).reshape(-1, 4)


def _canonical(recs: Sequence[MotRecord]) -> list[MotRecord]:
    # matching ties are broken by position, so fix an order independent of the input
    return sorted(recs, key=lambda r: (r.id, r.left, r.top, r.width, r.height, r.score))


def clear_metrics(gt: Records, results: Records, iou_gate: float = 0.5) -> ClearResult:
    """Frame-by-frame CLEAR-MOT counting.

    Correspondences from the previous frame are kept while they still pass
    the IoU gate; the rest is matched by minimum ``1 - IoU`` assignment. An
    identity switch is counted whenever a ground-truth object is matched to
    a different hypothesis than the one it was last matched to.
    """
    gt_f = group_by_frame(gt)
    res_f = group_by_frame(results)
    prev: dict[int, int] = {}
    last: dict[int, int] = {}
    fp = fn = idsw = gt_count = n_match = 0
    for frame in sorted(set(gt_f) | set(res_f)):
        g = _canonical(gt_f.get(frame, []))
        h = _canonical(res_f.get(frame, []))
        gt_count += len(g)
        ious = iou_matrix(_boxes(g), _boxes(h))
        h_index = {r.id: j for j, r in enumerate(h)}
        pairs: list[tuple[int, int]] = []
        used_g: set[int] = set()
        used_h: set[int] = set()
        for i, r in enumerate(g):
            j = h_index.get(prev.get(r.id))
            if j is not None and j not in used_h and ious[i, j] >= iou_gate:
                pairs.append((i, j))
                used_g.add(i)
                used_h.add(j)
        rest_g = [i for i in range(len(g)) if i not in used_g]
        rest_h = [j for j in range(len(h)) if j not in used_h]
        if rest_g and rest_h:
            sub = 1.0 - ious[np.ix_(rest_g, rest_h)]
            for a, b in linear_assignment(sub, 1.0 - iou_gate).pairs:
                if ious[rest_g[a], rest_h[b]] >= iou_gate:
                    pairs.append((rest_g[a], rest_h[b]))

        current: dict[int, int] = {}
        for i, j in pairs:
            gid, hid = g[i].id, h[j].id
            if gid in last and last[gid] != hid:
                idsw += 1
            last[gid] = hid
            current[gid] = hid
        prev = current
        n_match += len(pairs)
        fp += len(h) - len(pairs)
        fn += len(g) - len(pairs)
    return ClearResult(fp, fn, idsw, gt_count, n_match)


def identity_overlaps(gt: Records, results: Records, iou_gate: float = 0.5):
    """Per-identity detection counts and the gt x result co-occurrence matrix (IoU >= gate)."""
    gt_f = group_by_frame(gt)
    res_f = group_by_frame(results)
    gt_ids = sorted({r.id for recs in gt_f.values() for r in recs})
    res_ids = sorted({r.id for recs in res_f.values() for r in recs})
    gi = {k: n for n, k in enumerate(gt_ids)}
    ri = {k: n for n, k in enumerate(res_ids)}
    gt_len = np.zeros(len(gt_ids), dtype=int)
    res_len = np.zeros(len(res_ids), dtype=int)
    overlap = np.zeros((len(gt_ids), len(res_ids)), dtype=int)
    for frame in sorted(set(gt_f) | set(res_f)):
        g = gt_f.get(frame, [])
        h = res_f.get(frame, [])
        for r in g:
            gt_len[gi[r.id]] += 1
        for r in h:
            res_len[ri[r.id]] += 1
        if g and h:
            ok = iou_matrix(_boxes(g), _boxes(h)) >= iou_gate
            for i, j in zip(*np.nonzero(ok)):
                overlap[gi[g[i].id], ri[h[j].id]] += 1
    return gt_ids, res_ids, gt_len, res_len, overlap


def id_metrics(gt: Records, results: Records, iou_gate: float = 0.5) -> IdResult:
    """Identity precision/recall from a global one-to-one gt/result identity matching.

    Minimising IDFP + IDFN over identity matchings is the same as maximising
    the total number of co-occurring detections, which is what is solved.
    """
    _, _, gt_len, res_len, overlap = identity_overlaps(gt, results, iou_gate)
    idtp = 0
    if overlap.size:
        col4row = solve_assignment(-overlap.astype(float))
        idtp = int(sum(overlap[r, c] for r, c in enumerate(col4row) if c >= 0))
    return IdResult(idtp, int(res_len.sum()) - idtp, int(gt_len.sum()) - idtp)


def evaluate(gt: Records, results: Records, iou_gate: float = 0.5) -> MetricsReport:
    c = clear_metrics(gt, results, iou_gate)
    i = id_metrics(gt, results, iou_gate)
    return MetricsReport(c.mota, i.idf1, i.idp, i.idr, c.fp, c.fn, c.idsw, c.gt_count, i.idtp, i.idfp, i.idfn)
