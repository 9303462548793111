"""IoU cost matrices, gated linear assignment and detection score splitting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BBox, Detection, boxes_to_array, iou_matrix


@dataclass(frozen=True)
class Assignment:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)


def cost_matrix(track_boxes: Sequence[BBox] | np.ndarray, det_boxes: Sequence[BBox] | np.ndarray) -> np.ndarray:
    """``1 - IoU`` for every (track, detection) pair; accepts BBox lists or ``(N, 4)`` ltwh arrays."""
    a = track_boxes if isinstance(track_boxes, np.ndarray) else boxes_to_array(track_boxes)
    b = det_boxes if isinstance(det_boxes, np.ndarray) else boxes_to_array(det_boxes)
    return 1.0 - iou_matrix(a, b)


def solve_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost matching of size ``min(rows, cols)`` for a finite cost matrix.

    Shortest augmenting path with dual potentials (Jonker-Volgenant style),
    one augmentation per row. Returns ``col_for_row`` with -1 for rows left
    out when there are more rows than columns. Ties go to the lowest column
    index, and free columns win ties against assigned ones.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost matrix must be 2D")
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return np.full(n_rows, -1, dtype=int)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    transposed = n_rows > n_cols
    if transposed:
        cost = cost.T
        n_rows, n_cols = n_cols, n_rows

    u = np.zeros(n_rows)
    v = np.zeros(n_cols)
    col4row = np.full(n_rows, -1, dtype=int)
    row4col = np.full(n_cols, -1, dtype=int)

    for cur_row in range(n_rows):
        shortest = np.full(n_cols, np.inf)
        path = np.full(n_cols, -1, dtype=int)
        seen_cols = np.zeros(n_cols, dtype=bool)
        seen_rows = [cur_row]
        i = cur_row
        min_val = 0.0
        sink = -1
        while sink < 0:
            reduced = min_val + cost[i] - u[i] - v
            better = ~seen_cols & (reduced < shortest)
            path[better] = i
            shortest[better] = reduced[better]
            candidates = np.where(seen_cols, np.inf, shortest)
            min_val = candidates.min()
            ties = np.flatnonzero(candidates == min_val)
            free = ties[row4col[ties] < 0]
            j = int(free[0] if len(free) else ties[0])
            seen_cols[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])
                seen_rows.append(i)

        u[cur_row] += min_val
        others = np.array(seen_rows[1:], dtype=int)
        if len(others):
            u[others] += min_val - shortest[col4row[others]]
        v[seen_cols] -= min_val - shortest[seen_cols]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    if not transposed:
        return col4row
    out = np.full(n_cols, -1, dtype=int)
    out[col4row] = np.arange(n_rows)
    return out


def linear_assignment(cost: np.ndarray, max_cost: float = 1.0) -> Assignment:
    """Minimum-total-cost one-to-one matching that never uses a pair costing more than ``max_cost``.

    Gated entries are priced above any admissible matching, so the solver
    first maximises the number of admissible pairs and then minimises their
    total cost.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0 and cost.ndim != 2:
        cost = cost.reshape(0, 0)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return Assignment([], list(range(n_rows)), list(range(n_cols)))
    allowed = cost <= max_cost
    if not allowed.any():
        return Assignment([], list(range(n_rows)), list(range(n_cols)))
    # rows/cols without any admissible entry can only end up unmatched
    rows = np.flatnonzero(allowed.any(axis=1))
    cols = np.flatnonzero(allowed.any(axis=0))
    sub_allowed = allowed[np.ix_(rows, cols)]
    sub = cost[np.ix_(rows, cols)]
    big = (2 * float(np.abs(sub[sub_allowed]).max()) + 1.0) * (min(len(rows), len(cols)) + 1)
    col4row = solve_assignment(np.where(sub_allowed, sub, big))

    pairs = [(int(rows[r]), int(cols[c])) for r, c in enumerate(col4row) if c >= 0 and sub_allowed[r, c]]
    used_rows = {r for r, _ in pairs}
    used_cols = {c for _, c in pairs}
    return Assignment(
        pairs,
        [r for r in range(n_rows) if r not in used_rows],
        [c for c in range(n_cols) if c not in used_cols],
    )


def split_detections(
    dets: Sequence[Detection], tau_high: float = 0.6, tau_low: float = 0.1
) -> tuple[list[Detection], list[Detection]]:
    """Partition by score into high (``>= tau_high``) and low (``[tau_low, tau_high)``); the rest is dropped."""
    if not 0 <= tau_low <= tau_high <= 1:
        raise ValueError(f"need 0 <= tau_low <= tau_high <= 1, got {tau_low}, {tau_high}")
    high = [d for d in dets if d.score >= tau_high]
    low = [d for d in dets if tau_low <= d.score < tau_high]
    return high, low
