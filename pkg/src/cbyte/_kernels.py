"""Numba kernels for the per-frame camera motion hot path."""
from __future__ import annotations

import numpy as np
from numba import njit

GRID = 8


@njit(cache=True)
def laplacian4(img):
    h, w = img.shape
    out = np.empty((h, w))
    for y in range(h):
        yu = y - 1 if y > 0 else 0
        yd = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xl = x - 1 if x > 0 else 0
            xr = x + 1 if x < w - 1 else w - 1
            out[y, x] = img[yu, x] + img[yd, x] + img[y, xl] + img[y, xr] - 4.0 * img[y, x]
    return out


@njit(cache=True)
def pyr_down(img):
    """Blur with the 5-tap binomial kernel (replicate border) and drop every other pixel."""
    h, w = img.shape
    oh, ow = (h + 1) // 2, (w + 1) // 2
    tmp = np.empty((h, ow))
    for y in range(h):
        for ox in range(ow):
            x = 2 * ox
            x1l = max(x - 1, 0)
            x2l = max(x - 2, 0)
            x1r = min(x + 1, w - 1)
            x2r = min(x + 2, w - 1)
            tmp[y, ox] = (6.0 * img[y, x] + 4.0 * (img[y, x1l] + img[y, x1r]) + img[y, x2l] + img[y, x2r]) / 16.0
    out = np.empty((oh, ow))
    for oy in range(oh):
        y = 2 * oy
        y1u = max(y - 1, 0)
        y2u = max(y - 2, 0)
        y1d = min(y + 1, h - 1)
        y2d = min(y + 2, h - 1)
        for x in range(ow):
            out[oy, x] = (6.0 * tmp[y, x] + 4.0 * (tmp[y1u, x] + tmp[y1d, x]) + tmp[y2u, x] + tmp[y2d, x]) / 16.0
    return out


@njit(cache=True)
def stratified_select(response, theta, count):
    """Pick up to ``count`` pixels with ``|response| > theta``, round-robin over an 8x8 grid.

    Within a bucket pixels are taken by decreasing magnitude, ties broken by
    row-major index. Returns an ``(n, 2)`` array of (x, y).
    """
    h, w = response.shape
    nb = GRID * GRID
    col_bucket = np.empty(w, np.int64)
    for x in range(w):
        col_bucket[x] = x * GRID // w
    counts = np.zeros(nb, np.int64)
    for y in range(h):
        row = (y * GRID // h) * GRID
        for x in range(w):
            if abs(response[y, x]) > theta:
                counts[row + col_bucket[x]] += 1
    total = counts.sum()
    if total <= count:
        out = np.empty((total, 2))
        k = 0
        for y in range(h):
            for x in range(w):
                if abs(response[y, x]) > theta:
                    out[k, 0] = x
                    out[k, 1] = y
                    k += 1
        return out

    starts = np.zeros(nb + 1, np.int64)
    for b in range(nb):
        starts[b + 1] = starts[b] + counts[b]
    fill = starts[:nb].copy()
    idx = np.empty(total, np.int64)
    mag = np.empty(total)
    for y in range(h):
        row = (y * GRID // h) * GRID
        for x in range(w):
            v = abs(response[y, x])
            if v > theta:
                b = row + col_bucket[x]
                idx[fill[b]] = y * w + x
                mag[fill[b]] = v
                fill[b] += 1

    # how many each bucket contributes under round-robin
    take = np.zeros(nb, np.int64)
    remaining = count
    rounds = 0
    while remaining > 0:
        for b in range(nb):
            if remaining > 0 and counts[b] > rounds:
                take[b] += 1
                remaining -= 1
        rounds += 1

    # top-`take` per bucket by repeated max scans (take is small); idx is row-major
    # within a bucket, so the strict comparison keeps the earliest index on ties
    ranked = np.full((nb, rounds), -1, np.int64)
    for b in range(nb):
        for r in range(take[b]):
            best = -1
            best_mag = -1.0
            for j in range(starts[b], starts[b + 1]):
                if mag[j] > best_mag:
                    best_mag = mag[j]
                    best = j
            ranked[b, r] = idx[best]
            mag[best] = -2.0

    out = np.empty((count, 2))
    k = 0
    for r in range(rounds):
        for b in range(nb):
            p = ranked[b, r]
            if p >= 0:
                out[k, 0] = p % w
                out[k, 1] = p // w
                k += 1
    return out


@njit(cache=True, fastmath=True)
def _fill_patch(img, x, y, half, out):
    """Bilinearly resample the square patch of radius ``half`` centred at (x, y).

    Every pixel in the patch shares the same fractional offsets, so the
    weights are computed once; indices are clamped to replicate the border.
    """
    h, w = img.shape
    x0 = np.floor(x)
    y0 = np.floor(y)
    ax = x - x0
    ay = y - y0
    ix = int(x0)
    iy = int(y0)
    size = 2 * half + 1
    w00 = (1.0 - ax) * (1.0 - ay)
    w01 = ax * (1.0 - ay)
    w10 = (1.0 - ax) * ay
    w11 = ax * ay
    if ix - half >= 0 and iy - half >= 0 and ix + half + 1 < w and iy + half + 1 < h:
        for r in range(size):
            ya = iy - half + r
            for c in range(size):
                xa = ix - half + c
                out[r, c] = (
                    w00 * img[ya, xa] + w01 * img[ya, xa + 1] + w10 * img[ya + 1, xa] + w11 * img[ya + 1, xa + 1]
                )
        return
    for r in range(size):
        ya = min(max(iy - half + r, 0), h - 1)
        yb = min(max(iy - half + r + 1, 0), h - 1)
        for c in range(size):
            xa = min(max(ix - half + c, 0), w - 1)
            xb = min(max(ix - half + c + 1, 0), w - 1)
            out[r, c] = w00 * img[ya, xa] + w01 * img[ya, xb] + w10 * img[yb, xa] + w11 * img[yb, xb]


@njit(cache=True, fastmath=True)
def _gradients(ext, gx, gy):
    """Central differences of the padded patch; returns the structure tensor entries."""
    win = gx.shape[0]
    gxx = 0.0
    gxy = 0.0
    gyy = 0.0
    for r in range(win):
        for c in range(win):
            dx = 0.5 * (ext[r + 1, c + 2] - ext[r + 1, c])
            dy = 0.5 * (ext[r + 2, c + 1] - ext[r, c + 1])
            gx[r, c] = dx
            gy[r, c] = dy
            gxx += dx * dx
            gxy += dx * dy
            gyy += dy * dy
    return gxx, gxy, gyy


@njit(cache=True, fastmath=True)
def _mismatch(img, x, y, half, ref, gx, gy):
    """Gradient-weighted difference between ``ref`` and the patch of ``img`` at (x, y)."""
    h, w = img.shape
    x0 = np.floor(x)
    y0 = np.floor(y)
    ax = x - x0
    ay = y - y0
    ix = int(x0) - half
    iy = int(y0) - half
    size = 2 * half + 1
    w00 = (1.0 - ax) * (1.0 - ay)
    w01 = ax * (1.0 - ay)
    w10 = (1.0 - ax) * ay
    w11 = ax * ay
    bx = 0.0
    by = 0.0
    inside = ix >= 0 and iy >= 0 and ix + size < w and iy + size < h
    for r in range(size):
        if inside:
            ya = iy + r
            yb = ya + 1
        else:
            ya = min(max(iy + r, 0), h - 1)
            yb = min(max(iy + r + 1, 0), h - 1)
        for c in range(size):
            if inside:
                xa = ix + c
                xb = xa + 1
            else:
                xa = min(max(ix + c, 0), w - 1)
                xb = min(max(ix + c + 1, 0), w - 1)
            v = w00 * img[ya, xa] + w01 * img[ya, xb] + w10 * img[yb, xa] + w11 * img[yb, xb]
            diff = ref[r + 1, c + 1] - v
            bx += diff * gx[r, c]
            by += diff * gy[r, c]
    return bx, by


@njit(cache=True)
def pyr_lk(prev_pyr, curr_pyr, pts, half_win, max_iters, eps, min_eig):
    """Iterative Lucas-Kanade refined coarse to fine.

    ``prev_pyr``/``curr_pyr`` are tuples ordered fine to coarse. Returns the
    tracked points and a status array (1 valid, 0 invalid).
    """
    n = pts.shape[0]
    levels = len(prev_pyr)
    out = np.empty((n, 2))
    status = np.ones(n, np.uint8)
    win = 2 * half_win + 1
    npix = win * win
    ext = np.empty((win + 2, win + 2))
    gx = np.empty((win, win))
    gy = np.empty((win, win))
    h0, w0 = prev_pyr[0].shape
    for i in range(n):
        guess_x = 0.0
        guess_y = 0.0
        ok = True
        for lvl in range(levels - 1, -1, -1):
            prev = prev_pyr[lvl]
            curr = curr_pyr[lvl]
            h, w = prev.shape
            scale = 1.0 / (1 << lvl)
            px = pts[i, 0] * scale
            py = pts[i, 1] * scale
            _fill_patch(prev, px, py, half_win + 1, ext)
            gxx, gxy, gyy = _gradients(ext, gx, gy)
            det = gxx * gyy - gxy * gxy
            eig_min = (gxx + gyy - np.sqrt((gxx - gyy) ** 2 + 4.0 * gxy * gxy)) / (2.0 * npix)
            if eig_min < min_eig or det <= 1e-300:
                if lvl == 0:
                    ok = False
                else:
                    guess_x *= 2.0
                    guess_y *= 2.0
                continue
            vx = 0.0
            vy = 0.0
            for _ in range(max_iters):
                qx = px + guess_x + vx
                qy = py + guess_y + vy
                if qx < -half_win or qy < -half_win or qx >= w + half_win or qy >= h + half_win:
                    if lvl == 0:
                        ok = False
                    break
                bx, by = _mismatch(curr, qx, qy, half_win, ext, gx, gy)
                sx = (gyy * bx - gxy * by) / det
                sy = (gxx * by - gxy * bx) / det
                if not (np.isfinite(sx) and np.isfinite(sy)):
                    ok = False
                    break
                vx += sx
                vy += sy
                if sx * sx + sy * sy < eps * eps:
                    break
            if not ok:
                break
            if lvl > 0:
                guess_x = 2.0 * (guess_x + vx)
                guess_y = 2.0 * (guess_y + vy)
            else:
                guess_x += vx
                guess_y += vy
        fx = pts[i, 0] + guess_x
        fy = pts[i, 1] + guess_y
        if not ok or not (np.isfinite(fx) and np.isfinite(fy)) or fx < 0 or fy < 0 or fx >= w0 or fy >= h0:
            status[i] = 0
        out[i, 0] = fx
        out[i, 1] = fy
    return out, status
