"""Independent brute-force oracles used to check the fast implementations.

Everything here works by direct pixel enumeration and stays deliberately
naive; nothing imports the code paths under test.
"""

from collections import deque

import numpy as np


def iou_by_cell_enumeration(a, b):
    """IoU of two half-open integer boxes by counting unit cells."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    cells_a = {(x, y) for x in range(ax0, ax1) for y in range(ay0, ay1)}
    cells_b = {(x, y) for x in range(bx0, bx1) for y in range(by0, by1)}
    union = cells_a | cells_b
    return len(cells_a & cells_b) / len(union)


def tight_bbox_by_scan(mask):
    """(x0, y0, x1, y1) from a full scan, or None for empty masks."""
    h, w = mask.shape
    xs, ys = [], []
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                xs.append(x)
                ys.append(y)
    if not xs:
        return None
    return (min(xs), min(ys), max(xs) + 1, max(ys) + 1)


def _footprint_offsets(shape, radius):
    offs = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if shape == "square" or dx * dx + dy * dy <= radius * radius:
                offs.append((dy, dx))
    return offs


def erode_by_enumeration(mask, shape, radius):
    """Out-of-bounds neighbors count as background."""
    h, w = mask.shape
    offs = _footprint_offsets(shape, radius)
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            ok = True
            for dy, dx in offs:
                ny, nx = y + dy, x + dx
                if not (0 <= ny < h and 0 <= nx < w and mask[ny, nx]):
                    ok = False
                    break
            out[y, x] = ok
    return out


def dilate_by_enumeration(mask, shape, radius):
    h, w = mask.shape
    offs = _footprint_offsets(shape, radius)
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            for dy, dx in offs:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and mask[ny, nx]:
                    out[y, x] = True
                    break
    return out


def morph_by_enumeration(mask, op, shape, radius):
    if op == "erode":
        return erode_by_enumeration(mask, shape, radius)
    if op == "dilate":
        return dilate_by_enumeration(mask, shape, radius)
    if op == "open":
        return dilate_by_enumeration(erode_by_enumeration(mask, shape, radius), shape, radius)
    if op == "close":
        return erode_by_enumeration(dilate_by_enumeration(mask, shape, radius), shape, radius)
    raise ValueError(op)


def components_by_flood_fill(mask, connectivity):
    """[(pixel count, (x0, y0, x1, y1)), ...] sorted like the implementation."""
    h, w = mask.shape
    if connectivity == 4:
        neigh = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        neigh = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for sy in range(h):
        for sx in range(w):
            if not mask[sy, sx] or seen[sy, sx]:
                continue
            queue = deque([(sy, sx)])
            seen[sy, sx] = True
            pixels = []
            while queue:
                y, x = queue.popleft()
                pixels.append((y, x))
                for dy, dx in neigh:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            ys = [p[0] for p in pixels]
            xs = [p[1] for p in pixels]
            comps.append((len(pixels), (min(xs), min(ys), max(xs) + 1, max(ys) + 1)))
    comps.sort(key=lambda c: (-c[0], c[1][1], c[1][0]))
    return comps
