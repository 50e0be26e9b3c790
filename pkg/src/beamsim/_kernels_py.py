"""Pure-numpy implementations of the hot geometry kernels.

These mirror the compiled extension in ``_kernels.pyx`` exactly; the
package picks one of the two at import time (see ``kernels.py``).  Keep
formulas and operation order identical between the two so results agree
to rounding.

Screen handling shared by all three kernels: the evaluation orients the
screen per link, with its normal pointing from the screen center toward
the midpoint of the (tx, rx) segment in the x-y plane.  Screens whose
center is farther from the segment than ``far_cutoff`` (half the screen
diagonal plus the larger screen dimension) contribute exactly 0 dB.
"""

from __future__ import annotations

import numpy as np

VIRTUAL_SOURCE_RANGE = 80.0  # m, synthetic source distance for scattered rays


def _far_cutoff(w: float, h: float) -> float:
    return 0.5 * np.sqrt(w * w + h * h) + max(w, h)


def _point_segment_dist2d(px, py, ax, ay, bx, by):
    """Distance from points (px, py) to 2-D segments (a, b), elementwise."""
    abx = bx - ax
    aby = by - ay
    denom = abx * abx + aby * aby
    t = np.where(denom > 0.0, ((px - ax) * abx + (py - ay) * aby) / np.where(denom > 0.0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    dx = px - (ax + t * abx)
    dy = py - (ay + t * aby)
    return np.sqrt(dx * dx + dy * dy)


def _point_segment_dist3d(p, a, b):
    """Distance from a single point p to 3-D segments a->b (n, 3)."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p[None, :] - a, ab) / np.where(denom > 0.0, denom, 1.0)
    t = np.clip(np.where(denom > 0.0, t, 0.0), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return np.linalg.norm(p[None, :] - closest, axis=1)


def _screen_frames(tx, rx, center):
    """Per-link screen normal and width axis in the x-y plane.

    Normal points from the screen center toward the segment midpoint;
    degenerate midpoints fall back to the link direction.
    """
    mid = 0.5 * (tx + rx)
    nx = mid[:, 0] - center[0]
    ny = mid[:, 1] - center[1]
    nn = np.sqrt(nx * nx + ny * ny)
    bad = nn < 1e-9
    if np.any(bad):
        dx = rx[:, 0] - tx[:, 0]
        dy = rx[:, 1] - tx[:, 1]
        dn = np.sqrt(dx * dx + dy * dy)
        fx = np.where(dn > 1e-12, dx / np.where(dn > 1e-12, dn, 1.0), 1.0)
        fy = np.where(dn > 1e-12, dy / np.where(dn > 1e-12, dn, 1.0), 0.0)
        nx = np.where(bad, fx, nx)
        ny = np.where(bad, fy, ny)
        nn = np.where(bad, 1.0, nn)
    nx = nx / nn
    ny = ny / nn
    # width axis is the in-plane perpendicular of the normal
    return nx, ny, -ny, nx


def _fresnel_f(sign, excess, lam):
    """One edge term of the knife-edge loss."""
    rad = np.maximum(excess, 0.0) * (np.pi / lam)
    return np.arctan(sign * 0.5 * np.pi * np.sqrt(rad)) / np.pi


def blockage_loss_los(tx, rx, center, w, h, lam):
    """Knife-edge loss in dB for direct tx->rx paths, one per row.

    tx, rx: (n, 3) endpoints; center: (3,) screen center; w, h: screen
    width and height; lam: wavelength in meters.  Returns (n,) dB >= 0.
    """
    tx = np.ascontiguousarray(tx, dtype=float)
    rx = np.ascontiguousarray(rx, dtype=float)
    center = np.asarray(center, dtype=float)
    n = tx.shape[0]
    out = np.zeros(n, dtype=float)

    near = _point_segment_dist3d(center, tx, rx) <= _far_cutoff(w, h)
    if not np.any(near):
        return out
    t = tx[near]
    r = rx[near]

    nx, ny, wx, wy = _screen_frames(t, r, center)
    cx, cy, cz = center

    # top view
    t2x, t2y, tz = t[:, 0], t[:, 1], t[:, 2]
    r2x, r2y, rz = r[:, 0], r[:, 1], r[:, 2]
    dxx = r2x - t2x
    dyy = r2y - t2y
    plane_len = np.sqrt(dxx * dxx + dyy * dyy)
    denom = dxx * nx + dyy * ny
    parallel = np.abs(denom) < 1e-12
    alpha = ((cx - t2x) * nx + (cy - t2y) * ny) / np.where(parallel, 1.0, denom)
    xx = t2x + alpha * dxx
    xy = t2y + alpha * dyy

    e1x = cx - 0.5 * w * wx
    e1y = cy - 0.5 * w * wy
    e2x = cx + 0.5 * w * wx
    e2y = cy + 0.5 * w * wy

    in_width = np.abs((xx - cx) * wx + (xy - cy) * wy) <= 0.5 * w
    between = (alpha > 0.0) & (alpha < 1.0) & ~parallel
    crosses_w = between & in_width

    d_top = plane_len
    d1_w1 = np.sqrt((e1x - t2x) ** 2 + (e1y - t2y) ** 2)
    d2_w1 = np.sqrt((e1x - r2x) ** 2 + (e1y - r2y) ** 2)
    d1_w2 = np.sqrt((e2x - t2x) ** 2 + (e2y - t2y) ** 2)
    d2_w2 = np.sqrt((e2x - r2x) ** 2 + (e2y - r2y) ** 2)
    ex_w1 = d1_w1 + d2_w1 - d_top
    ex_w2 = d1_w2 + d2_w2 - d_top

    dist_e1 = _point_segment_dist2d(e1x, e1y, t2x, t2y, r2x, r2y)
    dist_e2 = _point_segment_dist2d(e2x, e2y, t2x, t2y, r2x, r2y)
    s_w1 = np.where(crosses_w, 1.0, np.where(dist_e1 <= dist_e2, -1.0, 1.0))
    s_w2 = np.where(crosses_w, 1.0, np.where(dist_e1 <= dist_e2, 1.0, -1.0))
    f_w = _fresnel_f(s_w1, ex_w1, lam) + _fresnel_f(s_w2, ex_w2, lam)

    # side view: coordinates (s along the horizontal track, z)
    s0 = alpha * plane_len
    z_top = cz + 0.5 * h
    z_bot = cz - 0.5 * h
    d_side = np.sqrt(plane_len * plane_len + (rz - tz) ** 2)
    d1_h1 = np.sqrt(s0 * s0 + (z_top - tz) ** 2)
    d2_h1 = np.sqrt((plane_len - s0) ** 2 + (z_top - rz) ** 2)
    d1_h2 = np.sqrt(s0 * s0 + (z_bot - tz) ** 2)
    d2_h2 = np.sqrt((plane_len - s0) ** 2 + (z_bot - rz) ** 2)
    ex_h1 = d1_h1 + d2_h1 - d_side
    ex_h2 = d1_h2 + d2_h2 - d_side

    z_star = tz + alpha * (rz - tz)
    crosses_h = between & (z_star >= z_bot) & (z_star <= z_top)
    dist_t = _point_segment_dist2d(s0, z_top, 0.0, tz, plane_len, rz)
    dist_b = _point_segment_dist2d(s0, z_bot, 0.0, tz, plane_len, rz)
    s_h1 = np.where(crosses_h, 1.0, np.where(dist_t <= dist_b, -1.0, 1.0))
    s_h2 = np.where(crosses_h, 1.0, np.where(dist_t <= dist_b, 1.0, -1.0))
    f_h = _fresnel_f(s_h1, ex_h1, lam) + _fresnel_f(s_h2, ex_h2, lam)

    arg = np.clip(1.0 - f_h * f_w, 1e-15, None)
    bl = np.maximum(-20.0 * np.log10(arg), 0.0)
    bl = np.where(parallel, 0.0, bl)
    out[near] = bl
    return out


def blockage_loss_nlos(rx, dirs, center, w, h, lam):
    """Knife-edge loss in dB for scattered rays arriving at rx.

    rx: (n, 3) receiver points; dirs: (n, 3) unit directions pointing from
    the receiver toward where the ray comes from.  A virtual source is
    placed VIRTUAL_SOURCE_RANGE along each direction; the edge terms use
    the screen-to-receiver branch of the diffraction formula.
    """
    rx = np.ascontiguousarray(rx, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    center = np.asarray(center, dtype=float)
    n = rx.shape[0]
    out = np.zeros(n, dtype=float)

    vtx = rx + VIRTUAL_SOURCE_RANGE * dirs
    near = _point_segment_dist3d(center, vtx, rx) <= _far_cutoff(w, h)
    if not np.any(near):
        return out
    t = vtx[near]
    r = rx[near]

    nx, ny, wx, wy = _screen_frames(t, r, center)
    cx, cy, cz = center

    t2x, t2y, tz = t[:, 0], t[:, 1], t[:, 2]
    r2x, r2y, rz = r[:, 0], r[:, 1], r[:, 2]
    dxx = r2x - t2x
    dyy = r2y - t2y
    plane_len = np.sqrt(dxx * dxx + dyy * dyy)
    denom = dxx * nx + dyy * ny
    parallel = np.abs(denom) < 1e-12
    alpha = ((cx - t2x) * nx + (cy - t2y) * ny) / np.where(parallel, 1.0, denom)
    xx = t2x + alpha * dxx
    xy = t2y + alpha * dyy

    e1x = cx - 0.5 * w * wx
    e1y = cy - 0.5 * w * wy
    e2x = cx + 0.5 * w * wx
    e2y = cy + 0.5 * w * wy

    in_width = np.abs((xx - cx) * wx + (xy - cy) * wy) <= 0.5 * w
    between = (alpha > 0.0) & (alpha < 1.0) & ~parallel
    crosses_w = between & in_width

    # screen-to-receiver distances, top view
    dp_top = np.sqrt((xx - r2x) ** 2 + (xy - r2y) ** 2)
    d1_w1 = np.sqrt((e1x - r2x) ** 2 + (e1y - r2y) ** 2)
    d1_w2 = np.sqrt((e2x - r2x) ** 2 + (e2y - r2y) ** 2)
    ex_w1 = d1_w1 - dp_top
    ex_w2 = d1_w2 - dp_top

    dist_e1 = _point_segment_dist2d(e1x, e1y, t2x, t2y, r2x, r2y)
    dist_e2 = _point_segment_dist2d(e2x, e2y, t2x, t2y, r2x, r2y)
    s_w1 = np.where(crosses_w, 1.0, np.where(dist_e1 <= dist_e2, -1.0, 1.0))
    s_w2 = np.where(crosses_w, 1.0, np.where(dist_e1 <= dist_e2, 1.0, -1.0))
    f_w = _fresnel_f(s_w1, ex_w1, lam) + _fresnel_f(s_w2, ex_w2, lam)

    # side view
    s0 = alpha * plane_len
    z_top = cz + 0.5 * h
    z_bot = cz - 0.5 * h
    z_star = tz + alpha * (rz - tz)
    dp_side = np.sqrt((plane_len - s0) ** 2 + (z_star - rz) ** 2)
    d1_h1 = np.sqrt((plane_len - s0) ** 2 + (z_top - rz) ** 2)
    d1_h2 = np.sqrt((plane_len - s0) ** 2 + (z_bot - rz) ** 2)
    ex_h1 = d1_h1 - dp_side
    ex_h2 = d1_h2 - dp_side

    crosses_h = between & (z_star >= z_bot) & (z_star <= z_top)
    dist_t = _point_segment_dist2d(s0, z_top, 0.0, tz, plane_len, rz)
    dist_b = _point_segment_dist2d(s0, z_bot, 0.0, tz, plane_len, rz)
    s_h1 = np.where(crosses_h, 1.0, np.where(dist_t <= dist_b, -1.0, 1.0))
    s_h2 = np.where(crosses_h, 1.0, np.where(dist_t <= dist_b, 1.0, -1.0))
    f_h = _fresnel_f(s_h1, ex_h1, lam) + _fresnel_f(s_h2, ex_h2, lam)

    arg = np.clip(1.0 - f_h * f_w, 1e-15, None)
    bl = np.maximum(-20.0 * np.log10(arg), 0.0)
    # rays that never reach the screen plane going forward see no screen
    bl = np.where(parallel | (alpha >= 1.0), 0.0, bl)
    out[near] = bl
    return out


def gt_intersect(tx, rx, center, w, h):
    """1 where the open segment tx->rx crosses the per-link oriented screen."""
    tx = np.ascontiguousarray(tx, dtype=float)
    rx = np.ascontiguousarray(rx, dtype=float)
    center = np.asarray(center, dtype=float)

    nx, ny, wx, wy = _screen_frames(tx, rx, center)
    cx, cy, cz = center
    dxx = rx[:, 0] - tx[:, 0]
    dyy = rx[:, 1] - tx[:, 1]
    denom = dxx * nx + dyy * ny
    parallel = np.abs(denom) < 1e-12
    alpha = ((cx - tx[:, 0]) * nx + (cy - tx[:, 1]) * ny) / np.where(parallel, 1.0, denom)
    px = tx[:, 0] + alpha * dxx
    py = tx[:, 1] + alpha * dyy
    pz = tx[:, 2] + alpha * (rx[:, 2] - tx[:, 2])
    hit = (~parallel
           & (alpha > 0.0) & (alpha < 1.0)
           & (np.abs((px - cx) * wx + (py - cy) * wy) <= 0.5 * w)
           & (np.abs(pz - cz) <= 0.5 * h))
    return hit.astype(np.uint8)
