"""Moving rectangular screen: trajectory, intersection state and diffraction.

The screen is a vertical w x h rectangle.  Its stored ``facing`` is the
unit normal in the x-y plane (by default the direction of travel), but the
loss and ground-truth operations re-orient the screen per link so its
normal points at the midpoint of the evaluated segment; the projected
top/side view distances of the edge-diffraction formula presuppose that
per-link view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .geometry import _as_xyz


@dataclass(frozen=True)
class BlockerScreen:
    width: float = 2.0
    height: float = 3.0
    center: tuple[float, float, float] = (-20.0, 0.0, 1.5)
    facing: tuple[float, float] = (1.0, 0.0)
    speed: float = 1.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("screen dimensions must be positive")
        n = math.hypot(*self.facing)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("facing must be a unit vector in the x-y plane")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


@dataclass(frozen=True)
class Trajectory:
    """Left-to-right sweep along the x axis, restarting after the far end."""

    x_start: float = -20.0
    x_end: float = 20.0
    y: float = 0.0
    wrap: bool = True


@dataclass(frozen=True)
class BlockageSample:
    gt_state: int
    loss_db: float


def advance_blocker(screen: BlockerScreen, traj: Trajectory, dt: float) -> BlockerScreen:
    """Move the screen by speed*dt along +x, regenerating at the start."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = screen.center[0] + screen.speed * dt
    if traj.wrap and x > traj.x_end:
        x = traj.x_start
    return replace(screen, center=(x, screen.center[1], screen.center[2]))


def screen_axes(screen: BlockerScreen):
    """Unit normal and width axis of the stored screen orientation."""
    nx, ny = screen.facing
    return np.array([nx, ny, 0.0]), np.array([-ny, nx, 0.0])


def oriented_toward(screen: BlockerScreen, tx, rx) -> BlockerScreen:
    """Copy of the screen with its normal facing the segment midpoint."""
    tx = _as_xyz(tx)
    rx = _as_xyz(rx)
    mid = 0.5 * (tx + rx)
    d = mid[:2] - screen.center_array[:2]
    n = math.hypot(*d)
    if n < 1e-9:
        d = (rx - tx)[:2]
        n = math.hypot(*d)
        if n < 1e-12:
            return screen
    return replace(screen, facing=(float(d[0] / n), float(d[1] / n)))


def segment_screen_intersect(tx, rx, screen: BlockerScreen) -> bool:
    """True when the open segment (tx, rx) crosses the screen rectangle.

    The screen's stored facing is respected; a segment lying inside the
    screen plane counts as non-blocked.
    """
    tx = _as_xyz(tx)
    rx = _as_xyz(rx)
    if np.allclose(tx, rx):
        raise ValueError("tx and rx must be distinct")
    normal, w_axis = screen_axes(screen)
    c = screen.center_array
    d = rx - tx
    denom = float(d @ normal)
    if abs(denom) < 1e-12:
        return False
    t = float((c - tx) @ normal) / denom
    if not (0.0 < t < 1.0):
        return False
    p = tx + t * d
    return bool(abs(float((p - c) @ w_axis)) <= screen.width / 2
                and abs(p[2] - c[2]) <= screen.height / 2)


def knife_edge_loss(tx, rx, screen: BlockerScreen, wavelength: float,
                    path_kind: str = "los") -> float:
    """Edge-diffraction loss in dB of the screen on one ray.

    BL = -20*log10(1 - (F_h1 + F_h2)(F_w1 + F_w2)) with one F term per
    screen edge; the w-edge distances are taken in the top view and the
    h-edge ones in the side view.  When the (re-oriented) screen crosses
    the projected path both edge terms of that pair use the + sign,
    otherwise the edge nearest the path gets the - sign.

    path_kind "los" treats tx as the transmitter and uses the two-sided
    edge distances; "nlos" treats tx as the point the ray arrives from
    and uses the screen-to-receiver branch with the blocker-receiver
    distance.  The result is clamped to >= 0 dB, and screens farther from
    the path than the documented cutoff return exactly 0.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    tx = _as_xyz(tx)
    rx = _as_xyz(rx)
    c = screen.center_array
    if path_kind == "los":
        out = kernels.blockage_loss_los(tx[None, :], rx[None, :], c,
                                        screen.width, screen.height, wavelength)
    elif path_kind == "nlos":
        d = tx - rx
        n = np.linalg.norm(d)
        if n < 1e-12:
            raise ValueError("nlos ray needs a direction (tx != rx)")
        out = kernels.blockage_loss_nlos(rx[None, :], (d / n)[None, :], c,
                                         screen.width, screen.height, wavelength)
    else:
        raise ValueError(f"unknown path_kind {path_kind!r}")
    return float(out[0])


def gt_beam_state(bs, ue, screen: BlockerScreen) -> int:
    """1 when the blocker cuts the direct path between the BS and the UE."""
    bs = _as_xyz(bs)
    ue = _as_xyz(ue)
    out = kernels.gt_intersect(bs[None, :], ue[None, :], screen.center_array,
                               screen.width, screen.height)
    return int(out[0])
