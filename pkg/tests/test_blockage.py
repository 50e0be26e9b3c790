import math

import numpy as np
import pytest

from beamsim.blockage import (BlockerScreen, Trajectory, advance_blocker,
                              gt_beam_state, knife_edge_loss,
                              oriented_toward, segment_screen_intersect)
from oracle_knife_edge import knife_edge_loss_oracle

LAM = 299792458.0 / 28e9  # ~1.07 cm


def brute_force_clearance(tx, rx, screen, n=20000):
    """Min distance from sampled segment points to the screen rectangle."""
    tx = np.asarray(tx, float)
    rx = np.asarray(rx, float)
    normal = np.array([screen.facing[0], screen.facing[1], 0.0])
    w_axis = np.array([-screen.facing[1], screen.facing[0], 0.0])
    c = screen.center_array
    best = np.inf
    for t in np.linspace(0.0, 1.0, n):
        p = tx + t * (rx - tx)
        rel = p - c
        u = np.clip(rel @ w_axis, -screen.width / 2, screen.width / 2)
        v = np.clip(rel[2], -screen.height / 2, screen.height / 2)
        q = c + u * w_axis + np.array([0, 0, v])
        # push q into the screen plane
        q = q + (rel @ normal) * 0.0
        d = np.linalg.norm(p - (q))
        best = min(best, d)
    return best


class TestAdvance:
    def test_kinematics(self):
        s = BlockerScreen(center=(0.0, 0.0, 1.5), speed=2.0)
        out = advance_blocker(s, Trajectory(), 0.2)
        assert out.center[0] == pytest.approx(0.4)

    def test_wrap(self):
        s = BlockerScreen(center=(19.9, 0.0, 1.5), speed=1.0)
        out = advance_blocker(s, Trajectory(), 0.2)
        assert out.center[0] == -20.0

    def test_zero_speed(self):
        s = BlockerScreen(center=(3.0, 0.0, 1.5), speed=0.0)
        out = advance_blocker(s, Trajectory(), 0.2)
        assert out.center == s.center

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            advance_blocker(BlockerScreen(), Trajectory(), 0.0)


class TestIntersect:
    def test_centered_blocker(self):
        tx = (0.0, 0.0, 1.5)
        rx = (10.0, 0.0, 1.5)
        s = BlockerScreen(center=(5.0, 0.0, 1.5), facing=(1.0, 0.0))
        assert segment_screen_intersect(tx, rx, s) is True

    def test_laterally_far(self):
        tx = (0.0, 0.0, 1.5)
        rx = (10.0, 0.0, 1.5)
        s = BlockerScreen(center=(5.0, 10.0, 1.5), facing=(1.0, 0.0))
        assert segment_screen_intersect(tx, rx, s) is False

    def test_behind_tx(self):
        tx = (0.0, 0.0, 1.5)
        rx = (10.0, 0.0, 1.5)
        s = BlockerScreen(center=(-3.0, 0.0, 1.5), facing=(1.0, 0.0))
        assert segment_screen_intersect(tx, rx, s) is False
        # brute-force confirmation: no sampled point reaches the rectangle
        assert brute_force_clearance(tx, rx, s) > 1.0

    def test_in_plane_segment_not_blocked(self):
        tx = (0.0, -1.0, 1.5)
        rx = (0.0, 1.0, 1.5)
        s = BlockerScreen(center=(0.0, 0.0, 1.5), facing=(1.0, 0.0))
        assert segment_screen_intersect(tx, rx, s) is False

    def test_coincident_rejected(self):
        with pytest.raises(ValueError):
            segment_screen_intersect((1, 2, 3), (1, 2, 3), BlockerScreen())


class TestKnifeEdge:
    def test_far_screen_exact_zero(self):
        tx = (0.0, 0.0, 3.0)
        rx = (10.0, 0.0, 1.0)
        s = BlockerScreen(center=(5.0, 30.0, 1.5))
        assert knife_edge_loss(tx, rx, s, LAM) == 0.0

    def test_centered_screen_symmetry(self):
        tx = (0.0, 0.0, 1.5)
        rx = (10.0, 0.0, 1.5)
        s = BlockerScreen(center=(5.0, 0.0, 1.5))
        # equal heights: both views symmetric, deep shadow
        bl = knife_edge_loss(tx, rx, s, LAM)
        assert bl > 10.0
        # displaced mirror positions agree
        a = knife_edge_loss(tx, rx, BlockerScreen(center=(4.0, 0.0, 1.5)), LAM)
        b = knife_edge_loss(tx, rx, BlockerScreen(center=(6.0, 0.0, 1.5)), LAM)
        assert a == pytest.approx(b, abs=1e-9)

    def test_matches_oracle_fixed_case(self):
        tx = (0.0, 0.0, 3.0)
        rx = (10.0, 0.0, 1.0)
        s = BlockerScreen(center=(5.0, 0.0, 1.5))
        got = knife_edge_loss(tx, rx, s, 0.0107)
        want = knife_edge_loss_oracle(tx, rx, (5.0, 0.0, 1.5), 2.0, 3.0, 0.0107)
        assert got == pytest.approx(want, abs=1e-9)
        assert want > 0.0

    def test_matches_oracle_random_geometries(self, rng):
        for _ in range(200):
            tx = rng.uniform([-25, -20, 0.5], [25, 20, 3.0])
            rx = rng.uniform([-25, -20, 0.5], [25, 20, 3.0])
            frac = rng.uniform()
            center = tx + frac * (rx - tx) + rng.normal(0, 2.0, 3)
            center[2] = 1.5
            s = BlockerScreen(center=tuple(center))
            got = knife_edge_loss(tx, rx, s, LAM)
            want = knife_edge_loss_oracle(tuple(tx), tuple(rx), tuple(center),
                                          2.0, 3.0, LAM)
            assert got == pytest.approx(want, abs=1e-9)

    def test_nlos_matches_oracle(self, rng):
        for _ in range(200):
            rx = rng.uniform([-25, -20, 0.5], [25, 20, 1.5])
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            virt = rx + 80.0 * d
            center = rx + rng.uniform(0.5, 6.0) * d + rng.normal(0, 1.0, 3)
            center[2] = 1.5
            s = BlockerScreen(center=tuple(center))
            got = knife_edge_loss(tuple(virt), tuple(rx), s, LAM,
                                  path_kind="nlos")
            want = knife_edge_loss_oracle(tuple(virt), tuple(rx),
                                          tuple(center), 2.0, 3.0, LAM,
                                          nlos=True)
            assert got == pytest.approx(want, abs=1e-9)

    def test_continuity_and_peak_inside_gt(self):
        tx = (-10.0, 10.0, 3.0)
        rx = (-8.0, -6.0, 1.0)
        xs = np.linspace(-12.0, -6.0, 241)
        bl, gt = [], []
        for x in xs:
            s = BlockerScreen(center=(x, 0.0, 1.5))
            bl.append(knife_edge_loss(tx, rx, s, LAM))
            gt.append(gt_beam_state(tx, rx, s))
        bl = np.array(bl)
        gt = np.array(gt)
        assert gt.any()
        # one contiguous blocked run
        starts = np.flatnonzero(np.diff(np.concatenate([[0], gt])) == 1)
        assert len(starts) == 1
        # peak loss inside the blocked interval
        assert gt[int(np.argmax(bl))] == 1
        # continuity: no jump larger than a few dB between 2.5 cm samples
        assert np.max(np.abs(np.diff(bl))) < 4.0

    def test_loss_nonnegative(self, rng):
        for _ in range(300):
            tx = rng.uniform([-25, -20, 0], [25, 20, 3])
            rx = rng.uniform([-25, -20, 0], [25, 20, 3])
            if np.allclose(tx, rx):
                continue
            c = rng.uniform([-25, -20, 1.5], [25, 20, 1.5])
            assert knife_edge_loss(tx, rx, BlockerScreen(center=tuple(c)),
                                   LAM) >= 0.0

    def test_wavelength_validation(self):
        with pytest.raises(ValueError):
            knife_edge_loss((0, 0, 1), (1, 0, 1), BlockerScreen(), 0.0)


class TestGtState:
    def test_examples(self):
        tx = (0.0, 0.0, 1.5)
        rx = (10.0, 0.0, 1.5)
        centered = BlockerScreen(center=(5.0, 0.0, 1.5))
        lateral = BlockerScreen(center=(5.0, 10.0, 1.5))
        behind = BlockerScreen(center=(-3.0, 0.0, 1.5))
        assert gt_beam_state(tx, rx, centered) == 1
        assert gt_beam_state(tx, rx, lateral) == 0
        assert gt_beam_state(tx, rx, behind) == 0

    def test_orientation_helper(self):
        s = BlockerScreen(center=(0.0, 0.0, 1.5), facing=(1.0, 0.0))
        o = oriented_toward(s, (0.0, 5.0, 1.0), (0.0, 11.0, 1.0))
        assert o.facing == pytest.approx((0.0, 1.0))


class TestSpatialConsistency:
    def test_nearby_ues_share_blockage_interval(self):
        # two UEs 0.5 m apart south of the corridor, BS north of it
        bs = (-10.0, 10.0, 3.0)
        overlaps = []
        for x_ue in (-12.0, -9.0, -6.0, -3.0):
            ue_a = (x_ue, -5.0, 1.0)
            ue_b = (x_ue + 0.5, -5.0, 1.0)
            xs = np.arange(-20.0, 20.0, 0.2)
            ga = np.array([gt_beam_state(bs, ue_a,
                                         BlockerScreen(center=(x, 0.0, 1.5)))
                           for x in xs])
            gb = np.array([gt_beam_state(bs, ue_b,
                                         BlockerScreen(center=(x, 0.0, 1.5)))
                           for x in xs])
            if ga.any() and gb.any():
                inter = np.sum(ga & gb)
                overlaps.append(inter / min(ga.sum(), gb.sum()))
        assert overlaps and np.mean(overlaps) > 0.5
