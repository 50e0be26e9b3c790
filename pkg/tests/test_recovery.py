import numpy as np
import pytest

from beamsim.linklayer import NrTiming, t_sweep
from beamsim.recovery import (MODE_BACKUP, MODE_PRIMARY, MODE_RETURNING,
                              MODE_SWEEPING, DetectorConfig, UeStepSeries,
                              run_bf, run_br_det, run_br_pre, run_gt)

TIMING = NrTiming()
SWEEP = t_sweep(64, 16, TIMING)  # 0.330
ETA = 0.400


def scripted_series(gt_on=None, snr_fn=None, n=200, r1=100.0, r2=60.0):
    """Build a synthetic per-step series on the 0.2 s grid.

    gt_on: (first_blocked_step, n_blocked); snr dips 30 dB while blocked
    by default, one step after onset.
    """
    t = np.arange(n) * TIMING.dt
    gt = np.zeros(n, dtype=np.int8)
    snr = np.full(n, 50.0)
    if gt_on is not None:
        i0, length = gt_on
        gt[i0:i0 + length] = 1
        # SNR reacts one step after the geometric onset and recovers at the end
        snr[i0 + 1:i0 + length] = 20.0
    if snr_fn is not None:
        snr = snr_fn(t)
    rate1 = np.full(n, r1)
    rate1[gt == 1] = r1 / 4  # blocked primary rate collapses
    return UeStepSeries(t=t, snr_db=snr, rate_primary=rate1,
                        rate_backup=np.full(n, r2), gt=gt)


DET = DetectorConfig.from_calibration(snr_bar_db=50.0, bl_max_db=30.0)


class TestDetectorConfig:
    def test_threshold_recipe(self):
        assert DET.th1_db == pytest.approx(50.0 - 21.0)
        assert DET.th2_db == pytest.approx(50.0 - 9.0)
        assert DET.th2_db > DET.th1_db

    def test_tiny_loss_disables(self):
        assert DetectorConfig.from_calibration(50.0, 1.0) is None

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            DetectorConfig(th1_db=10.0, th2_db=5.0, snr_bar_db=50.0,
                           bl_max_db=30.0)


class TestBf:
    def test_always_primary(self):
        s = scripted_series(gt_on=(40, 10))
        tr = run_bf(s)
        assert np.all(tr.serving == 0)
        assert np.all(tr.rate_bps == s.rate_primary)

    def test_blocked_rate_below_mean(self):
        s = scripted_series(gt_on=(40, 10))
        tr = run_bf(s)
        assert tr.rate_bps[45] < tr.rate_bps[:40].mean()


class TestBrDet:
    def test_paper_switch_timing(self):
        # onset at 7.8 s (step 39), SNR crosses Th1 at 8.0 s (one-step lag),
        # backup engaged from 8.4 s: 8.0 + 0.33 + 0.05 = 8.38 rounds onto 8.4
        s = scripted_series(gt_on=(39, 20))
        tr, events = run_br_det(s, DET, TIMING, SWEEP)
        assert len(events) == 1
        ev = events[0]
        assert ev.detect_t == pytest.approx(8.0)
        assert ev.switch_t == pytest.approx(8.38)
        assert ev.gt_onset_t == pytest.approx(7.8)
        first_backup = np.flatnonzero(tr.serving == 1)[0]
        assert s.t[first_backup] == pytest.approx(8.4)
        # data keeps flowing on the primary while sweeping
        assert np.all(tr.serving[40:42] == 0)
        assert np.all(tr.mode[40:42] == MODE_SWEEPING)

    def test_delay_law_every_event(self):
        s = scripted_series(gt_on=(100, 15))
        _, events = run_br_det(s, DET, TIMING, SWEEP)
        for ev in events:
            t_d1 = ev.detect_t - ev.gt_onset_t
            assert ev.switch_t - ev.gt_onset_t == pytest.approx(
                t_d1 + SWEEP + TIMING.t_ho, abs=1e-9)

    def test_no_crossing_equals_bf(self):
        s = scripted_series()
        tr, events = run_br_det(s, DET, TIMING, SWEEP)
        assert not events
        np.testing.assert_array_equal(tr.rate_bps, run_bf(s).rate_bps)

    def test_disabled_detector_equals_bf(self):
        s = scripted_series(gt_on=(40, 10))
        tr, events = run_br_det(s, None, TIMING, SWEEP)
        assert not events
        np.testing.assert_array_equal(tr.rate_bps, run_bf(s).rate_bps)

    def test_return_same_step_when_recovery_lags_gt_end(self):
        # SNR recovers one step after the blockage ends: t_d2 = 0.2 > T_HO
        # so the clamped handover delay is zero and the clearing step is
        # already served on the primary
        def snr_fn(t):
            snr = np.full(len(t), 50.0)
            snr[40:50] = 20.0  # recovers at step 50
            return snr
        s = scripted_series(gt_on=(39, 10), snr_fn=snr_fn)  # gt ends step 49
        tr, _ = run_br_det(s, DET, TIMING, SWEEP)
        assert s.gt[48] == 1 and s.gt[49] == 0 and s.snr_db[50] == 50.0
        assert tr.serving[49] == 1
        assert tr.serving[50] == 0
        assert tr.mode[50] == MODE_PRIMARY

    def test_return_next_step_when_recovery_with_gt_end(self):
        # SNR recovers on the same step the blockage ends: t_d2 = 0 so the
        # remaining handover delay keeps the backup one more step
        def snr_fn(t):
            snr = np.full(len(t), 50.0)
            snr[40:48] = 20.0  # recovers at step 48 exactly
            return snr
        s = scripted_series(gt_on=(39, 9), snr_fn=snr_fn)  # gt ends step 48
        tr, _ = run_br_det(s, DET, TIMING, SWEEP)
        assert s.gt[47] == 1 and s.gt[48] == 0 and s.snr_db[48] == 50.0
        assert tr.serving[48] == 1
        assert tr.mode[48] == MODE_RETURNING
        assert tr.serving[49] == 0

    def test_short_blockage_switch_completes_afterwards(self):
        # 2-step blockage: the sweep completes after the event ended, the
        # backup is camped on for one report and released right after
        s = scripted_series(gt_on=(40, 2))
        tr, events = run_br_det(s, DET, TIMING, SWEEP)
        assert len(events) == 1
        assert tr.serving[43] == 1  # backup engaged post-event
        assert tr.serving[44] == 0  # and released on the next clear sample

    def test_state_machine_soundness_fuzz(self, rng):
        for _ in range(30):
            n = 120
            snr = 50.0 + rng.normal(0, 8, n)
            gt = (rng.uniform(size=n) < 0.1).astype(np.int8)
            s = UeStepSeries(t=np.arange(n) * 0.2, snr_db=snr,
                             rate_primary=np.full(n, 10.0),
                             rate_backup=np.full(n, 6.0), gt=gt)
            tr, _ = run_br_det(s, DET, TIMING, SWEEP)
            prev = MODE_PRIMARY
            # recorded per-step modes; sub-step pass-throughs make
            # returning -> sweeping and backup -> primary legal
            allowed = {
                MODE_PRIMARY: {MODE_PRIMARY, MODE_SWEEPING},
                MODE_SWEEPING: {MODE_SWEEPING, MODE_BACKUP},
                MODE_BACKUP: {MODE_BACKUP, MODE_RETURNING, MODE_PRIMARY},
                MODE_RETURNING: {MODE_PRIMARY, MODE_SWEEPING},
            }
            for m in tr.mode:
                assert m in allowed[prev]
                prev = m
            # never on backup without a sweep completing first
            assert not np.any((tr.serving == 1)
                              & (tr.mode == MODE_SWEEPING))
            on_backup = np.flatnonzero(tr.mode == MODE_BACKUP)
            for i in on_backup:
                if i == 0:
                    continue
                if tr.mode[i - 1] not in (MODE_BACKUP, MODE_RETURNING):
                    assert tr.mode[i - 1] == MODE_SWEEPING


class TestBrPre:
    def test_perfect_predictor_equals_gt(self):
        s = scripted_series(gt_on=(40, 12))
        a = run_br_pre(s, s.gt.astype(np.int8), TIMING, SWEEP, ETA)
        b = run_gt(s, TIMING, SWEEP, ETA)
        np.testing.assert_array_equal(a.rate_bps, b.rate_bps)
        np.testing.assert_array_equal(a.serving, b.serving)

    def test_always_zero_predictor_equals_bf(self):
        s = scripted_series(gt_on=(40, 12))
        tr = run_br_pre(s, np.zeros(200, dtype=np.int8), TIMING, SWEEP, ETA)
        np.testing.assert_array_equal(tr.rate_bps, run_bf(s).rate_bps)

    def test_serving_follows_prediction_step_exactly(self):
        s = scripted_series(gt_on=(40, 12))
        pred = np.zeros(200, dtype=np.int8)
        pred[40:52] = 1
        tr = run_br_pre(s, pred, TIMING, SWEEP, ETA)
        np.testing.assert_array_equal(tr.serving, pred)

    def test_window_must_cover_sweep_and_handover(self):
        s = scripted_series()
        with pytest.raises(ValueError):
            run_br_pre(s, np.zeros(200, dtype=np.int8), TIMING, SWEEP,
                       eta_s=0.300)

    def test_gt_rate_at_least_bf_on_blocked_steps(self):
        s = scripted_series(gt_on=(40, 12))
        gt_tr = run_gt(s, TIMING, SWEEP, ETA)
        bf_tr = run_bf(s)
        blocked = s.gt == 1
        assert np.all(gt_tr.rate_bps[blocked] >= bf_tr.rate_bps[blocked])
