"""The four beam-management strategies, run on per-step series.

Each strategy consumes the same per-UE step series (report SNR of the
primary pair, primary/backup rates, ground-truth state) and emits a rate
trace.  The detection strategy is a four-mode machine:

    primary -> sweeping -> backup -> returning -> primary

Detection fires when the report SNR drops below Th1; the backup pair is
engaged a sweep plus handover later, during which data keeps flowing on
the primary.  The return fires when the SNR recovers above Th2, delayed
by max(0, T_HO - t_d2) where t_d2 is the recovery-detection lag from the
ground-truth blockage end (negative handover delays are clamped away).

The prediction strategy simply serves the backup wherever the per-step
predicted state says blocked; the oracle strategy is the prediction
strategy fed with the ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linklayer import NrTiming

MODE_PRIMARY = 0
MODE_SWEEPING = 1
MODE_BACKUP = 2
MODE_RETURNING = 3

MODE_NAMES = {MODE_PRIMARY: "on_primary", MODE_SWEEPING: "sweeping",
              MODE_BACKUP: "on_backup", MODE_RETURNING: "returning"}

SERVING_NAMES = {0: "primary", 1: "backup"}

# links whose strongest possible blockage dip is below this never produce a
# usable threshold pair (Th2 would sit on top of Th1 inside the fading noise)
MIN_DETECTABLE_BL_DB = 3.0


@dataclass(frozen=True)
class DetectorConfig:
    th1_db: float
    th2_db: float
    snr_bar_db: float
    bl_max_db: float

    def __post_init__(self):
        if not self.th2_db > self.th1_db:
            raise ValueError("need th2 > th1")

    @classmethod
    def from_calibration(cls, snr_bar_db: float, bl_max_db: float):
        """Thresholds at the mean SNR minus 70% / 30% of the peak loss.

        Returns None when the peak loss is too small to separate the
        thresholds from ordinary fading; callers treat that as a disabled
        detector.
        """
        if bl_max_db < MIN_DETECTABLE_BL_DB:
            return None
        return cls(th1_db=snr_bar_db - 0.7 * bl_max_db,
                   th2_db=snr_bar_db - 0.3 * bl_max_db,
                   snr_bar_db=snr_bar_db, bl_max_db=bl_max_db)


@dataclass(frozen=True)
class UeStepSeries:
    """Method-independent per-step inputs for one UE."""

    t: np.ndarray
    snr_db: np.ndarray
    rate_primary: np.ndarray
    rate_backup: np.ndarray
    gt: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("snr_db", "rate_primary", "rate_backup", "gt"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length mismatch")

    @property
    def n_steps(self) -> int:
        return len(self.t)


@dataclass
class RateTrace:
    method: str
    t: np.ndarray
    rate_bps: np.ndarray
    serving: np.ndarray  # 0 primary, 1 backup
    mode: np.ndarray
    gt: np.ndarray
    pred: np.ndarray     # -1 where the method makes no predictions
    snr_db: np.ndarray   # primary-pair report SNR, for the trace export


@dataclass(frozen=True)
class DetectionEvent:
    detect_t: float
    switch_t: float
    gt_onset_t: float  # nan for detections with no ground-truth onset


def _trace(method: str, series: UeStepSeries, serving: np.ndarray,
           mode: np.ndarray, pred: np.ndarray) -> RateTrace:
    rate = np.where(serving == 1, series.rate_backup, series.rate_primary)
    return RateTrace(method=method, t=series.t.copy(), rate_bps=rate,
                     serving=serving, mode=mode, gt=series.gt.copy(),
                     pred=pred, snr_db=series.snr_db.copy())


def run_bf(series: UeStepSeries) -> RateTrace:
    """Fixed beam: always the primary pair."""
    n = series.n_steps
    return _trace("BF", series,
                  serving=np.zeros(n, dtype=np.uint8),
                  mode=np.full(n, MODE_PRIMARY, dtype=np.uint8),
                  pred=np.full(n, -1, dtype=np.int8))


def run_br_det(series: UeStepSeries, det: DetectorConfig | None,
               timing: NrTiming, sweep_s: float):
    """Detection-based recovery.  Returns (trace, detection events).

    det None disables the detector (never-blocked link), which reduces to
    the fixed-beam behaviour.
    """
    n = series.n_steps
    serving = np.zeros(n, dtype=np.uint8)
    mode_arr = np.empty(n, dtype=np.uint8)
    events: list[DetectionEvent] = []

    mode = MODE_PRIMARY
    switch_time = 0.0
    return_time = 0.0
    last_gt_end = np.nan
    last_gt_onset = np.nan
    prev_gt = 0

    for i in range(n):
        t = float(series.t[i])
        g = int(series.gt[i])
        if g == 1 and prev_gt == 0:
            last_gt_onset = t
        if g == 0 and prev_gt == 1:
            last_gt_end = t
        prev_gt = g

        just_switched = False
        if mode == MODE_SWEEPING and t >= switch_time:
            mode = MODE_BACKUP
            just_switched = True
        if mode == MODE_RETURNING and t >= return_time:
            mode = MODE_PRIMARY

        if mode == MODE_PRIMARY:
            if det is not None and series.snr_db[i] < det.th1_db:
                mode = MODE_SWEEPING
                switch_time = t + sweep_s + timing.t_ho
                events.append(DetectionEvent(detect_t=t, switch_t=switch_time,
                                             gt_onset_t=last_gt_onset))
        elif mode == MODE_BACKUP and not just_switched:
            # the release check starts with the next beam report after the
            # handover completed
            if det is not None and series.snr_db[i] > det.th2_db:
                t_d2 = t - last_gt_end if np.isfinite(last_gt_end) else np.inf
                delay = max(0.0, timing.t_ho - t_d2)
                if delay == 0.0:
                    mode = MODE_PRIMARY
                else:
                    mode = MODE_RETURNING
                    return_time = t + delay

        serving[i] = 1 if mode in (MODE_BACKUP, MODE_RETURNING) else 0
        mode_arr[i] = mode

    trace = _trace("BRDet", series, serving, mode_arr,
                   np.full(n, -1, dtype=np.int8))
    return trace, events


def run_br_pre(series: UeStepSeries, pred: np.ndarray, timing: NrTiming,
               sweep_s: float, eta_s: float, method: str = "BRPre") -> RateTrace:
    """Prediction-based recovery: serve the backup wherever pred says blocked.

    The prediction for step t is issued at t - eta; eta must cover the
    sweep plus handover so the switch lands exactly at t.
    """
    if eta_s < sweep_s + timing.t_ho:
        raise ValueError(
            f"prediction window {eta_s}s shorter than sweep+handover "
            f"{sweep_s + timing.t_ho}s")
    pred = np.asarray(pred, dtype=np.int8)
    if pred.shape != series.t.shape:
        raise ValueError("pred length mismatch")
    serving = (pred == 1).astype(np.uint8)
    mode = np.where(serving == 1, MODE_BACKUP, MODE_PRIMARY).astype(np.uint8)
    return _trace(method, series, serving, mode, pred)


def run_gt(series: UeStepSeries, timing: NrTiming, sweep_s: float,
           eta_s: float) -> RateTrace:
    """Oracle: the prediction strategy fed with the true beam states."""
    return run_br_pre(series, series.gt.astype(np.int8), timing, sweep_s,
                      eta_s, method="GT")
