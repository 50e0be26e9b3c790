"""Percentile tables and CDF point sets over collected rate traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .recovery import RateTrace, SERVING_NAMES

PERCENTILES = (25, 50, 75)


def pooled_rates(traces: list[RateTrace], gt_filter: str) -> np.ndarray:
    """Per-UE-per-step rates over steps matching the state filter.

    gt_filter: "blocked", "non-blocked" or "all".
    """
    chunks = []
    for tr in traces:
        if gt_filter == "blocked":
            mask = tr.gt == 1
        elif gt_filter == "non-blocked":
            mask = tr.gt == 0
        elif gt_filter == "all":
            mask = np.ones(len(tr.gt), dtype=bool)
        else:
            raise ValueError(f"unknown filter {gt_filter!r}")
        chunks.append(tr.rate_bps[mask])
    if not chunks:
        return np.array([])
    return np.concatenate(chunks)


@dataclass
class ReportCell:
    method: str
    speed: float
    gt_filter: str
    n_samples: int
    percentiles: dict[int, float]  # empty when no samples matched

    @property
    def absent(self) -> bool:
        return self.n_samples == 0


def percentile_table(traces_by_method_speed: dict[tuple[str, float], list[RateTrace]],
                     gt_filter: str,
                     percentiles=PERCENTILES) -> list[ReportCell]:
    cells = []
    for (method, speed), traces in traces_by_method_speed.items():
        rates = pooled_rates(traces, gt_filter)
        if rates.size == 0:
            cells.append(ReportCell(method, speed, gt_filter, 0, {}))
            continue
        pct = {p: float(np.percentile(rates, p)) for p in percentiles}
        cells.append(ReportCell(method, speed, gt_filter, rates.size, pct))
    return cells


def gain_percent(cells: list[ReportCell], method_a: str, method_b: str,
                 speed: float, percentile: int) -> float | None:
    """Percent gain of method_a over method_b at one percentile."""
    a = next((c for c in cells if c.method == method_a and c.speed == speed), None)
    b = next((c for c in cells if c.method == method_b and c.speed == speed), None)
    if a is None or b is None or a.absent or b.absent:
        return None
    base = b.percentiles[percentile]
    if base == 0:
        return None
    return 100.0 * (a.percentiles[percentile] - base) / base


def cdf_points(rates: np.ndarray):
    """Sorted rates plus empirical probabilities (i/n)."""
    r = np.sort(np.asarray(rates))
    p = np.arange(1, len(r) + 1) / len(r) if len(r) else np.array([])
    return r, p


def write_summary_csv(path, cells: list[ReportCell], header_comment: str,
                      gains: list[tuple] = ()):
    """Summary rows; absent cells keep empty percentile columns."""
    with open(path, "w", newline="") as fh:
        fh.write(header_comment + "\n")
        wtr = csv.writer(fh)
        pcts = sorted(PERCENTILES)
        wtr.writerow(["method", "speed_mps", "filter", "n_samples"]
                     + [f"p{p}_bps" for p in pcts])
        for c in cells:
            row = [c.method, f"{c.speed:.9g}", c.gt_filter, c.n_samples]
            row += [f"{c.percentiles[p]:.9g}" if not c.absent else ""
                    for p in pcts]
            wtr.writerow(row)
        for label, value in gains:
            wtr.writerow([label, "", "gain_pct",
                          "" if value is None else f"{value:.9g}"])


def write_cdf_csv(path, rates: np.ndarray, header_comment: str):
    r, p = cdf_points(rates)
    with open(path, "w", newline="") as fh:
        fh.write(header_comment + "\n")
        wtr = csv.writer(fh)
        wtr.writerow(["rate_bps", "prob"])
        for ri, pi in zip(r, p):
            wtr.writerow([f"{ri:.9g}", f"{pi:.9g}"])


def write_rate_traces_csv(path, rows_by_method: dict[str, list[RateTrace]],
                          drop_id: int, header_comment: str):
    """Per-step rate records: one row per (method, ue, step)."""
    with open(path, "w", newline="") as fh:
        fh.write(header_comment + "\n")
        wtr = csv.writer(fh)
        wtr.writerow(["drop_id", "ue_id", "t", "method", "serving",
                      "gt_state", "pred_state", "rate_bps", "snr_db"])
        for method, traces in rows_by_method.items():
            for ue_id, tr in enumerate(traces):
                for i in range(len(tr.t)):
                    wtr.writerow([
                        drop_id, ue_id, f"{tr.t[i]:.9g}", method,
                        SERVING_NAMES[int(tr.serving[i])],
                        int(tr.gt[i]), int(tr.pred[i]),
                        f"{tr.rate_bps[i]:.9g}", f"{tr.snr_db[i]:.9g}",
                    ])
