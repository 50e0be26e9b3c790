"""Per-step SNR / rate / interference computation and NR sweep timing.

Two noise references coexist on purpose: beam-quality reports use a fixed
narrowband measurement noise (default -122 dBm, so SNR = RSRP + 122 dB),
while the rate equations use the full-band thermal noise derived from the
power spectral density, bandwidth and noise figure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NrTiming:
    t_ss: float = 0.020          # SS burst set period, s
    l_ssb: int = 64              # SSBs per burst set
    tti: float = 0.000125        # s
    t_ho: float = 0.050          # handover delay, s
    dt: float = 0.200            # channel update step, s
    drop_duration: float = 40.0  # s

    def __post_init__(self):
        for name in ("t_ss", "tti", "t_ho", "dt", "drop_duration"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l_ssb < 1:
            raise ValueError("l_ssb must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.drop_duration / self.dt))


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 20.0
    bandwidth_hz: float = 396e6
    n_rb: int = 275
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 10.0
    report_noise_dbm: float = -122.0

    @property
    def noise_power_dbm(self) -> float:
        """Full-band thermal noise plus noise figure."""
        return (self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)
                + self.noise_figure_db)

    @property
    def rsrp_re_offset_db(self) -> float:
        """Total beamformed power to per-resource-element RSRP."""
        return 10.0 * math.log10(12.0 * self.n_rb)

    @property
    def noise_power_mw(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def tx_power_mw(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0)


@dataclass(frozen=True)
class Association:
    """Primary and secondary attachment of one UE after initial access."""

    ue_id: int
    primary_bs: int
    primary_tx_beam: int
    primary_rx_beam: int
    secondary_bs: int
    backup_tx_beam: int
    backup_rx_beam: int
    k_j: int = 1  # UEs sharing the primary BS (filled by the drop loop)

    def __post_init__(self):
        if self.primary_bs == self.secondary_bs:
            raise ValueError("secondary BS must differ from the primary")


@dataclass(frozen=True)
class SnrSample:
    beam_id: int
    t: float
    snr_db: float
    rsrp_dbm: float


def make_snr_sample(beam_id: int, t: float, rsrp_dbm: float,
                    budget: LinkBudget) -> SnrSample:
    return SnrSample(beam_id=beam_id, t=t, rsrp_dbm=rsrp_dbm,
                     snr_db=rsrp_dbm - budget.report_noise_dbm)


def t_sweep(n_tx: int, n_rx: int, timing: NrTiming = NrTiming()) -> float:
    """Dual-sweep duration: one SSB pass per Tx-Rx pair plus the average
    wait for the next burst set."""
    if n_tx < 1 or n_rx < 1:
        raise ValueError("codebook sizes must be >= 1")
    return timing.t_ss * (n_tx * n_rx / timing.l_ssb) + timing.t_ss / 2.0


def beamformed_amplitude(h: np.ndarray, tx_weights: np.ndarray,
                         rx_weights: np.ndarray) -> complex:
    """b_rx^T H b_tx (plain transpose, matching the beam definitions)."""
    return complex(rx_weights @ h @ tx_weights)


def effective_snr(h: np.ndarray, tx_weights: np.ndarray, rx_weights: np.ndarray,
                  budget: LinkBudget, floor_db: float | None = None) -> float:
    """10*log10(P_b |b_rx^T H b_tx|^2 / sigma_z^2) in dB.

    A zero channel returns -inf unless a display floor is requested.
    """
    amp = beamformed_amplitude(h, tx_weights, rx_weights)
    p = abs(amp) ** 2 * budget.tx_power_mw
    if p == 0.0:
        return float("-inf") if floor_db is None else floor_db
    snr = 10.0 * math.log10(p / budget.noise_power_mw)
    if floor_db is not None:
        snr = max(snr, floor_db)
    return snr


def rsrp_dbm_from_amplitude(amp, budget: LinkBudget):
    """Beamformed received power in dBm (no interference by definition)."""
    a2 = np.abs(np.asarray(amp)) ** 2
    with np.errstate(divide="ignore"):
        return budget.tx_power_dbm + 10.0 * np.log10(a2)


def initial_access(rsrp_dbm: np.ndarray, ue_id: int = 0) -> Association:
    """Pick the primary and backup beam pairs from a full RSRP table.

    rsrp_dbm: (n_bs, n_tx_beams, n_rx_beams).  The primary is the overall
    argmax; the secondary is the best entry on any other BS.  Ties break
    toward the lowest (bs, tx, rx) index triple.
    """
    r = np.asarray(rsrp_dbm, dtype=float)
    if r.ndim != 3 or r.shape[0] < 2:
        raise ValueError("need a (n_bs >= 2, n_tx, n_rx) RSRP table")
    flat = int(np.argmax(r))
    bs, tx, rx = np.unravel_index(flat, r.shape)
    masked = r.copy()
    masked[bs] = -np.inf
    flat2 = int(np.argmax(masked))
    bs2, tx2, rx2 = np.unravel_index(flat2, r.shape)
    return Association(ue_id=ue_id,
                       primary_bs=int(bs), primary_tx_beam=int(tx),
                       primary_rx_beam=int(rx),
                       secondary_bs=int(bs2), backup_tx_beam=int(tx2),
                       backup_rx_beam=int(rx2))


def shannon_rate(signal_mw: float, interference_mw: float, k_share: int,
                 budget: LinkBudget) -> float:
    if k_share < 1:
        raise ValueError("k_share must be >= 1")
    sinr = signal_mw / (interference_mw + budget.noise_power_mw)
    return budget.bandwidth_hz / k_share * math.log2(1.0 + sinr)


def rate_primary(h: np.ndarray, assoc: Association, tx_weights, rx_weights,
                 interference_mw: float, budget: LinkBudget) -> float:
    """Shared-bandwidth Shannon rate on the primary beam pair, bit/s."""
    amp = beamformed_amplitude(h, tx_weights, rx_weights)
    sig = abs(amp) ** 2 * budget.tx_power_mw
    return shannon_rate(sig, interference_mw, assoc.k_j, budget)


def rate_backup(h: np.ndarray, assoc: Association, tx_weights, rx_weights,
                interference_mw: float, budget: LinkBudget,
                k_secondary: int) -> float:
    """Same rate formula evaluated on the backup pair toward the secondary BS."""
    amp = beamformed_amplitude(h, tx_weights, rx_weights)
    sig = abs(amp) ** 2 * budget.tx_power_mw
    return shannon_rate(sig, interference_mw, max(k_secondary, 1), budget)


def interference(rx_weights: np.ndarray,
                 active: list[tuple[np.ndarray, np.ndarray]],
                 budget: LinkBudget) -> float:
    """Inter-cell interference power in mW.

    active lists, per interfering BS, the channel toward this UE and the
    Tx beam that BS is using for its own scheduled UE this step.
    """
    total = 0.0
    for h, tx_weights in active:
        amp = beamformed_amplitude(h, tx_weights, rx_weights)
        total += abs(amp) ** 2 * budget.tx_power_mw
    return total


def round_robin_schedule(ue_ids_per_bs: list[np.ndarray], n_steps: int,
                         rng: np.random.Generator) -> np.ndarray:
    """One scheduled UE per BS per step, uniform over the associated UEs.

    Returns (n_bs, n_steps) of UE indices, -1 where a BS serves nobody.
    """
    n_bs = len(ue_ids_per_bs)
    out = np.full((n_bs, n_steps), -1, dtype=np.int64)
    for j, ids in enumerate(ue_ids_per_bs):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            continue
        out[j] = ids[rng.integers(0, ids.size, size=n_steps)]
    return out
