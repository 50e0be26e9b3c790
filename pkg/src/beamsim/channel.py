"""Desk-scale 3D geometry-based stochastic channel.

Per link, large-scale parameters (pathloss, shadowing, K-factor, spreads)
are drawn once per drop; cluster/sub-path geometry is drawn once per drop
and only the sub-path phases are redrawn every step.  The composite
narrowband channel matrix is

    H[u, s] = rho * sum_rays F_rx * e^{j*phase} * F_tx
              * a_rx[u] * a_tx[s] * sqrt(P) * 10^(-BL/20)

with the line-of-sight ray added as sqrt(K/(K+1)) * H_los while the
scattered sum is scaled by sqrt(1/(K+1)).  rho = sqrt(10^-((PL+SF)/10)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import UpaConfig, _as_xyz, array_response, element_field_pattern_array, global_to_local_angles

SPEED_OF_LIGHT = 299792458.0

# desk-scale multipath texture knobs
DELAY_SCALING = 3.0           # exponential delay stretch factor
CLUSTER_SHADOW_STD_DB = 3.0   # per-cluster power jitter
INTRA_CLUSTER_SPREAD = 0.2    # sub-path offset as a fraction of the LSP spread
MIN_DISTANCE_M = 0.1


@dataclass(frozen=True)
class LargeScaleParams:
    los: bool
    pathloss_db: float
    shadow_fading_db: float
    rician_k_linear: float
    delay_spread_s: float
    aod_az_spread_deg: float
    aod_el_spread_deg: float
    aoa_az_spread_deg: float
    aoa_el_spread_deg: float
    los_aod_az: float
    los_aod_el: float
    los_aoa_az: float
    los_aoa_el: float
    d3d_m: float
    fc_ghz: float

    @property
    def slow_gain(self) -> float:
        """Amplitude gain rho from pathloss plus shadowing."""
        return math.sqrt(10.0 ** (-(self.pathloss_db + self.shadow_fading_db) / 10.0))

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / (self.fc_ghz * 1e9)


@dataclass(frozen=True)
class ClusterSet:
    """Flattened sub-path parameters; shapes are (n_clusters * n_subpaths,)."""

    n_clusters: int
    n_subpaths: int
    powers: np.ndarray
    delays_s: np.ndarray
    aod_az: np.ndarray
    aod_el: np.ndarray
    aoa_az: np.ndarray
    aoa_el: np.ndarray
    phases: np.ndarray

    @property
    def n_rays(self) -> int:
        return self.n_clusters * self.n_subpaths

    def with_phases(self, rng: np.random.Generator) -> "ClusterSet":
        """Fresh i.i.d. uniform phases; everything else kept."""
        return replace(self, phases=rng.uniform(0.0, 2.0 * np.pi, self.n_rays))


@dataclass(frozen=True)
class ChannelRealization:
    matrix: np.ndarray  # (m_rx, m_tx) complex
    timestamp: float


def inh_los_probability(d2d_m: float) -> float:
    """Indoor open-office line-of-sight probability versus 2D distance."""
    if d2d_m <= 5.0:
        return 1.0
    if d2d_m <= 49.0:
        return math.exp(-(d2d_m - 5.0) / 70.8)
    return math.exp(-(d2d_m - 49.0) / 211.7) * 0.54


def inh_pathloss_db(d3d_m: float, fc_ghz: float, los: bool) -> float:
    """Indoor hotspot pathloss at carrier fc; NLoS floors at the LoS value."""
    d = max(d3d_m, MIN_DISTANCE_M)
    pl_los = 32.4 + 17.3 * math.log10(d) + 20.0 * math.log10(fc_ghz)
    if los:
        return pl_los
    pl_nlos = 17.3 + 38.3 * math.log10(d) + 24.9 * math.log10(fc_ghz)
    return max(pl_los, pl_nlos)


def draw_lsps(bs, ue, rng: np.random.Generator, fc_ghz: float = 28.0) -> LargeScaleParams:
    """Draw the per-drop large-scale parameters of one BS-UE link.

    Draw order is fixed (LoS coin, shadowing, K, delay spread, four
    spreads) so a seeded generator reproduces the link exactly.
    """
    bs = _as_xyz(bs)
    ue = _as_xyz(ue)
    diff = ue - bs
    d3d = max(float(np.linalg.norm(diff)), MIN_DISTANCE_M)
    d2d = float(np.hypot(diff[0], diff[1]))

    los = bool(rng.uniform() < inh_los_probability(d2d))
    sf_std = 3.0 if los else 8.0
    sf = float(rng.normal(0.0, sf_std))
    k_db = float(rng.normal(7.0, 4.0))
    ds = float(10.0 ** rng.normal(-7.7, 0.18))
    asd_az = float(min(10.0 ** rng.normal(1.2, 0.2), 90.0))
    asd_el = float(min(10.0 ** rng.normal(0.8, 0.2), 30.0))
    asa_az = float(min(10.0 ** rng.normal(1.2, 0.2), 90.0))
    asa_el = float(min(10.0 ** rng.normal(0.8, 0.2), 30.0))

    aod_az = math.atan2(diff[1], diff[0])
    aod_el = math.acos(np.clip(diff[2] / d3d, -1.0, 1.0))
    aoa_az = math.atan2(-diff[1], -diff[0])
    aoa_el = math.acos(np.clip(-diff[2] / d3d, -1.0, 1.0))

    return LargeScaleParams(
        los=los,
        pathloss_db=inh_pathloss_db(d3d, fc_ghz, los),
        shadow_fading_db=sf,
        rician_k_linear=10.0 ** (k_db / 10.0),
        delay_spread_s=ds,
        aod_az_spread_deg=asd_az,
        aod_el_spread_deg=asd_el,
        aoa_az_spread_deg=asa_az,
        aoa_el_spread_deg=asa_el,
        los_aod_az=aod_az,
        los_aod_el=aod_el,
        los_aoa_az=aoa_az,
        los_aoa_el=aoa_el,
        d3d_m=d3d,
        fc_ghz=fc_ghz,
    )


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return np.arctan2(np.sin(a), np.cos(a))


def draw_ssps(lsp: LargeScaleParams, n_c: int, n_p: int, rng: np.random.Generator) -> ClusterSet:
    """Cluster/sub-path small-scale geometry for one link.

    Cluster powers decay exponentially with delay and are normalized to
    sum to one over all sub-paths; sub-path angles are the cluster angle
    plus wrapped-Gaussian offsets scaled by the LSP angle spreads.
    """
    if n_c < 1 or n_p < 1:
        raise ValueError("need at least one cluster and one sub-path")
    ds = lsp.delay_spread_s
    delays = -DELAY_SCALING * ds * np.log(rng.uniform(size=n_c))
    delays = np.sort(delays) - delays.min()
    shadow = rng.normal(0.0, CLUSTER_SHADOW_STD_DB, n_c)
    p = np.exp(-delays * (DELAY_SCALING - 1.0) / (DELAY_SCALING * ds)) * 10.0 ** (-shadow / 10.0)

    def angles(center, spread_deg):
        s = math.radians(spread_deg)
        cluster = center + s * rng.normal(size=n_c)
        sub = cluster[:, None] + INTRA_CLUSTER_SPREAD * s * rng.normal(size=(n_c, n_p))
        return _wrap_angle(sub.ravel())

    aod_az = angles(lsp.los_aod_az, lsp.aod_az_spread_deg)
    aod_el = np.clip(angles(lsp.los_aod_el, lsp.aod_el_spread_deg), 0.0, np.pi)
    aoa_az = angles(lsp.los_aoa_az, lsp.aoa_az_spread_deg)
    aoa_el = np.clip(angles(lsp.los_aoa_el, lsp.aoa_el_spread_deg), 0.0, np.pi)

    powers = np.repeat(p / n_p, n_p)
    powers = powers / powers.sum()
    return ClusterSet(
        n_clusters=n_c,
        n_subpaths=n_p,
        powers=powers,
        delays_s=np.repeat(delays, n_p),
        aod_az=aod_az,
        aod_el=aod_el,
        aoa_az=aoa_az,
        aoa_el=aoa_el,
        phases=rng.uniform(0.0, 2.0 * np.pi, n_c * n_p),
    )


@dataclass(frozen=True)
class RayTable:
    """Per-ray angles and static amplitudes of one link.

    Sub-path rays come first; when the link is LoS a final deterministic
    ray is appended (its phase is fixed by the path length).  base_amp
    already contains rho, sqrt(P), both element patterns and the Rician
    scaling, so a step realization only needs the per-step phases and
    blockage losses.  Local angles are kept alongside the global ones for
    beam projections.
    """

    aod_az: np.ndarray
    aod_el: np.ndarray
    aoa_az: np.ndarray
    aoa_el: np.ndarray
    tx_az_local: np.ndarray
    tx_el_local: np.ndarray
    rx_az_local: np.ndarray
    rx_el_local: np.ndarray
    base_amp: np.ndarray
    n_sub: int
    has_los: bool

    @property
    def n_rays(self) -> int:
        return self.n_sub + (1 if self.has_los else 0)


def build_ray_table(lsp: LargeScaleParams, clusters: ClusterSet,
                    tx_cfg: UpaConfig, rx_cfg: UpaConfig) -> RayTable:
    aod_az = clusters.aod_az
    aod_el = clusters.aod_el
    aoa_az = clusters.aoa_az
    aoa_el = clusters.aoa_el
    if lsp.los:
        aod_az = np.append(aod_az, lsp.los_aod_az)
        aod_el = np.append(aod_el, lsp.los_aod_el)
        aoa_az = np.append(aoa_az, lsp.los_aoa_az)
        aoa_el = np.append(aoa_el, lsp.los_aoa_el)

    dirs_tx = np.stack([np.sin(aod_el) * np.cos(aod_az),
                        np.sin(aod_el) * np.sin(aod_az),
                        np.cos(aod_el)], axis=-1)
    dirs_rx = np.stack([np.sin(aoa_el) * np.cos(aoa_az),
                        np.sin(aoa_el) * np.sin(aoa_az),
                        np.cos(aoa_el)], axis=-1)
    tx_az, tx_el = global_to_local_angles(tx_cfg, dirs_tx)
    rx_az, rx_el = global_to_local_angles(rx_cfg, dirs_rx)
    f_tx = 10.0 ** (element_field_pattern_array(tx_cfg, tx_az, tx_el) / 20.0)
    f_rx = 10.0 ** (element_field_pattern_array(rx_cfg, rx_az, rx_el) / 20.0)

    rho = lsp.slow_gain
    n_sub = clusters.n_rays
    amp = np.zeros(len(aod_az), dtype=complex)
    amp[:n_sub] = rho * np.sqrt(clusters.powers) * f_tx[:n_sub] * f_rx[:n_sub]
    if lsp.los:
        k = lsp.rician_k_linear
        amp[:n_sub] *= math.sqrt(1.0 / (k + 1.0))
        phase = -2.0 * np.pi * lsp.d3d_m / lsp.wavelength_m
        amp[n_sub] = (rho * math.sqrt(k / (k + 1.0)) * f_tx[n_sub] * f_rx[n_sub]
                      * np.exp(1j * phase))
    return RayTable(aod_az=aod_az, aod_el=aod_el, aoa_az=aoa_az, aoa_el=aoa_el,
                    tx_az_local=tx_az, tx_el_local=tx_el,
                    rx_az_local=rx_az, rx_el_local=rx_el,
                    base_amp=amp, n_sub=n_sub, has_los=lsp.los)


def channel_matrix(lsp: LargeScaleParams, clusters: ClusterSet,
                   tx_cfg: UpaConfig, rx_cfg: UpaConfig,
                   blockage_loss_db, t: float = 0.0) -> ChannelRealization:
    """Compose the full (m_rx, m_tx) channel for one step.

    blockage_loss_db must have one entry per sub-path plus a final entry
    for the LoS ray (ignored when the link is NLoS).  Delays collapse
    into the single wideband tap.
    """
    bl = np.asarray(blockage_loss_db, dtype=float)
    if bl.shape != (clusters.n_rays + 1,):
        raise ValueError(
            f"expected {clusters.n_rays + 1} blockage entries "
            f"(sub-paths plus LoS), got {bl.shape}")
    table = build_ray_table(lsp, clusters, tx_cfg, rx_cfg)

    coef = table.base_amp.copy()
    coef[:table.n_sub] *= np.exp(1j * clusters.phases)
    if table.has_los:
        ray_bl = np.append(bl[:table.n_sub], bl[-1])
    else:
        ray_bl = bl[:table.n_sub]
    with np.errstate(over="ignore"):
        coef = coef * 10.0 ** (-ray_bl / 20.0)

    a_tx = array_response(tx_cfg, table.tx_az_local, table.tx_el_local)  # (m_tx, n_rays)
    a_rx = array_response(rx_cfg, table.rx_az_local, table.rx_el_local)  # (m_rx, n_rays)
    h = (a_rx * coef) @ a_tx.T
    return ChannelRealization(matrix=h, timestamp=t)
