"""Drop engine: builds a deployment and runs 40 s drops on the step grid.

Per drop everything that does not depend on the recovery method is
computed once (channels, blockage losses, both candidate rates, the
interference schedule, ground truth, calibration); the four strategies
then replay those series through their state machines.  All randomness
comes from generators keyed on (seed, drop_id, stream), so a drop is a
pure function of the config.

The per-ray decomposition keeps the hot path cheap: for every link the
beam-projected ray gains are constant within a drop, so a step only needs
fresh phases and blockage losses plus a handful of 33-tap dot products.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .blockage import BlockerScreen, Trajectory, advance_blocker
from .channel import build_ray_table, draw_lsps, draw_ssps
from .geometry import array_response
from .linklayer import Association, initial_access, t_sweep
from .prediction import BeamTraceMatrix, DnnModel, predict
from .recovery import (DetectorConfig, RateTrace, UeStepSeries, run_bf,
                       run_br_det, run_br_pre, run_gt)
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

SNR_FLOOR_DB = -60.0  # display floor for reported beam-quality SNR

# rng stream ids
_S_POSITIONS = 0
_S_LSP = 1
_S_SSP = 2
_S_PHASE = 3
_S_SCHED = 4
_S_CALIB = 5

METHODS = ("BF", "BRDet", "BRPre", "GT")


@dataclass
class Deployment:
    """Everything fixed across drops of one campaign."""

    cfg: ScenarioConfig
    bs_pos: np.ndarray          # (J, 3)
    bs_boresights: np.ndarray   # (J,)
    ue_pos: np.ndarray          # (K, 3)
    ue_boresights: np.ndarray   # (K,)
    bs_weights: np.ndarray      # (n_tx_beams, m_tx) shared local codebook
    ue_weights: np.ndarray      # (n_rx_beams, m_rx)

    @classmethod
    def build(cls, cfg: ScenarioConfig) -> "Deployment":
        rng = np.random.default_rng([cfg.seed, _S_POSITIONS])
        k = cfg.n_ue
        x = rng.uniform(-cfg.room_x / 2, cfg.room_x / 2, k)
        y = rng.uniform(-cfg.room_y / 2, cfg.room_y / 2, k)
        ue_pos = np.column_stack([x, y, np.full(k, cfg.ue_height)])
        ue_bore = rng.uniform(0.0, 360.0, k)
        return cls(cfg=cfg,
                   bs_pos=cfg.bs_positions(),
                   bs_boresights=cfg.bs_boresights(),
                   ue_pos=ue_pos,
                   ue_boresights=ue_bore,
                   bs_weights=cfg.bs_codebook().weight_matrix,
                   ue_weights=cfg.ue_codebook().weight_matrix)

    def beam_gid(self, bs: int, tx_beam: int) -> int:
        """Network-wide beam index: BS-major, 0-based."""
        return bs * self.cfg.n_tx_beams + tx_beam


@dataclass
class DropData:
    """Method-independent results of one simulated drop."""

    drop_id: int
    speed: float
    assoc: list[Association]
    k_j: np.ndarray             # (J,) primary-association counts
    t_grid: np.ndarray          # (T,)
    report_snr: np.ndarray      # (T, K) dB, primary pair, floored
    rate_primary: np.ndarray    # (T, K) bit/s
    rate_backup: np.ndarray     # (T, K)
    gt: np.ndarray              # (T, K) uint8
    snr_bar: np.ndarray         # (K,) blocker-free mean report SNR
    bl_max: np.ndarray          # (K,) peak direct-path loss over the drop
    trace: BeamTraceMatrix


class DropEngine:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.dep = Deployment.build(cfg)
        self.sweep_s = t_sweep(cfg.n_tx_beams, cfg.n_rx_beams, cfg.timing)

    # ------------------------------------------------------------------
    def run_drop(self, drop_id: int, speed: float) -> DropData:
        cfg = self.cfg
        dep = self.dep
        j_n = cfg.n_bs
        k_n = cfg.n_ue
        n_sub = cfg.n_clusters * cfg.n_subpaths
        n_ray = n_sub + 1  # LoS slot always allocated, zero amp when NLoS
        t_steps = cfg.timing.n_steps
        lam = cfg.wavelength_m
        p_mw = cfg.budget.tx_power_mw
        noise_mw = cfg.budget.noise_power_mw
        # report SNR = per-RE RSRP minus the narrowband measurement noise
        report_off = (-cfg.budget.report_noise_dbm
                      - cfg.budget.rsrp_re_offset_db)

        rng_lsp = np.random.default_rng([cfg.seed, drop_id, _S_LSP])
        rng_ssp = np.random.default_rng([cfg.seed, drop_id, _S_SSP])
        rng_phase = np.random.default_rng([cfg.seed, drop_id, _S_PHASE])
        rng_sched = np.random.default_rng([cfg.seed, drop_id, _S_SCHED])
        rng_calib = np.random.default_rng([cfg.seed, drop_id, _S_CALIB])

        # --- per-link static tables ----------------------------------
        base_amp = np.zeros((j_n, k_n, n_ray), dtype=complex)
        u_proj = np.zeros((j_n, k_n, cfg.n_rx_beams, n_ray), dtype=complex)
        w_proj = np.zeros((j_n, k_n, cfg.n_tx_beams, n_ray), dtype=complex)
        nlos_dirs = np.zeros((j_n, k_n, n_sub, 3))

        ue_cfgs = [cfg.ue_upa(b) for b in dep.ue_boresights]
        for j in range(j_n):
            tx_cfg = cfg.bs_upa(dep.bs_boresights[j])
            for k in range(k_n):
                lsp = draw_lsps(dep.bs_pos[j], dep.ue_pos[k], rng_lsp,
                                fc_ghz=cfg.fc_ghz)
                clusters = draw_ssps(lsp, cfg.n_clusters, cfg.n_subpaths,
                                     rng_ssp)
                table = build_ray_table(lsp, clusters, tx_cfg, ue_cfgs[k])
                r = table.n_rays
                base_amp[j, k, :r] = table.base_amp
                a_tx = array_response(tx_cfg, table.tx_az_local,
                                      table.tx_el_local)
                a_rx = array_response(ue_cfgs[k], table.rx_az_local,
                                      table.rx_el_local)
                w_proj[j, k, :, :r] = dep.bs_weights @ a_tx
                u_proj[j, k, :, :r] = dep.ue_weights @ a_rx
                el = clusters.aoa_el
                az = clusters.aoa_az
                nlos_dirs[j, k] = np.column_stack(
                    [np.sin(el) * np.cos(az), np.sin(el) * np.sin(az),
                     np.cos(el)])

        # flattened geometry for the blockage kernels
        tx_flat = np.repeat(dep.bs_pos, k_n, axis=0)              # (J*K, 3)
        rx_flat = np.tile(dep.ue_pos, (j_n, 1))                   # (J*K, 3)
        rxn_flat = np.repeat(rx_flat, n_sub, axis=0)              # (J*K*n_sub, 3)
        dir_flat = nlos_dirs.reshape(-1, 3)

        # blocker path on the step grid
        traj = Trajectory(x_start=cfg.blocker_x_start,
                          x_end=cfg.blocker_x_end, y=cfg.blocker_y)
        screen = BlockerScreen(width=cfg.blocker_w, height=cfg.blocker_h,
                               center=(cfg.blocker_x_start, cfg.blocker_y,
                                       cfg.blocker_h / 2),
                               speed=speed)
        centers = np.empty((t_steps, 3))
        for i in range(t_steps):
            centers[i] = screen.center
            screen = advance_blocker(screen, traj, cfg.timing.dt)

        # --- the step loop --------------------------------------------
        t_grid = np.arange(t_steps) * cfg.timing.dt
        report_snr = np.empty((t_steps, k_n))
        rate_primary = np.empty((t_steps, k_n))
        rate_backup = np.empty((t_steps, k_n))
        gt = np.zeros((t_steps, k_n), dtype=np.uint8)
        snr0_sum = np.zeros(k_n)
        bl_max = np.zeros(k_n)
        assoc: list[Association] = []

        sched = None
        prim_j = prim_l = prim_q = None
        sec_j = sec_l = sec_q = None
        g_p = g_b = None
        e_p = e_b = None
        used_beams: list[np.ndarray] = []
        used_map = None
        k_j = None

        for i in range(t_steps):
            center = centers[i]
            bl_los = kernels.blockage_loss_los(
                tx_flat, rx_flat, center, cfg.blocker_w, cfg.blocker_h,
                lam).reshape(j_n, k_n)
            bl_nlos = kernels.blockage_loss_nlos(
                rxn_flat, dir_flat, center, cfg.blocker_w, cfg.blocker_h,
                lam).reshape(j_n, k_n, n_sub)
            phases = rng_phase.uniform(0.0, 2.0 * np.pi, (j_n, k_n, n_sub))

            coef = base_amp.copy()
            coef[:, :, :n_sub] *= np.exp(1j * phases)
            coef[:, :, :n_sub] *= 10.0 ** (-bl_nlos / 20.0)
            coef[:, :, n_sub] *= 10.0 ** (-bl_los / 20.0)

            if i == 0:
                # initial access on the first realization
                amp0 = np.einsum("jkqr,jklr->jkql",
                                 u_proj * coef[:, :, None, :], w_proj)
                with np.errstate(divide="ignore"):
                    rsrp = (cfg.budget.tx_power_dbm
                            + 20.0 * np.log10(np.abs(amp0)))
                # axes for tie-breaking order (bs, tx beam, rx beam)
                rsrp_blq = rsrp.transpose(0, 1, 3, 2)  # (J, K, L, Q)
                for k in range(k_n):
                    assoc.append(initial_access(rsrp_blq[:, k], ue_id=k))
                prim_j = np.array([a.primary_bs for a in assoc])
                prim_l = np.array([a.primary_tx_beam for a in assoc])
                prim_q = np.array([a.primary_rx_beam for a in assoc])
                sec_j = np.array([a.secondary_bs for a in assoc])
                sec_l = np.array([a.backup_tx_beam for a in assoc])
                sec_q = np.array([a.backup_rx_beam for a in assoc])
                k_j = np.bincount(prim_j, minlength=j_n)
                assoc = [replace(a, k_j=int(k_j[a.primary_bs]))
                         for a in assoc]

                ks = np.arange(k_n)
                g_p = (u_proj[prim_j, ks, prim_q, :]
                       * w_proj[prim_j, ks, prim_l, :])
                g_b = (u_proj[sec_j, ks, sec_q, :]
                       * w_proj[sec_j, ks, sec_l, :])
                # interference projections: one row per (bs, ue) pair for
                # each of the two rx beams, per candidate tx beam of the bs
                e_p = u_proj[:, ks, prim_q, :]          # (J, K, R)
                e_b = u_proj[:, ks, sec_q, :]
                used_beams = [np.unique(prim_l[prim_j == j]) for j in
                              range(j_n)]
                g_int_p = []
                g_int_b = []
                for j in range(j_n):
                    if used_beams[j].size:
                        wj = w_proj[j, :, used_beams[j], :].transpose(1, 0, 2)
                        g_int_p.append(e_p[j][:, None, :] * wj)
                        g_int_b.append(e_b[j][:, None, :] * wj)
                    else:
                        g_int_p.append(None)
                        g_int_b.append(None)
                sched_ues = [np.flatnonzero(prim_j == j) for j in range(j_n)]
                sched = np.full((j_n, t_steps), -1, dtype=np.int64)
                for j in range(j_n):
                    if sched_ues[j].size:
                        sched[j] = sched_ues[j][rng_sched.integers(
                            0, sched_ues[j].size, size=t_steps)]
                beam_pos = [
                    {int(b): ix for ix, b in enumerate(used_beams[j])}
                    for j in range(j_n)]
                used_map = np.zeros((j_n, t_steps), dtype=np.int64)
                for j in range(j_n):
                    for s in range(t_steps):
                        u = sched[j, s]
                        used_map[j, s] = beam_pos[j][int(prim_l[u])] if u >= 0 else -1

            ks = np.arange(k_n)
            c_prim = coef[prim_j, ks, :]
            c_bak = coef[sec_j, ks, :]
            amp_p = np.einsum("kr,kr->k", c_prim, g_p)
            amp_b = np.einsum("kr,kr->k", c_bak, g_b)

            # interference with the scheduled beam of every other BS
            i_p = np.zeros(k_n)
            i_b = np.zeros(k_n)
            for j in range(j_n):
                m = used_map[j, i]
                if m < 0:
                    continue
                a_pj = np.einsum("kr,kr->k", coef[j], g_int_p[j][:, m, :])
                a_bj = np.einsum("kr,kr->k", coef[j], g_int_b[j][:, m, :])
                contrib_p = p_mw * np.abs(a_pj) ** 2
                contrib_b = p_mw * np.abs(a_bj) ** 2
                i_p += np.where(prim_j == j, 0.0, contrib_p)
                i_b += np.where(sec_j == j, 0.0, contrib_b)

            sig_p = p_mw * np.abs(amp_p) ** 2
            sig_b = p_mw * np.abs(amp_b) ** 2
            with np.errstate(divide="ignore"):
                rep = (cfg.budget.tx_power_dbm
                       + 20.0 * np.log10(np.abs(amp_p)) + report_off)
            report_snr[i] = np.maximum(rep, SNR_FLOOR_DB)
            share_p = cfg.budget.bandwidth_hz / np.maximum(k_j[prim_j], 1)
            share_b = cfg.budget.bandwidth_hz / np.maximum(k_j[sec_j], 1)
            rate_primary[i] = share_p * np.log2(1.0 + sig_p / (i_p + noise_mw))
            rate_backup[i] = share_b * np.log2(1.0 + sig_b / (i_b + noise_mw))

            gt[i] = kernels.gt_intersect(
                dep.bs_pos[prim_j], dep.ue_pos, center,
                cfg.blocker_w, cfg.blocker_h)
            bl_max = np.maximum(bl_max, bl_los[prim_j, ks])

        # --- blocker-free calibration pass ----------------------------
        for i in range(t_steps):
            phases = rng_calib.uniform(0.0, 2.0 * np.pi, (k_n, n_sub))
            c0 = base_amp[prim_j, np.arange(k_n), :].copy()
            c0[:, :n_sub] *= np.exp(1j * phases)
            amp0 = np.einsum("kr,kr->k", c0, g_p)
            with np.errstate(divide="ignore"):
                rep0 = (cfg.budget.tx_power_dbm
                        + 20.0 * np.log10(np.abs(amp0)) + report_off)
            snr0_sum += np.maximum(rep0, SNR_FLOOR_DB)
        snr_bar = snr0_sum / t_steps

        trace = self._aggregate_trace(drop_id, prim_j, prim_l, report_snr, gt)
        return DropData(drop_id=drop_id, speed=speed, assoc=assoc, k_j=k_j,
                        t_grid=t_grid, report_snr=report_snr,
                        rate_primary=rate_primary, rate_backup=rate_backup,
                        gt=gt, snr_bar=snr_bar, bl_max=bl_max, trace=trace)

    # ------------------------------------------------------------------
    def _aggregate_trace(self, drop_id, prim_j, prim_l, report_snr, gt):
        """Median SNR / majority state per network beam (filler elsewhere)."""
        cfg = self.cfg
        b_total = cfg.n_beams_total
        t_steps = report_snr.shape[0]
        snr = np.full((b_total, t_steps), cfg.filler_snr_db)
        gtb = np.zeros((b_total, t_steps), dtype=np.int8)
        occ = np.zeros(b_total, dtype=np.int64)
        gids = prim_j * cfg.n_tx_beams + prim_l
        for gid in np.unique(gids):
            ues = np.flatnonzero(gids == gid)
            occ[gid] = ues.size
            snr[gid] = np.median(report_snr[:, ues], axis=1)
            gtb[gid] = (2 * gt[:, ues].sum(axis=1) >= ues.size).astype(np.int8)
        return BeamTraceMatrix(snr=snr, gt=gtb, occupancy=occ,
                               drop_id=drop_id, filler_db=cfg.filler_snr_db)

    # ------------------------------------------------------------------
    def ue_series(self, drop: DropData, k: int) -> UeStepSeries:
        return UeStepSeries(t=drop.t_grid,
                            snr_db=drop.report_snr[:, k],
                            rate_primary=drop.rate_primary[:, k],
                            rate_backup=drop.rate_backup[:, k],
                            gt=drop.gt[:, k].astype(np.int8))

    def prediction_series(self, drop: DropData,
                          models: dict[int, DnnModel]) -> dict[int, np.ndarray]:
        """Per-beam predicted state series from the drop's trace matrix.

        The prediction for step t is made from the window ending at
        t - eta; steps without full history predict non-blocked.
        """
        cfg = self.cfg
        eta, eps = cfg.eta_steps, cfg.eps_steps
        first = eta + eps - 1
        t_steps = drop.trace.n_steps
        out = {}
        for gid, model in models.items():
            members = model.meta.get("members")
            if members is None:
                raise ValueError(f"model for beam {gid} lacks member list")
            rows = [gid, *members]
            snr = drop.trace.snr[rows]
            wins = np.stack([snr[:, t - eta - eps + 1:t - eta + 1].T.ravel()
                             for t in range(first, t_steps)])
            s_hat, _ = predict(model, wins)
            series = np.zeros(t_steps, dtype=np.int8)
            series[first:] = s_hat
            out[gid] = series
        return out

    def method_traces(self, drop: DropData, methods=METHODS,
                      models: dict[int, DnnModel] | None = None,
                      perfect_predictor: bool = False):
        """Run the requested strategies over a finished drop.

        Returns {method: list of per-UE RateTrace}.  BR-Pre uses the
        trained per-beam models (UEs on beams without a model fall back to
        the detection strategy and are logged); with perfect_predictor it
        is fed the per-UE ground truth instead.
        """
        cfg = self.cfg
        timing = cfg.timing
        k_n = cfg.n_ue
        out: dict[str, list[RateTrace]] = {}
        pred_by_beam: dict[int, np.ndarray] = {}
        if "BRPre" in methods and not perfect_predictor:
            pred_by_beam = self.prediction_series(drop, models or {})

        dets = [DetectorConfig.from_calibration(drop.snr_bar[k],
                                                drop.bl_max[k])
                for k in range(k_n)]

        for method in methods:
            traces = []
            for k in range(k_n):
                series = self.ue_series(drop, k)
                if method == "BF":
                    traces.append(run_bf(series))
                elif method == "BRDet":
                    tr, _ = run_br_det(series, dets[k], timing, self.sweep_s)
                    traces.append(tr)
                elif method == "GT":
                    traces.append(run_gt(series, timing, self.sweep_s,
                                         cfg.eta_s))
                elif method == "BRPre":
                    if perfect_predictor:
                        traces.append(run_br_pre(
                            series, series.gt.astype(np.int8), timing,
                            self.sweep_s, cfg.eta_s))
                        continue
                    gid = self.dep.beam_gid(drop.assoc[k].primary_bs,
                                            drop.assoc[k].primary_tx_beam)
                    if gid in pred_by_beam:
                        traces.append(run_br_pre(series, pred_by_beam[gid],
                                                 timing, self.sweep_s,
                                                 cfg.eta_s))
                    else:
                        log.info("drop %d ue %d beam %d: no model, "
                                 "falling back to detection",
                                 drop.drop_id, k, gid)
                        tr, _ = run_br_det(series, dets[k], timing,
                                           self.sweep_s)
                        tr.method = "BRPre"
                        traces.append(tr)
                else:
                    raise ValueError(f"unknown method {method!r}")
            out[method] = traces
        return out
