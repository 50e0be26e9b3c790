"""Scenario construction: network layout, defaults and config hashing.

The default values reproduce the reference indoor deployment: a 50 x 40 m
room centered on the origin, four sites on a 20 m grid with three sectors
each (boresights 30/150/270 deg, 3 m height, 20 deg downtilt), 8x8 BS and
4x4 UE arrays with 64/16-beam codebooks, 20 UEs per sector on average at
28 GHz over 396 MHz, and a 2 x 3 m blocker sweeping the x axis.

Models and datasets are tied to the physics of the scenario (including
the master seed, which fixes the UE positions) through a content hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import yaml

from .geometry import UpaConfig, build_codebook
from .linklayer import LinkBudget, NrTiming

ENV_SEED = "BEAMSIM_SEED"
ENV_OUT = "BEAMSIM_OUT"


@dataclass(frozen=True)
class ScenarioConfig:
    # room, centered on the origin
    room_x: float = 50.0
    room_y: float = 40.0
    room_height: float = 3.0
    # sites and sectors
    isd: float = 20.0
    bs_height: float = 3.0
    downtilt_deg: float = 20.0
    sector_boresights_deg: tuple[float, ...] = (30.0, 150.0, 270.0)
    # arrays / codebooks
    bs_m_v: int = 8
    bs_m_h: int = 8
    bs_codebook_az: int = 16
    bs_codebook_el: int = 4
    bs_el_band_deg: tuple[float, float] = (65.0, 135.0)
    ue_m_v: int = 4
    ue_m_h: int = 4
    ue_codebook_az: int = 8
    ue_codebook_el: int = 2
    ue_el_band_deg: tuple[float, float] = (30.0, 100.0)
    element_gain_dbi: float = 5.0
    beamwidth_h_deg: float = 90.0
    beamwidth_v_deg: float = 90.0
    # carrier / power
    fc_ghz: float = 28.0
    budget: LinkBudget = field(default_factory=LinkBudget)
    timing: NrTiming = field(default_factory=NrTiming)
    # users
    ue_per_sector: float = 20.0
    ue_height: float = 1.0
    # blocker
    blocker_w: float = 2.0
    blocker_h: float = 3.0
    blocker_x_start: float = -20.0
    blocker_x_end: float = 20.0
    blocker_y: float = 0.0
    blocker_speeds: tuple[float, ...] = (1.0, 2.0)
    # channel texture
    n_clusters: int = 8
    n_subpaths: int = 4
    # prediction
    eta_s: float = 0.400
    epsilon_s: float = 2.0
    n_correlated: int = 5
    filler_snr_db: float = 60.0
    # campaign
    seed: int = 42

    @property
    def n_sites(self) -> int:
        return 4

    @property
    def n_bs(self) -> int:
        return self.n_sites * len(self.sector_boresights_deg)

    @property
    def n_ue(self) -> int:
        return int(round(self.ue_per_sector * self.n_bs))

    @property
    def n_tx_beams(self) -> int:
        return self.bs_codebook_az * self.bs_codebook_el

    @property
    def n_rx_beams(self) -> int:
        return self.ue_codebook_az * self.ue_codebook_el

    @property
    def n_beams_total(self) -> int:
        return self.n_bs * self.n_tx_beams

    @property
    def eta_steps(self) -> int:
        return int(round(self.eta_s / self.timing.dt))

    @property
    def eps_steps(self) -> int:
        return int(round(self.epsilon_s / self.timing.dt))

    @property
    def wavelength_m(self) -> float:
        return 299792458.0 / (self.fc_ghz * 1e9)

    def site_positions(self) -> np.ndarray:
        """2x2 grid at half the ISD from the room center, NW first."""
        half = self.isd / 2.0
        return np.array([[-half, half], [half, half],
                         [-half, -half], [half, -half]])

    def bs_positions(self) -> np.ndarray:
        sites = self.site_positions()
        out = []
        for sx, sy in sites:
            for _ in self.sector_boresights_deg:
                out.append([sx, sy, self.bs_height])
        return np.array(out)

    def bs_boresights(self) -> np.ndarray:
        return np.array([b for _ in range(self.n_sites)
                         for b in self.sector_boresights_deg])

    def bs_upa(self, boresight_deg: float = 0.0) -> UpaConfig:
        return UpaConfig(m_v=self.bs_m_v, m_h=self.bs_m_h,
                         boresight_azimuth_deg=boresight_deg,
                         downtilt_deg=self.downtilt_deg,
                         element_gain_dbi=self.element_gain_dbi,
                         beamwidth_h_deg=self.beamwidth_h_deg,
                         beamwidth_v_deg=self.beamwidth_v_deg,
                         sector_span_deg=120.0,
                         el_band_deg=self.bs_el_band_deg)

    def ue_upa(self, boresight_deg: float = 0.0) -> UpaConfig:
        return UpaConfig(m_v=self.ue_m_v, m_h=self.ue_m_h,
                         boresight_azimuth_deg=boresight_deg,
                         downtilt_deg=0.0,
                         element_gain_dbi=self.element_gain_dbi,
                         beamwidth_h_deg=self.beamwidth_h_deg,
                         beamwidth_v_deg=self.beamwidth_v_deg,
                         sector_span_deg=360.0,
                         el_band_deg=self.ue_el_band_deg)

    def bs_codebook(self):
        return build_codebook(self.bs_upa(), self.bs_codebook_az,
                              self.bs_codebook_el)

    def ue_codebook(self):
        return build_codebook(self.ue_upa(), self.ue_codebook_az,
                              self.ue_codebook_el)

    def canonical_dict(self) -> dict:
        d = asdict(self)
        # tuples serialize as lists for a stable json rendering
        return json.loads(json.dumps(d, sort_keys=True))

    def scenario_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _coerce(value, like):
    if isinstance(like, tuple):
        return tuple(value)
    if isinstance(like, bool):
        return bool(value)
    if isinstance(like, int) and not isinstance(value, bool):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def load_config(path=None, seed=None, **overrides) -> ScenarioConfig:
    """Build a config from an optional YAML file plus overrides.

    YAML keys mirror the dataclass fields; `timing` and `budget` accept
    nested mappings.  BEAMSIM_SEED overrides the seed unless one is given
    explicitly.
    """
    cfg = ScenarioConfig()
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    data.update(overrides)

    if "timing" in data:
        cfg = replace(cfg, timing=NrTiming(**{**asdict(cfg.timing),
                                              **data.pop("timing")}))
    if "budget" in data:
        cfg = replace(cfg, budget=LinkBudget(**{**asdict(cfg.budget),
                                                **data.pop("budget")}))
    fields = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    coerced = {k: _coerce(v, fields[k]) for k, v in data.items()}
    cfg = replace(cfg, **coerced)

    env_seed = os.environ.get(ENV_SEED)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    elif env_seed is not None:
        cfg = replace(cfg, seed=int(env_seed))
    return cfg


def resolve_out_dir(out, default="runs"):
    if out is not None:
        return out
    return os.environ.get(ENV_OUT, default)
