"""Coordinate frames, UPA steering vectors, codebooks and element patterns.

Conventions used across the whole package:

* Global frame: x east, y north, z up (meters).
* Each array has a local frame (x', y', z') with x' along the mechanical
  boresight (rotated by the boresight azimuth, then tilted down by the
  downtilt).  Azimuth theta is measured from x' in the x'-y' plane,
  elevation phi from z' (so phi = 90 deg is the horizon of the array).
* A steering (beamforming) vector for direction (theta, phi) has elements

      v[b*m_h + a] = exp(-j*pi*(a*sin(phi)*sin(theta) + b*cos(phi))) / sqrt(M)

  for horizontal index a in [0, m_h) and vertical index b in [0, m_v),
  assuming half-wavelength element spacing.  The array response (the
  propagation-side phase ramp) is the same ramp with +j and no 1/sqrt(M),
  so that v(theta, phi)^T a(theta, phi) = sqrt(M) on a matched direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FRONT_TO_BACK_DB = 30.0  # floor of the parabolic element pattern


@dataclass(frozen=True)
class Position3D:
    """A point in the global Cartesian frame, in meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or float)


def _as_xyz(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class UpaConfig:
    """Geometry and element pattern of one uniform planar array.

    The codebook tiling parameters (sector span and elevation band) live
    here as well so a codebook can be built from the config alone.
    """

    m_v: int
    m_h: int
    element_spacing: float = 0.5  # wavelengths
    boresight_azimuth_deg: float = 0.0
    downtilt_deg: float = 0.0
    element_gain_dbi: float = 5.0
    beamwidth_h_deg: float = 90.0
    beamwidth_v_deg: float = 90.0
    sector_span_deg: float = 120.0
    el_band_deg: tuple[float, float] = (65.0, 135.0)

    def __post_init__(self):
        if self.m_v < 1 or self.m_h < 1:
            raise ValueError("antenna counts must be >= 1")
        if self.element_spacing <= 0:
            raise ValueError("element spacing must be > 0")

    @property
    def n_elements(self) -> int:
        return self.m_v * self.m_h

    def rotation(self) -> np.ndarray:
        """Global-from-local rotation matrix (columns are x', y', z')."""
        a = math.radians(self.boresight_azimuth_deg)
        t = math.radians(self.downtilt_deg)
        rz = np.array([[math.cos(a), -math.sin(a), 0.0],
                       [math.sin(a), math.cos(a), 0.0],
                       [0.0, 0.0, 1.0]])
        ry = np.array([[math.cos(t), 0.0, math.sin(t)],
                       [0.0, 1.0, 0.0],
                       [-math.sin(t), 0.0, math.cos(t)]])
        return rz @ ry


@dataclass(frozen=True)
class Beam:
    """One codebook entry: a beam id with its pointing angles and weights."""

    id: int
    azimuth: float   # radians, local frame
    elevation: float  # radians from local z'
    weights: np.ndarray

    def __post_init__(self):
        n = np.linalg.norm(self.weights)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"beam weights must be unit norm, got {n}")


@dataclass
class Codebook:
    beams: list[Beam]

    @property
    def size(self) -> int:
        return len(self.beams)

    @property
    def weight_matrix(self) -> np.ndarray:
        """All beam weights stacked as rows, shape (size, n_elements)."""
        return np.vstack([b.weights for b in self.beams])

    def __iter__(self):
        return iter(self.beams)

    def __getitem__(self, i):
        return self.beams[i]


def steering_vector(cfg: UpaConfig, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm UPA beamforming vector for a local-frame direction.

    Element order is horizontal-fastest: index = b*m_h + a.
    """
    big_theta = math.sin(elevation) * math.sin(azimuth)
    big_phi = math.cos(elevation)
    a_idx = np.arange(cfg.m_h)
    b_idx = np.arange(cfg.m_v)
    phase = np.add.outer(b_idx * big_phi, a_idx * big_theta).ravel()
    return np.exp(-1j * np.pi * phase) / math.sqrt(cfg.n_elements)


def array_response(cfg: UpaConfig, azimuth, elevation) -> np.ndarray:
    """Per-element propagation phase ramp exp(+j*k.d) for local directions.

    Accepts scalars or arrays of angles; returns shape (n_elements,) or
    (n_elements, n_angles).
    """
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    big_theta = np.sin(el) * np.sin(az)
    big_phi = np.cos(el)
    a_idx = np.arange(cfg.m_h)
    b_idx = np.arange(cfg.m_v)
    # ramp[b*m_h + a, ...] = a*Theta + b*Phi
    ramp = (np.multiply.outer(b_idx, big_phi)[:, None] +
            np.multiply.outer(a_idx, big_theta)[None, :, ...])
    ramp = ramp.reshape((cfg.n_elements,) + big_theta.shape)
    return np.exp(1j * np.pi * ramp)


def element_field_pattern(cfg: UpaConfig, azimuth: float, elevation: float) -> float:
    """Parabolic element gain in dB for local-frame angles.

    Azimuth offset is taken from the x' boresight, elevation offset from
    the phi = 90 deg plane; the response floors at G_max - 30 dB.
    """
    d_az = math.degrees(math.atan2(math.sin(azimuth), math.cos(azimuth)))
    d_el = math.degrees(elevation) - 90.0
    az_3db = cfg.beamwidth_h_deg * (70.0 / 90.0)
    el_3db = cfg.beamwidth_v_deg
    att = 12.0 * (d_az / az_3db) ** 2 + 12.0 * (d_el / el_3db) ** 2
    return cfg.element_gain_dbi - min(att, FRONT_TO_BACK_DB)


def element_field_pattern_array(cfg: UpaConfig, azimuth, elevation) -> np.ndarray:
    """Vectorized element_field_pattern over arrays of local angles."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    d_az = np.degrees(np.arctan2(np.sin(az), np.cos(az)))
    d_el = np.degrees(el) - 90.0
    az_3db = cfg.beamwidth_h_deg * (70.0 / 90.0)
    el_3db = cfg.beamwidth_v_deg
    att = 12.0 * (d_az / az_3db) ** 2 + 12.0 * (d_el / el_3db) ** 2
    return cfg.element_gain_dbi - np.minimum(att, FRONT_TO_BACK_DB)


def build_codebook(cfg: UpaConfig, n_az: int, n_el: int) -> Codebook:
    """Uniformly tile the sector with n_az x n_el beams.

    Beam ids are 1-based and elevation-major: id = el_row*n_az + az_col + 1,
    with azimuth strictly increasing inside each elevation row.
    """
    if n_az < 1 or n_el < 1:
        raise ValueError("codebook grid must be at least 1x1")
    span = cfg.sector_span_deg
    az_centers = math.radians(span) * ((np.arange(n_az) + 0.5) / n_az - 0.5)
    lo, hi = cfg.el_band_deg
    el_centers = np.radians(lo + (hi - lo) * (np.arange(n_el) + 0.5) / n_el)
    beams = []
    for e, el in enumerate(el_centers):
        for a, az in enumerate(az_centers):
            bid = e * n_az + a + 1
            beams.append(Beam(bid, float(az), float(el),
                              steering_vector(cfg, az, el)))
    return Codebook(beams)


def global_to_local_angles(cfg: UpaConfig, directions: np.ndarray):
    """Convert global unit direction vectors to local (azimuth, elevation).

    directions: shape (..., 3).  Returns two arrays of shape (...,).
    """
    rot = cfg.rotation()
    d = np.asarray(directions, dtype=float)
    local = d @ rot  # row vectors times global-from-local == R^T d
    az = np.arctan2(local[..., 1], local[..., 0])
    nrm = np.linalg.norm(local, axis=-1)
    el = np.arccos(np.clip(local[..., 2] / np.maximum(nrm, 1e-30), -1.0, 1.0))
    return az, el


def direction_between(p_from, p_to) -> np.ndarray:
    """Unit vector from p_from to p_to in the global frame."""
    d = _as_xyz(p_to) - _as_xyz(p_from)
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise ValueError("coincident points have no direction")
    return d / n
