import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsim.geometry import (Beam, UpaConfig, array_response, build_codebook,
                              element_field_pattern, steering_vector)


def scalar_steering(m_v, m_h, az, el):
    """Loop reference: one element at a time from the phase formula."""
    out = []
    for b in range(m_v):
        for a in range(m_h):
            phase = math.pi * (a * math.sin(el) * math.sin(az)
                               + b * math.cos(el))
            out.append(complex(math.cos(phase), -math.sin(phase)))
    return np.array(out) / math.sqrt(m_v * m_h)


class TestSteeringVector:
    def test_single_element_identity(self):
        cfg = UpaConfig(m_v=1, m_h=1)
        v = steering_vector(cfg, 0.7, 1.9)
        assert v.shape == (1,)
        assert v[0] == pytest.approx(1.0)

    def test_two_by_two_broadside(self):
        # theta = phi = pi/2: horizontal ramp alternates sign, vertical flat
        cfg = UpaConfig(m_v=2, m_h=2)
        v = steering_vector(cfg, math.pi / 2, math.pi / 2)
        expect = 0.5 * np.array([1, -1, 1, -1], dtype=complex)
        np.testing.assert_allclose(v, expect, atol=1e-12)

    @given(st.floats(-math.pi, math.pi), st.floats(0, math.pi),
           st.integers(1, 8), st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_matches_scalar_reference(self, az, el, m_v, m_h):
        cfg = UpaConfig(m_v=m_v, m_h=m_h)
        np.testing.assert_allclose(steering_vector(cfg, az, el),
                                   scalar_steering(m_v, m_h, az, el),
                                   atol=1e-12)

    @given(st.floats(-math.pi, math.pi), st.floats(0, math.pi))
    @settings(max_examples=60, deadline=None)
    def test_unit_norm(self, az, el):
        cfg = UpaConfig(m_v=4, m_h=4)
        assert abs(np.linalg.norm(steering_vector(cfg, az, el)) - 1.0) < 1e-12

    def test_azimuth_periodicity(self):
        cfg = UpaConfig(m_v=3, m_h=5)
        a = steering_vector(cfg, 0.4, 1.2)
        b = steering_vector(cfg, 0.4 + 2 * math.pi, 1.2)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_matched_beam_gain(self):
        # v^T a on the steered direction accumulates sqrt(M)
        cfg = UpaConfig(m_v=4, m_h=8)
        az, el = 0.3, 1.7
        v = steering_vector(cfg, az, el)
        a = array_response(cfg, az, el)
        assert abs(v @ a) == pytest.approx(math.sqrt(32), rel=1e-12)


class TestCodebook:
    def test_bs_grid(self):
        cfg = UpaConfig(m_v=8, m_h=8, sector_span_deg=120.0,
                        el_band_deg=(65.0, 135.0))
        cb = build_codebook(cfg, 16, 4)
        assert cb.size == 64
        for beam in cb:
            assert abs(np.linalg.norm(beam.weights) - 1.0) < 1e-12
        ids = [b.id for b in cb]
        assert ids == list(range(1, 65))
        # azimuth strictly increasing inside each elevation row
        for row in range(4):
            az = [cb[row * 16 + i].azimuth for i in range(16)]
            assert all(a < b for a, b in zip(az, az[1:]))

    def test_ue_grid_size(self):
        cfg = UpaConfig(m_v=4, m_h=4, sector_span_deg=360.0,
                        el_band_deg=(30.0, 100.0))
        assert build_codebook(cfg, 8, 2).size == 16

    def test_deterministic(self):
        cfg = UpaConfig(m_v=8, m_h=8)
        a = build_codebook(cfg, 16, 4)
        b = build_codebook(cfg, 16, 4)
        for ba, bb in zip(a, b):
            assert ba.id == bb.id
            np.testing.assert_array_equal(ba.weights, bb.weights)

    def test_matched_beam_wins_argmax(self):
        cfg = UpaConfig(m_v=8, m_h=8, sector_span_deg=120.0,
                        el_band_deg=(65.0, 135.0))
        cb = build_codebook(cfg, 16, 4)
        w = cb.weight_matrix
        for bid in (0, 17, 40, 63):
            a = array_response(cfg, cb[bid].azimuth, cb[bid].elevation)
            gains = np.abs(w @ a) ** 2
            assert int(np.argmax(gains)) == bid

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            build_codebook(UpaConfig(m_v=2, m_h=2), 0, 4)


class TestElementPattern:
    def test_boresight_gain(self):
        cfg = UpaConfig(m_v=1, m_h=1, element_gain_dbi=5.0)
        assert element_field_pattern(cfg, 0.0, math.pi / 2) == pytest.approx(5.0)

    def test_half_power_at_azimuth_35deg(self):
        # 12*(35/70)^2 = 3 dB down
        cfg = UpaConfig(m_v=1, m_h=1, element_gain_dbi=5.0)
        g = element_field_pattern(cfg, math.radians(35.0), math.pi / 2)
        assert g == pytest.approx(2.0, abs=1e-12)

    def test_front_to_back_floor(self):
        cfg = UpaConfig(m_v=1, m_h=1, element_gain_dbi=5.0)
        g = element_field_pattern(cfg, math.pi, math.pi / 2)
        assert g == pytest.approx(5.0 - 30.0)

    def test_elevation_rolloff(self):
        cfg = UpaConfig(m_v=1, m_h=1, element_gain_dbi=5.0)
        g = element_field_pattern(cfg, 0.0, math.pi / 2 + math.radians(45.0))
        assert g == pytest.approx(5.0 - 12 * (45 / 90) ** 2)


class TestTypes:
    def test_beam_rejects_unnormalized_weights(self):
        with pytest.raises(ValueError):
            Beam(1, 0.0, math.pi / 2, np.array([1.0, 1.0], dtype=complex))

    def test_upa_validation(self):
        with pytest.raises(ValueError):
            UpaConfig(m_v=0, m_h=4)
        with pytest.raises(ValueError):
            UpaConfig(m_v=2, m_h=2, element_spacing=0.0)
