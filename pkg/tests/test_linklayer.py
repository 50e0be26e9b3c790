import math

import numpy as np
import pytest

from beamsim.linklayer import (Association, LinkBudget, NrTiming, SnrSample,
                               beamformed_amplitude, effective_snr,
                               initial_access, interference, make_snr_sample,
                               rate_backup, rate_primary,
                               round_robin_schedule, t_sweep)


def scalar_bilinear(h, tx_w, rx_w):
    """Elementwise double loop, no matrix ops."""
    acc = 0j
    n_rx, n_tx = h.shape
    for u in range(n_rx):
        for s in range(n_tx):
            acc += rx_w[u] * h[u, s] * tx_w[s]
    return acc


class TestTiming:
    def test_paper_sweep_time_exact(self):
        assert t_sweep(64, 16) == 0.330

    def test_single_rx_beam(self):
        assert t_sweep(64, 1) == pytest.approx(0.030, abs=1e-15)

    def test_rejects_zero_counts(self):
        with pytest.raises(ValueError):
            t_sweep(64, 0)

    def test_closed_form_identity(self):
        tm = NrTiming()
        for n_tx, n_rx in ((64, 16), (16, 4), (8, 8), (1, 1)):
            want = tm.t_ss * (n_tx * n_rx / tm.l_ssb) + tm.t_ss / 2
            assert t_sweep(n_tx, n_rx, tm) == want

    def test_n_steps(self):
        assert NrTiming().n_steps == 200

    def test_validation(self):
        with pytest.raises(ValueError):
            NrTiming(dt=0.0)


class TestBudget:
    def test_full_band_noise(self):
        b = LinkBudget()
        want = -174.0 + 10 * math.log10(396e6) + 10.0
        assert b.noise_power_dbm == pytest.approx(want)
        assert b.noise_power_dbm == pytest.approx(-78.0, abs=0.1)

    def test_snr_sample_offset(self):
        b = LinkBudget()
        s = make_snr_sample(3, 1.0, rsrp_dbm=-80.0, budget=b)
        assert s.snr_db - s.rsrp_dbm == pytest.approx(122.0)


class TestEffectiveSnr:
    def test_unit_snr(self):
        b = LinkBudget()
        # |amp|^2 * P = noise power -> 0 dB
        amp2 = b.noise_power_mw / b.tx_power_mw
        h = np.array([[math.sqrt(amp2)]], dtype=complex)
        one = np.array([1.0 + 0j])
        assert effective_snr(h, one, one, b) == pytest.approx(0.0, abs=1e-12)

    def test_scale_homogeneity(self, rng):
        b = LinkBudget()
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        tx = rng.normal(size=4) + 1j * rng.normal(size=4)
        rx = rng.normal(size=4) + 1j * rng.normal(size=4)
        base = effective_snr(h, tx, rx, b)
        assert effective_snr(10 * h, tx, rx, b) == pytest.approx(base + 20.0)

    def test_matches_scalar_oracle(self):
        b = LinkBudget()
        r = np.random.default_rng(42)
        h = r.normal(size=(4, 4)) + 1j * r.normal(size=(4, 4))
        tx = r.normal(size=4) + 1j * r.normal(size=4)
        rx = r.normal(size=4) + 1j * r.normal(size=4)
        amp = scalar_bilinear(h, tx, rx)
        want = 10 * math.log10(abs(amp) ** 2 * b.tx_power_mw / b.noise_power_mw)
        assert effective_snr(h, tx, rx, b) == pytest.approx(want, abs=1e-9)

    def test_zero_channel_floor(self):
        b = LinkBudget()
        h = np.zeros((2, 2), dtype=complex)
        one = np.ones(2, dtype=complex)
        assert effective_snr(h, one, one, b) == -math.inf
        assert effective_snr(h, one, one, b, floor_db=-60.0) == -60.0


class TestInitialAccess:
    def test_two_bs_argmax(self):
        r = np.full((2, 2, 1), -90.0)
        r[0, 0, 0] = -60.0
        r[0, 1, 0] = -70.0
        r[1, 0, 0] = -65.0
        r[1, 1, 0] = -80.0
        a = initial_access(r, ue_id=5)
        assert (a.primary_bs, a.primary_tx_beam) == (0, 0)
        assert (a.secondary_bs, a.backup_tx_beam) == (1, 0)
        assert a.ue_id == 5

    def test_tie_breaks_lowest_triple(self):
        r = np.zeros((3, 2, 2))
        a = initial_access(r)
        assert (a.primary_bs, a.primary_tx_beam, a.primary_rx_beam) == (0, 0, 0)
        assert a.secondary_bs == 1

    def test_permutation_invariance(self, rng):
        r = rng.normal(size=(4, 8, 4))
        a = initial_access(r)
        # evaluating beams in any order gives the same winner
        best = np.unravel_index(np.argmax(r), r.shape)
        assert (a.primary_bs, a.primary_tx_beam, a.primary_rx_beam) == best

    def test_needs_two_bs(self):
        with pytest.raises(ValueError):
            initial_access(np.zeros((1, 4, 4)))

    def test_secondary_differs(self, rng):
        for _ in range(20):
            r = rng.normal(size=(3, 4, 2))
            a = initial_access(r)
            assert a.secondary_bs != a.primary_bs


class TestRates:
    def test_unit_identity(self):
        b = LinkBudget(bandwidth_hz=1.0, noise_psd_dbm_hz=0.0,
                       noise_figure_db=0.0)
        # SINR = 1 with BW/K = 1 gives exactly 1 bit/s
        a = Association(0, 0, 0, 0, 1, 0, 0, k_j=1)
        h = np.array([[math.sqrt(b.noise_power_mw / b.tx_power_mw)]],
                     dtype=complex)
        one = np.array([1.0 + 0j])
        assert rate_primary(h, a, one, one, 0.0, b) == pytest.approx(1.0)

    def test_zero_interference_reduces_to_snr_rate(self, rng):
        b = LinkBudget()
        a = Association(0, 0, 0, 0, 1, 0, 0, k_j=3)
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        one = np.ones(2, dtype=complex) / math.sqrt(2)
        r0 = rate_primary(h, a, one, one, 0.0, b)
        snr = 10 ** (effective_snr(h, one, one, b) / 10)
        want = b.bandwidth_hz / 3 * math.log2(1 + snr)
        assert r0 == pytest.approx(want, rel=1e-12)

    def test_doubling_share_halves_rate(self, rng):
        b = LinkBudget()
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        one = np.ones(2, dtype=complex) / math.sqrt(2)
        a1 = Association(0, 0, 0, 0, 1, 0, 0, k_j=2)
        a2 = Association(0, 0, 0, 0, 1, 0, 0, k_j=4)
        r1 = rate_primary(h, a1, one, one, 0.0, b)
        r2 = rate_primary(h, a2, one, one, 0.0, b)
        assert r1 == pytest.approx(2 * r2, rel=1e-12)

    def test_backup_mirrors_primary_formula(self, rng):
        b = LinkBudget()
        a = Association(0, 0, 0, 0, 1, 0, 0, k_j=2)
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        one = np.ones(2, dtype=complex) / math.sqrt(2)
        assert rate_backup(h, a, one, one, 0.0, b, k_secondary=2) == \
            pytest.approx(rate_primary(h, a, one, one, 0.0, b))

    def test_rate_monotone_in_interference(self, rng):
        b = LinkBudget()
        a = Association(0, 0, 0, 0, 1, 0, 0, k_j=1)
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        one = np.ones(2, dtype=complex) / math.sqrt(2)
        rates = [rate_primary(h, a, one, one, i_mw, b)
                 for i_mw in (0.0, 1e-9, 1e-6)]
        assert rates[0] > rates[1] > rates[2]


class TestInterference:
    def test_empty_sum(self):
        assert interference(np.ones(2, dtype=complex), [], LinkBudget()) == 0.0

    def test_single_interferer_matches_oracle(self, rng):
        b = LinkBudget()
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        tx = rng.normal(size=2) + 1j * rng.normal(size=2)
        rx = rng.normal(size=2) + 1j * rng.normal(size=2)
        want = abs(scalar_bilinear(h, tx, rx)) ** 2 * b.tx_power_mw
        assert interference(rx, [(h, tx)], b) == pytest.approx(want, rel=1e-12)

    def test_adding_terms_never_decreases(self, rng):
        b = LinkBudget()
        rx = rng.normal(size=2) + 1j * rng.normal(size=2)
        terms = []
        last = 0.0
        for _ in range(5):
            h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            tx = rng.normal(size=2) + 1j * rng.normal(size=2)
            terms.append((h, tx))
            cur = interference(rx, terms, b)
            assert cur >= last
            last = cur


class TestSchedule:
    def test_one_ue_per_bs_per_step(self, rng):
        ids = [np.array([0, 1, 2]), np.array([3]), np.array([], dtype=int)]
        s = round_robin_schedule(ids, 100, rng)
        assert s.shape == (3, 100)
        assert set(np.unique(s[0])) <= {0, 1, 2}
        assert np.all(s[1] == 3)
        assert np.all(s[2] == -1)

    def test_long_run_share(self):
        rng = np.random.default_rng(3)
        ids = [np.arange(20)]
        n = 20000
        s = round_robin_schedule(ids, n, rng)
        counts = np.bincount(s[0], minlength=20) / n
        assert np.all(np.abs(counts - 1 / 20) < 0.02)
