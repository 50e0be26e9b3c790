"""Compiled extension vs pure-numpy kernel agreement."""

import numpy as np
import pytest

from beamsim import _kernels_py
from beamsim.kernels import HAVE_COMPILED

if HAVE_COMPILED:
    from beamsim import _kernels
else:  # pragma: no cover - build without the extension
    _kernels = None

pytestmark = pytest.mark.skipif(not HAVE_COMPILED,
                                reason="compiled kernels not built")

LAM = 299792458.0 / 28e9


def random_geometry(rng, n, near_fraction=0.5):
    tx = rng.uniform([-25, -20, 0.5], [25, 20, 3.0], (n, 3))
    rx = rng.uniform([-25, -20, 0.5], [25, 20, 3.0], (n, 3))
    n_near = int(n * near_fraction)
    frac = rng.uniform(size=(n_near, 1))
    near_centers = tx[:n_near] + frac * (rx[:n_near] - tx[:n_near])
    center = rng.uniform([-25, -20, 1.5], [25, 20, 1.5], 3)
    return tx, rx, near_centers, center


def test_los_agreement(rng):
    for _ in range(5):
        tx, rx, near, center = random_geometry(rng, 4000)
        for c in (center, *(tuple(row) for row in near[:3])):
            c = np.asarray(c, dtype=float)
            c[2] = 1.5
            a = _kernels.blockage_loss_los(tx, rx, c, 2.0, 3.0, LAM)
            b = _kernels_py.blockage_loss_los(tx, rx, c, 2.0, 3.0, LAM)
            np.testing.assert_allclose(a, b, atol=1e-12)


def test_nlos_agreement(rng):
    rx = rng.uniform([-25, -20, 0.5], [25, 20, 1.5], (4000, 3))
    dirs = rng.normal(size=(4000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for x in (-10.0, 0.0, 10.0):
        c = np.array([x, 0.0, 1.5])
        a = _kernels.blockage_loss_nlos(rx, dirs, c, 2.0, 3.0, LAM)
        b = _kernels_py.blockage_loss_nlos(rx, dirs, c, 2.0, 3.0, LAM)
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_gt_agreement(rng):
    tx, rx, _, _ = random_geometry(rng, 6000)
    for x in np.linspace(-20, 20, 7):
        c = np.array([x, 0.0, 1.5])
        a = _kernels.gt_intersect(tx, rx, c, 2.0, 3.0)
        b = _kernels_py.gt_intersect(tx, rx, c, 2.0, 3.0)
        np.testing.assert_array_equal(a, b)
