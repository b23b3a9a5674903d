"""Equivalence of the jitted and numpy kernel implementations."""

import subprocess
import sys

import numpy as np

from ris_nfloc import kernels
from ris_nfloc.accel import NUMBA_ENABLED


def test_dense_transform_variants_agree():
    rng = np.random.default_rng(0)
    for n, l, q in ((16, 4, 2), (48, 8, 4), (33, 5, 3)):
        s = rng.standard_normal((n, l)) + 1j * rng.standard_normal((n, l))
        a = kernels.idft2_dense_numpy(s, q * n)
        if NUMBA_ENABLED:
            b = kernels.idft2_dense_numba(s, q * n)
            assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < 1e-12
        c = kernels.idft2_dense(s, q * n)
        assert np.max(np.abs(a - c)) / np.max(np.abs(a)) < 1e-12


def test_peak_mask_variants_agree():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mag = np.abs(rng.standard_normal(rng.integers(8, 300)))
        thr = float(rng.uniform(0, 1.5))
        a = kernels.column_peak_mask_numpy(mag, thr)
        if NUMBA_ENABLED:
            b = kernels.column_peak_mask_numba(mag, thr)
            assert np.array_equal(a, b)
        assert np.array_equal(kernels.column_peak_mask(mag, thr), a)


def test_peak_mask_plateau_resolves_left():
    mag = np.array([0.0, 1.0, 1.0, 0.0, 2.0, 0.5])
    mask = kernels.column_peak_mask_numpy(mag, 0.0)
    assert list(np.nonzero(mask)[0]) == [1, 4]


def test_peak_mask_cyclic_boundary():
    mag = np.array([3.0, 1.0, 0.5, 1.0])  # peak at index 0 via wraparound
    mask = kernels.column_peak_mask_numpy(mag, 0.0)
    assert list(np.nonzero(mask)[0]) == [0]


def test_env_flag_disables_numba():
    code = (
        "import os; os.environ['RIS_NFLOC_NO_NUMBA']='1';"
        "from ris_nfloc import accel; print(accel.NUMBA_ENABLED)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "False"
