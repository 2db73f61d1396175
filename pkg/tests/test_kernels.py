"""Backend parity and dispatch for the numeric kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from iqsig import kernels
from iqsig._accel import NUMBA_AVAILABLE

pytestmark = pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")


def _random_mixture_params(rng, n_comp):
    w = rng.uniform(0.2, 1.0, n_comp)
    w /= w.sum()
    mu = rng.uniform(0.5, 1.0, n_comp)
    sig = rng.uniform(0.01, 0.05, n_comp)
    return w, mu, sig


@pytest.mark.parametrize("n_comp", [1, 3, 5])
def test_pdf_cdf_parity(n_comp):
    rng = np.random.default_rng(n_comp)
    w, mu, sig = _random_mixture_params(rng, n_comp)
    x = rng.uniform(0.2, 1.3, 500)
    for name in ("mixture_pdf", "mixture_cdf"):
        a = kernels.NUMPY_IMPLS[name](x, w, mu, sig)
        b = kernels.NUMBA_IMPLS[name](x, w, mu, sig)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_mean_logpdf_parity():
    rng = np.random.default_rng(5)
    w, mu, sig = _random_mixture_params(rng, 4)
    values = rng.uniform(0.5, 1.0, 64)
    a = kernels.NUMPY_IMPLS["mean_logpdf"](values, w, mu, sig)
    b = kernels.NUMBA_IMPLS["mean_logpdf"](values, w, mu, sig)
    assert a == pytest.approx(b, rel=1e-12)


def test_batch_mean_logpdf_parity():
    rng = np.random.default_rng(6)
    parts = [_random_mixture_params(rng, k) for k in (1, 2, 4)]
    w = np.concatenate([p[0] for p in parts])
    mu = np.concatenate([p[1] for p in parts])
    sig = np.concatenate([p[2] for p in parts])
    offsets = np.cumsum([0, 1, 2, 4]).astype(np.int64)
    vmat = rng.uniform(0.5, 1.0, (7, 50))
    a = kernels.NUMPY_IMPLS["batch_mean_logpdf"](vmat, w, mu, sig, offsets)
    b = kernels.NUMBA_IMPLS["batch_mean_logpdf"](vmat, w, mu, sig, offsets)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_ks_stats_parity():
    rng = np.random.default_rng(7)
    wa, ma, sa = _random_mixture_params(rng, 3)
    wb, mb, sb = _random_mixture_params(rng, 2)
    grid = np.linspace(0.2, 1.3, 10_001)
    a = kernels.NUMPY_IMPLS["ks_grid_stat"](grid, wa, ma, sa, wb, mb, sb)
    b = kernels.NUMBA_IMPLS["ks_grid_stat"](grid, wa, ma, sa, wb, mb, sb)
    assert a == pytest.approx(b, rel=1e-12)

    values = np.sort(rng.uniform(0.5, 1.0, 50))
    a = kernels.NUMPY_IMPLS["ks_sorted_stat"](values, wa, ma, sa)
    b = kernels.NUMBA_IMPLS["ks_sorted_stat"](values, wa, ma, sa)
    assert a == pytest.approx(b, rel=1e-12)


def _backend_in_subprocess(env_value: str) -> str:
    env = dict(os.environ)
    if env_value:
        env["IQSIG_BACKEND"] = env_value
    else:
        env.pop("IQSIG_BACKEND", None)
    out = subprocess.run(
        [sys.executable, "-c", "from iqsig import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    return out.stdout.strip()


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("numpy") == "numpy"
    assert _backend_in_subprocess("numba") == "numba"
    assert _backend_in_subprocess("auto") == "numba"


def test_env_flag_rejects_unknown_value():
    env = dict(os.environ, IQSIG_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import iqsig.kernels"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "IQSIG_BACKEND" in out.stderr


def test_warmup_runs():
    kernels.warmup()
