"""Numeric kernels for mixture density/CDF evaluation and KS statistics.

Every kernel exists twice: a vectorized numpy implementation and a jitted
loop for numba. ``_accel.BACKEND`` picks which set backs the public names;
both sets stay importable (see ``NUMPY_IMPLS`` / ``NUMBA_IMPLS``) so they
can be compared and benchmarked against each other.

All kernels take contiguous float64 arrays. Mixture parameters are passed
as parallel ``weights/means/stds`` arrays; the batch scorer takes several
mixtures flattened back to back with a ``K+1`` prefix-offset index.
"""

import math

import numpy as np
from scipy.special import erf as _sp_erf

from ._accel import BACKEND, NUMBA_AVAILABLE

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _mixture_pdf_np(x, weights, means, stds):
    z = (x[:, None] - means[None, :]) / stds[None, :]
    return (weights[None, :] * np.exp(-0.5 * z * z) / (stds[None, :] * _SQRT_2PI)).sum(axis=1)


def _mixture_cdf_np(x, weights, means, stds):
    z = (x[:, None] - means[None, :]) / (stds[None, :] * _SQRT2)
    return (weights[None, :] * 0.5 * (1.0 + _sp_erf(z))).sum(axis=1)


def _mean_logpdf_np(values, weights, means, stds):
    z = (values[:, None] - means[None, :]) / stds[None, :]
    comp = np.log(weights[None, :]) - np.log(stds[None, :]) - _LOG_SQRT_2PI - 0.5 * z * z
    m = comp.max(axis=1)
    return float(np.mean(m + np.log(np.exp(comp - m[:, None]).sum(axis=1))))


def _batch_mean_logpdf_np(vmat, weights, means, stds, offsets):
    n_rows = vmat.shape[0]
    n_mix = len(offsets) - 1
    out = np.empty((n_rows, n_mix))
    for k in range(n_mix):
        a, b = offsets[k], offsets[k + 1]
        z = (vmat[:, :, None] - means[None, None, a:b]) / stds[None, None, a:b]
        comp = (np.log(weights[None, None, a:b]) - np.log(stds[None, None, a:b])
                - _LOG_SQRT_2PI - 0.5 * z * z)
        m = comp.max(axis=2)
        out[:, k] = (m + np.log(np.exp(comp - m[:, :, None]).sum(axis=2))).mean(axis=1)
    return out


def _ks_grid_stat_np(grid, wa, ma, sa, wb, mb, sb):
    diff = _mixture_cdf_np(grid, wa, ma, sa) - _mixture_cdf_np(grid, wb, mb, sb)
    return float(np.max(np.abs(diff)))


def _ks_sorted_stat_np(sorted_values, weights, means, stds):
    f = _mixture_cdf_np(sorted_values, weights, means, stds)
    n = sorted_values.shape[0]
    steps = np.arange(1.0, n + 1.0) / n
    return float(max(np.max(np.abs(f - steps)), np.max(np.abs(f - steps + 1.0 / n))))


NUMPY_IMPLS = {
    "mixture_pdf": _mixture_pdf_np,
    "mixture_cdf": _mixture_cdf_np,
    "mean_logpdf": _mean_logpdf_np,
    "batch_mean_logpdf": _batch_mean_logpdf_np,
    "ks_grid_stat": _ks_grid_stat_np,
    "ks_sorted_stat": _ks_sorted_stat_np,
}


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

NUMBA_IMPLS: dict = {}

if NUMBA_AVAILABLE:
    from numba import njit

    @njit(cache=True)
    def _mixture_pdf_nb(x, weights, means, stds):
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            acc = 0.0
            for c in range(weights.shape[0]):
                z = (x[i] - means[c]) / stds[c]
                acc += weights[c] * math.exp(-0.5 * z * z) / (stds[c] * _SQRT_2PI)
            out[i] = acc
        return out

    @njit(cache=True)
    def _mixture_cdf_nb(x, weights, means, stds):
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            acc = 0.0
            for c in range(weights.shape[0]):
                z = (x[i] - means[c]) / (stds[c] * _SQRT2)
                acc += weights[c] * 0.5 * (1.0 + math.erf(z))
            out[i] = acc
        return out

    @njit(cache=True)
    def _logpdf_one_nb(v, weights, means, stds, lo, hi):
        m = -1.0e300
        for c in range(lo, hi):
            z = (v - means[c]) / stds[c]
            t = math.log(weights[c]) - math.log(stds[c]) - _LOG_SQRT_2PI - 0.5 * z * z
            if t > m:
                m = t
        acc = 0.0
        for c in range(lo, hi):
            z = (v - means[c]) / stds[c]
            t = math.log(weights[c]) - math.log(stds[c]) - _LOG_SQRT_2PI - 0.5 * z * z
            acc += math.exp(t - m)
        return m + math.log(acc)

    @njit(cache=True)
    def _mean_logpdf_nb(values, weights, means, stds):
        acc = 0.0
        for i in range(values.shape[0]):
            acc += _logpdf_one_nb(values[i], weights, means, stds, 0, weights.shape[0])
        return acc / values.shape[0]

    @njit(cache=True)
    def _batch_mean_logpdf_nb(vmat, weights, means, stds, offsets):
        n_rows, n_vals = vmat.shape
        n_mix = offsets.shape[0] - 1
        out = np.empty((n_rows, n_mix))
        for r in range(n_rows):
            for k in range(n_mix):
                acc = 0.0
                for i in range(n_vals):
                    acc += _logpdf_one_nb(vmat[r, i], weights, means, stds,
                                          offsets[k], offsets[k + 1])
                out[r, k] = acc / n_vals
        return out

    @njit(cache=True)
    def _ks_grid_stat_nb(grid, wa, ma, sa, wb, mb, sb):
        best = 0.0
        for i in range(grid.shape[0]):
            fa = 0.0
            for c in range(wa.shape[0]):
                fa += wa[c] * 0.5 * (1.0 + math.erf((grid[i] - ma[c]) / (sa[c] * _SQRT2)))
            fb = 0.0
            for c in range(wb.shape[0]):
                fb += wb[c] * 0.5 * (1.0 + math.erf((grid[i] - mb[c]) / (sb[c] * _SQRT2)))
            d = abs(fa - fb)
            if d > best:
                best = d
        return best

    @njit(cache=True)
    def _ks_sorted_stat_nb(sorted_values, weights, means, stds):
        n = sorted_values.shape[0]
        best = 0.0
        for i in range(n):
            f = 0.0
            for c in range(weights.shape[0]):
                z = (sorted_values[i] - means[c]) / (stds[c] * _SQRT2)
                f += weights[c] * 0.5 * (1.0 + math.erf(z))
            hi = abs(f - (i + 1.0) / n)
            lo = abs(f - i / n)
            d = hi if hi > lo else lo
            if d > best:
                best = d
        return best

    NUMBA_IMPLS = {
        "mixture_pdf": _mixture_pdf_nb,
        "mixture_cdf": _mixture_cdf_nb,
        "mean_logpdf": _mean_logpdf_nb,
        "batch_mean_logpdf": _batch_mean_logpdf_nb,
        "ks_grid_stat": _ks_grid_stat_nb,
        "ks_sorted_stat": _ks_sorted_stat_nb,
    }


_ACTIVE = NUMBA_IMPLS if BACKEND == "numba" else NUMPY_IMPLS

mixture_pdf = _ACTIVE["mixture_pdf"]
mixture_cdf = _ACTIVE["mixture_cdf"]
mean_logpdf = _ACTIVE["mean_logpdf"]
batch_mean_logpdf = _ACTIVE["batch_mean_logpdf"]
ks_grid_stat = _ACTIVE["ks_grid_stat"]
ks_sorted_stat = _ACTIVE["ks_sorted_stat"]


def warmup() -> None:
    """Trigger JIT compilation so later calls are measured at steady state."""
    x = np.array([0.5, 0.75])
    w = np.array([1.0])
    mu = np.array([0.75])
    sig = np.array([0.05])
    offs = np.array([0, 1], dtype=np.int64)
    mixture_pdf(x, w, mu, sig)
    mixture_cdf(x, w, mu, sig)
    mean_logpdf(x, w, mu, sig)
    batch_mean_logpdf(x.reshape(1, 2), w, mu, sig, offs)
    ks_grid_stat(x, w, mu, sig, w, mu, sig)
    ks_sorted_stat(x, w, mu, sig)
