"""Incremental left-sided exponential kernel sums on an evaluation clock."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def kernel_sums(ts, te, r, tau, h_mu, h_sig, n_lags):
    """Kernel-weighted sums of returns evaluated at increasing instants ``tau``.

    A return ``r[i]`` over ``[ts[i], te[i]]`` enters at the first instant with
    ``te[i] <= tau`` and carries weight ``exp((ts[i] - tau) / h)``. Returns
    ``(s_mu, s_sq, s_cross)`` where ``s_cross[k, l-1]`` sums ``r[i] * r[i-l]``
    with the weight of the later return.
    """
    n = r.size
    m = tau.size
    s_mu = np.empty(m)
    s_sq = np.empty(m)
    s_cross = np.empty((m, n_lags))
    acc_mu = 0.0
    acc_sq = 0.0
    acc_cross = np.zeros(n_lags)
    j = 0
    prev = tau[0] if m > 0 else 0.0
    for k in range(m):
        t = tau[k]
        if k > 0:
            dm = math.exp(-(t - prev) / h_mu)
            ds = math.exp(-(t - prev) / h_sig)
            acc_mu *= dm
            acc_sq *= ds
            for l in range(n_lags):
                acc_cross[l] *= ds
        while j < n and te[j] <= t:
            rj = r[j]
            wm = math.exp((ts[j] - t) / h_mu)
            ws = math.exp((ts[j] - t) / h_sig)
            acc_mu += wm * rj
            acc_sq += ws * rj * rj
            for l in range(1, n_lags + 1):
                if j - l >= 0:
                    acc_cross[l - 1] += ws * rj * r[j - l]
            j += 1
        s_mu[k] = acc_mu
        s_sq[k] = acc_sq
        for l in range(n_lags):
            s_cross[k, l] = acc_cross[l]
        prev = t
    return s_mu, s_sq, s_cross


@njit(cache=True)
def unit_path_minima(z, start_index, h_mu, h_sig, n_lags, kernel_const, min_obs):
    """Session minimum of the statistic for each row of unit-variance 1-second
    returns ``z``; instants before ``start_index`` are ignored."""
    n_paths, n = z.shape
    out = np.empty(n_paths)
    root = math.sqrt(h_mu / kernel_const)
    dm = math.exp(-1.0 / h_mu)
    ds = math.exp(-1.0 / h_sig)
    wm_new = math.exp(-1.0 / h_mu)
    ws_new = math.exp(-1.0 / h_sig)
    win_mu = 3.0 * h_mu
    win_sig = 3.0 * h_sig
    cross = np.zeros(n_lags)
    for p in range(n_paths):
        acc_mu = 0.0
        acc_sq = 0.0
        for l in range(n_lags):
            cross[l] = 0.0
        best = np.inf
        for k in range(n):
            # instant k+1 sees returns 0..k, return k spans [k, k+1]
            acc_mu = acc_mu * dm + wm_new * z[p, k]
            acc_sq = acc_sq * ds + ws_new * z[p, k] * z[p, k]
            for l in range(1, n_lags + 1):
                cross[l - 1] *= ds
                if k - l >= 0:
                    cross[l - 1] += ws_new * z[p, k] * z[p, k - l]
            if k + 1 < start_index:
                continue
            t = k + 1.0
            n_mu = min(t, win_mu)
            if n_mu < min_obs:
                continue
            n_sig = min(t, win_sig)
            lags = min(n_lags, int(math.ceil(n_sig ** (1.0 / 3.0) - 1e-12)))
            var = acc_sq
            for l in range(1, lags + 1):
                var += 2.0 * (1.0 - l / (lags + 1.0)) * cross[l - 1]
            if var <= 0.0:
                var = acc_sq
            mass = 1.0 - math.exp(-t / h_sig)
            sig2 = var / h_sig / mass
            if sig2 <= 0.0:
                continue
            stat = root * (acc_mu / h_mu) / math.sqrt(sig2)
            if stat < best:
                best = stat
        out[p] = best
    return out
