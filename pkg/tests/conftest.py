"""Shared helpers: exact-moment oracles and brute-force reference code.

The oracles here are deliberately written in the slowest, most literal way
possible (double sums, dense Lyapunov solves) so that the fast FFT/recursion
implementations in the package are checked against independent arithmetic.
"""

import numpy as np
import pytest
from scipy import linalg

from specbreak import TimeSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20260825)


def direct_periodogram(window, N):
    """O(N^2) double-sum periodogram of one (N, d) window.

    Returns the (N//2, d, d) array of matrices at frequencies 2 pi k / N,
    k = 1..N/2, evaluated without any FFT.
    """
    window = np.asarray(window, dtype=float)
    d = window.shape[1]
    out = np.empty((N // 2, d, d), dtype=complex)
    for k in range(1, N // 2 + 1):
        lam = 2.0 * np.pi * k / N
        J = np.zeros(d, dtype=complex)
        for s in range(N):
            J += window[s] * np.exp(-1j * lam * s)
        out[k - 1] = np.outer(J, J.conj()) / (2.0 * np.pi * N)
    return out


def padded_window(values, center, N):
    """The (N, d) window centered (1-based) at ``center`` with zero padding."""
    T, d = values.shape
    w = np.zeros((N, d))
    for s in range(N):
        t = center - N // 2 + 1 + s  # 1-based sample index
        if 1 <= t <= T:
            w[s] = values[t - 1]
    return w


def direct_difference_prefix(values, N):
    """Brute-force difference prefix sums over the full grid.

    Mirrors the definition: at grid point j = floor(vT), the left window
    holds samples j-N+1..j and the right window samples j+1..j+N (1-based),
    and P(v, k) = (1/N) sum_{kappa<=k} (I_right - I_left)(lambda_kappa).
    """
    values = np.asarray(values, dtype=float)
    T, d = values.shape
    grid = range(N, T - N + 1)
    out = np.zeros((len(grid), N // 2 + 1, d, d), dtype=complex)
    for i, j in enumerate(grid):
        left = direct_periodogram(padded_window(values, j - N // 2, N), N)
        right = direct_periodogram(padded_window(values, j + N // 2, N), N)
        for k in range(1, N // 2 + 1):
            out[i, k] = out[i, k - 1] + (right[k - 1] - left[k - 1]) / N
    return out


def exact_var_autocov(coeffs, sigma, h_max):
    """Population autocovariances of a stable VAR(p) via the companion form.

    Solves the discrete Lyapunov equation for the stacked state and reads
    off Gamma(0..h_max); exact up to the dense solver's precision.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 2:
        coeffs = coeffs[np.newaxis]
    p, d, _ = coeffs.shape
    comp = np.zeros((p * d, p * d))
    comp[:d] = np.concatenate(list(coeffs), axis=1)
    if p > 1:
        comp[d:, : (p - 1) * d] = np.eye((p - 1) * d)
    q = np.zeros((p * d, p * d))
    q[:d, :d] = sigma
    big = linalg.solve_discrete_lyapunov(comp, q)
    gammas = [big[:d, :d]]
    for h in range(1, h_max + 1):
        if h < p:
            gammas.append(big[:d, h * d : (h + 1) * d].copy())
        else:
            g = np.zeros((d, d))
            for j in range(p):
                g = g + coeffs[j] @ gammas[h - 1 - j]
            gammas.append(g)
    return np.array(gammas)


def series_from(values):
    return TimeSeries(np.asarray(values, dtype=float))
