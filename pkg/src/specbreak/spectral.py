"""Local periodograms, spectral difference statistics, and the limit kernel.

The central object is the difference process: at a rescaled time ``v`` and
frequency budget ``omega``, compare the periodogram of the ``N`` samples
right of ``v`` against the ``N`` samples left of ``v``, summed over the
first ``floor(omega N / 2)`` Fourier frequencies.  Away from a change in
the autocovariance structure the difference is small; near a change some
matrix entry escapes.  Everything here is deterministic given the inputs;
all heavy lifting is batched through numpy's FFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate

__all__ = [
    "LocalPeriodogram",
    "DifferenceGrid",
    "KernelSpec",
    "local_periodogram",
    "d_grid",
    "sup_statistic",
    "sup_over_omega",
    "sup_curve",
    "max_difference_statistic",
    "limit_kernel",
]


def _validate_window(N: int, T: int) -> None:
    if N != int(N) or N < 2 or N % 2 != 0:
        raise ValueError("window length N must be an even integer >= 2, got %r" % (N,))
    if 2 * N > T:
        raise ValueError("window length N=%d too large for T=%d (need 2N <= T)" % (N, T))


def _window_transforms(values: np.ndarray, N: int, starts=None) -> np.ndarray:
    """Discrete Fourier transforms of length-N windows of a (T, d) array.

    Returns an array of shape (nWindows, d, N//2 + 1); entry ``[i, a, k]``
    is ``sum_s values[start_i + s, a] exp(-2 pi i k s / N)``.  With
    ``starts=None`` every admissible start ``0..T-N`` is used.
    """
    if starts is None:
        w = sliding_window_view(values, N, axis=0)  # (T-N+1, d, N)
    else:
        w = values[np.asarray(starts)[:, None] + np.arange(N)].transpose(0, 2, 1)
    return np.fft.rfft(w, axis=-1)


@dataclass
class LocalPeriodogram:
    """Periodogram of the N samples centered at one time index.

    ``matrices[k - 1]`` is the d x d Hermitian rank-one matrix at Fourier
    frequency ``2 pi k / N`` for k = 1..N/2.
    """

    center: int
    N: int
    matrices: np.ndarray  # (N//2, d, d) complex

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def frequencies(self) -> np.ndarray:
        """Fourier frequencies 2 pi k / N for k = 1..N/2."""
        return 2.0 * np.pi * np.arange(1, self.N // 2 + 1) / self.N

    def at(self, k: int) -> np.ndarray:
        """Matrix at the k-th Fourier frequency, k in 1..N/2."""
        if not 1 <= k <= self.N // 2:
            raise ValueError("frequency index k must be in 1..N/2")
        return self.matrices[k - 1]


def local_periodogram(series, center: int, N: int) -> LocalPeriodogram:
    """Periodogram of the window ``center - N/2 + 1 .. center + N/2`` (1-based).

    Samples outside ``1..T`` are taken as zero, so windows may overhang the
    ends of the series.

    Parameters
    ----------
    series : TimeSeries
    center : int
        1-based center index of the window.
    N : int
        Even window length, at most the series length.
    """
    x = series.values
    T, d = x.shape
    if N != int(N) or N < 2 or N % 2 != 0 or N > T:
        raise ValueError("window length N must be even with 2 <= N <= T, got %r" % (N,))
    lo = int(center) - N // 2  # 0-based index of the first window sample
    w = np.zeros((N, d))
    src_lo, src_hi = max(lo, 0), min(lo + N, T)
    if src_lo < src_hi:
        w[src_lo - lo : src_hi - lo] = x[src_lo:src_hi]
    J = np.fft.rfft(w, axis=0)  # (N//2 + 1, d)
    mats = np.einsum("ka,kb->kab", J[1:], J[1:].conj()) / (2.0 * np.pi * N)
    return LocalPeriodogram(center=int(center), N=N, matrices=mats)


@dataclass
class DifferenceGrid:
    """Cumulative spectral differences on the grid ``floor(vT) = N .. T-N``.

    ``prefix[i, k]`` is the d x d matrix

        (1/N) sum_{kappa=1}^{k} ( I_right(lambda_kappa) - I_left(lambda_kappa) )

    for the i-th grid point, where the right window holds the N samples
    after ``floor(vT)`` and the left window the N samples up to and
    including it.  ``prefix[i, 0]`` is identically zero, so the difference
    statistic at any ``omega`` is the O(1) lookup ``prefix[i, floor(omega N / 2)]``.
    """

    N: int
    T: int
    v_index: np.ndarray  # (numV,) ints, floor(vT)
    prefix: np.ndarray  # (numV, N//2 + 1, d, d) complex

    @property
    def dim(self) -> int:
        return self.prefix.shape[2]

    @property
    def v(self) -> np.ndarray:
        """Grid points as rescaled times floor(vT) / T."""
        return self.v_index / self.T

    def row(self, v: float) -> np.ndarray:
        """All prefix sums at rescaled time v, clamped to the grid range."""
        j = int(np.floor(v * self.T + 1e-9))
        j = min(max(j, self.N), self.T - self.N)
        return self.prefix[j - self.N]

    def value(self, v: float, omega: float) -> np.ndarray:
        """The d x d difference statistic at (v, omega), boundary-clamped."""
        if not 0.0 <= omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        k = min(int(np.floor(omega * self.N / 2 + 1e-9)), self.N // 2)
        return self.row(v)[k]


def d_grid(series, N: int) -> DifferenceGrid:
    """Spectral difference prefix sums at every grid point.

    Parameters
    ----------
    series : TimeSeries
    N : int
        Even window length with ``2N <= T``.

    Notes
    -----
    All required window transforms are computed in one batched FFT.  When
    the grid is much smaller than the number of admissible windows (large
    ``N``), only the needed windows are transformed.
    """
    x = series.values
    T, d = x.shape
    _validate_window(N, T)
    num_v = T - 2 * N + 1
    if 2 * num_v < T - N + 1:
        starts = np.concatenate([np.arange(num_v), np.arange(N, N + num_v)])
        W = _window_transforms(x, N, starts)
        left, right = W[:num_v], W[num_v:]
    else:
        W = _window_transforms(x, N)
        left, right = W[:num_v], W[N : N + num_v]
    prod_r = np.einsum("vak,vbk->vkab", right, right.conj())
    prod_l = np.einsum("vak,vbk->vkab", left, left.conj())
    diff = (prod_r - prod_l) / (2.0 * np.pi * N * N)
    prefix = np.empty_like(diff)
    prefix[:, 0] = 0.0
    np.cumsum(diff[:, 1:], axis=1, out=prefix[:, 1:])
    return DifferenceGrid(N=N, T=T, v_index=np.arange(N, T - N + 1), prefix=prefix)


def sup_statistic(grid: DifferenceGrid) -> float:
    """Largest entrywise modulus of the difference process over the grid."""
    if grid.prefix.size == 0:
        raise ValueError("empty difference grid")
    return float(np.abs(grid.prefix).max())


def sup_over_omega(grid: DifferenceGrid, v: float, a: int, b: int) -> float:
    """sup over omega of |difference statistic| for one component at one v."""
    return float(np.abs(grid.row(v)[:, a, b]).max())


def sup_curve(grid: DifferenceGrid, a: int, b: int) -> np.ndarray:
    """sup over omega of |difference statistic| for one component, all grid v."""
    return np.abs(grid.prefix[:, :, a, b]).max(axis=1)


def max_difference_statistic(values: np.ndarray, N: int) -> float:
    """Sup statistic computed without materializing the full grid tensor.

    Equivalent to ``sup_statistic(d_grid(...))`` up to floating-point
    rounding, but holds only one component pair in memory at a time.  Used
    on every bootstrap replicate.
    """
    T, d = values.shape
    _validate_window(N, T)
    num_v = T - 2 * N + 1
    if 2 * num_v < T - N + 1:
        starts = np.concatenate([np.arange(num_v), np.arange(N, N + num_v)])
        W = _window_transforms(values, N, starts)
        left, right = W[:num_v], W[num_v:]
    else:
        W = _window_transforms(values, N)
        left, right = W[:num_v], W[N : N + num_v]
    scale = 2.0 * np.pi * N * N
    best = 0.0
    for a in range(d):
        for b in range(a, d):
            diff = right[:, a, 1:] * right[:, b, 1:].conj() - left[:, a, 1:] * left[:, b, 1:].conj()
            np.cumsum(diff, axis=1, out=diff)
            m = float(np.abs(diff).max()) / scale
            if m > best:
                best = m
    return best


@dataclass
class KernelSpec:
    """Inputs for one evaluation of the limiting covariance kernel.

    Parameters
    ----------
    f : callable
        Stationary spectral density; maps a frequency in [0, pi] to a
        d x d complex Hermitian matrix (a scalar return is accepted for
        d = 1).  Values at negative frequencies are obtained by entrywise
        conjugation.
    c : float
        Limit ratio T / N; at least 2.
    point1, point2 : tuple of float
        Evaluation points (v, omega), both coordinates in [0, 1].
    components : tuple of int
        Matrix entry indices (a1, b1, a2, b2), 0-based.
    """

    f: Callable[[float], np.ndarray]
    c: float
    point1: tuple
    point2: tuple
    components: tuple = (0, 0, 0, 0)

    def __post_init__(self):
        if self.c < 2:
            raise ValueError("ratio c must be at least 2")
        for v, w in (self.point1, self.point2):
            if not (0.0 <= v <= 1.0 and 0.0 <= w <= 1.0):
                raise ValueError("points must have v, omega in [0, 1]")
        if len(self.components) != 4:
            raise ValueError("components must be a 4-tuple (a1, b1, a2, b2)")


def limit_kernel(spec: KernelSpec) -> float:
    """Closed-form limiting covariance of the normalized difference process.

    Evaluates the covariance of the limit field between ``point1`` and
    ``point2`` for the requested matrix entries.  The kernel vanishes when
    the (boundary-clamped) v-distance reaches ``2/c``, is negative between
    ``1/c`` and ``2/c``, and positive below ``1/c``; the frequency part is
    an integral of products of spectral density entries over
    ``[0, min(omega1, omega2) pi]``, computed by adaptive quadrature.

    Returns the real part; for valid component choices the kernel of the
    real-valued limit field is real.
    """
    a1, b1, a2, b2 = spec.components
    c = float(spec.c)
    (v1, w1), (v2, w2) = spec.point1, spec.point2
    clamp = lambda v: min(max(v, 1.0 / c), 1.0 - 1.0 / c)
    dv = abs(clamp(v1) - clamp(v2))
    if dv >= 2.0 / c:
        return 0.0
    factor = -(2.0 - dv * c) if dv >= 1.0 / c else (2.0 - 3.0 * dv * c)
    upper = min(w1, w2) * np.pi
    if upper <= 0.0:
        return 0.0

    def density(lam: float) -> np.ndarray:
        return np.atleast_2d(np.asarray(spec.f(lam), dtype=complex))

    def rho(lam: float) -> complex:
        F = density(lam)
        # entries at -lam are conjugates of the entries at lam
        return F[a1, a2] * np.conj(F[b1, b2]) + F[a1, b2] * np.conj(F[b1, a2])

    re, _ = integrate.quad(lambda l: rho(l).real, 0.0, upper, epsabs=1e-12, epsrel=1e-10, limit=200)
    return factor * re / np.pi
