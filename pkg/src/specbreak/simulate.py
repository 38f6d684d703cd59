"""Simulation of piecewise stationary multivariate linear processes.

A process is built from independent standard Gaussian innovations ``Z_t``
(d-dimensional) and a finite moving-average filter whose coefficient
matrices switch at a fixed set of rescaled break times.  On the segment
between two consecutive breaks the process is stationary; across a break
the autocovariance structure jumps.  This module provides the model
container, exact simulators for moving-average and order-one
autoregressive models, and the induced time-varying spectral density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "PiecewiseLinearModel",
    "SpectralDensity",
    "simulate",
    "simulate_var1",
    "spectral_density",
    "segment_ranges",
]


def _as_matrix(m, d=None):
    """Coerce a scalar / nested list / array to a (d, d) float matrix."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("coefficient matrices must be square, got shape %s" % (a.shape,))
    if d is not None and a.shape[0] != d:
        raise ValueError("dimension mismatch between segments: %d vs %d" % (a.shape[0], d))
    return a


def parse_break(b) -> float:
    """Parse a breakpoint given as a float, a Fraction, or a string like '1/4'."""
    if isinstance(b, str):
        return float(Fraction(b))
    return float(b)


@dataclass
class TimeSeries:
    """A finite multivariate time series.

    Parameters
    ----------
    values : ndarray of shape (T, d)
        One row per time point, one column per component.  A 1-d array is
        treated as a single-component series.
    centered : bool, optional
        True when each column has had its sample mean subtracted.  The
        flag is validated at construction: a centered series must have
        column means that vanish relative to the column scale.
    """

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, np.newaxis]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("values must be a (T, d) array with T, d >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series contains NaN or infinite entries")
        if self.centered:
            scale = np.max(np.abs(v), axis=0)
            if np.any(np.abs(v.mean(axis=0)) > 1e-12 * np.maximum(scale, 1e-300)):
                raise ValueError("centered=True but column means are not zero")
        self.values = v

    @property
    def length(self) -> int:
        """Number of time points T."""
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        """Number of components d."""
        return self.values.shape[1]


@dataclass
class PiecewiseLinearModel:
    """Piecewise moving-average model with Gaussian innovations.

    The process on segment ``j`` is ``X_t = sum_l Psi_l^(j) Z_{t-l}`` with a
    finite list of d x d coefficient matrices per segment.  Segment ``j``
    is active for rescaled times ``u`` with ``b_j < u <= b_{j+1}`` where
    ``b_0 = 0`` and ``b_{K+1} = 1`` implicitly.

    Parameters
    ----------
    segments : sequence of coefficient sequences
        ``segments[j][l]`` is the lag-``l`` matrix of segment ``j``.
        Scalars are accepted for one-dimensional models.
    breakpoints : sequence of float or str, optional
        Strictly increasing rescaled break times in the open interval
        (0, 1); one fewer than the number of segments.  Strings such as
        ``"1/4"`` are parsed as exact fractions.
    name : str, optional
        Free-form label carried through to reports.
    """

    segments: Sequence[Sequence[np.ndarray]]
    breakpoints: Sequence = ()
    name: str = ""

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("model needs at least one segment")
        first = _as_matrix(self.segments[0][0])
        d = first.shape[0]
        segs = []
        for seg in self.segments:
            if len(seg) == 0:
                raise ValueError("every segment needs at least one coefficient matrix")
            segs.append(tuple(_as_matrix(m, d) for m in seg))
        self.segments = tuple(segs)
        breaks = tuple(parse_break(b) for b in self.breakpoints)
        if len(breaks) != len(self.segments) - 1:
            raise ValueError(
                "expected %d breakpoints for %d segments, got %d"
                % (len(self.segments) - 1, len(self.segments), len(breaks))
            )
        if any(not (0.0 < b < 1.0) for b in breaks):
            raise ValueError("breakpoints must lie strictly inside (0, 1)")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        self.breakpoints = breaks
        for j in range(len(self.segments) - 1):
            if not _segments_differ(self.segments[j], self.segments[j + 1]):
                raise ValueError(
                    "segments %d and %d are identical; merge them instead" % (j, j + 1)
                )

    @property
    def dim(self) -> int:
        return self.segments[0][0].shape[0]

    @property
    def n_breaks(self) -> int:
        return len(self.breakpoints)

    @property
    def max_lag(self) -> int:
        """Largest moving-average lag over all segments."""
        return max(len(seg) - 1 for seg in self.segments)

    def segment_index(self, u: float) -> int:
        """Index j of the segment containing rescaled time u in (b_j, b_{j+1}]."""
        if not 0.0 <= u <= 1.0:
            raise ValueError("rescaled time must lie in [0, 1]")
        return int(np.searchsorted(np.asarray(self.breakpoints), u, side="left"))


def _segments_differ(seg_a, seg_b) -> bool:
    d = seg_a[0].shape[0]
    zero = np.zeros((d, d))
    for l in range(max(len(seg_a), len(seg_b))):
        a = seg_a[l] if l < len(seg_a) else zero
        b = seg_b[l] if l < len(seg_b) else zero
        if not np.array_equal(a, b):
            return True
    return False


def segment_ranges(breakpoints: Sequence[float], T: int):
    """1-based inclusive time ranges [t0, t1] covered by each segment.

    Time t belongs to segment j exactly when
    ``floor(b_j T) < t <= floor(b_{j+1} T)``.  Ranges may be empty for
    very short series.
    """
    edges = [0] + [int(np.floor(b * T)) for b in breakpoints] + [T]
    return [(edges[j] + 1, edges[j + 1]) for j in range(len(edges) - 1)]


def simulate(model: PiecewiseLinearModel, T: int, seed) -> TimeSeries:
    """Draw one realization of length ``T`` from a piecewise MA model.

    Enough pre-sample innovations are generated that the first observation
    already uses a full coefficient window, so no startup transient exists.

    Parameters
    ----------
    model : PiecewiseLinearModel
    T : int
        Series length; must satisfy ``T >= 2 * model.max_lag``.
    seed : int
        Seed for the innovation stream.  Identical arguments produce a
        bit-identical series.

    Returns
    -------
    TimeSeries
        Raw draw of a mean-zero process (``centered=False``).
    """
    d = model.dim
    l_max = model.max_lag
    if T < max(1, 2 * l_max):
        raise ValueError("T=%d too short for a model with maximum lag %d" % (T, l_max))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T + l_max, d))
    x = np.zeros((T, d))
    for j, (t0, t1) in enumerate(segment_ranges(model.breakpoints, T)):
        if t0 > t1:
            continue
        for l, psi in enumerate(model.segments[j]):
            # X_t += Psi_l Z_{t-l}; innovation Z_t sits at buffer row l_max + t - 1
            x[t0 - 1 : t1] += z[l_max + t0 - 1 - l : l_max + t1 - l] @ psi.T
    return TimeSeries(x, centered=False)


VAR1_BURN_IN = 510  # 500 + 10 * order, with order 1


def _spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def simulate_var1(phi, T: int, seed, breakpoints: Sequence = ()) -> TimeSeries:
    """Simulate ``X_t = Phi(t/T) X_{t-1} + Z_t`` with segment switching.

    Parameters
    ----------
    phi : matrix or sequence of matrices
        A single d x d coefficient matrix, or one matrix per segment when
        ``breakpoints`` is nonempty.
    T : int
        Series length.
    seed : int
        Innovation stream seed.
    breakpoints : sequence, optional
        Rescaled break times; segment membership follows the same
        convention as :class:`PiecewiseLinearModel`.

    Returns
    -------
    TimeSeries

    Notes
    -----
    The recursion is started at zero and run through a burn-in of 510
    steps under the first segment's matrix before the first retained
    sample, so the output is approximately stationary within its first
    segment.  Every segment matrix must have spectral radius below one.
    """
    breaks = tuple(parse_break(b) for b in breakpoints)
    mats = phi
    if isinstance(mats, np.ndarray) and mats.ndim <= 2:
        mats = [mats]
    elif np.isscalar(mats):
        mats = [mats]
    mats = [_as_matrix(m) for m in mats]
    d = mats[0].shape[0]
    mats = [_as_matrix(m, d) for m in mats]
    if len(mats) != len(breaks) + 1:
        raise ValueError(
            "expected %d coefficient matrices for %d breakpoints, got %d"
            % (len(breaks) + 1, len(breaks), len(mats))
        )
    if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])) or any(
        not (0.0 < b < 1.0) for b in breaks
    ):
        raise ValueError("breakpoints must be strictly increasing inside (0, 1)")
    for j, m in enumerate(mats):
        r = _spectral_radius(m)
        if r >= 1.0:
            raise ValueError("segment %d autoregressive matrix is unstable (spectral radius %.3f)" % (j, r))

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((VAR1_BURN_IN + T, d))
    state = np.zeros(d)
    for i in range(VAR1_BURN_IN):
        state = mats[0] @ state + z[i]
    x = np.empty((T, d))
    seg = np.zeros(T, dtype=int)
    for j, (t0, t1) in enumerate(segment_ranges(breaks, T)):
        seg[t0 - 1 : t1] = j
    for t in range(T):
        state = mats[seg[t]] @ state + z[VAR1_BURN_IN + t]
        x[t] = state
    return TimeSeries(x, centered=False)


class SpectralDensity:
    """Time-varying spectral density of a piecewise MA model.

    Calling the object with ``(u, lam)`` returns the d x d complex
    Hermitian matrix ``f(u, lam)``; the value is piecewise constant in
    ``u`` with jumps only at the model's breakpoints.  ``segment_value``
    evaluates one segment directly.
    """

    def __init__(self, model: PiecewiseLinearModel):
        self._model = model

    @property
    def dim(self) -> int:
        return self._model.dim

    def segment_value(self, j: int, lam: float) -> np.ndarray:
        """f_j(lam) = C(lam) C(lam)^H / (2 pi) with C(lam) = sum_l Psi_l e^{-i lam l}."""
        seg = self._model.segments[j]
        d = self._model.dim
        c = np.zeros((d, d), dtype=complex)
        for l, psi in enumerate(seg):
            c += psi * np.exp(-1j * lam * l)
        return c @ c.conj().T / (2.0 * np.pi)

    def __call__(self, u: float, lam: float) -> np.ndarray:
        return self.segment_value(self._model.segment_index(u), lam)


def spectral_density(model: PiecewiseLinearModel) -> SpectralDensity:
    """Return the evaluator ``(u, lam) -> f(u, lam)`` for a piecewise MA model.

    The matrix is Hermitian positive semidefinite by construction since it
    is a scaled outer product of the transfer function.
    """
    return SpectralDensity(model)
