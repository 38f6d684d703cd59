"""Three-step structural break detection.

Step I tests for the existence of breaks with an AR-sieve bootstrap of the
sup difference statistic.  Step II thresholds the per-component exceedance
curves to find candidate regions.  Step III localizes breaks inside those
regions by iterative peak extraction and attributes each break to the
spectral components that moved.  A data-driven window-selection rule and a
single orchestration entry point (`full_pipeline`) tie the steps together.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ar import ARModel, FitError, aic_order, autocovariances, residuals_and_cov, yule_walker, _simulate_batch
from .spectral import DifferenceGrid, _validate_window, d_grid, max_difference_statistic

__all__ = [
    "TestResult",
    "ThresholdField",
    "Localization",
    "WindowSelection",
    "BreakReport",
    "bootstrap_test",
    "threshold_field",
    "candidate_sets",
    "localize_breaks",
    "select_window",
    "full_pipeline",
    "DEFAULT_GAMMA",
]

# Exceedance scaling exponent recommended for detection; must stay in (0, 1/2).
DEFAULT_GAMMA = 0.49


@dataclass
class TestResult:
    """Outcome of the bootstrap existence test.

    ``bootstrap_sample`` holds the B replicate statistics in ascending
    order (None when the result was deserialized from a report).
    """

    statistic: float
    p_value: float
    reject: bool
    alpha: float
    B: int
    N: int
    bootstrap_sample: Optional[np.ndarray] = None
    model: Optional[ARModel] = None
    seed: object = None

    def to_dict(self) -> dict:
        return {
            "statistic": float(self.statistic),
            "pValue": float(self.p_value),
            "reject": bool(self.reject),
            "alpha": float(self.alpha),
            "B": int(self.B),
            "N": int(self.N),
        }


def _spawn_generators(seed, B):
    return [np.random.default_rng(c) for c in np.random.SeedSequence(seed).spawn(B)]


def _replicate_stats(model: ARModel, T: int, N: int, rngs) -> np.ndarray:
    sims = _simulate_batch(model, T, rngs)
    return np.array([max_difference_statistic(sims[b], N) for b in range(sims.shape[0])])


def _stats_chunk(args):
    model, T, N, children = args
    return _replicate_stats(model, T, N, [np.random.default_rng(c) for c in children])


def bootstrap_test(series, N, alpha, B, seed, p_order=None, workers=1) -> TestResult:
    """Step I: AR-sieve bootstrap test for the existence of breaks.

    The observed statistic is the sup (over split point, frequency, and
    component) of the cumulated local-periodogram difference with window
    N.  The null distribution is approximated by refitting nothing:
    a single AR(p) model is estimated on the full series (order chosen by
    Whittle AIC unless ``p_order`` is given), and B stationary replicates
    are simulated with Gaussian innovations drawn from the centered
    residual covariance.  Replicate r always consumes substream r of the
    seed, so results do not depend on ``workers``.

    Rejects when the observed statistic strictly exceeds the
    floor((1-alpha)B)-th smallest replicate statistic.
    """
    x = series.values
    T, d = x.shape
    _validate_window(N, T)
    if B < 1:
        raise ValueError("B must be a positive integer")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    statistic = max_difference_statistic(x, N)

    if p_order is None:
        p_hat = 0 if not np.any(x) else aic_order(series)[0]
    else:
        p_hat = int(p_order)
        if p_hat < 0 or p_hat >= T:
            raise ValueError("p_order must lie in [0, T)")
    fit = yule_walker(autocovariances(x, p_hat), p_hat)
    _, _, sigma_boot = residuals_and_cov(x, fit)
    sim_model = ARModel(fit.coeffs, sigma_boot)
    if not sim_model.is_stable():
        raise FitError("fitted autoregression is unstable; cannot bootstrap")

    children = np.random.SeedSequence(seed).spawn(B)
    workers = max(1, int(workers or 1))
    if workers == 1 or B == 1:
        boot = _replicate_stats(sim_model, T, N, [np.random.default_rng(c) for c in children])
    else:
        chunks = np.array_split(np.arange(B), min(workers, B))
        jobs = [(sim_model, T, N, [children[i] for i in idx]) for idx in chunks if idx.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            boot = np.concatenate(list(pool.map(_stats_chunk, jobs)))
    boot = np.sort(boot)

    p_value = (int(np.count_nonzero(boot >= statistic)) + 1) / (B + 1)
    m = max(1, int(math.floor((1.0 - alpha) * B + 1e-9)))
    reject = bool(statistic > boot[m - 1])
    return TestResult(
        statistic=float(statistic),
        p_value=float(p_value),
        reject=reject,
        alpha=float(alpha),
        B=int(B),
        N=int(N),
        bootstrap_sample=boot,
        model=sim_model,
        seed=seed,
    )


@dataclass
class ThresholdField:
    """Noise level M and hard threshold epsilon per grid point and component.

    ``m`` and ``epsilon`` have shape (num_v, d, d); the threshold is
    ``sqrt(2 M log(d(d+1)T / (2N)))`` entrywise.  Both are symmetric in
    (a, b) because M is a product of auto-spectra.
    """

    N: int
    T: int
    v_index: np.ndarray  # grid positions j, v = j / T
    m: np.ndarray
    epsilon: np.ndarray

    @property
    def dim(self) -> int:
        return self.m.shape[1]

    @property
    def v(self) -> np.ndarray:
        return self.v_index / self.T

    def row(self, v: float) -> int:
        j = int(np.floor(v * self.T + 1e-9))
        j = min(max(j, self.v_index[0]), self.v_index[-1])
        return j - self.v_index[0]


def threshold_field(series, N, gamma=DEFAULT_GAMMA) -> ThresholdField:
    """Step II thresholds from local noise estimates on length-2N blocks.

    For each grid point v the noise level of component (a, b) is

        M(v) = (1/N) sum_{k=1..N} P_a(v, pi k / N) P_b(v, pi k / N)

    where P is the diagonal of the periodogram of the 2N observations
    centered at floor(vT).  gamma is accepted for interface symmetry with
    the other Step II/III functions; the threshold itself does not use it.
    """
    x = series.values
    T, d = x.shape
    _validate_window(N, T)
    if not 0.0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 0.5)")
    windows = np.lib.stride_tricks.sliding_window_view(x, 2 * N, axis=0)  # (T-2N+1, d, 2N)
    J = np.fft.rfft(windows, axis=-1)
    # diagonal periodogram values at lambda_{k,2N} = pi k / N, k = 1..N
    P = (J.real**2 + J.imag**2)[:, :, 1 : N + 1] / (2.0 * np.pi * 2 * N)  # (numV, d, N)
    m = np.einsum("vak,vbk->vab", P, P) / N
    log_arg = d * (d + 1) * T / (2.0 * N)
    if log_arg <= 1.0:
        raise ValueError("threshold log argument must exceed 1; increase T or decrease N")
    eps = np.sqrt(2.0 * m * np.log(log_arg))
    v_index = np.arange(N, T - N + 1)
    return ThresholdField(N=N, T=T, v_index=v_index, m=m, epsilon=eps)


def _check_aligned(grid: DifferenceGrid, thresholds: ThresholdField):
    if grid.N != thresholds.N or grid.T != thresholds.T or grid.dim != thresholds.dim:
        raise ValueError("grid and thresholds were built with different (N, T, d)")
    if grid.v_index.shape != thresholds.v_index.shape:
        raise ValueError("grid and thresholds cover different v ranges")


def _exceedance(grid: DifferenceGrid, thresholds: ThresholdField, gamma: float):
    """Scaled sup curves and the strict exceedance mask, both (num_v, d, d)."""
    scaled = grid.N**gamma * np.abs(grid.prefix).max(axis=1)
    return scaled, scaled > thresholds.epsilon


def candidate_sets(grid: DifferenceGrid, thresholds: ThresholdField, gamma=DEFAULT_GAMMA):
    """Step II: maximal runs of consecutive grid points exceeding a threshold.

    A grid point v qualifies when ``N^gamma sup_omega |D(v, omega)|_{a,b}``
    strictly exceeds the threshold for at least one component (a, b).
    Returns a list of arrays of v values, one per maximal run, in order.
    """
    _check_aligned(grid, thresholds)
    _, exceed = _exceedance(grid, thresholds, gamma)
    hits = np.flatnonzero(exceed.any(axis=(1, 2)))
    if hits.size == 0:
        return []
    splits = np.flatnonzero(np.diff(hits) > 1) + 1
    return [grid.v_index[run] / grid.T for run in np.split(hits, splits)]


@dataclass
class Localization:
    """Step III output: sorted break locations with component attribution."""

    breaks: list  # rescaled locations, strictly increasing
    indices: list  # grid positions j = floor(vT)
    masks: list  # one (d, d) boolean array per break

    @property
    def k_hat(self) -> int:
        return len(self.breaks)


def localize_breaks(grid: DifferenceGrid, thresholds: ThresholdField, gamma=DEFAULT_GAMMA) -> Localization:
    """Step III: iterative peak extraction over the exceeding grid points.

    Starting from all exceeding points, repeatedly select the point with
    the largest componentwise-max scaled statistic (ties to the smallest
    v), record it, and remove every point within N/T of it (closed
    interval).  Breaks are reported sorted; each carries the boolean mask
    of components whose curves exceeded their thresholds at that point.
    """
    _check_aligned(grid, thresholds)
    scaled, exceed = _exceedance(grid, thresholds, gamma)
    pool = exceed.any(axis=(1, 2))
    peak = scaled.max(axis=(1, 2))
    chosen = []
    while pool.any():
        i = int(np.argmax(np.where(pool, peak, -np.inf)))
        chosen.append(i)
        pool &= np.abs(grid.v_index - grid.v_index[i]) > grid.N
    chosen.sort()
    return Localization(
        breaks=[float(grid.v_index[i] / grid.T) for i in chosen],
        indices=[int(grid.v_index[i]) for i in chosen],
        masks=[exceed[i].copy() for i in chosen],
    )


@dataclass
class WindowSelection:
    """Chosen detection/test window lengths with per-window diagnostics."""

    n_detect: int
    n_test: int
    diagnostics: dict  # N -> estimated break count at that window


def _window_ladder(T: int):
    lo = int(math.ceil(0.5 * math.log2(T) - 1e-12))
    hi = int(math.floor(math.log2(T) * 5.0 / 6.0 + 1e-12))
    return [2**i for i in range(lo, hi + 1)]


def _select_from_counts(ladder, counts):
    """Pick N*: the largest N whose predecessor count does not exceed it."""
    i_star = None
    for i in range(1, len(ladder)):
        if counts[i - 1] <= counts[i]:
            i_star = i
    return ladder[i_star] if i_star is not None else ladder[-1]


def _test_window(n_detect: int, T: int) -> int:
    # bootstrap statistic needs 2N <= T; cap at the largest power of two <= T/2
    return min(2 * n_detect, 2 ** int(math.floor(math.log2(T / 2) + 1e-12)))


def select_window(series, gamma=DEFAULT_GAMMA) -> WindowSelection:
    """Data-driven window choice over the dyadic ladder sqrt(T)..T^(5/6).

    Runs Steps II-III at every candidate window N and records the break
    count.  The detection window N* is the largest ladder entry whose
    count did not drop from the previous entry; if the count strictly
    decreases along the whole ladder, the largest entry is used.  The
    test window is 2N*, capped so the two test blocks still fit in T.
    """
    T = series.length
    if T < 64:
        raise ValueError("window selection needs T >= 64")
    ladder = _window_ladder(T)
    if not ladder:
        raise ValueError("no candidate windows available for T=%d" % T)
    counts = []
    for N in ladder:
        grid = d_grid(series, N)
        thr = threshold_field(series, N, gamma)
        counts.append(localize_breaks(grid, thr, gamma).k_hat)
    n_star = _select_from_counts(ladder, counts)
    return WindowSelection(
        n_detect=n_star,
        n_test=_test_window(n_star, T),
        diagnostics={int(n): int(k) for n, k in zip(ladder, counts)},
    )


def _plain(value):
    """Recursively convert numpy scalars/arrays to built-in Python types."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


@dataclass
class BreakReport:
    """Complete detection report: test outcome, breaks, curves, candidates.

    ``breaks`` holds one dict per detected break with keys ``b`` (rescaled
    location), ``index`` (sample index floor(bT)) and ``components`` (d x d
    boolean attribution mask).  ``curves`` holds one dict per ordered
    component pair with the scaled sup curve and its threshold along the
    grid.  ``candidates`` lists the [vStart, vEnd] extent of each Step II
    run.  Serialization is canonical: identical reports produce identical
    JSON bytes.
    """

    test: TestResult
    tuning: dict
    breaks: list = field(default_factory=list)
    curves: list = field(default_factory=list)
    candidates: list = field(default_factory=list)

    @property
    def k_hat(self) -> int:
        return len(self.breaks)

    @property
    def break_locations(self) -> list:
        return [entry["b"] for entry in self.breaks]

    def to_dict(self) -> dict:
        return _plain(
            {
                "test": self.test.to_dict(),
                "tuning": self.tuning,
                "breaks": self.breaks,
                "curves": self.curves,
                "candidates": self.candidates,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "BreakReport":
        t = data["test"]
        test = TestResult(
            statistic=float(t["statistic"]),
            p_value=float(t["pValue"]),
            reject=bool(t["reject"]),
            alpha=float(t["alpha"]),
            B=int(t["B"]),
            N=int(t["N"]),
            seed=data.get("tuning", {}).get("seed"),
        )
        return cls(
            test=test,
            tuning=dict(data.get("tuning", {})),
            breaks=[dict(b) for b in data.get("breaks", [])],
            curves=[dict(c) for c in data.get("curves", [])],
            candidates=[list(c) for c in data.get("candidates", [])],
        )

    @classmethod
    def from_json(cls, text: str) -> "BreakReport":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, BreakReport) and self.to_dict() == other.to_dict()


def _curves_payload(grid: DifferenceGrid, thresholds: ThresholdField, gamma: float):
    scaled, _ = _exceedance(grid, thresholds, gamma)
    v = [float(x) for x in grid.v]
    d = grid.dim
    curves = []
    for a in range(d):
        for b in range(d):
            curves.append(
                {
                    "component": "%d,%d" % (a + 1, b + 1),
                    "v": v,
                    "value": [float(x) for x in scaled[:, a, b]],
                    "threshold": [float(x) for x in thresholds.epsilon[:, a, b]],
                }
            )
    return curves


def full_pipeline(series, alpha, B, gamma=DEFAULT_GAMMA, seed=None, n_detect=None, p_order=None, workers=1) -> BreakReport:
    """Run the whole procedure and assemble a BreakReport.

    Window lengths come from `select_window` unless ``n_detect`` is given
    explicitly (the test window is then the capped doubling of it).  The
    existence test always runs; localization results are attached only
    when it rejects, but exceedance curves and Step II candidate runs are
    reported either way.  Deterministic given (series, parameters, seed).
    """
    x = series.values
    if x.shape[0] < 2:
        raise ValueError("series too short")
    stds = x.std(axis=0)
    if np.any(stds == 0):
        bad = int(np.flatnonzero(stds == 0)[0])
        raise ValueError("column %d has zero variance; detection is undefined on degenerate input" % bad)

    if n_detect is None:
        sel = select_window(series, gamma)
    else:
        n_det = int(n_detect)
        _validate_window(n_det, series.length)
        sel = WindowSelection(n_detect=n_det, n_test=_test_window(n_det, series.length), diagnostics={})

    test = bootstrap_test(series, sel.n_test, alpha, B, seed, p_order=p_order, workers=workers)
    grid = d_grid(series, sel.n_detect)
    thr = threshold_field(series, sel.n_detect, gamma)

    breaks = []
    if test.reject:
        loc = localize_breaks(grid, thr, gamma)
        breaks = [
            {"b": loc.breaks[i], "index": loc.indices[i], "components": loc.masks[i].tolist()}
            for i in range(loc.k_hat)
        ]
    runs = candidate_sets(grid, thr, gamma)
    tuning = {
        "gamma": float(gamma),
        "N_detect": int(sel.n_detect),
        "N_test": int(sel.n_test),
        "p": int(test.model.order) if test.model is not None else None,
        "seed": _plain(seed),
    }
    return BreakReport(
        test=test,
        tuning=tuning,
        breaks=breaks,
        curves=_curves_payload(grid, thr, gamma),
        candidates=[[float(run[0]), float(run[-1])] for run in runs],
    )
