"""Monte Carlo studies: test level, power, localization, kernel validation.

Provides a small registry of built-in benchmark models, a TOML/JSON
experiment configuration loader, and four study drivers whose results
serialize to canonical JSON (wall-clock excluded by default so identical
configurations yield byte-identical output).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detector import DEFAULT_GAMMA, _plain, bootstrap_test, full_pipeline, select_window
from .simulate import PiecewiseLinearModel, parse_break, simulate, simulate_var1
from .spectral import KernelSpec, limit_kernel

__all__ = [
    "ConfigError",
    "ModelSpec",
    "ExperimentConfig",
    "McResult",
    "KernelStudyResult",
    "builtin_model",
    "model_registry",
    "run_level_study",
    "run_power_study",
    "run_localization_study",
    "run_kernel_study",
]

DEFAULT_B = 300


class ConfigError(ValueError):
    """Invalid experiment or model configuration."""


@dataclass
class ModelSpec:
    """A simulatable benchmark model: finite linear filter or switching AR.

    ``kind`` is "linear" (piecewise moving-average representation, exact)
    or "ar" (piecewise first-order autoregression, simulated by recursion
    with burn-in).
    """

    kind: str
    name: str = ""
    linear: Optional[PiecewiseLinearModel] = None
    ar_mats: Optional[list] = None
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in ("linear", "ar"):
            raise ConfigError("unknown model kind %r" % self.kind)
        if self.kind == "linear":
            if self.linear is None:
                raise ConfigError("linear model spec needs coefficient segments")
            self.breakpoints = tuple(self.linear.breakpoints)
        else:
            if not self.ar_mats:
                raise ConfigError("autoregressive model spec needs matrices")
            mats = [np.asarray(m, dtype=float) for m in self.ar_mats]
            d = mats[0].shape[0]
            for m in mats:
                if m.shape != (d, d):
                    raise ConfigError("autoregressive matrices must share one square shape")
                if float(np.max(np.abs(np.linalg.eigvals(m)))) >= 1.0:
                    raise ConfigError("autoregressive segment matrix is unstable")
            self.ar_mats = mats
            bks = tuple(float(b) for b in self.breakpoints)
            if len(mats) != len(bks) + 1:
                raise ConfigError("need one autoregressive matrix per segment")
            if any(not 0.0 < b < 1.0 for b in bks) or list(bks) != sorted(set(bks)):
                raise ConfigError("breakpoints must be strictly increasing in (0, 1)")
            self.breakpoints = bks

    @property
    def dim(self) -> int:
        return self.linear.dim if self.kind == "linear" else self.ar_mats[0].shape[0]

    @property
    def n_breaks(self) -> int:
        return len(self.breakpoints)

    def is_stationary(self) -> bool:
        return self.n_breaks == 0

    def simulate(self, T: int, seed):
        if self.kind == "linear":
            return simulate(self.linear, T, seed)
        return simulate_var1(self.ar_mats, T, seed, breakpoints=self.breakpoints)


def _sym2(diag_value, off):
    return np.array([[diag_value, off], [off, diag_value]], dtype=float)


def _tuple_param(params, key, default):
    value = params.get(key, default)
    if np.isscalar(value):
        value = (value,)
    return tuple(float(v) for v in value)


def _breaks_param(params, default):
    raw = params.get("breaks", default)
    return tuple(parse_break(b) for b in raw)


def builtin_model(model_id: str, **params) -> ModelSpec:
    """Construct one of the built-in benchmark models by identifier.

    Identifiers and their parameters (all optional, with defaults):

    - ``model-6.1``: stationary MA(1), ``theta`` (0.5); lag-1 matrix has
      ``theta`` on the diagonal and 0.2 off it.
    - ``model-6.2``: stationary AR(1), ``phi`` (0.5); same matrix shape.
    - ``model-6.3``: piecewise AR(1), ``phis`` ((0.5, -0.5)) and
      ``breaks`` ((1/2,)); off-diagonal 0.1.
    - ``model-6.4``: piecewise MA(1) with identity lag-0 term,
      ``thetas`` ((2.0, 0.5)) and ``breaks`` ((1/2,)); off-diagonal 0.1.
    - ``model-6.5``: piecewise rescaled noise, ``sigmas`` ((1.0, 2.0)) and
      ``breaks`` ((1/2,)); off-diagonal 0.2.
    - ``model-4.4``: four lag-0 segments (identity, diag(2,1), diag(2,2),
      [[sqrt 2, sqrt 2], [0, 2]]) with breaks (1/4, 1/2, 3/4); no
      parameters.
    """
    known = {"model-6.1", "model-6.2", "model-6.3", "model-6.4", "model-6.5", "model-4.4"}
    if model_id not in known:
        raise ConfigError("unknown model id %r (known: %s)" % (model_id, ", ".join(sorted(known))))
    try:
        if model_id == "model-6.1":
            theta = float(params.get("theta", 0.5))
            segs = [[np.eye(2), _sym2(theta, 0.2)]]
            return ModelSpec("linear", model_id, linear=PiecewiseLinearModel(segs, (), name=model_id))
        if model_id == "model-6.2":
            phi = float(params.get("phi", 0.5))
            return ModelSpec("ar", model_id, ar_mats=[_sym2(phi, 0.2)], breakpoints=())
        if model_id == "model-6.3":
            phis = _tuple_param(params, "phis", (0.5, -0.5))
            breaks = _breaks_param(params, ("1/2",) if len(phis) == 2 else ())
            return ModelSpec("ar", model_id, ar_mats=[_sym2(p, 0.1) for p in phis], breakpoints=breaks)
        if model_id == "model-6.4":
            thetas = _tuple_param(params, "thetas", (2.0, 0.5))
            breaks = _breaks_param(params, ("1/2",) if len(thetas) == 2 else ())
            segs = [[np.eye(2), _sym2(t, 0.1)] for t in thetas]
            return ModelSpec("linear", model_id, linear=PiecewiseLinearModel(segs, breaks, name=model_id))
        if model_id == "model-6.5":
            sigmas = _tuple_param(params, "sigmas", (1.0, 2.0))
            breaks = _breaks_param(params, ("1/2",) if len(sigmas) == 2 else ())
            segs = [[_sym2(s, 0.2)] for s in sigmas]
            return ModelSpec("linear", model_id, linear=PiecewiseLinearModel(segs, breaks, name=model_id))
        # model-4.4
        root2 = np.sqrt(2.0)
        segs = [
            [np.eye(2)],
            [np.diag([2.0, 1.0])],
            [np.diag([2.0, 2.0])],
            [np.array([[root2, root2], [0.0, 2.0]])],
        ]
        return ModelSpec("linear", model_id, linear=PiecewiseLinearModel(segs, (0.25, 0.5, 0.75), name=model_id))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def model_registry() -> tuple:
    """Identifiers accepted by `builtin_model`."""
    return ("model-6.1", "model-6.2", "model-6.3", "model-6.4", "model-6.5", "model-4.4")


def _custom_model(data: dict) -> ModelSpec:
    breaks = tuple(parse_break(b) for b in data.get("breakpoints", ()))
    if "segments" in data:
        segs = [[np.asarray(m, dtype=float) for m in seg] for seg in data["segments"]]
        try:
            return ModelSpec("linear", data.get("name", "custom"), linear=PiecewiseLinearModel(segs, breaks))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if "ar_matrices" in data:
        return ModelSpec("ar", data.get("name", "custom"), ar_mats=list(data["ar_matrices"]), breakpoints=breaks)
    raise ConfigError("custom model needs either 'segments' or 'ar_matrices'")


def _parse_model(entry, params: dict) -> ModelSpec:
    if isinstance(entry, ModelSpec):
        return entry
    if isinstance(entry, str):
        return builtin_model(entry, **params)
    if isinstance(entry, dict):
        return _custom_model(entry)
    raise ConfigError("model must be an id string, a table, or a ModelSpec")


@dataclass
class ExperimentConfig:
    """Configuration of one Monte Carlo study."""

    model: ModelSpec
    T: int
    runs: int
    study: str = "level"
    B: int = DEFAULT_B
    alpha: float = 0.05
    gamma: float = DEFAULT_GAMMA
    master_seed: int = 0
    workers: int = 1
    N: Optional[int] = None
    p: Optional[int] = None

    def __post_init__(self):
        if self.study not in ("level", "power", "localization"):
            raise ConfigError("study must be one of level, power, localization")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.T < 64:
            raise ConfigError("T must be at least 64")
        if self.B < 1:
            raise ConfigError("B must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if not 0.0 < self.gamma < 0.5:
            raise ConfigError("gamma must lie in (0, 0.5)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.N is not None and (self.N < 2 or self.N % 2 or 2 * self.N > self.T):
            raise ConfigError("N must be even with 2N <= T")
        if self.p is not None and self.p < 0:
            raise ConfigError("p must be nonnegative")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        model = _parse_model(data.get("model"), dict(data.get("params", {})))
        seed = data.get("masterSeed", data.get("seed", data.get("master_seed", 0)))
        try:
            return cls(
                model=model,
                T=int(data["T"]),
                runs=int(data["runs"]),
                study=str(data.get("study", "level")),
                B=int(data.get("B", DEFAULT_B)),
                alpha=float(data.get("alpha", 0.05)),
                gamma=float(data.get("gamma", DEFAULT_GAMMA)),
                master_seed=int(seed),
                workers=int(data.get("workers", 1)),
                N=None if data.get("N") is None else int(data["N"]),
                p=None if data.get("p") is None else int(data["p"]),
            )
        except KeyError as exc:
            raise ConfigError("missing required config key: %s" % exc) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_config_dict(path))

    def summary(self) -> dict:
        return {
            "study": self.study,
            "model": self.model.name or self.model.kind,
            "T": self.T,
            "runs": self.runs,
            "B": self.B,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "masterSeed": self.master_seed,
            "N": self.N,
            "p": self.p,
        }


def load_config_dict(path) -> dict:
    """Read a TOML or JSON configuration file into a dict."""
    text = open(path, "rb").read()
    name = str(path)
    if name.endswith(".json"):
        return json.loads(text.decode("utf-8"))
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(text.decode("utf-8"))
        except json.JSONDecodeError:
            raise ConfigError("config file %s is neither valid TOML nor JSON" % name)


@dataclass
class McResult:
    """Aggregated Monte Carlo output of a level/power/localization study."""

    study: str
    config: dict
    runs: int
    rejections: int
    k_table: dict = field(default_factory=dict)
    break_values: list = field(default_factory=list)
    per_run: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def rejection_frequency(self) -> float:
        return self.rejections / self.runs

    @property
    def stderr(self) -> float:
        p = self.rejection_frequency
        return float(np.sqrt(p * (1.0 - p) / self.runs))

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "study": self.study,
            "config": self.config,
            "runs": self.runs,
            "rejections": self.rejections,
            "rejectionFrequency": self.rejection_frequency,
            "monteCarloStdErr": self.stderr,
            "kTable": {str(k): self.k_table[k] for k in sorted(self.k_table)},
            "breakValues": list(self.break_values),
            "perRun": self.per_run,
        }
        if include_timing:
            out["wallClockSeconds"] = self.wall_clock
        return _plain(out)

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), indent=2)


def _run_seeds(master_seed, runs):
    """Two independent integer seeds (simulation, test) per run index."""
    out = []
    for child in np.random.SeedSequence(master_seed).spawn(runs):
        sim_seed, test_seed = (int(s) for s in child.generate_state(2, np.uint64))
        out.append((sim_seed, test_seed))
    return out


def _level_one(args):
    config, index, sim_seed, test_seed = args
    series = config.model.simulate(config.T, sim_seed)
    n_test = config.N if config.N is not None else select_window(series, config.gamma).n_test
    test = bootstrap_test(series, n_test, config.alpha, config.B, test_seed, p_order=config.p)
    return {
        "run": index,
        "simSeed": sim_seed,
        "testSeed": test_seed,
        "N": test.N,
        "p": test.model.order,
        "statistic": test.statistic,
        "pValue": test.p_value,
        "reject": test.reject,
    }


def _detect_one(args):
    config, index, sim_seed, test_seed = args
    series = config.model.simulate(config.T, sim_seed)
    report = full_pipeline(
        series,
        config.alpha,
        config.B,
        gamma=config.gamma,
        seed=test_seed,
        n_detect=config.N,
        p_order=config.p,
    )
    return {
        "run": index,
        "simSeed": sim_seed,
        "testSeed": test_seed,
        "N": report.tuning["N_detect"],
        "NTest": report.tuning["N_test"],
        "p": report.tuning["p"],
        "statistic": report.test.statistic,
        "pValue": report.test.p_value,
        "reject": report.test.reject,
        "kHat": report.k_hat,
        "breaks": report.break_locations,
    }


def _pmap(func, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def _coerce_config(config) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    if isinstance(config, dict):
        return ExperimentConfig.from_dict(config)
    return ExperimentConfig.from_file(config)


def run_level_study(config) -> McResult:
    """Rejection frequency of the existence test under a stationary model.

    Each run simulates a fresh series and applies the bootstrap test with
    the config window (or the data-driven test window when none is
    given).  The model must have no breaks.
    """
    config = _coerce_config(config)
    if not config.model.is_stationary():
        raise ConfigError("level study requires a stationary (break-free) model")
    start = time.perf_counter()
    seeds = _run_seeds(config.master_seed, config.runs)
    jobs = [(config, i, s, t) for i, (s, t) in enumerate(seeds)]
    per_run = _pmap(_level_one, jobs, config.workers)
    return McResult(
        study="level",
        config=config.summary(),
        runs=config.runs,
        rejections=sum(1 for r in per_run if r["reject"]),
        per_run=per_run,
        wall_clock=time.perf_counter() - start,
    )


def _run_detection_study(config: ExperimentConfig, study: str) -> McResult:
    start = time.perf_counter()
    seeds = _run_seeds(config.master_seed, config.runs)
    jobs = [(config, i, s, t) for i, (s, t) in enumerate(seeds)]
    per_run = _pmap(_detect_one, jobs, config.workers)
    k_table: dict = {}
    pooled: list = []
    for r in per_run:
        k_table[r["kHat"]] = k_table.get(r["kHat"], 0) + 1
        pooled.extend(r["breaks"])
    return McResult(
        study=study,
        config=config.summary(),
        runs=config.runs,
        rejections=sum(1 for r in per_run if r["reject"]),
        k_table=k_table,
        break_values=pooled,
        per_run=per_run,
        wall_clock=time.perf_counter() - start,
    )


def run_power_study(config) -> McResult:
    """Rejection frequency of the full pipeline under a model with breaks.

    Runs the complete detection pipeline per replicate series and records
    the estimated break count and locations alongside each rejection.
    """
    config = _coerce_config(config)
    return _run_detection_study(config, "power")


def run_localization_study(config) -> McResult:
    """Pools estimated break locations across runs of the full pipeline.

    Requires a model with at least one break; the pooled ``break_values``
    list is the histogram raw material and ``k_table`` the frequency
    table of estimated break counts.
    """
    config = _coerce_config(config)
    if config.model.is_stationary():
        raise ConfigError("localization study requires a model with at least one break")
    return _run_detection_study(config, "localization")


@dataclass
class KernelStudyResult:
    """Empirical-vs-theoretical variance of the scaled difference statistic."""

    empirical_variance: float
    kernel_value: float
    ratio: float
    replicates: int
    c: float
    T: int
    N: int
    omega: float
    low_precision: bool

    def to_dict(self) -> dict:
        return _plain(
            {
                "empiricalVariance": self.empirical_variance,
                "kernelValue": self.kernel_value,
                "ratio": self.ratio,
                "replicates": self.replicates,
                "c": self.c,
                "T": self.T,
                "N": self.N,
                "omega": self.omega,
                "lowPrecision": self.low_precision,
            }
        )


def _midpoint_difference(x: np.ndarray, N: int, omega: float) -> float:
    """Difference statistic at v = 1/2 for a univariate series."""
    j = x.shape[0] // 2
    left = np.fft.rfft(x[j - N : j])
    right = np.fft.rfft(x[j : j + N])
    k_max = int(np.floor(omega * N / 2.0 + 1e-9))
    p_left = (left.real**2 + left.imag**2)[1 : k_max + 1]
    p_right = (right.real**2 + right.imag**2)[1 : k_max + 1]
    return float((p_right - p_left).sum() / (2.0 * np.pi * N * N))


def run_kernel_study(c, T, replicates, seed, omega: float = 1.0) -> KernelStudyResult:
    """Monte Carlo check of the asymptotic variance of the statistic.

    Simulates univariate Gaussian white noise of length T, evaluates the
    cumulated periodogram difference at the series midpoint with window
    N = T/c, and compares the empirical variance of sqrt(N) times that
    value against the theoretical kernel at the same point.  Fewer than
    100 replicates set the ``low_precision`` flag.
    """
    if c < 2:
        raise ValueError("window ratio c must be at least 2")
    if replicates < 2:
        raise ValueError("need at least 2 replicates to estimate a variance")
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    if T % c:
        raise ValueError("T must be an integer multiple of c")
    N = T // int(c)
    if N % 2 or N < 2:
        raise ValueError("window N = T/c must be even and at least 2")

    values = np.empty(replicates)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(replicates)):
        x = np.random.default_rng(child).standard_normal(T)
        values[r] = _midpoint_difference(x, N, omega)
    emp_var = float(np.var(np.sqrt(N) * values, ddof=1))

    white = np.eye(1) / (2.0 * np.pi)
    kernel = limit_kernel(KernelSpec(f=lambda lam: white, c=float(c), point1=(0.5, omega), point2=(0.5, omega)))
    return KernelStudyResult(
        empirical_variance=emp_var,
        kernel_value=float(kernel),
        ratio=float(emp_var / kernel),
        replicates=int(replicates),
        c=float(c),
        T=int(T),
        N=int(N),
        omega=float(omega),
        low_precision=replicates < 100,
    )
