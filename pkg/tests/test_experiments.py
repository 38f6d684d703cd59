"""Tests for the Monte Carlo study harness and its configuration."""

import json
from pathlib import Path

import numpy as np
import pytest

from specbreak import (
    ConfigError,
    ExperimentConfig,
    ModelSpec,
    builtin_model,
    model_registry,
    run_kernel_study,
    run_level_study,
    run_localization_study,
    run_power_study,
)

PI = np.pi


class TestModelSpecs:
    def test_registry_lists_builtins(self):
        ids = model_registry()
        for name in (
            "model-6.1",
            "model-6.2",
            "model-6.3",
            "model-6.4",
            "model-6.5",
            "model-4.4",
        ):
            assert name in ids

    def test_unknown_id(self):
        with pytest.raises(ConfigError):
            builtin_model("model-9.9")

    def test_moving_average_null(self):
        spec = builtin_model("model-6.1", theta=0.5)
        assert spec.dim == 2
        assert spec.n_breaks == 0
        assert spec.is_stationary()
        ts = spec.simulate(128, 3)
        assert ts.values.shape == (128, 2)

    def test_ar_switch_model(self):
        spec = builtin_model("model-6.3", phis=(0.5, -0.5), breaks=(0.5,))
        assert spec.n_breaks == 1
        assert not spec.is_stationary()
        assert spec.simulate(256, 1).values.shape == (256, 2)

    def test_variance_switch_model(self):
        spec = builtin_model("model-6.5", sigmas=(1.0, 2.0), breaks=(0.5,))
        ts = spec.simulate(2048, 5)
        first = ts.values[:1024].var(axis=0)
        second = ts.values[1024:].var(axis=0)
        assert (second > 1.5 * first).all()

    def test_four_segment_benchmark(self):
        spec = builtin_model("model-4.4")
        assert spec.n_breaks == 3
        assert spec.dim == 2

    def test_custom_linear_segments(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": {
                    "segments": [[[[1.0]]], [[[2.0]]]],
                    "breakpoints": ["1/2"],
                },
                "T": 128,
                "runs": 1,
            }
        )
        assert isinstance(cfg.model, ModelSpec)
        assert cfg.model.n_breaks == 1
        assert cfg.model.simulate(128, 0).values.shape == (128, 1)

    def test_custom_ar_segments(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": {
                    "ar_matrices": [[[0.5]], [[-0.5]]],
                    "breakpoints": [0.5],
                },
                "T": 128,
                "runs": 1,
            }
        )
        assert cfg.model.n_breaks == 1
        assert cfg.model.simulate(128, 0).values.shape == (128, 1)


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({"model": "model-6.1", "T": 128, "runs": 2})
        assert cfg.study == "level"
        assert cfg.B == 300
        assert cfg.alpha == 0.05
        assert cfg.gamma == pytest.approx(0.49)
        assert cfg.master_seed == 0
        assert cfg.workers == 1
        assert cfg.N is None and cfg.p is None

    def test_seed_aliases(self):
        for key in ("masterSeed", "master_seed", "seed"):
            cfg = ExperimentConfig.from_dict(
                {"model": "model-6.1", "T": 128, "runs": 1, key: 11}
            )
            assert cfg.master_seed == 11

    @pytest.mark.parametrize(
        "bad",
        [
            {"runs": 0},
            {"study": "bogus"},
            {"T": 32},
            {"B": 0},
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"gamma": 0.6},
            {"workers": 0},
            {"N": 33},
            {"N": 512},
            {"p": -1},
        ],
    )
    def test_validation(self, bad):
        base = {"model": "model-6.1", "T": 128, "runs": 2}
        base.update(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(base)

    def test_from_toml_file(self, tmp_path):
        path = tmp_path / "study.toml"
        path.write_text(
            'model = "model-6.1"\nstudy = "level"\nT = 128\nruns = 2\n'
            "B = 10\nmasterSeed = 4\n[params]\ntheta = 0.5\n"
        )
        cfg = ExperimentConfig.from_file(path)
        assert cfg.T == 128
        assert cfg.B == 10
        assert cfg.master_seed == 4

    def test_from_json_file(self, tmp_path):
        path = tmp_path / "study.json"
        path.write_text(
            json.dumps({"model": "model-6.2", "T": 256, "runs": 3, "study": "level"})
        )
        cfg = ExperimentConfig.from_file(path)
        assert cfg.runs == 3
        assert cfg.model.is_stationary()

    def test_summary_keys(self):
        cfg = ExperimentConfig.from_dict({"model": "model-6.1", "T": 128, "runs": 2})
        assert set(cfg.summary()) == {
            "study",
            "model",
            "T",
            "runs",
            "B",
            "alpha",
            "gamma",
            "masterSeed",
            "N",
            "p",
        }


class TestLevelStudy:
    def test_single_run_frequency(self):
        cfg = ExperimentConfig.from_dict(
            {"model": "model-6.1", "T": 128, "runs": 1, "B": 10, "masterSeed": 1}
        )
        res = run_level_study(cfg)
        assert res.rejection_frequency in (0.0, 1.0)
        assert res.stderr == 0.0
        assert len(res.per_run) == 1
        assert res.k_table == {}

    def test_stationarity_guard(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": "model-6.5",
                "params": {"sigmas": [1.0, 2.0], "breaks": [0.5]},
                "T": 128,
                "runs": 1,
            }
        )
        with pytest.raises(ConfigError):
            run_level_study(cfg)

    def test_reproducible_and_worker_invariant(self):
        base = {"model": "model-6.1", "T": 128, "runs": 3, "B": 8, "masterSeed": 2}
        res1 = run_level_study(ExperimentConfig.from_dict(base))
        res2 = run_level_study(ExperimentConfig.from_dict(base))
        res3 = run_level_study(ExperimentConfig.from_dict({**base, "workers": 2}))
        assert res1.to_json() == res2.to_json()
        assert res1.to_json() == res3.to_json()

    def test_stderr_formula(self):
        cfg = ExperimentConfig.from_dict(
            {"model": "model-6.1", "T": 128, "runs": 5, "B": 10, "masterSeed": 3}
        )
        res = run_level_study(cfg)
        p = res.rejection_frequency
        assert res.stderr == pytest.approx(np.sqrt(p * (1 - p) / 5))


class TestPowerStudy:
    def test_counts_are_consistent(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": "model-6.5",
                "params": {"sigmas": [1.0, 2.0], "breaks": [0.5]},
                "study": "power",
                "T": 128,
                "runs": 4,
                "B": 12,
                "masterSeed": 7,
            }
        )
        res = run_power_study(cfg)
        assert res.runs == 4
        assert 0 <= res.rejections <= 4
        assert res.rejection_frequency == res.rejections / 4
        total_breaks = sum(k * n for k, n in res.k_table.items())
        assert len(res.break_values) == total_breaks
        assert sum(res.k_table.values()) == 4
        data = res.to_dict()
        assert set(data["kTable"]) == {str(k) for k in res.k_table}

    def test_stationary_model_allowed(self):
        cfg = ExperimentConfig.from_dict(
            {"model": "model-6.2", "study": "power", "T": 128, "runs": 1, "B": 8}
        )
        res = run_power_study(cfg)
        assert res.study == "power"


class TestLocalizationStudy:
    def test_requires_breaks(self):
        cfg = ExperimentConfig.from_dict(
            {"model": "model-6.1", "study": "localization", "T": 128, "runs": 1}
        )
        with pytest.raises(ConfigError):
            run_localization_study(cfg)

    def test_overwhelming_variance_jump(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": "model-6.5",
                "params": {"sigmas": [1.0, 4.0], "breaks": [0.5]},
                "study": "localization",
                "T": 512,
                "runs": 1,
                "B": 40,
                "masterSeed": 0,
                "N": 128,
            }
        )
        res = run_localization_study(cfg)
        assert res.k_table == {1: 1}
        assert len(res.break_values) == 1
        assert abs(res.break_values[0] - 0.5) <= 128 / 512
        assert res.per_run[0]["NTest"] == 256

    def test_histogram_mass_matches_k_table(self):
        cfg = ExperimentConfig.from_dict(
            {
                "model": "model-6.5",
                "params": {"sigmas": [1.0, 3.0], "breaks": [0.5]},
                "study": "localization",
                "T": 256,
                "runs": 3,
                "B": 20,
                "masterSeed": 5,
            }
        )
        res = run_localization_study(cfg)
        assert len(res.break_values) == sum(k * n for k, n in res.k_table.items())


class TestKernelStudy:
    def test_low_precision_flag(self):
        res = run_kernel_study(c=4, T=64, replicates=2, seed=0)
        assert res.low_precision
        assert np.isfinite(res.ratio)
        res = run_kernel_study(c=4, T=64, replicates=100, seed=0)
        assert not res.low_precision

    def test_kernel_value_scales_with_omega(self):
        full = run_kernel_study(c=4, T=64, replicates=2, seed=1, omega=1.0)
        half = run_kernel_study(c=4, T=64, replicates=2, seed=1, omega=0.5)
        assert full.kernel_value == pytest.approx(1.0 / PI**2, rel=1e-8)
        assert half.kernel_value == pytest.approx(0.5 / PI**2, rel=1e-8)

    def test_parameter_errors(self):
        with pytest.raises(ValueError):
            run_kernel_study(c=1.5, T=64, replicates=10, seed=0)
        with pytest.raises(ValueError):
            run_kernel_study(c=4, T=64, replicates=1, seed=0)
        with pytest.raises(ValueError):
            run_kernel_study(c=4, T=66, replicates=10, seed=0)
        with pytest.raises(ValueError):
            run_kernel_study(c=4, T=64, replicates=10, seed=0, omega=0.0)

    def test_to_dict_keys(self):
        res = run_kernel_study(c=4, T=64, replicates=5, seed=2)
        assert set(res.to_dict()) == {
            "empiricalVariance",
            "kernelValue",
            "ratio",
            "replicates",
            "c",
            "T",
            "N",
            "omega",
            "lowPrecision",
        }


class TestShippedConfigs:
    CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

    def test_all_toml_configs_load(self):
        from specbreak.experiments import load_config_dict

        paths = sorted(self.CONFIG_DIR.glob("*.toml"))
        assert paths, "no shipped study configs found"
        for path in paths:
            raw = load_config_dict(path)
            if raw.get("study") == "kernel":
                assert {"c", "T", "replicates"} <= set(raw)
            else:
                cfg = ExperimentConfig.from_file(path)
                assert cfg.runs >= 1

    def test_custom_model_example_simulates(self):
        from specbreak.experiments import _custom_model, load_config_dict

        spec = _custom_model(
            load_config_dict(self.CONFIG_DIR / "custom_model_example.json")
        )
        assert spec.simulate(96, 1).values.shape == (96, 2)


class TestMcResultSerialization:
    def test_timing_flag(self):
        cfg = ExperimentConfig.from_dict(
            {"model": "model-6.1", "T": 128, "runs": 1, "B": 6, "masterSeed": 9}
        )
        res = run_level_study(cfg)
        assert "wallClockSeconds" not in res.to_dict()
        timed = res.to_dict(include_timing=True)
        assert timed["wallClockSeconds"] >= 0
        parsed = json.loads(res.to_json())
        assert parsed["runs"] == 1
        assert set(parsed["perRun"][0]) == {
            "run",
            "simSeed",
            "testSeed",
            "N",
            "p",
            "statistic",
            "pValue",
            "reject",
        }
