"""Command line front end: CSV in, JSON/CSV/SVG artifacts out.

Subcommands: ``test`` (existence test only), ``detect`` (full pipeline),
``simulate`` (benchmark model realizations), ``experiment`` (Monte Carlo
studies from a TOML/JSON config).  Every command is a thin shell over the
library; identical inputs and seeds reproduce identical artifacts.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import csv
import json
import math
import os

import click
import numpy as np

from .ar import FitError
from .detector import DEFAULT_GAMMA, bootstrap_test, full_pipeline, select_window
from .experiments import (
    DEFAULT_B,
    ConfigError,
    ExperimentConfig,
    _custom_model,
    builtin_model,
    load_config_dict,
    model_registry,
    run_kernel_study,
    run_level_study,
    run_localization_study,
    run_power_study,
)
from .simulate import TimeSeries

__all__ = ["main", "ingest_csv", "cmd_test", "cmd_detect", "cmd_simulate", "cmd_experiment", "render_curves_svg", "DEFAULT_SEED"]

# Fixed default seed so bare invocations are reproducible run to run.
DEFAULT_SEED = 1729


def ingest_csv(path, columns=None) -> TimeSeries:
    """Load a numeric CSV (rows = time, columns = components) and center it.

    A header row is auto-detected: if any cell of the first row fails to
    parse as a number, the row is treated as column names.  ``columns``
    optionally selects a subset, each entry either a 0-based index or a
    header name.  Column means are subtracted from the returned series.

    Raises ValueError on ragged rows, non-numeric cells, fewer than 64
    data rows, or a zero-variance column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        raw = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if not raw:
        raise ValueError("CSV file %s is empty" % path)

    header = None
    start = 0
    try:
        [float(cell) for cell in raw[0]]
    except ValueError:
        header = [cell.strip() for cell in raw[0]]
        start = 1
    data = raw[start:]
    if not data:
        raise ValueError("CSV file %s has a header but no data rows" % path)
    width = len(data[0])
    if header is not None and len(header) != width:
        raise ValueError("header has %d cells but data rows have %d" % (len(header), width))

    values = np.empty((len(data), width))
    for i, row in enumerate(data):
        if len(row) != width:
            raise ValueError("ragged CSV: row %d has %d cells, expected %d" % (start + i + 1, len(row), width))
        try:
            values[i] = [float(cell) for cell in row]
        except ValueError:
            raise ValueError("non-numeric cell in row %d" % (start + i + 1))

    if columns:
        picked = []
        for token in columns:
            text = str(token).strip()
            if text.lstrip("+-").isdigit():
                k = int(text)
            else:
                if header is None:
                    raise ValueError("column name %r given but the CSV has no header" % text)
                if text not in header:
                    raise ValueError("column %r not found in header %s" % (text, header))
                k = header.index(text)
            if not 0 <= k < width:
                raise ValueError("column index %d out of range [0, %d)" % (k, width))
            picked.append(k)
        values = values[:, picked]

    if values.shape[0] < 64:
        raise ValueError("need at least 64 data rows, got %d" % values.shape[0])
    stds = values.std(axis=0)
    if np.any(stds == 0):
        raise ValueError("column %d has zero variance" % int(np.flatnonzero(stds == 0)[0]))
    return TimeSeries(values - values.mean(axis=0), centered=True)


def _write_text(path, text):
    if path is None:
        click.echo(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def _write_curves_csv(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "v", "value", "threshold"])
        for curve in report.curves:
            for v, val, thr in zip(curve["v"], curve["value"], curve["threshold"]):
                writer.writerow([curve["component"], v, val, thr])


def render_curves_svg(report) -> str:
    """Render the exceedance curves as one SVG, one panel per component.

    Solid line: scaled sup curve; dashed line: threshold; vertical lines:
    detected breaks.
    """
    curves = report.curves
    if not curves:
        return '<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"></svg>'
    d = int(round(math.sqrt(len(curves))))
    pw, ph = 340, 220
    left, top, right, bottom = 46, 26, 12, 34
    breaks = report.break_locations
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" font-family="sans-serif" font-size="11">'
        % (d * pw, d * ph)
    ]
    for i, curve in enumerate(curves):
        row, col = divmod(i, d)
        x0, y0 = col * pw + left, row * ph + top
        w, h = pw - left - right, ph - top - bottom
        v = curve["v"]
        vals = curve["value"]
        thr = curve["threshold"]
        v_lo, v_hi = v[0], v[-1]
        span = (v_hi - v_lo) or 1.0
        y_max = max(max(vals), max(thr), 1e-12) * 1.05

        def px(value):
            return x0 + (value - v_lo) / span * w

        def py(value):
            return y0 + h - value / y_max * h

        def pts(ys):
            return " ".join("%.2f,%.2f" % (px(vv), py(yy)) for vv, yy in zip(v, ys))

        parts.append('<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="#999"/>' % (x0, y0, w, h))
        parts.append('<polyline points="%s" fill="none" stroke="#1f77b4" stroke-width="1.2"/>' % pts(vals))
        parts.append(
            '<polyline points="%s" fill="none" stroke="#d62728" stroke-width="1.2" stroke-dasharray="6,4"/>' % pts(thr)
        )
        for b in breaks:
            if v_lo <= b <= v_hi:
                parts.append(
                    '<line x1="%.2f" y1="%d" x2="%.2f" y2="%d" stroke="#2ca02c" stroke-width="1.5"/>'
                    % (px(b), y0, px(b), y0 + h)
                )
        parts.append('<text x="%d" y="%d">component %s</text>' % (x0, y0 - 8, curve["component"]))
        parts.append('<text x="%d" y="%d" text-anchor="middle">%.3g</text>' % (x0, y0 + h + 16, v_lo))
        parts.append('<text x="%d" y="%d" text-anchor="middle">%.3g</text>' % (x0 + w, y0 + h + 16, v_hi))
        parts.append('<text x="%d" y="%d" text-anchor="end">%.3g</text>' % (x0 - 4, y0 + 10, y_max))
        parts.append('<text x="%d" y="%d" text-anchor="end">0</text>' % (x0 - 4, y0 + h))
    parts.append("</svg>")
    return "\n".join(parts)


def cmd_test(config: dict) -> int:
    """Run only the bootstrap existence test; write its JSON summary."""
    series = ingest_csv(config["input"], config.get("columns"))
    n_test = config.get("N")
    if n_test is None:
        n_test = select_window(series, config.get("gamma", DEFAULT_GAMMA)).n_test
    result = bootstrap_test(
        series,
        n_test,
        config.get("alpha", 0.05),
        config.get("B", DEFAULT_B),
        config.get("seed", DEFAULT_SEED),
        p_order=config.get("p"),
        workers=config.get("workers", 1),
    )
    _write_text(config.get("report"), json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_detect(config: dict) -> int:
    """Run the full pipeline; write report JSON, curves CSV, optional SVG."""
    series = ingest_csv(config["input"], config.get("columns"))
    report = full_pipeline(
        series,
        config.get("alpha", 0.05),
        config.get("B", DEFAULT_B),
        gamma=config.get("gamma", DEFAULT_GAMMA),
        seed=config.get("seed", DEFAULT_SEED),
        n_detect=config.get("N"),
        p_order=config.get("p"),
        workers=config.get("workers", 1),
    )
    _write_text(config.get("report"), report.to_json())
    if config.get("curves"):
        _write_curves_csv(config["curves"], report)
    if config.get("svg"):
        _write_text(config["svg"], render_curves_svg(report))
    return 0


def cmd_simulate(config: dict) -> int:
    """Simulate a benchmark or custom model and write a headerless CSV."""
    if config.get("model_config"):
        spec = _custom_model(load_config_dict(config["model_config"]))
    elif config.get("model"):
        spec = builtin_model(config["model"], **config.get("params", {}))
    else:
        raise ConfigError("either a model id or a model config file is required")
    T = int(config["T"])
    if T < 1:
        raise ConfigError("T must be positive")
    series = spec.simulate(T, config.get("seed", DEFAULT_SEED))
    out = config.get("output")
    rows = "\n".join(",".join(str(x) for x in row) for row in series.values)
    _write_text(out, rows)
    return 0


def cmd_experiment(config: dict) -> int:
    """Run the study named by the config file; write JSON and histogram CSV."""
    raw = load_config_dict(config["config"])
    if config.get("workers") is not None:
        raw["workers"] = config["workers"]
    study = raw.get("study", "level")
    if study == "kernel":
        for key in ("c", "T", "replicates"):
            if key not in raw:
                raise ConfigError("kernel study config needs key %r" % key)
        result = run_kernel_study(
            raw["c"],
            raw["T"],
            raw["replicates"],
            raw.get("seed", DEFAULT_SEED),
            omega=raw.get("omega", 1.0),
        )
        _write_text(config.get("output"), json.dumps(result.to_dict(), indent=2))
        return 0
    runner = {"level": run_level_study, "power": run_power_study, "localization": run_localization_study}.get(study)
    if runner is None:
        raise ConfigError("unknown study %r" % study)
    result = runner(ExperimentConfig.from_dict(raw))
    _write_text(config.get("output"), result.to_json(include_timing=config.get("include_timing", False)))
    if config.get("histogram"):
        with open(config["histogram"], "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["b"])
            for b in result.break_values:
                writer.writerow([b])
    return 0


def _guarded(fn):
    try:
        return fn()
    except ConfigError as exc:
        raise click.UsageError(str(exc))
    except (ValueError, FitError, np.linalg.LinAlgError, OSError) as exc:
        raise click.ClickException(str(exc))


def _parse_columns(text):
    if not text:
        return None
    return [token.strip() for token in text.split(",") if token.strip()]


def _parse_float_list(text):
    if text is None:
        return None
    return [float(token) for token in text.split(",") if token.strip()]


def _default_workers():
    try:
        return max(1, int(os.environ.get("SPECBREAK_WORKERS", "1")))
    except ValueError:
        return 1


def _check_alpha(ctx, param, value):
    if not 0.0 < value < 1.0:
        raise click.BadParameter("alpha must lie strictly between 0 and 1")
    return value


def _check_gamma(ctx, param, value):
    if not 0.0 < value < 0.5:
        raise click.BadParameter("gamma must lie in (0, 0.5)")
    return value


def _check_window(ctx, param, value):
    if value is not None and (value < 2 or value % 2):
        raise click.BadParameter("N must be even and at least 2")
    return value


def _check_b(ctx, param, value):
    if value < 1:
        raise click.BadParameter("B must be at least 1")
    return value


_input_arg = click.argument("input", type=click.Path(exists=True, dir_okay=False))


def _common_options(fn):
    for deco in (
        click.option("--columns", default=None, help="Comma-separated column indices (0-based) or header names."),
        click.option("--alpha", type=float, default=0.05, show_default=True, callback=_check_alpha),
        click.option("--B", "b_reps", type=int, default=DEFAULT_B, show_default=True, callback=_check_b, help="Bootstrap replicates."),
        click.option("--N", "window", type=int, default=None, callback=_check_window, help="Window length (default: data-driven)."),
        click.option("--p", "p_order", type=int, default=None, help="Autoregressive order (default: AIC)."),
        click.option("--gamma", type=float, default=DEFAULT_GAMMA, show_default=True, callback=_check_gamma),
        click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True),
        click.option("--workers", type=int, default=None, help="Parallel workers (default: $SPECBREAK_WORKERS or 1)."),
        click.option("--report", type=click.Path(dir_okay=False), default=None, help="Report JSON path (default: stdout)."),
    ):
        fn = deco(fn)
    return fn


@click.group()
def main():
    """Frequency-domain structural break detection for multivariate series."""


@main.command("test")
@_input_arg
@_common_options
def _cli_test(input, columns, alpha, b_reps, window, p_order, gamma, seed, workers, report):
    """Bootstrap test for the existence of breaks in INPUT (CSV)."""
    cfg = {
        "input": input,
        "columns": _parse_columns(columns),
        "alpha": alpha,
        "B": b_reps,
        "N": window,
        "p": p_order,
        "gamma": gamma,
        "seed": seed,
        "workers": workers or _default_workers(),
        "report": report,
    }
    _guarded(lambda: cmd_test(cfg))


@main.command("detect")
@_input_arg
@_common_options
@click.option("--curves", type=click.Path(dir_okay=False), default=None, help="Write per-component curves CSV here.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Write a diagnostic SVG here.")
def _cli_detect(input, columns, alpha, b_reps, window, p_order, gamma, seed, workers, report, curves, svg):
    """Detect and localize structural breaks in INPUT (CSV)."""
    cfg = {
        "input": input,
        "columns": _parse_columns(columns),
        "alpha": alpha,
        "B": b_reps,
        "N": window,
        "p": p_order,
        "gamma": gamma,
        "seed": seed,
        "workers": workers or _default_workers(),
        "report": report,
        "curves": curves,
        "svg": svg,
    }
    _guarded(lambda: cmd_detect(cfg))


@main.command("simulate")
@click.option("--model", "model_id", type=click.Choice(model_registry()), default=None, help="Built-in model id.")
@click.option("--model-config", type=click.Path(exists=True, dir_okay=False), default=None, help="Custom model TOML/JSON.")
@click.option("--T", "length", type=int, required=True, help="Series length.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--theta", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--phis", default=None, help="Comma-separated per-segment values.")
@click.option("--thetas", default=None, help="Comma-separated per-segment values.")
@click.option("--sigmas", default=None, help="Comma-separated per-segment values.")
@click.option("--breaks", default=None, help="Comma-separated break locations (decimals or fractions like 1/4).")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="CSV path (default: stdout).")
def _cli_simulate(model_id, model_config, length, seed, theta, phi, phis, thetas, sigmas, breaks, output):
    """Simulate a benchmark model to a headerless CSV."""
    params = {}
    if theta is not None:
        params["theta"] = theta
    if phi is not None:
        params["phi"] = phi
    if phis is not None:
        params["phis"] = _parse_float_list(phis)
    if thetas is not None:
        params["thetas"] = _parse_float_list(thetas)
    if sigmas is not None:
        params["sigmas"] = _parse_float_list(sigmas)
    if breaks is not None:
        params["breaks"] = [token.strip() for token in breaks.split(",") if token.strip()]
    cfg = {
        "model": model_id,
        "model_config": model_config,
        "T": length,
        "seed": seed,
        "params": params,
        "output": output,
    }
    _guarded(lambda: cmd_simulate(cfg))


@main.command("experiment")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), required=True, help="Study TOML/JSON config.")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Result JSON path (default: stdout).")
@click.option("--histogram", type=click.Path(dir_okay=False), default=None, help="Pooled break-location CSV path.")
@click.option("--workers", type=int, default=None, help="Override config worker count.")
@click.option("--include-timing", is_flag=True, default=False, help="Include wall-clock time in the JSON.")
def _cli_experiment(config, output, histogram, workers, include_timing):
    """Run a Monte Carlo study described by a config file."""
    cfg = {
        "config": config,
        "output": output,
        "histogram": histogram,
        "workers": workers,
        "include_timing": include_timing,
    }
    _guarded(lambda: cmd_experiment(cfg))


if __name__ == "__main__":
    main()
