"""Command-line front end: run scenarios, sweep parameters, check configs.

Exit codes: 0 on success, 2 for config or usage problems, 3 when a
simulation had to abort. Solver tolerances can be overridden with the
environment variables CLIKTUNE_FEAS_TOL, CLIKTUNE_OBJ_TOL and
CLIKTUNE_MAX_ITERS, which win over config-file values.
"""

from __future__ import annotations

import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .config import config_to_scenario, dump_config, load_config
from .errors import CliktuneError, ConfigError, InvalidParameter, SimulationError
from .sdp import SolverOptions
from .sim import (
    MODE_FIXED,
    MODE_SDP,
    Scenario,
    SimTrace,
    get_builtin,
    run as run_scenario,
    with_velocity_limit,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM = 3

SWEEP_PARAMS = ("beta_tilde", "dt", "qd_limit")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _env_solver_overrides(options: SolverOptions) -> SolverOptions:
    updates = {}
    for env, attr, cast in (
        ("CLIKTUNE_FEAS_TOL", "feas_tol", float),
        ("CLIKTUNE_OBJ_TOL", "obj_tol", float),
        ("CLIKTUNE_MAX_ITERS", "max_iters", int),
    ):
        raw = os.environ.get(env)
        if raw is None:
            continue
        try:
            updates[attr] = cast(raw)
        except ValueError:
            raise ConfigError(env, f"cannot parse {raw!r}") from None
    return replace(options, **updates) if updates else options


def _load_scenario(scenario_path, builtin) -> Scenario:
    if (scenario_path is None) == (builtin is None):
        raise ConfigError("", "give exactly one of --scenario and --builtin")
    if builtin is not None:
        scenario = get_builtin(builtin)
    else:
        scenario = config_to_scenario(load_config(scenario_path))
    return replace(scenario, solver=_env_solver_overrides(scenario.solver))


def _apply_overrides(scenario: Scenario, mode, beta_tilde, dt, duration) -> Scenario:
    updates = {}
    if mode is not None:
        updates["mode"] = mode
        if mode == MODE_FIXED and scenario.fixed_gains is None:
            from .sim import fixed_baseline
            return replace(fixed_baseline(scenario),
                           **{k: v for k, v in (
                               ("beta_tilde", beta_tilde),
                               ("dt", dt),
                               ("duration", duration)) if v is not None})
    if beta_tilde is not None:
        updates["beta_tilde"] = beta_tilde
    if dt is not None:
        updates["dt"] = dt
    if duration is not None:
        updates["duration"] = duration
    return replace(scenario, **updates) if updates else scenario


def _print_summary(trace: SimTrace, wall: float) -> None:
    s = trace.summary()
    errs = ", ".join(f"{v:.6e}" for v in s["final_err_norms"])
    click.echo(f"scenario:        {s['scenario']}")
    click.echo(f"steps:           {s['steps']}")
    click.echo(f"final err norms: {errs}")
    click.echo(f"margin min/max:  {s['min_margin']:.6e} / {s['max_margin']:.6e}")
    click.echo(f"max |qd|:        {s['max_abs_qd']:.6f} rad/s")
    click.echo(f"wall time:       {wall:.3f} s")


@click.group()
def main():
    """Hierarchical closed-loop IK with certified per-step gain tuning."""


@main.command("run")
@click.option("--scenario", "scenario_path", type=click.Path(), default=None,
              help="Scenario config file.")
@click.option("--builtin", type=str, default=None,
              help="Builtin scenario name (planar3, ur5).")
@click.option("--mode", type=click.Choice([MODE_SDP, MODE_FIXED]), default=None,
              help="Override the controller mode.")
@click.option("--beta-tilde", type=float, default=None,
              help="Override the desired contraction rate.")
@click.option("--dt", type=float, default=None, help="Override the sampling time.")
@click.option("--duration", type=float, default=None, help="Override the horizon.")
@click.option("--out", type=click.Path(), required=True, help="Trace CSV path.")
@click.option("--plot-script", type=click.Path(), default=None,
              help="Also write a matplotlib script for the trace.")
def cmd_run(scenario_path, builtin, mode, beta_tilde, dt, duration, out,
            plot_script):
    """Run one closed-loop simulation and write its trace."""
    try:
        scenario = _apply_overrides(
            _load_scenario(scenario_path, builtin), mode, beta_tilde, dt, duration)
    except (ConfigError, InvalidParameter) as exc:
        _fail(EXIT_CONFIG, str(exc))
    t0 = time.perf_counter()
    try:
        trace = run_scenario(scenario)
    except (SimulationError, CliktuneError) as exc:
        _fail(EXIT_SIM, str(exc))
    wall = time.perf_counter() - t0
    trace.save_csv(out)
    if plot_script is not None:
        Path(plot_script).write_text(_plot_script_text(out), encoding="utf-8")
    _print_summary(trace, wall)
    click.echo(f"trace written to {out} ({len(trace)} rows)")


def _parse_values(values: str) -> list[float]:
    parts = [p.strip() for p in values.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values", "expected a non-empty comma-separated list")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError("--values", str(exc)) from None


def _sweep_variant(scenario: Scenario, param: str, value: float) -> Scenario:
    if param == "beta_tilde":
        return replace(scenario, beta_tilde=value)
    if param == "dt":
        return replace(scenario, dt=value)
    return with_velocity_limit(scenario, value)


_SUMMARY_COLS = ("param", "value", "final_err_norms", "err_norms_t1",
                 "min_margin", "max_margin", "mean_beta_deficit", "max_abs_qd")


def _sweep_summary_row(param: str, value: float, trace: SimTrace) -> list[str]:
    def fmt(v: float) -> str:
        return repr(float(v))

    errs = trace.err_norms
    final = ";".join(fmt(v) for v in errs[-1])
    if trace.scenario.duration >= 1.0:
        at1 = trace.record_at(1.0).err_norms
        err1 = ";".join(fmt(v) for v in at1)
    else:
        err1 = ";".join("nan" for _ in range(errs.shape[1]))
    return [
        param, repr(float(value)), final, err1,
        fmt(trace.margins.min()), fmt(trace.margins.max()),
        fmt(trace.mean_beta_deficit()),
        fmt(np.abs(trace.joint_velocities).max()),
    ]


@main.command("sweep")
@click.option("--builtin", type=str, required=True,
              help="Builtin scenario name (planar3, ur5).")
@click.option("--param", type=click.Choice(SWEEP_PARAMS), required=True,
              help="Parameter to sweep.")
@click.option("--values", type=str, required=True,
              help="Comma-separated parameter values, e.g. '2,8'.")
@click.option("--out-dir", type=click.Path(), required=True,
              help="Directory for trace CSVs and the sweep summary.")
def cmd_sweep(builtin, param, values, out_dir):
    """Run a scenario once per parameter value and summarize."""
    try:
        base = _load_scenario(None, builtin)
        vals = _parse_values(values)
        variants = [(v, _sweep_variant(base, param, v)) for v in vals]
    except (ConfigError, InvalidParameter) as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value, scenario in variants:
        try:
            trace = run_scenario(scenario)
        except (SimulationError, CliktuneError) as exc:
            _fail(EXIT_SIM, f"{param}={value:g}: {exc}")
        path = out / f"{base.name}_{param}_{value:g}.csv"
        trace.save_csv(path)
        rows.append(_sweep_summary_row(param, value, trace))
        click.echo(f"{param}={value:g}: trace written to {path}")
    summary = out / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_SUMMARY_COLS) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    click.echo(f"summary written to {summary}")


@main.command("validate")
@click.option("--scenario", "scenario_path", type=click.Path(), required=True,
              help="Scenario config file to check.")
def cmd_validate(scenario_path):
    """Validate a scenario config and print its normal form."""
    try:
        cfg = load_config(scenario_path)
        config_to_scenario(cfg)
    except (ConfigError, InvalidParameter) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(dump_config(cfg), nl=False)


def _plot_script_text(csv_path) -> str:
    return f'''#!/usr/bin/env python3
"""Plot a simulation trace written by `cliktune run`."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {str(csv_path)!r}
with open(path, newline="") as fh:
    reader = csv.DictReader(fh)
    rows = list(reader)

t = [float(r["t"]) for r in rows]
groups = {{
    "task error norms": [c for c in rows[0] if c.startswith("err_norm_")],
    "joint velocities [rad/s]": [c for c in rows[0] if c.startswith("qd_")],
    "gains": [c for c in rows[0] if c.startswith("lambda_")],
    "stability margin": ["stab_margin"],
    "achieved beta": ["beta"],
    "lyapunov value": ["lyapunov"],
}}
fig, axes = plt.subplots(len(groups), 1, sharex=True, figsize=(8, 2.2 * len(groups)))
for ax, (title, cols) in zip(axes, groups.items()):
    for col in cols:
        ax.plot(t, [float(r[col]) for r in rows], label=col)
    ax.set_ylabel(title)
    ax.grid(True)
    if len(cols) > 1:
        ax.legend(loc="best", fontsize="small")
axes[-1].set_xlabel("t [s]")
fig.tight_layout()
plt.show()
'''


if __name__ == "__main__":
    main()
