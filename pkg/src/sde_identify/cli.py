"""Command-line experiment runner.

Config grammar (plain text, human-diffable)::

    [experiment]
    name = linear-recovery
    seeds = 0 1 2 3 4

    [params]
    n = 20
    r = 4
    ks = 2 4

Sections group keys; values are scalars or whitespace-separated lists.
See README for the per-experiment keys and output schemas.
"""

from __future__ import annotations

import os
import sys
import traceback
from typing import Dict, List

import click
import numpy as np

from .errors import ConfigError, IoError, SdeIdentifyError
from . import experiments as ex
from . import reports

EXPERIMENTS = ("linear-recovery", "nonlinear-recovery", "kds-generalization",
               "grn", "counterexamples", "perturbation-check")


def parse_config(path: str) -> Dict[str, Dict[str, str]]:
    if not os.path.exists(path):
        raise IoError(f"config file not found: {path}")
    sections: Dict[str, Dict[str, str]] = {}
    current = None
    for lineno, raw in enumerate(open(path), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            sections.setdefault(current, {})
        elif "=" in line:
            if current is None:
                raise ConfigError(f"{path}:{lineno}: key before any [section]")
            key, val = line.split("=", 1)
            sections[current][key.strip()] = val.strip()
        else:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
    return sections


def _get(params: Dict[str, str], key: str, cast, default):
    if key not in params:
        return default
    try:
        return cast(params[key])
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {params[key]!r}")


def _int_list(s: str) -> List[int]:
    return [int(x) for x in s.split()]


def _float_list(s: str) -> List[float]:
    return [float(x) for x in s.split()]


@click.group()
def main():
    """Identifiability experiments for interventional SDEs.

    Output schemas: results.csv has one row per (config cell, seed) with
    the experiment's metric columns; summary.csv aggregates them as
    'mean ± std' grouped over seeds; counterexample runs also write
    certificates.txt; plots/*.svg hold error-bar charts when the
    experiment has an x-axis.
    """


@main.command()
@click.argument("config", type=click.Path())
@click.option("--output-dir", default=None, help="overrides [output] dir")
def run(config, output_dir):
    """Run the experiment described by a config file."""
    try:
        code = _run(config, output_dir)
    except SdeIdentifyError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    sys.exit(code)


def _run(config, output_dir):
    cfg = parse_config(config)
    exp = cfg.get("experiment", {})
    name = exp.get("name")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment name must be one of {EXPERIMENTS}")
    seeds = _int_list(exp.get("seeds", "0 1 2 3 4"))
    params = cfg.get("params", {})
    out = output_dir or cfg.get("output", {}).get("dir", "results")
    os.makedirs(out, exist_ok=True)
    texts = None
    plot = None

    if name == "linear-recovery":
        rows = ex.run_linear_recovery(
            n=_get(params, "n", int, 20), r=_get(params, "r", int, 4),
            ks=_get(params, "ks", _int_list, [2, 4, 12]), seeds=seeds,
            restarts=_get(params, "restarts", int, 20),
            iters=_get(params, "iters", int, 10000))
        fields = ["k", "seed", "drift_err", "train_loss"]
        summary = reports.summarize(rows, ["k"], ["drift_err"])
        ks = sorted({r["k"] for r in rows})
        ys = [np.mean([r["drift_err"] for r in rows if r["k"] == k])
              for k in ks]
        es = [np.std([r["drift_err"] for r in rows if r["k"] == k], ddof=1)
              if len(seeds) > 1 else 0.0 for k in ks]
        plot = ([("normalized drift error", ks, ys, es)],
                "interventions k", "normalized drift error")
    elif name == "nonlinear-recovery":
        mode = params.get("mode", "fit")
        if mode == "closedform-exact":
            rows = ex.run_nonlinear_closedform_exact(seeds)
            fields = ["n", "r", "seed", "align_A", "align_B"]
            summary = reports.summarize(rows, ["n", "r"],
                                        ["align_A", "align_B"])
        elif mode == "closedform-simulated":
            rows = ex.run_nonlinear_closedform_simulated(seeds)
            fields = ["seed", "align_A", "align_B"]
            summary = reports.summarize(rows, [], ["align_A", "align_B"])
        else:
            rows = ex.run_nonlinear_fit(
                seeds, n=_get(params, "n", int, 8),
                r=_get(params, "r", int, 2),
                restarts=_get(params, "restarts", int, 5),
                iters=_get(params, "iters", int, 4000))
            fields = ["k", "seed", "align_A", "align_B", "train_loss"]
            summary = reports.summarize(rows, ["k"], ["align_A", "align_B"])
            ks = sorted({r["k"] for r in rows})
            ys = [np.mean([0.5 * (r["align_A"] + r["align_B"])
                           for r in rows if r["k"] == k]) for k in ks]
            es = [np.std([0.5 * (r["align_A"] + r["align_B"])
                          for r in rows if r["k"] == k], ddof=1)
                  if len(seeds) > 1 else 0.0 for k in ks]
            plot = ([("align error", ks, ys, es)],
                    "interventions k", "align error")
    elif name == "kds-generalization":
        rows = ex.run_kds(seeds,
                          n=_get(params, "n", int, 10),
                          r=_get(params, "r", int, 3),
                          eps_list=_get(params, "eps", _float_list,
                                        [0.05, 0.3]),
                          iters=_get(params, "iters", int, 3000))
        fields = ["epsilon", "seed", "model", "mse"]
        summary = reports.summarize(rows, ["epsilon", "model"], ["mse"])
    elif name == "perturbation-check":
        rows = ex.run_perturbation_check(seeds)
        fields = ["seed", "epsilon", "mean_dev", "mean_bound", "cov_dev"]
        summary = reports.summarize(rows, ["epsilon"],
                                    ["mean_dev", "cov_dev"])
    elif name == "counterexamples":
        rows, texts = ex.run_counterexamples(
            seeds, n=_get(params, "n", int, 8), r=_get(params, "r", int, 4))
        fields = ["seed", "case", "passed"]
        summary = reports.summarize(
            [dict(case=r["case"], passed=float(r["passed"])) for r in rows],
            ["case"], ["passed"])
    elif name == "grn":
        rows = ex.run_grn(seeds,
                          n_genes=_get(params, "n_genes", int, 12),
                          r=_get(params, "r", int, 6),
                          iters=_get(params, "iters", int, 800))
        fields = ["seed", "model", "auprc", "baseline"]
        summary = reports.summarize(rows, ["model"], ["auprc"])

    rows = sorted(rows, key=lambda r: (r.get("seed", 0),
                                       str({k: r[k] for k in fields})))
    reports.write_csv(os.path.join(out, "results.csv"), fields, rows)
    sum_fields = list(summary[0].keys()) if summary else []
    reports.write_csv(os.path.join(out, "summary.csv"), sum_fields, summary)
    if texts:
        with open(os.path.join(out, "certificates.txt"), "w") as f:
            f.write("\n\n".join(texts) + "\n")
    if plot is not None:
        series, xlabel, ylabel = plot
        reports.emit_plot(series, os.path.join(out, "plots",
                                               f"{name}.svg"),
                          xlabel=xlabel, ylabel=ylabel, title=name)
    click.echo(f"wrote {out}/results.csv ({len(rows)} rows)")
    return 0


@main.command()
@click.option("--case", type=click.Choice(["adversarial", "lower", "ode"]),
              required=True)
@click.option("--n", default=8, show_default=True)
@click.option("--r", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output-dir", default=None,
              help="also write certificates.txt there")
def certify(case, n, r, seed, output_dir):
    """Build one counterexample and print its certificate."""
    from .identify import (counterexample_linear_adversarial,
                           counterexample_linear_lower, counterexample_ode)

    rng = np.random.default_rng(seed)
    try:
        if case == "adversarial":
            *_, cert = counterexample_linear_adversarial(n, max(2, r // 2),
                                                         seed=seed)
        else:
            A = rng.normal(size=(n, r))
            B = rng.normal(size=(r, n))
            s = np.linalg.norm(A @ B, 2)
            A *= np.sqrt(0.9 / s)
            B *= np.sqrt(0.9 / s)
            if case == "lower":
                C = rng.normal(size=(n, r - 2))
                _, cert = counterexample_linear_lower(A, B, C, seed=seed)
            else:
                C = rng.normal(size=(n, max(1, n - r - 1)))
                _, cert = counterexample_ode(A, B, C, seed=seed)
    except SdeIdentifyError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    text = cert.to_text()
    click.echo(text)
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "certificates.txt"), "w") as f:
            f.write(text + "\n")
    sys.exit(0 if cert.passed else 1)


@main.command()
@click.option("--drift-file", required=True,
              help="drift description (text format, see README)")
@click.option("--epsilon", default=0.01, show_default=True)
@click.option("--shift", default="", help="whitespace-separated c vector")
@click.option("--dt", default=0.01, show_default=True)
@click.option("--burnin", default=100, show_default=True)
@click.option("--thinning", default=300, show_default=True)
@click.option("--n-samples", default=1000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--output", default="samples.csv", show_default=True)
def simulate(drift_file, epsilon, shift, dt, burnin, thinning, n_samples,
             seed, output):
    """Sample a stationary batch from a serialized drift."""
    from .models import drift_from_text, fixed_point
    from .simulate import SamplerConfig, euler_maruyama

    try:
        drift = drift_from_text(open(drift_file).read())
        c = (np.array([float(x) for x in shift.split()])
             if shift else np.zeros(drift.n))
        if c.shape != (drift.n,):
            raise ConfigError("shift length must match drift dimension")
        cfg = SamplerConfig(dt=dt, burnin=burnin, thinning=thinning,
                            n_samples=n_samples, seed=seed)
        try:
            x0 = fixed_point(drift, c)
        except SdeIdentifyError:
            x0 = c
        samples = euler_maruyama(drift, c, epsilon, x0, cfg)
        reports.write_csv(output, [f"x{i}" for i in range(drift.n)],
                          [dict(zip([f"x{i}" for i in range(drift.n)], row))
                           for row in samples])
    except (SdeIdentifyError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    click.echo(f"wrote {output} ({len(samples)} samples)")


if __name__ == "__main__":
    main()
