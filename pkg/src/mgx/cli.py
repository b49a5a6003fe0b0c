"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 sweep finished with
per-cell failures recorded in the CSV.
"""

from dataclasses import asdict
import json
import os
import sys

import click
import numpy as np

from . import plots, sweep as sweep_mod
from .bench import run_bench, write_bench_csv
from .coverage import check_assumptions
from .data import load_dataset, save_dataset
from .errors import ConfigError, MgxError
from .games import load_game, save_game
from .instances import build_agnostic_pair, build_tree_pair, random_linear, random_tabular
from .pmvi import GameShape, RobustPMVI
from .solve import ne_backward_induction


@click.group()
def main():
    """Robust offline equilibrium learning for zero-sum Markov games."""


@main.group()
def instances():
    """Build benchmark game instances."""


@instances.command("make")
@click.option("--kind", type=click.Choice(["tree", "agnostic", "random-tabular", "random-linear"]),
              required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("-S", "--states", "S", type=int, default=3)
@click.option("-A", "--actions-max", "A", type=int, default=2)
@click.option("-B", "--actions-min", "B", type=int, default=2)
@click.option("-H", "--horizon", "H", type=int, default=4)
@click.option("-d", "--dim", "d", type=int, default=None)
@click.option("--alpha", type=float, default=0.1)
@click.option("--gamma", type=float, default=0.0)
@click.option("--p", type=float, default=0.5, help="behavior skew of the agnostic pair")
@click.option("--epsilon", type=float, default=0.1)
@click.option("--n-samples", "N", type=int, default=100)
@click.option("--seed", type=int, default=0)
def instances_make(kind, out_path, S, A, B, H, d, alpha, gamma, p, epsilon, N, seed):
    """Write g.json (pair kinds also write g_prime.json and attack.json)."""
    try:
        if kind == "random-tabular":
            save_game(random_tabular(S, A, B, H, gamma=gamma, seed=seed), out_path)
        elif kind == "random-linear":
            save_game(random_linear(S, A, B, H, d or S * A * B, gamma=gamma, seed=seed), out_path)
        elif kind == "tree":
            pair = build_tree_pair(S, A, B, H, alpha, seed=seed)
            save_game(pair.g, out_path)
            base, ext = os.path.splitext(out_path)
            save_game(pair.g_prime, f"{base}_prime{ext}")
            with open(f"{base}_attack{ext}", "w") as fh:
                json.dump({"target": list(pair.target), "alpha": pair.alpha, "q": pair.q,
                           "ne_path": list(pair.ne_path), "rho": pair.rho.rho.tolist()}, fh)
            click.echo(f"wrote {out_path}, {base}_prime{ext}, {base}_attack{ext}")
            return
        elif kind == "agnostic":
            pair = build_agnostic_pair(p, epsilon, N, seed=seed)
            save_game(pair.g1, out_path)
            base, ext = os.path.splitext(out_path)
            save_game(pair.g2, f"{base}_prime{ext}")
            with open(f"{base}_attack{ext}", "w") as fh:
                json.dump({"p": pair.p, "epsilon": pair.epsilon, "N": pair.N,
                           "coupling_law": {str(k): v for k, v in pair.coupling_law().items()},
                           "rho": pair.rho.rho.tolist()}, fh)
            click.echo(f"wrote {out_path}, {base}_prime{ext}, {base}_attack{ext}")
            return
        click.echo(f"wrote {out_path}")
    except (MgxError, ValueError) as exc:
        raise click.ClickException(str(exc))


@main.group()
def pmvi():
    """Run the pessimistic learners."""


@pmvi.command("run")
@click.option("--game", "game_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--estimator", type=click.Choice(["rls", "scram", "filter", "ridge"]), default="scram")
@click.option("--bonus", type=click.Choice(["zero", "scram-lru", "clean-cov",
                                            "clean-cov-improved", "filter-tabular"]),
              default="zero")
@click.option("--epsilon", type=float, default=0.0)
@click.option("--delta", type=float, default=0.1)
@click.option("--c-bonus", type=float, default=1.0)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
def pmvi_run(game_path, data_path, estimator, bonus, epsilon, delta, c_bonus, seed, out_path):
    """Learn a strategy pair from a dataset and write result.json."""
    mg = load_game(game_path)
    D = load_dataset(data_path)
    learner = RobustPMVI(estimator=estimator, bonus_kind=bonus, epsilon=epsilon,
                         gamma=mg.gamma, delta=delta, c_bonus=c_bonus, seed=seed)
    learner.fit(D.learner_view(), GameShape.from_game(mg))
    out = learner.output_
    doc = {
        "pi": out.pair.pi.tolist(),
        "nu": out.pair.nu.tolist(),
        "pi_aux": out.pair_aux.pi.tolist(),
        "nu_aux": out.pair_aux.nu.tolist(),
        "V_lower": out.V_lower.tolist(),
        "V_upper": out.V_upper.tolist(),
        "Q_lower": out.Q_lower.tolist(),
        "Q_upper": out.Q_upper.tolist(),
        "diagnostics": [
            {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in diag.items()}
            for diag in (out.diagnostics or [])
        ],
        "params": {"estimator": estimator, "bonus": bonus, "epsilon": epsilon,
                   "delta": delta, "c_bonus": c_bonus, "seed": seed},
    }
    with open(out_path, "w") as fh:
        json.dump(doc, fh)
    click.echo(f"wrote {out_path}")


@main.group()
def coverage():
    """Coverage diagnostics."""


@coverage.command("report")
@click.option("--game", "game_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def coverage_report(game_path, data_path, out_path):
    """Evaluate the coverage assumptions of a dataset against a game."""
    mg = load_game(game_path)
    D = load_dataset(data_path)
    ne, _ = ne_backward_induction(mg)
    report = check_assumptions(D, mg, ne)
    with open(out_path, "w") as fh:
        json.dump(asdict(report) | {"lru_reciprocal": report.lru_reciprocal}, fh)
    click.echo(f"wrote {out_path}")


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--workers", type=int, default=1)
def sweep_cmd(config_path, out_dir, workers):
    """Run the experiment sweep described by a TOML config."""
    try:
        cfg = sweep_mod.ExperimentConfig.from_toml(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    rows = sweep_mod.run_sweep(cfg, csv_path, workers=workers,
                               progress=lambda row: click.echo(row.to_csv()))
    click.echo(f"wrote {csv_path} ({len(rows)} rows)")
    if sweep_mod.has_failures(rows):
        click.echo("some cells failed; see error rows", err=True)
        sys.exit(3)


@main.command("plot")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def plot_cmd(csv_path, out_dir):
    """Render SVG charts from a sweep results CSV."""
    rows = sweep_mod.read_rows(csv_path)
    try:
        written = plots.emit_plots(rows, out_dir)
    except MgxError as exc:
        click.echo(f"plot error: {exc}", err=True)
        sys.exit(2)
    for path in written:
        click.echo(f"wrote {path}")


@main.group()
def bench():
    """Estimator benchmarks."""


@bench.command("estimators")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--which", multiple=True, type=click.Choice(["scram", "rls", "filter"]),
              default=("scram", "rls", "filter"))
@click.option("-d", "--dim", "d", type=int, default=10)
@click.option("-n", "--n-samples", "n", type=int, default=5000)
@click.option("--epsilon", "epsilons", multiple=True, type=float, default=(0.05, 0.1))
@click.option("--magnitude", "magnitudes", multiple=True, type=float, default=(50.0,))
@click.option("--seeds", type=int, default=5, help="number of seeds (0..seeds-1)")
def bench_estimators(out_path, which, d, n, epsilons, magnitudes, seeds):
    """Run the planted robustness benchmarks and write their CSV."""
    rows = run_bench(list(which), d, n, list(epsilons), list(magnitudes), list(range(seeds)))
    write_bench_csv(rows, out_path)
    click.echo(f"wrote {out_path} ({len(rows)} rows)")


@main.group("data")
def data_group():
    """Dataset utilities."""


@data_group.command("sample")
@click.option("--game", "game_path", required=True, type=click.Path(exists=True))
@click.option("-K", "--trajectories", "K", type=int, required=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--learner-facing", is_flag=True, default=False)
def data_sample(game_path, K, seed, out_path, learner_facing):
    """Sample a compliant dataset under the uniform behavior policy."""
    from .data import sample_dataset, uniform_behavior
    mg = load_game(game_path)
    D = sample_dataset(mg, uniform_behavior(mg), K, seed)
    save_dataset(D, out_path, learner_facing=learner_facing)
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
