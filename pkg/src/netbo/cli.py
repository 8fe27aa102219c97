"""Command-line interface: run experiments, list problems, self-check."""

from __future__ import annotations

import sys

import click

from . import __version__
from .acquisition import Method, SAAConfig
from .errors import NetboError
from .harness import ExperimentConfig, run_experiment, write_results
from .network import get_problem, problem_ids


@click.group()
@click.version_option(version=__version__)
def main():
    """Bayesian optimization of function networks."""


@main.command()
@click.option("--problem", "problem_id", required=True, help="Registered problem id.")
@click.option(
    "--method",
    type=click.Choice([m.value for m in Method]),
    required=True,
    help="Point-selection strategy.",
)
@click.option("--budget", type=click.IntRange(min=1), required=True,
              help="Evaluations after the initial design.")
@click.option("--replications", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed.")
@click.option("--mc-samples", type=click.IntRange(min=1), default=128, show_default=True,
              help="Base samples per acquisition maximization.")
@click.option("--restarts", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--raw-candidates", type=click.IntRange(min=1), default=512, show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Parallel replications.")
@click.option("--out", "output_dir", type=click.Path(file_okay=False), required=True)
def run(problem_id, method, budget, replications, seed, mc_samples, restarts,
        raw_candidates, workers, output_dir):
    """Run one experiment and write trace CSVs, a manifest, and a summary."""
    try:
        get_problem(problem_id)
    except KeyError as exc:
        raise click.ClickException(str(exc)) from exc
    if raw_candidates < restarts:
        raise click.ClickException("--raw-candidates must be >= --restarts")
    cfg = ExperimentConfig(
        problem_id=problem_id,
        method=Method(method),
        budget=budget,
        replications=replications,
        base_seed=seed,
        saa=SAAConfig(
            mc_samples=mc_samples,
            restarts=restarts,
            raw_candidates=raw_candidates,
            seed=seed,
        ),
        output_dir=output_dir,
        workers=workers,
    )
    try:
        traces = run_experiment(cfg)
        paths = write_results(traces, cfg)
    except NetboError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc
    finals = [t.final_best for t in traces]
    click.echo(f"wrote {len(paths)} files to {output_dir}")
    click.echo(f"final best over {replications} replication(s): "
               f"mean={sum(finals) / len(finals):.6g} max={max(finals):.6g}")


@main.command()
def problems():
    """List registered problems with dimensions and reference optima."""
    click.echo(f"{'id':<16} {'D':>3} {'K':>3} {'constraint':<11} reference optimum")
    for pid in problem_ids():
        p = get_problem(pid)
        ref = "unknown" if p.reference_optimum is None else f"{p.reference_optimum:.9g}"
        cons = f"sum<={p.constraint.cap:g}" if p.constraint is not None else "box"
        click.echo(f"{pid:<16} {p.decision_dim:>3} {p.node_count:>3} {cons:<11} {ref}")


@main.command()
def check():
    """Run the invariant/oracle self-test battery."""
    from .selfcheck import run_all

    if not run_all(click.echo):
        sys.exit(1)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
