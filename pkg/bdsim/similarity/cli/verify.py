import sys

import click

from bdsim.common.utils.formatting import logo, spacer
from bdsim.common.utils.io import write_csv
from bdsim.similarity.cli.options import config_argument, window_options, output_option, load_config
from bdsim.similarity.methods.verify import run_verify


@click.command()
@config_argument
@click.option('--k', type=int, help='Initial state')
@click.option('--s', type=int, help='Target state of first-passage times and crossings')
@click.option('--n', type=int, help='Final state of the renewal check')
@click.option('--t-max', type=float, help='Final time')
@click.option('--grid-points', type=int, help='Number of points of the time grid')
@click.option('--rel-tol', type=float, help='Relative tolerance of the integrator')
@window_options
@output_option
def verify(config_path, k, s, n, t_max, grid_points, rel_tol, window_min, window_max, output):
    """Check the transformed process against the predictions of its nu sequence.

    Builds nu, transforms the rates, solves both processes independently and compares
    transition probabilities, first-passage-time densities, crossing probabilities and the
    renewal identity. Writes a CSV report with columns check, process, max_residual, tolerance,
    passed and exits with status 1 when any check fails.

    EXAMPLES:

        \b
        bdsim verify configs/constant_rates.cfg --output report.csv

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, k=k, s=s, n=n, t_max=t_max, grid_points=grid_points, rel_tol=rel_tol,
                         window_min=window_min, window_max=window_max)
    report = run_verify(config, verbose=True)
    write_csv(report.to_dataframe(), output or config.output)

    spacer(err=True)
    click.echo(f'nu window {report.nu_window}, solved on {report.solve_window}', err=True)
    if not report.passed:
        click.echo(f'FAILED: {", ".join(report.failed_checks)}', err=True)
        sys.exit(1)
    click.echo('All checks passed', err=True)
