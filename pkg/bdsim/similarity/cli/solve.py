import click

from bdsim.common.utils.formatting import logo
from bdsim.common.utils.io import write_csv
from bdsim.similarity.cli.options import config_argument, window_options, output_option, transformed_option, \
    load_config, target_process
from bdsim.similarity.methods.solver import solve_forward, fpt_numeric, crossing_from_fpt
from bdsim.similarity.methods.verify import config_context


def grid_options(f):
    f = click.option('--rel-tol', type=float, help='Relative tolerance of the integrator')(f)
    f = click.option('--grid-points', type=int, help='Number of points of the time grid')(f)
    f = click.option('--t-max', type=float, help='Final time')(f)
    f = click.option('--k', type=int, help='Initial state')(f)
    return f


@click.command()
@config_argument
@grid_options
@window_options
@transformed_option
@output_option
def solve(config_path, k, t_max, grid_points, rel_tol, window_min, window_max, transformed, output):
    """Transition probabilities p_{k,n}(t) from the truncated forward equations.

    Writes a CSV with columns t, n, p. Probability leaving the window is reported as deficit.

    EXAMPLES:

        \b
        bdsim solve configs/constant_rates.cfg --k 0 --t-max 2 --output p.csv

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, k=k, t_max=t_max, grid_points=grid_points, rel_tol=rel_tol,
                         window_min=window_min, window_max=window_max)
    spec, window = target_process(config, transformed)
    with config_context(config, 'k'):
        result = solve_forward(spec, window, config.k, config.times(), config.rel_tol)

    click.echo(f'Truncation deficit at t = {config.t_max}: {result.deficit[-1]:.3g}', err=True)
    write_csv(result.to_dataframe(), output or config.output)


@click.command()
@config_argument
@grid_options
@click.option('--s', type=int, help='Target state')
@window_options
@transformed_option
@output_option
def fpt(config_path, k, t_max, grid_points, rel_tol, s, window_min, window_max, transformed, output):
    """First-passage-time density g_{k,s}(t) with s made absorbing.

    Writes a CSV with columns t, g, absorbed_mass. The density is defective when the absorbed
    mass stays below 1.

    EXAMPLES:

        \b
        bdsim fpt configs/constant_rates.cfg --k 0 --s 2 --t-max 10

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, k=k, s=s, t_max=t_max, grid_points=grid_points, rel_tol=rel_tol,
                         window_min=window_min, window_max=window_max)
    spec, window = target_process(config, transformed, s=config.s)
    with config_context(config, 's'):
        result = fpt_numeric(spec, window, config.k, config.s, config.times(), config.rel_tol)

    click.echo(f'{crossing_from_fpt(result)}, censored mass {result.censored_mass:.6g}', err=True)
    write_csv(result.to_dataframe(), output or config.output)
