import click

from bdsim.common.utils.formatting import logo
from bdsim.common.utils.io import write_csv
from bdsim.similarity.cli.options import config_argument, window_options, output_option, transformed_option, \
    load_config, target_process
from bdsim.similarity.methods.simulate import estimate_fpt, estimate_transition, default_horizon_for
from bdsim.similarity.methods.verify import config_context


@click.command()
@config_argument
@click.option('--mode', type=click.Choice(['fpt', 'transition']), default='fpt', show_default=True,
              help='Estimate first-passage times to s, or the distribution of X_t')
@click.option('--k', type=int, help='Initial state')
@click.option('--s', type=int, help='Target state (fpt mode)')
@click.option('--t', 't_max', type=float, help='Time of the distribution (transition mode)')
@click.option('--t-end', type=float, help='Horizon of first-passage times (default: from the config or the rates)')
@click.option('--trials', type=int, help='Number of simulated paths')
@click.option('--bins', type=int, help='Number of histogram bins')
@click.option('--seed', type=int, help='Master random seed')
@click.option('--threads', type=int, help='Number of worker processes')
@window_options
@transformed_option
@output_option
def simulate(config_path, mode, k, s, t_max, t_end, trials, bins, seed, threads, window_min, window_max,
             transformed, output):
    """Monte Carlo estimates from exact simulation of trajectories.

    In fpt mode writes a CSV with columns bin_center, density, where the density integrates to the
    fraction of paths that reached s, and prints a one-line crossing estimate summary.
    In transition mode writes the empirical distribution of X_t with columns n, count, frequency,
    standard_error.

    Results only depend on the seed, not on the number of threads.

    EXAMPLES:

        \b
        # Crossing probability from 0 to 1 for the constant rates example
        bdsim simulate configs/constant_rates.cfg --k 0 --s 1 --trials 200000 --threads 4

        \b
        # Same for the transformed process, its window is sized for the horizon
        bdsim simulate configs/constant_rates.cfg --k 0 --s 1 --transformed

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, k=k, s=s, t_max=t_max, trials=trials, bins=bins, seed=seed,
                         threads=threads, horizon=t_end, window_min=window_min, window_max=window_max)
    sizing = config
    if mode == 'fpt':
        with config_context(config, 'kind'):
            horizon = config.horizon or default_horizon_for(config.build_spec()) or config.t_max
        # paths run up to the horizon, the window has to hold them until then
        sizing = config.with_overrides(t_max=horizon)
    spec, _ = target_process(sizing, transformed, s=config.s)

    if mode == 'transition':
        with config_context(config, 'k'):
            result = estimate_transition(spec, config.k, config.t_max, trials=config.trials, seed=config.seed,
                                         threads=config.threads, verbose=True)
        click.echo(f'Mean number of jumps by t = {config.t_max}: {result.mean_jumps:.6g}', err=True)
        write_csv(result.to_dataframe(), output or config.output)
        return

    with config_context(config, 's'):
        density, crossing = estimate_fpt(spec, config.k, config.s, horizon, trials=config.trials, bins=config.bins,
                                         seed=config.seed, threads=config.threads, verbose=True)
    click.echo(f'point={crossing.point:.17g} ci={crossing.ci_half_width:.17g} '
               f'censored_fraction={crossing.censored_fraction:.17g}', err=True)
    df = density.to_dataframe()[['t', 'g']].rename(columns={'t': 'bin_center', 'g': 'density'})
    write_csv(df, output or config.output)
