import click
import numpy as np
import pandas as pd

from bdsim.common import config
from bdsim.common.utils.formatting import logo, echo_settings
from bdsim.common.utils.io import write_csv
from bdsim.similarity.methods.analytic import transition_prob_const_grid, transformed_transition_const, \
    fpt_density_const_limit, fpt_density_const_grid, transformed_fpt_const, crossing_prob_const
from bdsim.similarity.methods.model import StateWindow
from bdsim.similarity.methods.transform import build_nu_constant_ratio


@click.command()
@click.option('--lambda', 'lam', type=float, default=1.0, show_default=True, help='Birth rate')
@click.option('--mu', type=float, default=2.0, show_default=True, help='Death rate')
@click.option('--beta', type=float, default=1.0, show_default=True, help='Parameter of nu_n = 1 + beta (mu / lambda)^n')
@click.option('--k', type=int, default=0, show_default=True, help='Initial state')
@click.option('--n', type=int, default=1, show_default=True, help='State of the transition probability')
@click.option('--s', type=int, default=1, show_default=True, help='Target state of the first-passage time')
@click.option('--t-max', type=float, default=10.0, show_default=True, help='Final time')
@click.option('--grid-points', type=int, default=config.GRID_POINTS, show_default=True,
              help='Number of points of the time grid')
@click.option('--output', required=False, help='Output CSV file path (default: stdout)')
def example(lam, mu, beta, k, n, s, t_max, grid_points, output):
    """Closed forms for constant rates and their transformed counterparts.

    Writes a CSV with columns t, p, p_tilde, g, g_tilde, ratio, where p = p_{k,n}(t), g = g_{k,s}(t)
    and ratio = p_tilde / p, which equals nu_n / nu_k at every t.

    EXAMPLES:

        \b
        bdsim example --lambda 1 --mu 2 --beta 1 --k 0 --n 1 --s 1 --t-max 10

    """
    logo()
    echo_settings({
        'Rates': f'lambda = {lam}, mu = {mu}',
        'nu': f'1 + {beta} * {mu / lam:g}^n',
        'States': f'k = {k}, n = {n}, s = {s}',
    })
    times = np.linspace(0, t_max, grid_points)
    p = transition_prob_const_grid(lam, mu, k, n, times)
    p_tilde = np.array([transformed_transition_const(lam, mu, beta, k, n, t) for t in times])
    g = fpt_density_const_grid(lam, mu, k, s, times)
    nu = build_nu_constant_ratio(mu / lam, beta, StateWindow(min(k, n, s) - 1, max(k, n, s) + 1))
    g_tilde = np.array([transformed_fpt_const(lam, mu, beta, k, s, t) if t > 0
                        else nu.ratio(k, s) * fpt_density_const_limit(lam, mu, k, s) for t in times])
    # p = 0 only at t = 0 for k != n, where the ratio is continued by its constant value
    ratio = np.divide(p_tilde, p, out=np.full(len(times), nu.ratio(k, n)), where=p > 0)
    crossing = crossing_prob_const(lam, mu, k, s)
    click.echo(f'nu_n / nu_k = {nu.ratio(k, n):.17g}', err=True)
    click.echo(f'P({k} -> {s}) = {crossing:.17g}, transformed {nu.ratio(k, s) * crossing:.17g}', err=True)
    write_csv(pd.DataFrame({
        't': times,
        'p': p,
        'p_tilde': p_tilde,
        'g': g,
        'g_tilde': g_tilde,
        'ratio': ratio,
    }), output)
