import click
import pandas as pd

from bdsim.common.utils.formatting import logo
from bdsim.common.utils.io import write_csv, format_process_spec
from bdsim.similarity.cli.options import config_argument, window_options, output_option, load_config, \
    build_transformed
from bdsim.similarity.methods.verify import resolve_windows, build_nu_from_config, config_context


@click.command()
@config_argument
@window_options
@output_option
def nu(config_path, window_min, window_max, output):
    """Solve the three-term recurrence for the sequence nu.

    Writes a CSV with columns n, nu, d (= nu_{n+1} - nu_n) and the recurrence residual.

    EXAMPLES:

        \b
        # Closed-form sequence 1 + beta c^n for the rates in the config
        bdsim nu configs/constant_rates.cfg --window-min -10 --window-max 10

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, window_min=window_min, window_max=window_max)
    with config_context(config, 'kind'):
        spec = config.build_spec()
        window, _ = resolve_windows(config, spec)
    with config_context(config, 'nu_mode'):
        sequence = build_nu_from_config(config, spec, window)

    click.echo(f'Sequence nu is {sequence.direction} on window {window}', err=True)
    write_csv(sequence.to_dataframe(spec), output or config.output)


@click.command()
@config_argument
@window_options
@output_option
@click.option('--as-config', is_flag=True, default=False,
              help='Write the transformed rates as a config file that can be used as input again')
def transform(config_path, window_min, window_max, output, as_config):
    """Transform a birth-and-death process with the sequence nu.

    The transformed rates are lambda~_n = lambda_n nu_{n+1} / nu_n and mu~_n = mu_n nu_{n-1} / nu_n,
    defined on the interior of the nu window.

    EXAMPLES:

        \b
        # Table of original and transformed rates
        bdsim transform configs/constant_rates.cfg --window-min -10 --window-max 10

        \b
        # Transformed rates as a new config
        bdsim transform configs/constant_rates.cfg --as-config --output transformed.cfg

    CONFIG: Experiment config file path
    """
    logo()
    config = load_config(config_path, window_min=window_min, window_max=window_max)
    process = build_transformed(config)
    click.echo(f'Transformed process on window {process.window}', err=True)

    if as_config:
        text = format_process_spec(process.spec)
        output = output or config.output
        if output:
            with open(output, 'wt') as f:
                f.write(text)
        else:
            click.echo(text, nl=False)
        return

    states = process.window.states
    births, deaths = process.source.rates(states)
    write_csv(pd.DataFrame({
        'n': states,
        'lambda': births,
        'mu': deaths,
        'nu': process.nu.values[1:-1],
        'lambda_tilde': process.spec.births,
        'mu_tilde': process.spec.deaths,
    }), output or config.output)
