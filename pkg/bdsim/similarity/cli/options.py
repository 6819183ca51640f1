from typing import Tuple

import click

from bdsim.common.utils.formatting import echo_settings
from bdsim.common.utils.io import parse_config, ExperimentConfig
from bdsim.similarity.methods.model import ProcessSpec, StateWindow
from bdsim.similarity.methods.solver import auto_window
from bdsim.similarity.methods.transform import transform_process, TransformedProcess
from bdsim.similarity.methods.verify import resolve_windows, build_nu_from_config, config_context


def config_argument(f):
    return click.argument('config_path', metavar='CONFIG', required=True,
                          type=click.Path(exists=True, dir_okay=False))(f)


def window_options(f):
    f = click.option('--window-max', type=int, help='Upper edge of the state window (default: auto-sized)')(f)
    f = click.option('--window-min', type=int, help='Lower edge of the state window (default: auto-sized)')(f)
    return f


def output_option(f):
    return click.option('--output', required=False, help='Output CSV file path (default: stdout)')(f)


def transformed_option(f):
    return click.option('--transformed', is_flag=True, default=False,
                        help='Use the transformed process instead of the original one')(f)


def load_config(config_path: str, **overrides) -> ExperimentConfig:
    config = parse_config(config_path).with_overrides(**overrides)
    echo_settings({
        'Config': config_path,
        'Rates': config.kind,
        'nu mode': config.nu_mode,
        'Start state k': config.k,
        'Final time': config.t_max,
        'Window': config.window,
    })
    return config


def build_transformed(config: ExperimentConfig) -> TransformedProcess:
    with config_context(config, 'kind'):
        spec = config.build_spec()
        nu_window, _ = resolve_windows(config, spec)
    with config_context(config, 'nu_mode'):
        nu = build_nu_from_config(config, spec, nu_window)
        return transform_process(spec, nu)


def target_process(config: ExperimentConfig, transformed: bool, s: int = None) -> Tuple[ProcessSpec, StateWindow]:
    """Rates to work with and the window to solve them on"""
    if transformed:
        process = build_transformed(config)
        click.echo(f'Transformed process on window {process.window}', err=True)
        return process.spec, process.window
    with config_context(config, 'kind'):
        spec = config.build_spec()
        window = config.window
        if window is None:
            window = spec.domain.interior() if spec.domain is not None else \
                auto_window(spec, config.k, config.t_max, s=s, rel_tol=config.rel_tol)
    click.echo(f'Original process on window {window}', err=True)
    return spec, window
