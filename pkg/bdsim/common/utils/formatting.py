import click
from bdsim import __version__


def spacer(length=60, **kwargs):
    click.echo('─' * length, **kwargs)


def logo():
    logo = r'''  _         _       _
 | |__   __| |  ___(_)_ __ ___
 | '_ \ / _` | / __| | '_ ` _ \
 | |_) | (_| | \__ \ | | | | | |
 |_.__/ \__,_| |___/_|_| |_| |_|
  {}'''.format(f'version {__version__}'.rjust(30))
    click.echo(logo, err=True)
    spacer(length=len(logo.splitlines()[-1]) + 2, err=True)
    click.echo(err=True)


def echo_settings(settings: dict):
    click.echo('Settings:', err=True)
    for label, value in settings.items():
        if value is not None:
            click.echo(f'- {label}: {value}', err=True)
    click.echo('', err=True)


def format_float(value: float) -> str:
    """Shortest representation that reads back to the same double"""
    return repr(float(value))
