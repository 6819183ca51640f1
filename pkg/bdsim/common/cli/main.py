import click
import traceback
from bdsim.common.utils.formatting import spacer
from bdsim.similarity.cli.transform import nu, transform
from bdsim.similarity.cli.solve import solve, fpt
from bdsim.similarity.cli.simulate import simulate
from bdsim.similarity.cli.example import example
from bdsim.similarity.cli.verify import verify


class MainGroup(click.Group):
    def __call__(self, *args, **kwargs):
        try:
            return self.main(*args, **kwargs)
        except Exception as e:
            message = e.args[0] if e.args else ''
            traceback.print_exc()
            spacer(err=True)
            click.echo(f'bdsim failed with {type(e).__name__}' + (f': {message}' if message else ''), err=True)
            if len(e.args) > 1:
                spacer(err=True)
                for arg in e.args[1:]:
                    click.echo(arg, err=True)
                spacer(err=True)
            exit(1)


@click.group(cls=MainGroup)
def main():
    pass

# Register all commands
# Sequence and transformation
main.add_command(nu)
main.add_command(transform)
# Transition probabilities and first-passage times
main.add_command(solve)
main.add_command(fpt)
main.add_command(simulate)
main.add_command(example)
# End-to-end check
main.add_command(verify)


if __name__ == '__main__':
    main()
