"""Command line entry point: serve an experiment log directory, optionally
generating a synthetic fixture into it first."""

from __future__ import annotations

from pathlib import Path

import click

from .store.fixtures import (
    classifier_fixture_spec,
    generate_demo,
    generate_fixture,
    vae_fixture_spec,
)

FIXTURES = {
    "classifier": classifier_fixture_spec,
    "uc1": classifier_fixture_spec,
    "vae": vae_fixture_spec,
    "uc3": vae_fixture_spec,
}


@click.command()
@click.option("--log-dir", required=True, type=click.Path(path_type=Path),
              help="Experiment log directory to serve.")
@click.option("--port", default=8080, show_default=True, type=int)
@click.option("--cache-mb", default=256, show_default=True, type=int,
              help="Response cache byte budget in MB.")
@click.option("--watch/--no-watch", default=True, show_default=True,
              help="Reload the catalog when the log directory changes.")
@click.option("--fixture", default=None,
              type=click.Choice(sorted(FIXTURES) + ["demo"]),
              help="Generate this synthetic fixture into --log-dir, then serve.")
@click.option("--seed", default=7, show_default=True, type=int,
              help="Seed for --fixture generation.")
def main(log_dir: Path, port: int, cache_mb: int, watch: bool,
         fixture: str | None, seed: int) -> None:
    """Serve a model-debugging API over an experiment log directory."""
    if fixture is not None:
        if fixture == "demo":
            catalog = generate_demo(seed, log_dir)
        else:
            catalog = generate_fixture(FIXTURES[fixture](), seed, log_dir)
        click.echo(f"generated fixture '{fixture}' with {len(catalog.models)} models "
                   f"in {log_dir}")
    from .server import serve

    serve(log_dir, port=port, cache_mb=cache_mb, watch=watch)


if __name__ == "__main__":
    main()
