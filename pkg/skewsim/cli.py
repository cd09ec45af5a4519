#!/usr/bin/env python3
"""skewsim CLI Main Program"""

import json
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import click
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import __version__
from .kernels.density import (SkewParams, TruncationPolicy, delta, envelope_bound, rest_bound,
                              transition_density, truncation_level)
from .oracles.quadrature import QuadratureSpec
from .oracles.suites import SUITES, SuiteContext, run_suite
from .sampling.sampler import acceptance_stats, sample_path, sample_sharded
from .sampling.streams import RandomStream
from .utils.config import (get_default_params, get_log_level, get_quadrature_spec,
                           get_sampler_settings, get_truncation_policy, load_config)
from .utils.errors import ConfigurationError, DomainError, QuadratureError
from .utils.logger import setup_logging
from .utils.output import emit

# Diagnostics go to stderr so stdout carries only data
console = Console(stderr=True)

EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_VALIDATION = 4

DENSITY_HEADER = ('y', 'density', 'error_bound', 'terms')


@dataclass
class RunConfig:
    """Everything needed to reproduce one command run."""

    command: str
    params: SkewParams
    policy: TruncationPolicy
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    t: float = 1.0
    x: float = 0.5
    ymin: Optional[float] = None
    ymax: Optional[float] = None
    ysteps: int = 401
    barrier_eps: float = 1e-9
    n: int = 50000
    seed: int = 20240501
    stream: int = 0
    shards: int = 1
    dt: float = 0.01
    horizon: float = 1.0
    suite: Optional[str] = None
    walkers: int = 100000
    dx: float = 0.01
    format: str = 'csv'
    out: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data = dict(self.__dict__)
        data['params'] = self.params.to_dict()
        data['policy'] = self.policy.to_dict()
        data['quadrature'] = self.quadrature.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        try:
            values = dict(data)
            values['params'] = SkewParams(**values['params'])
            values['policy'] = TruncationPolicy(**values['policy'])
            values['quadrature'] = QuadratureSpec(**values.get('quadrature', {}))
            return cls(**values)
        except (KeyError, TypeError) as e:
            raise ConfigurationError(f"Embedded run config is incomplete: {e}") from e


def _fail(error: Exception, code: int):
    console.print(f"[bold red]Error:[/bold red] {str(error)}")
    click.echo(json.dumps({'error': {'type': type(error).__name__, 'message': str(error)}}))
    sys.exit(code)


@contextmanager
def _guard():
    """Map package errors to exit codes."""
    try:
        yield
    except ConfigurationError as e:
        _fail(e, EXIT_USAGE)
    except (DomainError, QuadratureError) as e:
        _fail(e, EXIT_DOMAIN)


def _override(obj, cls, **changes):
    values = obj.to_dict()
    values.update({k: v for k, v in changes.items() if v is not None})
    return cls(**values)


def _load_run(command: str, opts: Dict[str, Any]) -> RunConfig:
    """Build the RunConfig from --from-config, or from the config file plus flags."""
    setup_logging('INFO' if opts.get('verbose') else 'WARNING')

    if opts.get('from_config'):
        try:
            with open(opts['from_config'], 'r', encoding='utf-8') as f:
                embedded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Cannot read {opts['from_config']}: {e}") from e
        run = RunConfig.from_dict(embedded.get('config', embedded))
        if run.command != command:
            raise ConfigurationError(
                f"Embedded config is for '{run.command}', not '{command}'")
        run.out = opts.get('out') or run.out
        run.format = opts.get('fmt') or run.format
        return run

    cfg = load_config(opts.get('config_path') or 'config.yaml')
    if not opts.get('verbose'):
        setup_logging(get_log_level(cfg))

    params = _override(get_default_params(cfg), SkewParams,
                       z1=opts.get('z1'), z2=opts.get('z2'), beta1=opts.get('beta1'),
                       beta2=opts.get('beta2'), mu=opts.get('mu'))
    policy = _override(get_truncation_policy(cfg), TruncationPolicy,
                       n_max=opts.get('nmax'), tol=opts.get('tol'))
    sampler = get_sampler_settings(cfg)
    model, output, walk = cfg.get('model', {}), cfg.get('output', {}), cfg.get('walk', {})

    def pick(name, fallback):
        value = opts.get(name)
        return fallback if value is None else value

    return RunConfig(
        command=command, params=params, policy=policy, quadrature=get_quadrature_spec(cfg),
        t=pick('t', model.get('t', 1.0)),
        x=pick('x0', pick('x', model.get('x', 0.5))),
        ymin=opts.get('ymin'), ymax=opts.get('ymax'),
        ysteps=pick('ysteps', output.get('ysteps', 401)),
        barrier_eps=output.get('barrier_eps', 1e-9),
        n=pick('n', sampler.n), seed=pick('seed', sampler.seed),
        stream=pick('stream', sampler.stream), shards=pick('shards', sampler.shards),
        dt=pick('dt', 0.01), horizon=pick('horizon', 1.0), suite=opts.get('suite'),
        walkers=walk.get('walkers', 100000), dx=walk.get('dx', 0.01),
        format=pick('fmt', output.get('format', 'csv')), out=opts.get('out'))


def barrier_grid(ymin: float, ymax: float, ysteps: int, params: SkewParams,
                 eps: float) -> np.ndarray:
    """Evenly spaced y values; each barrier inside the range appears as z - eps and z + eps."""
    if not ymin < ymax:
        raise DomainError(f"ymin must be below ymax, got {ymin} and {ymax}")
    if ysteps < 2:
        raise DomainError(f"ysteps must be at least 2, got {ysteps}")
    grid = np.linspace(ymin, ymax, int(ysteps))
    for z in (params.z1, params.z2):
        if ymin < z < ymax:
            grid = grid[np.abs(grid - z) > eps]
            grid = np.concatenate([grid, [z - eps, z + eps]])
    return np.sort(grid)


def _stats_table(title: str, stats: Dict[str, Any]) -> Table:
    table = Table(title=title, show_header=True, header_style="bold cyan")
    table.add_column("Statistic", style="green")
    table.add_column("Value", style="yellow")
    for key, value in stats.items():
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    return table


def _finish(run: RunConfig, title: str, stats: Dict[str, Any]):
    if run.out:
        console.print()
        console.print(_stats_table(title, stats))
        console.print(f"[bold green]Saved:[/bold green] {run.out}")


def model_options(f):
    """Flags shared by every command."""
    options = [
        click.option('--beta1', type=float, default=None, help='Skewness coefficient at z1'),
        click.option('--beta2', type=float, default=None, help='Skewness coefficient at z2'),
        click.option('--mu', type=float, default=None, help='Constant drift'),
        click.option('--z1', type=float, default=None, help='Lower barrier'),
        click.option('--z2', type=float, default=None, help='Upper barrier'),
        click.option('--nmax', type=int, default=None, help='Largest series index'),
        click.option('--tol', type=float, default=None, help='Target truncation error'),
        click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default=None,
                     help='Output format'),
        click.option('--out', type=click.Path(dir_okay=False), default=None,
                     help='Output file (stdout if omitted)'),
        click.option('--config', 'config_path', default='config.yaml',
                     help='Configuration file'),
        click.option('--from-config', type=click.Path(exists=True, dir_okay=False),
                     default=None, help='Rerun from the config embedded in a JSON output'),
        click.option('--verbose', '-v', is_flag=True, help='Show progress logging'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _sampling_options(f):
    options = [
        click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None,
                     help='Random seed'),
        click.option('--stream', type=click.IntRange(0, 2 ** 64 - 1), default=None,
                     help='Stream id'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@click.group(invoke_without_command=True)
@click.version_option(__version__, prog_name='skewsim')
@click.pass_context
def main(ctx):
    """skewsim - skew Brownian motion with two semipermeable barriers

    Evaluate transition densities, draw exact samples and validate both.
    """
    if ctx.invoked_subcommand is None:
        console.print(Panel(
            "density | sample | path | validate | bounds\n\n"
            "[dim]Run 'skewsim COMMAND --help' for options[/dim]",
            title="[bold yellow]skewsim[/bold yellow]",
            subtitle=f"[dim]v{__version__}[/dim]",
            border_style="bright_blue",
            padding=(1, 2)
        ))


@main.command()
@model_options
@click.option('--t', type=float, default=None, help='Time horizon')
@click.option('--x', type=float, default=None, help='Start point')
@click.option('--ymin', type=float, default=None, help='Grid start (default x - 4 sqrt(t))')
@click.option('--ymax', type=float, default=None, help='Grid end (default x + 4 sqrt(t))')
@click.option('--ysteps', type=int, default=None, help='Number of grid points')
def density(**opts):
    """Evaluate p(t, x, y) on a grid of y"""
    with _guard():
        run = _load_run('density', opts)
        spread = 4 * np.sqrt(run.t) + abs(run.params.mu) * run.t
        ymin = run.x - spread if run.ymin is None else run.ymin
        ymax = run.x + spread if run.ymax is None else run.ymax
        grid = barrier_grid(ymin, ymax, run.ysteps, run.params, run.barrier_eps)

        result = transition_density(run.t, run.x, grid, run.params, run.policy)
        values = np.broadcast_to(result.value, grid.shape)
        bounds = np.broadcast_to(result.error_bound, grid.shape)
        rows = [(y, v, b, result.terms_used) for y, v, b in zip(grid, values, bounds)]

        stats = {
            'points': int(grid.size),
            'terms_used': result.terms_used,
            'exact_formula': result.exact_formula,
            'rigorous_bound': result.rigorous_bound,
            'max_error_bound': float(np.max(bounds)),
        }
        if run.params.mu == 0:
            stats['vbar'] = envelope_bound(run.params)
        payload = {
            'config': run.to_dict(),
            'data': [dict(zip(DENSITY_HEADER, row)) for row in rows],
            'stats': stats,
        }
        emit(run.format, payload, DENSITY_HEADER, rows, run.out)
        _finish(run, "Density", stats)


def _sample_stats(run: RunConfig, records) -> Dict[str, Any]:
    stats = acceptance_stats(records).to_dict()
    stats.update({
        'seed': run.seed,
        'stream': run.stream,
        'vbar': envelope_bound(run.params),
        'delta_nmax': delta(run.params, run.policy.n_max),
    })
    return stats


@main.command()
@model_options
@_sampling_options
@click.option('--t', type=float, default=None, help='Time horizon')
@click.option('--x', type=float, default=None, help='Start point')
@click.option('--n', type=click.IntRange(min=1), default=None, help='Number of samples')
@click.option('--shards', type=click.IntRange(min=1), default=None,
              help='Split the draws over this many streams')
def sample(**opts):
    """Draw exact samples of X_t given X_0 = x"""
    with _guard():
        run = _load_run('sample', opts)

        with Progress(TextColumn("[cyan]Sampling"), BarColumn(), MofNCompleteColumn(),
                      TimeElapsedColumn(), console=console, transient=True) as progress:
            task = progress.add_task("sample", total=run.n)
            batch = sample_sharded(run.n, run.shards, run.t, run.x, run.params, run.policy,
                                   seed=run.seed, stream=run.stream,
                                   progress=lambda k: progress.advance(task, k))

        stats = {'n_samples': int(batch.samples.size)}
        stats.update(_sample_stats(run, batch.records))
        stats['shards'] = run.shards
        payload = {'config': run.to_dict(), 'data': batch.samples, 'stats': stats}
        emit(run.format, payload, ('sample',), ((s,) for s in batch.samples), run.out)
        _finish(run, "Exact sampling", stats)


@main.command()
@model_options
@_sampling_options
@click.option('--x0', type=float, default=None, help='Start point')
@click.option('--dt', type=float, default=None, help='Time step')
@click.option('--horizon', type=float, default=None, help='Final time')
def path(**opts):
    """Simulate one exact trajectory on a regular time grid"""
    with _guard():
        run = _load_run('path', opts)
        if not (run.dt > 0 and run.horizon > 0):
            raise DomainError("dt and horizon must be positive")
        steps = max(1, int(round(run.horizon / run.dt)))
        times = run.dt * np.arange(steps + 1)

        trajectory = sample_path(times, run.x, run.params, run.policy,
                                 RandomStream(seed=run.seed, stream_id=run.stream))
        rows = list(zip(trajectory.times, trajectory.positions))
        stats = _sample_stats(run, trajectory.records)
        stats['steps'] = steps
        payload = {
            'config': run.to_dict(),
            'data': [{'t': s, 'x': p} for s, p in rows],
            'stats': stats,
        }
        emit(run.format, payload, ('t', 'x'), rows, run.out)
        _finish(run, "Exact path", stats)


@main.command()
@model_options
@_sampling_options
@click.option('--suite', type=click.Choice(list(SUITES)), required=True,
              help='Validation suite to run')
@click.option('--t', type=float, default=None, help='Time horizon')
@click.option('--x', type=float, default=None, help='Start point')
@click.option('--n', type=click.IntRange(min=100), default=None,
              help='Samples for the ks suite')
def validate(**opts):
    """Run a validation suite; exit status 4 when a check fails"""
    with _guard():
        run = _load_run('validate', opts)
        if opts.get('fmt') is None and not opts.get('from_config'):
            run.format = 'json'
        ctx = SuiteContext(params=run.params, policy=run.policy, spec=run.quadrature,
                           t=run.t, x=run.x, n=run.n, seed=run.seed, stream=run.stream,
                           walkers=run.walkers, dx=run.dx)

        with console.status(f"[cyan]Running suite {run.suite}...[/cyan]"):
            report = run_suite(run.suite, ctx)

        table = Table(title=f"Suite: {run.suite}", show_header=True, header_style="bold cyan")
        table.add_column("Check", style="green")
        table.add_column("Result")
        table.add_column("Max violation", style="yellow")
        table.add_column("Tolerance", style="dim")
        for check in report.reports:
            verdict = "[green]pass[/green]" if check.passed else "[bold red]FAIL[/bold red]"
            table.add_row(check.name, verdict, f"{check.max_violation:.3e}",
                          f"{check.tolerance:.1e}")
        console.print(table)

        rows = [(c.name, c.passed, c.max_violation, c.tolerance) for c in report.reports]
        payload = {
            'config': run.to_dict(),
            'data': report.to_dict(),
            'stats': {'passed': report.passed, 'checks': len(report.reports)},
        }
        emit(run.format, payload, ('check', 'passed', 'max_violation', 'tolerance'),
             rows, run.out)

    if not report.passed:
        sys.exit(EXIT_VALIDATION)


@main.command()
@model_options
def bounds(**opts):
    """Show the envelope bound and the rest bounds of the driftless series"""
    with _guard():
        run = _load_run('bounds', opts)
        vbar = envelope_bound(run.params)
        rows: List[tuple] = [(n, delta(run.params, n), rest_bound(run.params, n))
                             for n in range(run.policy.n_max + 1)]
        stats = {
            'vbar': vbar,
            'truncation_level': truncation_level(run.params, run.policy),
            'tol': run.policy.tol,
            'n_max': run.policy.n_max,
        }

        table = Table(title="Series bounds", show_header=True, header_style="bold cyan")
        table.add_column("n", style="green")
        table.add_column("delta_n", style="yellow")
        table.add_column("vbar * delta_n", style="blue")
        for n, d, r in rows:
            table.add_row(str(n), f"{d:.3e}", f"{r:.3e}")
        console.print(table)
        console.print(f"[bold cyan]vbar:[/bold cyan] {vbar:.6g}   "
                      f"[bold cyan]N for tol:[/bold cyan] {stats['truncation_level']}")

        payload = {
            'config': run.to_dict(),
            'data': [{'n': n, 'delta': d, 'rest_bound': r} for n, d, r in rows],
            'stats': stats,
        }
        emit(run.format, payload, ('n', 'delta', 'rest_bound'), rows, run.out)


if __name__ == '__main__':
    main()
