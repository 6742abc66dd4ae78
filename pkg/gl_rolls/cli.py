"""Command line interface: ``gl-rolls spectrum | kernel | simulate | toy | verify-all | show-config``."""

from __future__ import annotations

from collections.abc import Callable
import logging
from pathlib import Path
import sys
from typing import Any, NoReturn, TypedDict, TypeVar

import click
from click.core import Context, Parameter
from click.types import ParamType
import numpy as np
import yaml

from . import __version__, decay, dynamics, experiments, semigroup, symbol
from .experiments import ExperimentConfig
from .results import ResultWriter
from .utils import (
    BranchContinuationError,
    ConfigurationError,
    DivergenceError,
    IllConditionedError,
    QuadratureError,
    ResolutionError,
)

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3

F = TypeVar("F", bound=Callable[..., Any])


def _echo(message: str, fg: str = "magenta") -> None:
    click.echo(click.style("gl-rolls: ", bold=True, fg=fg) + message)


def _positive(ctx: Context, param: Parameter, value: float | None) -> float | None:
    if value is not None and not value > 0:
        raise click.BadParameter(f"must be positive, got {value}")
    return value


def _non_negative(ctx: Context, param: Parameter, value: float | None) -> float | None:
    if value is not None and value < 0:
        raise click.BadParameter(f"must be non-negative, got {value}")
    return value


def _wavenumber(ctx: Context, param: Parameter, value: float | None) -> float | None:
    if value is not None and not value**2 < 1:
        raise click.BadParameter(f"the roll wavenumber needs q^2 < 1, got q={value}")
    return value


def _power_of_two(ctx: Context, param: Parameter, value: int | None) -> int | None:
    if value is not None and (value < 16 or value & (value - 1)):
        raise click.BadParameter(f"must be a power of two >= 16, got {value}")
    return value


def _at_least_one(ctx: Context, param: Parameter, value: float | None) -> float | None:
    if value is not None and value < 1:
        raise click.BadParameter(f"must be >= 1, got {value}")
    return value


def _alpha(ctx: Context, param: Parameter, value: float | None) -> float | None:
    if value is not None and not 0 < value < 0.25:
        raise click.BadParameter(f"must lie in (0, 1/4), got {value}")
    return value


class ValidOption(TypedDict, total=False):
    name: str  # keyword the value is passed under, which is also the config field
    type: type[Any] | ParamType
    help: str
    callback: Callable[..., Any]  # for validation
    multiple: bool
    nargs: int


_OPTIONS: dict[str, ValidOption] = {
    "--q": {"name": "q", "type": float, "help": "Roll wavenumber.", "callback": _wavenumber},
    "--D": {"name": "D", "type": float, "help": "Diffusion coefficient of B.", "callback": _positive},
    "--gamma": {"name": "gamma", "type": float, "help": "Coupling strength; any real value."},
    "--eps": {"name": "eps", "type": float, "help": "Initial perturbation size.", "callback": _non_negative},
    "--seed": {"name": "seed", "type": int, "help": "Seed of the initial data."},
    "--L": {"name": "L", "type": float, "help": "Length of the periodic domain.", "callback": _positive},
    "--N": {"name": "N", "type": int, "help": "Number of grid points.", "callback": _power_of_two},
    "--dt": {"name": "dt", "type": float, "help": "Time step.", "callback": _positive},
    "--T": {"name": "T", "type": float, "help": "Final time.", "callback": _positive},
    "--p": {"name": "p", "type": float, "help": "Localization exponent of L^p data.", "callback": _at_least_one},
    "--alpha": {"name": "alpha", "type": float, "help": "Growth exponent of the phase at q = 0.", "callback": _alpha},
    "--out": {"name": "out", "type": click.Path(file_okay=False), "help": "Output directory."},
    "--preset": {"name": "preset", "type": click.Choice(sorted(experiments.PRESETS)), "help": "Named parameter set."},
    "--scheme": {"name": "scheme", "type": click.Choice(["etdrk4", "imex"]), "help": "Time stepper."},
    "--init": {"name": "init", "type": click.Choice(list(dynamics.INITIAL_KINDS)), "help": "Initial data."},
    "--k1": {"name": "k1", "type": float, "help": "Sideband wavenumber.", "callback": _positive},
    "--toy-case": {"name": "toy_case", "type": click.Choice(["a1", "a2"]), "help": "Toy equation variant."},
    "--fit-window": {"name": "fit_window", "type": float, "nargs": 2, "help": "Fit window T_MIN T_MAX."},
    "--only": {
        "name": "only",
        "type": click.Choice(sorted(experiments.SUITES)),
        "multiple": True,
        "help": "Run only this suite (repeatable).",
    },
}

_PARAMS = ("--q", "--D", "--gamma")
_RUN = (*_PARAMS, "--eps", "--seed", "--L", "--N", "--dt", "--T", "--p", "--alpha", "--out", "--preset")


def options(*flags: str) -> Callable[[F], F]:
    """Attach the named experiment options; none has a default so unset flags do not override the config."""

    def decorator(func: F) -> F:
        for flag in reversed(flags):
            spec = _OPTIONS[flag]
            kwargs: dict[str, Any] = {"type": spec["type"], "help": spec["help"], "default": None}
            if "callback" in spec:
                kwargs["callback"] = spec["callback"]
            if spec.get("multiple"):
                kwargs["multiple"] = True
                kwargs["default"] = ()
            if "nargs" in spec:
                kwargs["nargs"] = spec["nargs"]
            func = click.option(flag, spec["name"], **kwargs)(func)
        return func

    return decorator


def _load_config_file(ctx: Context, param: Parameter, value: str | None) -> dict[str, Any]:
    if value is None:
        return {}
    try:
        data = yaml.safe_load(Path(value).read_text())
    except yaml.YAMLError as exc:
        raise click.BadParameter(f"not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise click.BadParameter("expected a mapping of configuration keys")
    return data


def _resolve(ctx: Context, flags: dict[str, Any]) -> ExperimentConfig:
    overrides = {key: value for key, value in flags.items() if value is not None and value != ()}
    for key in ("only", "fit_window"):
        if key in overrides:
            overrides[key] = list(overrides[key])
    try:
        return experiments.resolve(file_values=ctx.obj["config"], overrides=overrides)
    except ConfigurationError as exc:
        raise click.UsageError(str(exc), ctx) from exc


def _start(config: ExperimentConfig) -> ResultWriter:
    writer = ResultWriter(config.out)
    writer.write_yaml("config.yaml", config.as_dict())
    return writer


def _finish(ctx: Context, writer: ResultWriter, code: int) -> NoReturn:
    manifest = writer.write_manifest()
    _echo(f"wrote {len(writer.artifacts)} artifacts, manifest at {manifest}")
    if code == EXIT_PASS:
        _echo("PASS", fg="green")
    else:
        _echo("FAIL" if code == EXIT_FAILURE else "DIVERGED", fg="red")
    ctx.exit(code)


@click.group()
@click.version_option(__version__)
@click.option(
    "--config",
    "config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config_file,
    help="YAML file with configuration values; command-line flags take precedence.",
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
)
@click.pass_context
def main(ctx: Context, config: dict[str, Any], log_level: str) -> None:
    """Numerical checks of diffusive stability for Ginzburg-Landau rolls."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@main.command()
@options(*_PARAMS, "--out")
@click.option("--k-max", type=float, default=10.0, show_default=True, callback=_positive)
@click.option("--k-step", type=float, default=0.01, show_default=True, callback=_positive)
@click.pass_context
def spectrum(ctx: Context, k_max: float, k_step: float, **flags: Any) -> None:
    """Routh-Hurwitz verdict, eigenvalue curves and critical curvatures."""
    config = _resolve(ctx, flags)
    params = config.params
    k = np.round(np.arange(-round(k_max / k_step), round(k_max / k_step) + 1) * k_step, 12)
    writer = _start(config)
    report = symbol.routh_hurwitz_check(params, k)
    reduced = symbol.reduced_phase_diffusion_check(params)
    out: dict[str, Any] = {**report.as_dict(), "reduced_criteria": reduced._asdict()}
    split = symbol.lambda1_pm(params)
    out.update({"lambda1_plus": split.plus, "lambda1_minus": split.minus, "complex_pair": split.complex_pair})
    _echo(f"{params}: {report.verdict} ({report.reason})")
    _echo(f"lambda1 = ({split.plus:.6g}, {split.minus:.6g})")
    if report.verdict == "stable":
        try:
            data = symbol.spectral_curves(params, k)
        except (BranchContinuationError, IllConditionedError) as exc:
            _echo(str(exc), fg="red")
            writer.write_json("report.json", out)
            _finish(ctx, writer, EXIT_FAILURE)
        out["spectral"] = data.as_dict()
        writer.write_curves(data)
    writer.write_json("report.json", out)
    _finish(ctx, writer, EXIT_PASS if reduced.consistent else EXIT_FAILURE)


@main.command()
@options(*_PARAMS, "--out")
@click.option(
    "--times",
    type=float,
    multiple=True,
    default=(1.0, 4.0, 16.0, 64.0),
    show_default=True,
    help="Times at which the kernels are tabulated (repeatable).",
)
@click.pass_context
def kernel(ctx: Context, times: tuple[float, ...], **flags: Any) -> None:
    """Green's kernels of the linearized semigroup and their decay certificates."""
    config = _resolve(ctx, flags)
    if not config.params.spectrally_stable:
        raise click.UsageError(f"{config.params} is not spectrally stable", ctx)
    writer = _start(config)
    try:
        filters = semigroup.default_filters(config.params)
        table = semigroup.greens_kernel(filters, sorted(times))
        certs = experiments.kernel_certificates(filters) + experiments.lemma_certificates(filters)
        recon = semigroup.reconstruction_error(filters, seed=config.seed)
    except (IllConditionedError, ResolutionError, QuadratureError) as exc:
        _echo(str(exc), fg="red")
        _finish(ctx, writer, EXIT_FAILURE)
    writer.write_kernel_table(table)
    for cert in certs:
        status = "ok" if cert.passed else "FAILED"
        _echo(f"{cert.estimate_id}: exponent {cert.exponent:.4f} (target {cert.target}) {status}")
    passed = all(c.passed for c in certs) and recon < 1e-8
    writer.write_json(
        "certificates.json",
        {
            "certificates": [c.as_dict() for c in certs],
            "opnorm_Linf": table.opnorm_Linf,
            "reconstruction_error": recon,
            "pass": passed,
        },
    )
    _finish(ctx, writer, EXIT_PASS if passed else EXIT_FAILURE)


@main.command()
@options(*_RUN, "--scheme", "--init", "--k1", "--fit-window")
@click.option("--snapshot-every", type=int, default=None, help="Keep full fields every so many steps.")
@click.pass_context
def simulate(ctx: Context, snapshot_every: int | None, **flags: Any) -> None:
    """Integrate a perturbed roll and fit the decay of its norms."""
    config = _resolve(ctx, {**flags, "snapshot_every": snapshot_every})
    writer = _start(config)
    try:
        report = experiments.run_simulation(config)
    except DivergenceError as exc:
        _echo(str(exc), fg="red")
        _finish(ctx, writer, EXIT_DIVERGENCE)
    trajectory = report.trajectory
    writer.write_norms(trajectory)
    writer.write_snapshots(trajectory, config.seed)
    if not trajectory.diverged:
        for series in decay.track_norms(trajectory).values():
            writer.write_series(series)
    for name, fit in report.fits.items():
        _echo(f"{name}: exponent {fit.exponent:.4f} (envelope {report.envelopes[name]:g})")
    if report.growth is not None:
        _echo(f"sideband growth factor {report.growth:.4g}")
    writer.write_json("report.json", report.as_dict())
    if trajectory.diverged:
        _echo(f"blow-up guard tripped at t={trajectory.last_valid_t:.6g}", fg="red")
        _finish(ctx, writer, EXIT_DIVERGENCE)
    _finish(ctx, writer, EXIT_PASS if report.passed else EXIT_FAILURE)


@main.command()
@options("--eps", "--seed", "--L", "--N", "--dt", "--T", "--p", "--out", "--preset", "--toy-case")
@click.pass_context
def toy(ctx: Context, **flags: Any) -> None:
    """Decay rates of the scalar toy equation."""
    config = _resolve(ctx, flags)
    writer = _start(config)
    report = experiments.run_toy(config)
    for name, fit in report.fits.items():
        _echo(f"{name}: exponent {fit.exponent:.4f} (predicted {report.predicted[name]:g})")
    writer.write_json("report.json", report.as_dict())
    if report.diverged:
        _finish(ctx, writer, EXIT_DIVERGENCE)
    _finish(ctx, writer, EXIT_PASS if report.passed else EXIT_FAILURE)


@main.command("verify-all")
@options(*_RUN, "--only")
@click.pass_context
def verify_all(ctx: Context, **flags: Any) -> None:
    """Run the verification suites and write a summary of every criterion."""
    config = _resolve(ctx, flags)
    writer = _start(config)
    results = experiments.verify_all(config)
    summary: dict[str, Any] = {}
    diverged = False
    for suite, criteria in results.items():
        summary[suite] = [c.as_dict() for c in criteria]
        for c in criteria:
            _echo(f"[{suite}] {c.criterion}: {'ok' if c.passed else 'FAILED'}", fg="magenta" if c.passed else "red")
            diverged = diverged or bool(c.details.get("diverged")) or "error" in c.details
    passed = all(c.passed for criteria in results.values() for c in criteria)
    writer.write_json("summary.json", {"suites": summary, "pass": passed})
    if passed:
        _finish(ctx, writer, EXIT_PASS)
    _finish(ctx, writer, EXIT_DIVERGENCE if diverged else EXIT_FAILURE)


@main.command("show-config")
@options(*_RUN, "--scheme", "--init", "--k1", "--toy-case", "--fit-window", "--only")
@click.pass_context
def show_config(ctx: Context, **flags: Any) -> None:
    """Print the resolved configuration as YAML."""
    config = _resolve(ctx, flags)
    click.echo(yaml.safe_dump(config.as_dict(), sort_keys=True), nl=False)
