"""Command-line interface: run, compare, fit, lindblad, presets.

Runs are declared either by a named preset, an INI-style config file, or
plain flags; flags override the other two.  All results are written as
schema-versioned CSVs with a '#' metadata preamble.

Exit codes: 0 success, 2 configuration error, 3 numerical abort,
4 equivalence failure.
"""

from __future__ import annotations

import configparser
import difflib
import sys
from dataclasses import replace

import click
import numpy as np

from . import __version__, csvio, lindblad
from .core import DensityMatrix, InitialState, ModelParams, make_initial
from .ensemble import (GridSpec, RunSpec, compare_unravellings, resolve_workers,
                       run_ensemble)
from .errors import (ConfigurationError, EquivalenceFailure, FitError,
                     NoisyTBError, NumericalInstabilityError)
from .observables import asymptotic_variance, fit_diffusion, fit_power_law
from .presets import PRESETS, get_preset
from .unravellings import UnravellingKind

_UNRAVELLING_NAMES = {
    "wnp": "wnp",
    "qsd": "qsd",
    "qsd-wide": "qsd_wide_open",
    "jump": "jump",
    "jump-event": "jump_event_driven",
}

_CONFIG_KEYS = {
    "model": {"gamma", "dt", "sites", "boundary", "seed", "t_max"},
    "initial": {"kind", "variance", "center"},
    "run": {"unravelling", "noise", "trajectories"},
    "output": {"grid", "points_per_decade", "t_min", "path"},
}


def _suggest(bad: str, candidates) -> str:
    close = difflib.get_close_matches(bad, sorted(candidates), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def parse_config(path: str) -> dict:
    """Parse an INI config into a flat option dict, rejecting unknown keys."""
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigurationError(f"config file {path} not found or unreadable")
    options: dict = {}
    for section in parser.sections():
        if section not in _CONFIG_KEYS:
            raise ConfigurationError(
                f"{path}: unknown section [{section}]"
                + _suggest(section, _CONFIG_KEYS)
            )
        for key, value in parser.items(section):
            if key not in _CONFIG_KEYS[section]:
                raise ConfigurationError(
                    f"{path}: unknown key {key!r} in [{section}]"
                    + _suggest(key, _CONFIG_KEYS[section])
                )
            options[f"{section}.{key}"] = value
    return options


def _coerce(options: dict, key: str, cast, default):
    if key not in options:
        return default
    raw = options[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"config key {key} = {raw!r}: {exc}") from exc


def build_spec(config: str | None, preset: str | None, **flags) -> tuple[RunSpec, str | None]:
    """Combine preset, config file, and CLI flags into a RunSpec."""
    if preset:
        spec = get_preset(preset)
        out_path = None
    else:
        spec = RunSpec(
            params=ModelParams(gamma=flags.get("gamma") or 0.0),
            unravelling=UnravellingKind("wnp"),
            initial=InitialState("gaussian_packet", 4.0, 0),
            n_trajectories=1,
        )
        out_path = None
    if config:
        options = parse_config(config)
        params = ModelParams(
            gamma=_coerce(options, "model.gamma", float, spec.params.gamma),
            dt=_coerce(options, "model.dt", float, spec.params.dt),
            n_sites=_coerce(options, "model.sites", int, spec.params.n_sites),
            boundary=_coerce(options, "model.boundary", str, spec.params.boundary),
            seed=_coerce(options, "model.seed", int, spec.params.seed),
            t_max=_coerce(options, "model.t_max", float, spec.params.t_max),
        )
        initial = InitialState(
            kind=_coerce(options, "initial.kind", str, spec.initial.kind),
            variance=_coerce(options, "initial.variance", float, spec.initial.variance),
            center=_coerce(options, "initial.center", int, spec.initial.center),
        )
        unravelling_name = _coerce(options, "run.unravelling", str, None)
        if unravelling_name is not None:
            if unravelling_name not in _UNRAVELLING_NAMES:
                raise ConfigurationError(
                    f"unknown unravelling {unravelling_name!r}"
                    + _suggest(unravelling_name, _UNRAVELLING_NAMES)
                )
            tag = _UNRAVELLING_NAMES[unravelling_name]
        else:
            tag = spec.unravelling.tag
        noise = _coerce(options, "run.noise", str, spec.unravelling.noise_variant)
        grid = GridSpec(
            kind=_coerce(options, "output.grid", str, spec.grid.kind),
            t_min=_coerce(options, "output.t_min", float, spec.grid.t_min),
            points_per_decade=_coerce(options, "output.points_per_decade", int,
                                      spec.grid.points_per_decade),
        )
        spec = RunSpec(
            params=params,
            unravelling=UnravellingKind(tag, noise_variant=noise if tag.startswith("qsd") else "complex"),
            initial=initial,
            n_trajectories=_coerce(options, "run.trajectories", int, spec.n_trajectories),
            grid=grid,
        )
        out_path = options.get("output.path", out_path)

    # flag overrides
    params_kw = {}
    for flag, attr in (("gamma", "gamma"), ("dt", "dt"), ("sites", "n_sites"),
                       ("seed", "seed"), ("t_max", "t_max"), ("boundary", "boundary")):
        if flags.get(flag) is not None:
            params_kw[attr] = flags[flag]
    if params_kw:
        spec = replace(spec, params=replace(spec.params, **params_kw))
    if flags.get("unravelling") is not None:
        tag = _UNRAVELLING_NAMES[flags["unravelling"]]
        noise = spec.unravelling.noise_variant if tag.startswith("qsd") else "complex"
        spec = replace(spec, unravelling=UnravellingKind(tag, noise_variant=noise))
    if flags.get("noise") is not None and spec.unravelling.tag.startswith("qsd"):
        spec = replace(spec, unravelling=UnravellingKind(
            spec.unravelling.tag, noise_variant=flags["noise"]))
    if flags.get("trajectories") is not None:
        spec = replace(spec, n_trajectories=flags["trajectories"])
    if flags.get("variance") is not None:
        spec = replace(spec, initial=replace(spec.initial, variance=flags["variance"]))
    if flags.get("initial") is not None:
        spec = replace(spec, initial=replace(spec.initial, kind=flags["initial"]))
    return spec, out_path


def _fail(exc: NoisyTBError) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, ConfigurationError):
        sys.exit(2)
    if isinstance(exc, EquivalenceFailure):
        sys.exit(4)
    sys.exit(3)


_run_options = [
    click.option("--config", type=click.Path(), default=None, help="INI config file."),
    click.option("--preset", type=str, default=None, help="Named preset (see `presets`)."),
    click.option("--gamma", type=float, default=None, help="Noise strength."),
    click.option("--sites", type=int, default=None, help="Lattice size N."),
    click.option("--dt", type=float, default=None, help="Integration step."),
    click.option("--t-max", "t_max", type=float, default=None, help="End time."),
    click.option("--trajectories", type=int, default=None, help="Ensemble size."),
    click.option("--seed", type=int, default=None, help="Base seed."),
    click.option("--boundary", type=click.Choice(["open", "periodic"]), default=None),
    click.option("--unravelling", type=click.Choice(sorted(_UNRAVELLING_NAMES)), default=None),
    click.option("--noise", type=click.Choice(["complex", "real"]), default=None,
                 help="QSD noise variant."),
    click.option("--initial", type=click.Choice(["gaussian_packet", "delta_site", "uniform"]),
                 default=None),
    click.option("--variance", type=float, default=None, help="Initial packet variance."),
]


def _with_run_options(fn):
    for opt in reversed(_run_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Noisy tight-binding chain: unravelled trajectories and master equation."""


@main.command()
@_with_run_options
@click.option("--out", type=click.Path(), default=None, help="Output CSV path.")
@click.option("--records", type=click.Path(), default=None,
              help="Also persist raw per-trajectory series to this .npz path.")
def run(config, preset, out, records, **flags):
    """Run a trajectory ensemble and write the result CSV."""
    try:
        spec, cfg_out = build_spec(config, preset, **flags)
        path = out or cfg_out
        if path is None:
            raise ConfigurationError("no output path: pass --out or set [output] path")
        if records:
            from dataclasses import replace as _replace
            spec = _replace(spec, keep_records=True)
            summary, recs = run_ensemble(spec, n_workers=resolve_workers())
            np.savez_compressed(
                records,
                grid=summary.grid,
                mean_x=np.vstack([r.mean_x for r in recs]),
                mean_x2=np.vstack([r.mean_x2 for r in recs]),
                var_x=np.vstack([r.var_x for r in recs]),
                pn=np.vstack([r.pn for r in recs]),
            )
        else:
            summary = run_ensemble(spec, n_workers=resolve_workers())
        csvio.write_summary(summary, path)
    except NoisyTBError as exc:
        _fail(exc)
    click.echo(f"wrote {path} ({summary.n_trajectories} trajectories, "
               f"{summary.grid.size} times)"
               + (f"; records in {records}" if records else ""))


@main.command()
@click.option("--config", type=click.Path(), default=None)
@click.option("--gamma", type=float, default=4.0)
@click.option("--oracle-gamma", type=float, default=None,
              help="Override the master-equation gamma (negative control).")
@click.option("--sites", type=int, default=11)
@click.option("--dt", type=float, default=1e-4)
@click.option("--trajectories", type=int, default=5000)
@click.option("--seed", type=int, default=0)
@click.option("--checkpoints", type=str, default="0.5,1,2")
@click.option("--out", type=click.Path(), default=None, help="Report CSV path.")
def compare(config, gamma, oracle_gamma, sites, dt, trajectories, seed,
            checkpoints, out):
    """Compare all unravellings' ensemble projectors with the master equation."""
    try:
        if config:
            options = parse_config(config)
            gamma = _coerce(options, "model.gamma", float, gamma)
            sites = _coerce(options, "model.sites", int, sites)
            dt = _coerce(options, "model.dt", float, dt)
            seed = _coerce(options, "model.seed", int, seed)
            trajectories = _coerce(options, "run.trajectories", int, trajectories)
        t_checkpoints = [float(v) for v in checkpoints.split(",")]
        params = ModelParams(gamma=gamma, dt=dt, n_sites=sites,
                             boundary="periodic", seed=seed,
                             t_max=max(t_checkpoints))
        report = compare_unravellings(params, t_checkpoints,
                                      n_trajectories=trajectories,
                                      oracle_gamma=oracle_gamma)
        lines = ["unravelling,max_abs_z,max_corrected_z,n_comparisons"]
        for comp in report.comparisons:
            lines.append(f"{comp.tag},{comp.max_abs_z!r},{comp.max_corrected_z!r},"
                         f"{comp.n_comparisons}")
        verdict = "PASS" if report.passed else "FAIL"
        lines.append(f"# result = {verdict} (threshold {report.threshold})")
        text = "\n".join(lines)
        if out:
            with open(out, "w") as fh:
                fh.write(text + "\n")
        click.echo(text)
        if not report.passed:
            raise EquivalenceFailure(
                f"max corrected |z| = {report.max_corrected_z():.2f} "
                f">= {report.threshold}"
            )
    except NoisyTBError as exc:
        _fail(exc)


@main.command()
@click.argument("csv_paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["diffusion", "power", "asym-power"]),
              default="diffusion")
@click.option("--column", type=click.Choice(["mean_x2", "mean_x_sq", "mean_var", "mean_pn"]),
              default="mean_x2", help="Column fitted by diffusion/power kinds.")
@click.option("--window", type=str, default=None, help="Fit window 'lo:hi' in t.")
@click.option("--no-append", is_flag=True, help="Do not append the fit line to the CSV.")
def fit(csv_paths, kind, column, window, no_append):
    """Fit a result CSV: diffusion slope, power law, or width-scaling exponent."""
    try:
        win = None
        if window:
            lo, _, hi = window.partition(":")
            win = (float(lo), float(hi))
        if kind == "asym-power":
            gammas, values = [], []
            for path in csv_paths:
                summary = csvio.read_summary(path)
                gamma = float(summary.meta["gamma"])
                gammas.append(gamma)
                values.append(asymptotic_variance(summary, gamma))
            res = fit_power_law(np.asarray(gammas), np.asarray(values))
            line = (f"FIT kind=asym-power exponent={res.parameters['exponent']!r} "
                    f"amplitude={res.parameters['amplitude']!r} "
                    f"stderr_exponent={res.stderr['exponent']!r}")
            click.echo(line)
            return
        for path in csv_paths:
            summary = csvio.read_summary(path)
            gamma = float(summary.meta.get("gamma", 0.0))
            if kind == "diffusion":
                if win is None:
                    if gamma <= 0:
                        raise FitError("diffusion fit needs gamma > 0 or an explicit window")
                    win = (10.0 / gamma, float(summary.grid[-1]))
                res = fit_diffusion(summary, win, gamma=gamma)
                line = (f"FIT kind=diffusion file={path} slope={res.parameters['slope']!r} "
                        f"stderr={res.stderr['slope']!r} window={res.window}")
            else:
                y = summary.column(column)
                mask = summary.grid > 0
                res = fit_power_law(summary.grid[mask], y[mask], window=win)
                line = (f"FIT kind=power file={path} column={column} "
                        f"exponent={res.parameters['exponent']!r} "
                        f"amplitude={res.parameters['amplitude']!r} "
                        f"stderr_exponent={res.stderr['exponent']!r} window={res.window}")
            click.echo(line)
            if not no_append:
                csvio.append_fit_line(path, line)
    except NoisyTBError as exc:
        _fail(exc)


@main.command("lindblad")
@click.option("--gamma", type=float, required=True)
@click.option("--sites", type=int, default=33)
@click.option("--dt", type=float, default=1e-3)
@click.option("--t-max", "t_max", type=float, default=1.0)
@click.option("--boundary", type=click.Choice(["open", "periodic"]), default="periodic")
@click.option("--variance", type=float, default=4.0, help="Initial packet variance.")
@click.option("--points", type=int, default=50)
@click.option("--out", type=click.Path(), required=True)
def lindblad_cmd(gamma, sites, dt, t_max, boundary, variance, points, out):
    """Integrate the master equation directly and write diagnostics."""
    try:
        params = ModelParams(gamma=gamma, dt=dt, n_sites=sites,
                             boundary=boundary, t_max=t_max)
        psi = make_initial(params, InitialState("gaussian_packet", variance, 0))
        rho0 = DensityMatrix.from_pure(psi)
        times = np.linspace(0.0, t_max, points + 1)
        run = lindblad.integrate(rho0, params, times, dt=dt)
        coords = psi.coords()
        lines = [f"# schema_version = 1", f"# code_version = '{__version__}'",
                 f"# gamma = {gamma!r}", f"# n_sites = {sites}",
                 f"# boundary = '{boundary}'", f"# dt = {dt!r}",
                 "t,mean_x2,offdiag1_max,trace_dev,purity"]
        for state in run.states:
            rho = state.rho.rho
            p = rho.diagonal().real
            mean_x2 = float(np.dot(p, coords ** 2))
            off1 = float(np.max(np.abs(np.diagonal(rho, offset=-1))))
            trace_dev = abs(float(np.trace(rho).real) - 1.0)
            purity = float(np.trace(rho @ rho).real)
            lines.append(f"{state.t!r},{mean_x2!r},{off1!r},{trace_dev!r},{purity!r}")
        with open(out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        click.echo(f"wrote {out} (max correction {run.max_correction:.2e})")
    except NoisyTBError as exc:
        _fail(exc)


@main.command()
def presets():
    """List available presets."""
    for name in sorted(PRESETS):
        spec = PRESETS[name]
        click.echo(f"{name}: {spec.unravelling.tag} gamma={spec.params.gamma} "
                   f"sigma2={spec.initial.variance} N={spec.params.n_sites} "
                   f"trajectories={spec.n_trajectories} t_max={spec.params.t_max} "
                   f"dt={spec.params.dt}")


if __name__ == "__main__":
    main()
