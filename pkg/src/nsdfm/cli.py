"""Command-line front end: ``nsdfm <command> [options]``.

Every command reads files, writes files under ``--out`` and nothing else.
Outputs depend only on the inputs, the options and ``--seed``, so reruns are
byte-identical. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical or estimation error.
"""
from __future__ import annotations

import json
import logging
import sys
import traceback
import warnings
from dataclasses import asdict
from importlib import resources
from pathlib import Path

import click
import numpy as np
import yaml

from .errors import ConfigError, DataError, EstimationError, IdentificationError, NsdfmError
from .montecarlo import ExperimentConfig, gen_params, report_csv, report_json, run_experiment, simulate_panel
from .panel import apply_transforms, detrend, read_panel_csv, write_panel_csv, write_transforms
from .pipeline import EstimationSettings, estimate, estimate_with_bands
from .selection import select_counts

logger = logging.getLogger("nsdfm")

BUNDLED_CONFIGS = ("table1_small", "table2_small", "table3_small")


# ---------------------------------------------------------------------------
# helpers


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _outdir(out) -> Path:
    if not out:
        raise ConfigError("--out is required")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping of option names to values")
    return cfg


def _merge_config(ctx: click.Context, kwargs: dict) -> dict:
    """Fill options not given on the command line from the ``--config`` file."""
    path = kwargs.pop("config", None)
    if not path:
        return kwargs
    for key, val in _load_yaml(path).items():
        k = str(key).replace("-", "_")
        if k not in kwargs:
            raise ConfigError(f"config {path}: unknown option {key!r}")
        if ctx.get_parameter_source(k) in (None, click.core.ParameterSource.DEFAULT):
            kwargs[k] = val
    return kwargs


def _count(value, name: str):
    if value is None or str(value).strip().lower() == "auto":
        return None
    try:
        v = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"--{name} must be 'auto' or a non-negative integer, got {value!r}") from None
    if v < 0:
        raise ConfigError(f"--{name} must be non-negative")
    return v


def _penalty(value):
    """``tune``, a constant, or ``q:tune,tau:1.0`` (a mapping in config files)."""
    if isinstance(value, dict):
        return {str(k): _penalty(v) for k, v in value.items()}
    s = str(value).strip()
    if ":" in s:
        out = {}
        for part in s.split(","):
            k, _, v = part.partition(":")
            if k.strip() not in ("q", "tau"):
                raise ConfigError(f"--penalty keys must be q or tau, got {k!r}")
            out[k.strip()] = _penalty(v)
        return out
    if s.lower() == "tune":
        return "tune"
    try:
        c = float(s)
    except ValueError:
        raise ConfigError(f"--penalty must be 'tune' or a positive number, got {value!r}") from None
    if c <= 0:
        raise ConfigError("--penalty constant must be positive")
    return c


def _names_list(value):
    if value is None or value == "":
        return None
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _resolve_names(panel, names, what: str):
    missing = [nm for nm in names if nm not in panel.series_names]
    if missing:
        raise ConfigError(f"{what}: unknown variable name(s) {missing}")
    return tuple(panel.series_names.index(nm) for nm in names)


def _normalize_spec(panel, value):
    if value is None or value == "":
        return None
    parts = value if isinstance(value, (list, tuple)) else str(value).rsplit(":", 2)
    if len(parts) != 3:
        raise ConfigError(f"--normalize must look like variable:horizon:value, got {value!r}")
    (idx,) = _resolve_names(panel, [str(parts[0]).strip()], "--normalize")
    try:
        return idx, int(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"--normalize horizon must be an integer and value a number, got {value!r}") from None


def _read_raw(data, transforms, frequency):
    if not data:
        raise ConfigError("--data is required")
    if not Path(data).is_file():
        raise DataError(f"data file not found: {data}")
    if transforms and not Path(transforms).is_file():
        raise DataError(f"transform file not found: {transforms}")
    return read_panel_csv(data, transforms, frequency)


def _load_panel(data, transforms, frequency):
    return apply_transforms(_read_raw(data, transforms, frequency))


def _detrend_method(value):
    v = None if value is None else str(value).lower()
    if v in (None, "none", "false"):
        return None
    if v not in ("ls", "demean"):
        raise ConfigError(f"--detrend must be ls, demean or none, got {value!r}")
    return v


class _WarningLog:
    """Collects warnings raised inside a command and echoes them to stderr once."""

    def __enter__(self):
        self._cm = warnings.catch_warnings(record=True)
        self.caught = self._cm.__enter__()
        warnings.simplefilter("always")
        return self

    def __exit__(self, *exc):
        self._cm.__exit__(*exc)
        for msg in self.messages:
            click.echo(f"warning: {msg}", err=True)
        return False

    @property
    def messages(self) -> list:
        seen = []
        for w in self.caught:
            m = str(w.message)
            if m not in seen:
                seen.append(m)
        return seen


def _panel_options(f):
    f = click.option("--frequency", default="quarterly", show_default=True,
                     help="Frequency of the raw data; monthly and daily are averaged to quarters.")(f)
    f = click.option("--transforms", type=click.Path(), default=None,
                     help="Sidecar CSV mapping series name to transform code 1/2/3.")(f)
    f = click.option("--data", type=click.Path(), default=None, help="Panel CSV, one series per column.")(f)
    return f


def _count_options(f):
    for opt, default in (("--penalty", "tune"), ("--tau-max", 3), ("--q-max", 6), ("--r-max", 10)):
        f = click.option(opt, default=default, show_default=True)(f)
    for name in ("tau", "q", "r"):
        f = click.option(f"--{name}", default="auto", show_default=True, help=f"'auto' or a fixed {name}.")(f)
    f = click.option("--detrend", default="ls", show_default=True, help="ls, demean or none.")(f)
    return f


def _common_options(f):
    f = click.option("--out", type=click.Path(), default=None, help="Output directory.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--config", type=click.Path(), default=None,
                     help="YAML file whose keys mirror the command-line options.")(f)
    return f


def _resolve_counts(panel, opts, log: _WarningLog):
    method = _detrend_method(opts["detrend"])
    x = detrend(panel.values, method)[1] if method else panel.values
    r, q, tau = (_count(opts[k], k) for k in ("r", "q", "tau"))
    if None not in (r, q, tau):
        if not tau <= q <= r:
            raise ConfigError(f"counts must satisfy tau <= q <= r (got r={r}, q={q}, tau={tau})")
        return r, q, tau, None
    res = select_counts(x, r, q, tau, r_max=int(opts["r_max"]), q_max=int(opts["q_max"]),
                        tau_max=int(opts["tau_max"]), penalty=_penalty(opts["penalty"]))
    for m in res.warnings:
        warnings.warn(m, RuntimeWarning)
    if not res.tau_hat <= res.q_hat <= res.r_hat:
        raise ConfigError(f"counts must satisfy tau <= q <= r (got r={res.r_hat}, q={res.q_hat}, tau={res.tau_hat})")
    return res.r_hat, res.q_hat, res.tau_hat, res


def _settings(panel, opts, r, q, tau) -> EstimationSettings:
    scheme = str(opts["identify"]).lower()
    order = None
    names = _names_list(opts["order"])
    if names is not None:
        order = _resolve_names(panel, names, "--order")
        if scheme == "recursive" and len(order) != q:
            raise ConfigError(f"--order lists {len(order)} variables but there are q={q} shocks")
    sign_variable = 0
    if opts["sign_variable"]:
        (sign_variable,) = _resolve_names(panel, [str(opts["sign_variable"])], "--sign-variable")
    shock = int(opts["normalize_shock"])
    if not 1 <= shock <= max(q, 1):
        raise ConfigError(f"--normalize-shock must lie in 1..q={q}")
    lags = opts["lags"]
    return EstimationSettings(
        r=r, q=q, tau=tau, dynamics=str(opts["dynamics"]).lower(), p=None if lags is None else int(lags),
        intercept=True, detrend=_detrend_method(opts["detrend"]), identify=scheme, order=order,
        sign_variable=sign_variable, normalize=_normalize_spec(panel, opts["normalize"]),
        normalize_shock=shock - 1, horizon=int(opts["horizon"]), lr_horizon=int(opts["lr_horizon"]),
    )


def _model_options(f):
    f = click.option("--lr-horizon", default=500, show_default=True, type=int,
                     help="Horizon standing in for the long run.")(f)
    f = click.option("--horizon", default=20, show_default=True, type=int)(f)
    f = click.option("--normalize-shock", default=1, show_default=True, type=int,
                     help="Shock (1-based) rescaled by --normalize.")(f)
    f = click.option("--normalize", default=None, help="variable:horizon:value")(f)
    f = click.option("--sign-variable", default=None,
                     help="Variable whose long-run response fixes the sign of permanent shocks.")(f)
    f = click.option("--order", default=None, help="Comma-separated variable names for the recursive scheme.")(f)
    f = click.option("--identify", default="recursive", show_default=True, help="raw, recursive or permanent.")(f)
    f = click.option("--lags", default=None, type=int,
                     help="Lagged differences for the VECM (default 1) or VAR order (default 2).")(f)
    f = click.option("--dynamics", default="vecm", show_default=True, help="vecm or var.")(f)
    return f


def _run_record(panel, settings, counts, selection, log, extra=None) -> dict:
    rec = {
        "n": panel.n,
        "T": panel.T,
        "counts": {"r": counts[0], "q": counts[1], "tau": counts[2], "c": counts[0] - counts[2],
                   "d": counts[1] - counts[2], "estimated": selection is not None},
        "settings": asdict(settings),
        "warnings": log.messages,
    }
    if selection is not None:
        rec["selection"] = selection.summary()
    if extra:
        rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def cli(verbose):
    """Non-stationary dynamic factor models: selection, estimation and impulse responses."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@_panel_options
@_common_options
@click.pass_context
def ingest(ctx, **kw):
    """Read, aggregate and transform a raw panel; write it back as CSV."""
    o = _merge_config(ctx, kw)
    out = _outdir(o["out"])
    with _WarningLog() as log:
        raw = _read_raw(o["data"], o["transforms"], o["frequency"])
        panel = apply_transforms(raw)
    write_panel_csv(panel, out / "panel.csv")
    write_transforms(panel, out / "applied_transforms.csv")
    _write_json(out / "ingest.json", {
        "n": panel.n, "T": panel.T, "observations_in": raw.values.shape[1],
        "observations_out": panel.values.shape[1], "series": panel.series_names,
        "transform_codes": panel.transform_codes, "warnings": log.messages,
    })


@cli.command()
@_panel_options
@_count_options
@_common_options
@click.pass_context
def select(ctx, **kw):
    """Estimate the numbers of factors, shocks and common trends."""
    o = _merge_config(ctx, kw)
    out = _outdir(o["out"])
    panel = _load_panel(o["data"], o["transforms"], o["frequency"])
    with _WarningLog() as log:
        method = _detrend_method(o["detrend"])
        x = detrend(panel.values, method)[1] if method else panel.values
        fixed = {k: _count(o[k], k) for k in ("r", "q", "tau")}
        res = select_counts(x, fixed["r"], fixed["q"], fixed["tau"], r_max=int(o["r_max"]),
                            q_max=int(o["q_max"]), tau_max=int(o["tau_max"]), penalty=_penalty(o["penalty"]))
        for m in res.warnings:
            warnings.warn(m, RuntimeWarning)
    summary = res.summary()
    summary["warnings"] = log.messages
    _write_json(out / "selection.json", summary)
    res.write_paths_csv(out / "criterion_paths.csv")
    res.write_stability_csv(out / "stability.csv")
    click.echo(f"r={res.r_hat} q={res.q_hat} tau={res.tau_hat} c={res.c_hat} d={res.d_hat}")


def _pivot_names(panel, settings) -> str:
    names = panel.series_names
    if settings.identify == "recursive":
        order = settings.order if settings.order is not None else range(settings.q)
        parts = ["ordered variables " + ", ".join(names[i] for i in order)]
    elif settings.identify == "permanent":
        parts = [f"sign variable {names[settings.sign_variable]}"]
    else:
        parts = []
    if settings.normalize is not None:
        parts.append(f"normalization variable {names[settings.normalize[0]]}")
    return "; ".join(parts) or "raw responses"


def _fit(ctx, kw, bands: bool):
    o = _merge_config(ctx, kw)
    out = _outdir(o["out"])
    panel = _load_panel(o["data"], o["transforms"], o["frequency"])
    with _WarningLog() as log:
        r, q, tau, sel = _resolve_counts(panel, o, log)
        settings = _settings(panel, o, r, q, tau)
        boot = int(o.get("boot") or 0)
        try:
            if bands and boot:
                fit = estimate_with_bands(panel.values, settings, boot, float(o["coverage"]), int(o["seed"]),
                                          variable_names=panel.series_names)
                for m in fit.warnings:
                    warnings.warn(m, RuntimeWarning)
            else:
                fit = estimate(panel.values, settings, panel.series_names)
        except IdentificationError as exc:
            raise IdentificationError(f"{exc} [{_pivot_names(panel, settings)}]") from None
    return o, out, panel, settings, (r, q, tau), sel, fit, log


@cli.command(name="estimate")
@_panel_options
@_count_options
@_model_options
@_common_options
@click.pass_context
def estimate_cmd(ctx, **kw):
    """Estimate factors and their dynamics; write the fitted models."""
    o, out, panel, settings, counts, sel, fit, log = _fit(ctx, kw, bands=False)
    (out / "factors.json").write_text(fit.factors.to_json(indent=2, sort_keys=True) + "\n")
    (out / "dynamics.json").write_text(fit.dynamics.to_json(indent=2, sort_keys=True) + "\n")
    _write_json(out / "run.json", _run_record(panel, settings, counts, sel, log))
    click.echo(f"r={counts[0]} q={counts[1]} tau={counts[2]} dynamics={settings.dynamics}")


@cli.command()
@_panel_options
@_count_options
@_model_options
@click.option("--coverage", default=0.68, show_default=True, type=float)
@click.option("--boot", default=0, show_default=True, type=int, help="Bootstrap replicates (0 for none).")
@_common_options
@click.pass_context
def irf(ctx, **kw):
    """Full pipeline up to identified impulse responses, optionally with bands."""
    o, out, panel, settings, counts, sel, fit, log = _fit(ctx, kw, bands=True)
    fit.irf.write_csv(out / "irf.csv")
    (out / "irf.json").write_text(fit.irf.to_json(indent=2, sort_keys=True) + "\n")
    extra = {"bootstrap": {"replicates": int(o["boot"]), "coverage": float(o["coverage"]), "seed": int(o["seed"])}}
    _write_json(out / "run.json", _run_record(panel, settings, counts, sel, log, extra))
    click.echo(f"wrote {fit.irf.n} x {fit.irf.q} responses over {fit.irf.horizon + 1} horizons")


@cli.command()
@click.option("--n", "n", default=100, show_default=True, type=int)
@click.option("--T", "T", default=100, show_default=True, type=int)
@click.option("--m", "m", default=50, show_default=True, type=int, help="Series with I(1) idiosyncratic parts.")
@click.option("--r", "r", default=4, show_default=True, type=int)
@click.option("--q", "q", default=3, show_default=True, type=int)
@click.option("--tau", "tau", default=1, show_default=True, type=int)
@click.option("--horizon", default=20, show_default=True, type=int)
@_common_options
@click.pass_context
def simulate(ctx, **kw):
    """Draw one panel from the simulation design and write it with its true responses."""
    o = _merge_config(ctx, kw)
    out = _outdir(o["out"])
    n, T, m, r, q, tau = (int(o[k]) for k in ("n", "T", "m", "r", "q", "tau"))
    if not 1 <= tau <= q < r:
        raise ConfigError(f"simulation needs 1 <= tau <= q < r (got r={r}, q={q}, tau={tau})")
    params = gen_params(n, r, q, r - tau, int(o["seed"]))
    sim = simulate_panel(params, T, m, int(o["horizon"]), seed=int(o["seed"]))
    write_panel_csv(sim.panel, out / "panel.csv")
    write_transforms(sim.panel, out / "transforms.csv")
    with open(out / "true_irf.csv", "w", newline="") as fh:
        fh.write("variable,shock,horizon,value\n")
        for i, name in enumerate(sim.panel.series_names):
            for j in range(q):
                for k in range(int(o["horizon"]) + 1):
                    fh.write(f"{name},{j + 1},{k},{float(sim.true_irf[i, j, k])!r}\n")
    _write_json(out / "params.json", {
        "n": n, "T": T, "m": m, "r": r, "q": q, "tau": tau, "seed": int(o["seed"]),
        "loadings": params.loadings, "U1": params.U1, "K": params.K, "R": params.R,
    })


def _experiment_config(spec: str) -> tuple:
    if spec in BUNDLED_CONFIGS:
        text = resources.files("nsdfm").joinpath("configs", f"{spec}.yaml").read_text()
        raw = yaml.safe_load(text)
    else:
        raw = _load_yaml(spec)
    if not isinstance(raw, dict):
        raise ConfigError(f"experiment config {spec} must be a mapping")
    return raw, ExperimentConfig.from_dict(raw)


@cli.command()
@click.argument("config_name")
@click.option("--reps", default=None, type=int, help="Override the number of replications.")
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--out", type=click.Path(), required=True)
def experiment(config_name, reps, seed, out):
    """Run a Monte Carlo experiment (bundled name or YAML path) and write its tables."""
    raw, cfg = _experiment_config(config_name)
    if reps is not None:
        if reps < 1:
            raise ConfigError("--reps must be positive")
        cfg.reps = reps
    seed = int(raw.get("seed", 0)) if seed is None else seed
    outdir = _outdir(out)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # per-replicate warnings are summarized by the failure counts
        results = run_experiment(cfg, seed)
    (outdir / f"{cfg.name}.csv").write_text(report_csv(cfg, results))
    (outdir / f"{cfg.name}.json").write_text(report_json(cfg, results, seed) + "\n")
    aborted = [r for r in results if r.aborted]
    for r in aborted:
        click.echo(f"warning: cell T={r.T} n={r.n} m={r.m} aborted: {r.aborted}", err=True)
    click.echo(report_csv(cfg, results), nl=False)


# ---------------------------------------------------------------------------
# entry point

_EXIT_CODES = ((ConfigError, 2), (DataError, 3), (EstimationError, 4))


def _where(exc: BaseException) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    if not frames:
        return ""
    f = frames[-1]
    return f" ({Path(f.filename).name}:{f.lineno})"


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="nsdfm", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 2
    except NsdfmError as exc:
        code = next((c for cls, c in _EXIT_CODES if isinstance(exc, cls)), 1)
        click.echo(f"error: {type(exc).__name__}: {exc}{_where(exc)}", err=True)
        return code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"error: numerical failure: {exc}{_where(exc)}", err=True)
        return 4
    except ValueError as exc:
        click.echo(f"error: invalid setting: {exc}{_where(exc)}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
