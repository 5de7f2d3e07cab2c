"""Command-line front end.

Every subcommand reads an optional strict JSON config, applies flag overrides
and writes CSV or JSON rows.  Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import csv
import functools
import io
import itertools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .channels import RotationChannelModel, angle_budget, rus_average
from .control_error import OverRotationProfile, relative_error_curves
from .hamiltonians import (
    PauliHamiltonian,
    avg_clock,
    heisenberg_disordered,
    heisenberg_expected_norm,
    hubbard_2d,
    max_evolution_time,
    qpe_norm_bound,
)
from .noise import NoiseModel
from .prep_formulas import infidelity_leading
from .prep_protocol import ProtocolConfig, estimate_stats, noise_rejection_hazard
from .resources import DeviceParams, ProblemParams, QcelsParams, estimate, hubbard_problem, optimize_error_split

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# fields whose value may be a scalar or a list; lists expand into a grid
GRID_FIELDS = {"theta", "p", "mode", "k", "phis"}


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config plumbing
def _coerce(name: str, value, default):
    if isinstance(value, list):
        if name not in GRID_FIELDS:
            raise ConfigError(f"field {name!r} does not accept a list")
        return [_coerce(name, v, default) for v in value]
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"field {name!r} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"field {name!r} must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field {name!r} must be a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"field {name!r} must be a string")
    return value


def load_config(path: str | None, defaults: dict, overrides: dict) -> dict:
    """Merge defaults, the JSON file at ``path`` and non-None flag overrides; unknown keys are errors."""
    cfg = dict(defaults)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        for key, val in raw.items():
            cfg[key] = _coerce(key, val, defaults[key])
    for key, val in overrides.items():
        if val is None or val == ():
            continue
        if isinstance(val, tuple):
            val = list(val) if len(val) > 1 else val[0]
        cfg[key] = _coerce(key, val, defaults[key])
    return cfg


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def _fmt(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


def emit(rows: list[dict], cfg: dict, fmt: str, output: str | None, command: str) -> None:
    """Write rows with a config echo; output depends only on its arguments."""
    echo = json.dumps(cfg, sort_keys=True)
    if fmt == "json":
        text = json.dumps({"version": __version__, "command": command, "config": cfg, "rows": rows}, indent=2, default=_fmt) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# star-lab {__version__} {command}\n# config: {echo}\n")
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(v) for k, v in row.items()})
        text = buf.getvalue()
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def guarded(fn):
    """Map configuration and numerical failures onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ArithmeticError, FloatingPointError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        except (ValueError, KeyError, TypeError) as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def common(fn):
    fn = click.option("--output", "-o", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")(fn)
    fn = click.option("--threads", type=int, default=None, help="Worker threads (results do not depend on it).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Master random seed.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Strict JSON config.")(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="star-lab")
def cli() -> None:
    """Simulation and resource-estimation tools for partially fault-tolerant analog rotations."""


# ------------------------------------------------------------------ prep-sim
PREP_DEFAULTS = {
    "m": 2,
    "k": 3,
    "d": None,
    "theta": 1e-3,
    "p": 1e-3,
    "mode": "EC",
    "implementation": "virtual-Z",
    "style": "unrotated",
    "plan": "stratified",
    "shots": 100000,
    "shots_stratum0": None,
    "include_higher": False,
    "seed": 0,
}


@cli.command("prep-sim")
@common
@click.option("--m", type=int)
@click.option("--k", type=int)
@click.option("--d", type=int, help="Code distance; must equal m*k.")
@click.option("--theta", type=float, multiple=True, help="Target angle theta* (repeatable).")
@click.option("--p", type=float, multiple=True, help="Physical error rate (repeatable).")
@click.option("--mode", type=click.Choice(["PS", "EC"]), multiple=True)
@click.option("--implementation", type=click.Choice(["virtual-Z", "native-2q"]))
@click.option("--style", type=click.Choice(["unrotated", "rotated"]))
@click.option("--plan", type=click.Choice(["stratified", "plain"]))
@click.option("--shots", type=int)
@click.option("--shots-stratum0", type=int)
@click.option("--include-higher/--no-include-higher", default=None)
@guarded
def prep_sim(config_path, fmt, seed, threads, output, **flags):
    """Monte Carlo of the transversal multi-rotation preparation."""
    cfg = load_config(config_path, PREP_DEFAULTS, {**flags, "seed": seed})
    if cfg["d"] is not None and cfg["d"] != cfg["m"] * cfg["k"]:
        raise ConfigError(f"d={cfg['d']} differs from m*k={cfg['m'] * cfg['k']}")
    if cfg["shots"] < 1:
        raise ConfigError("shots must be positive")
    grid = list(itertools.product(_as_list(cfg["theta"]), _as_list(cfg["p"]), _as_list(cfg["mode"])))
    # validate the whole grid before any simulation runs
    configs = []
    for theta, p, mode in grid:
        noise = NoiseModel(p_ph=p, native_2q_rotation=cfg["implementation"] == "native-2q")
        configs.append(ProtocolConfig(cfg["m"], cfg["k"], theta, mode, noise, cfg["implementation"], cfg["style"]))
    per_block = 2.0 if cfg["implementation"] == "virtual-Z" else 1.0
    rows = []
    for pc in configs:
        stats = estimate_stats(
            pc,
            plan=cfg["plan"],
            shots=cfg["shots"],
            seed=cfg["seed"],
            threads=threads or 1,
            shots_stratum0=cfg["shots_stratum0"],
            include_higher=cfg["include_higher"],
        )
        p_ud_theory = per_block * pc.k / 15.0 * pc.noise.p_ph
        row = {
            "m": pc.m,
            "k": pc.k,
            "d": pc.d,
            "theta_star": pc.theta_star,
            "p_ph": pc.noise.p_ph,
            "mode": pc.mode,
            "infidelity_theory": infidelity_leading(pc.theta_star, pc.k, p_ud_theory),
            "p_ud_theory": p_ud_theory,
            "rejection_hazard": noise_rejection_hazard(stats),
        }
        row.update(stats.as_row())
        rows.append(row)
    emit(rows, cfg, fmt, output, "prep-sim")


# ------------------------------------------------------------------ rus-factor
RUS_DEFAULTS = {
    "k": [2, 3, 4, 5, 6, 7, 8],
    "theta": None,
    "theta_min": 1e-6,
    "theta_max": 1e-2,
    "points": 17,
    "p": 1e-4,
    "pud_per_block": 1.0 / 15.0,
    "canceled": True,
    "switching": False,
    "switch_rate": 1.0 / 15.0,
}


@cli.command("rus-factor")
@common
@click.option("--k", type=int, multiple=True)
@click.option("--theta", type=float, multiple=True, help="Explicit target angles; overrides the log grid.")
@click.option("--theta-min", type=float)
@click.option("--theta-max", type=float)
@click.option("--points", type=int)
@click.option("--p", type=float)
@click.option("--pud-per-block", type=float)
@click.option("--canceled/--bare", default=None)
@click.option("--switching/--no-switching", default=None)
@click.option("--switch-rate", type=float)
@guarded
def rus_factor(config_path, fmt, seed, threads, output, **flags):
    """RUS-averaged error prefactor over a grid of target angles."""
    cfg = load_config(config_path, RUS_DEFAULTS, flags)
    if cfg["theta"] is not None:
        thetas = [float(t) for t in _as_list(cfg["theta"])]
    else:
        if cfg["points"] < 1 or not 0 < cfg["theta_min"] <= cfg["theta_max"]:
            raise ConfigError("need points >= 1 and 0 < theta_min <= theta_max")
        thetas = [float(t) for t in np.logspace(math.log10(cfg["theta_min"]), math.log10(cfg["theta_max"]), cfg["points"])]
    rows = []
    for k in _as_list(cfg["k"]):
        model = RotationChannelModel(int(k), cfg["p"], cfg["pud_per_block"])
        for ts in thetas:
            res = rus_average(model, ts, canceled=cfg["canceled"], switching=cfg["switching"], switch_rate=cfg["switch_rate"])
            rows.append(
                {
                    "k": int(k),
                    "theta_star": ts,
                    "alpha": res.alpha,
                    "alpha_over_k": res.alpha / k,
                    "eps_av": res.eps_av,
                    "eps_diamond": res.eps_diamond,
                    "p_tilde": res.p_tilde,
                    "k_max": res.k_max,
                }
            )
    emit(rows, cfg, fmt, output, "rus-factor")


# ------------------------------------------------------------------ control-error
CONTROL_DEFAULTS = {
    "k": 3,
    "theta_min": 1e-4,
    "theta_max": 1e-1,
    "points": 13,
    "phi_max": 1e-3,
    "phis": None,
    "samples": 100,
    "randomized": None,
    "seed": 0,
}


@cli.command("control-error")
@common
@click.option("--k", type=int)
@click.option("--theta-min", type=float)
@click.option("--theta-max", type=float)
@click.option("--points", type=int)
@click.option("--phi-max", type=float)
@click.option("--samples", type=int)
@click.option("--randomized/--fixed-direction", default=None, help="Default: emit both.")
@guarded
def control_error(config_path, fmt, seed, threads, output, **flags):
    """Relative logical-angle error under per-block over-rotation."""
    cfg = load_config(config_path, CONTROL_DEFAULTS, {**flags, "seed": seed})
    if cfg["phis"] is not None:
        phis = tuple(float(v) for v in cfg["phis"])
        profile = OverRotationProfile(phis=phis)
    else:
        if cfg["phi_max"] < 0:
            raise ConfigError("phi_max must be non-negative")
        profile = OverRotationProfile(phi_max=cfg["phi_max"], seed=cfg["seed"])
    thetas = np.logspace(math.log10(cfg["theta_min"]), math.log10(cfg["theta_max"]), cfg["points"])
    modes = [cfg["randomized"]] if cfg["randomized"] is not None else [False, True]
    rows = []
    for rnd in modes:
        rows.extend(relative_error_curves(thetas, cfg["k"], profile, rnd, cfg["samples"]))
    emit(rows, cfg, fmt, output, "control-error")


# ------------------------------------------------------------------ estimate
ESTIMATE_DEFAULTS = {
    "model": "hubbard",
    "lx": 8,
    "ly": 8,
    "t": 1.0,
    "U": 4.0,
    "n_terms": None,
    "one_norm": None,
    "avg_clock": None,
    "n_sys": None,
    "W": None,
    "p": [1e-3, 1e-4],
    "eps_target": 0.01,
    "eps_trotter": None,
    "d": None,
    "delta": 0.06,
    "K": 5,
    "n_shots": 100,
    "alpha_rus": 1.5,
    "safety_factor": 100.0,
    "cycle_time_us": 1.0,
    "objective": "total",
    "grid": 199,
}


@cli.command("estimate")
@common
@click.option("--model", type=click.Choice(["hubbard", "custom"]))
@click.option("--lx", type=int)
@click.option("--ly", type=int)
@click.option("--W", "W", type=float, help="Trotter error norm (external input).")
@click.option("--p", type=float, multiple=True)
@click.option("--eps-target", type=float)
@click.option("--eps-trotter", type=float, help="Fix the Trotter share instead of optimizing.")
@click.option("--d", type=int, help="Override the code distance.")
@click.option("--alpha-rus", type=float)
@click.option("--safety-factor", type=float)
@click.option("--objective", type=click.Choice(["total", "parallel"]))
@guarded
def estimate_cmd(config_path, fmt, seed, threads, output, **flags):
    """Qubit count and run time of Trotterised QCELS phase estimation."""
    cfg = load_config(config_path, ESTIMATE_DEFAULTS, flags)
    if cfg["W"] is None:
        raise ConfigError("the Trotter error norm W must be supplied")
    if cfg["model"] == "hubbard":
        problem = hubbard_problem(cfg["lx"], cfg["ly"], cfg["W"], cfg["t"], cfg["U"])
    else:
        missing = [f for f in ("n_terms", "one_norm", "avg_clock", "n_sys") if cfg[f] is None]
        if missing:
            raise ConfigError(f"custom model needs {', '.join(missing)}")
        problem = ProblemParams(int(cfg["n_terms"]), float(cfg["one_norm"]), float(cfg["avg_clock"]), int(cfg["n_sys"]), cfg["W"])
    qcels = QcelsParams(cfg["delta"], cfg["K"], cfg["n_shots"])
    rows = []
    for p in _as_list(cfg["p"]):
        device = DeviceParams(p_ph=p, cycle_time_us=cfg["cycle_time_us"], alpha_rus=cfg["alpha_rus"], safety_factor=cfg["safety_factor"])
        if cfg["eps_trotter"] is not None:
            eps_t = cfg["eps_trotter"]
            if not 0 < eps_t < cfg["eps_target"]:
                raise ConfigError("eps_trotter must lie in (0, eps_target)")
            est = estimate(problem, device, eps_t, cfg["eps_target"] - eps_t, qcels, cfg["d"])
        else:
            est = optimize_error_split(cfg["eps_target"], problem, device, qcels, cfg["grid"], cfg["objective"])
            if cfg["d"] is not None:
                est = estimate(problem, device, est.eps_trotter, est.eps_qpe, qcels, cfg["d"])
        row = {"p_ph": p, "n_terms": problem.n_terms, "one_norm": problem.one_norm, "avg_clock": problem.avg_clock, "W": problem.trotter_norm}
        out = est.as_dict()
        out["gamma2_levels"] = ";".join(repr(float(g)) for g in out["gamma2_levels"]) if fmt == "csv" else out["gamma2_levels"]
        row.update(out)
        rows.append(row)
    emit(rows, cfg, fmt, output, "estimate")


# ------------------------------------------------------------------ angle-budget
BUDGET_DEFAULTS = {
    "hamiltonian": "heisenberg",
    "n": 100,
    "h": 1.0,
    "path": None,
    "p": 1e-4,
    "alpha_rus": 1.5,
    "eps": 1e-3,
    "delta": 0.06,
    "p_total_cap": 1.0,
    "seed": 0,
}


@cli.command("angle-budget")
@common
@click.option("--hamiltonian", type=click.Choice(["heisenberg", "file"]))
@click.option("--n", type=int)
@click.option("--h", type=float)
@click.option("--path", type=click.Path(dir_okay=False), help="JSON-lines Hamiltonian for --hamiltonian file.")
@click.option("--p", type=float)
@click.option("--alpha-rus", type=float)
@click.option("--eps", type=float)
@click.option("--delta", type=float)
@guarded
def angle_budget_cmd(config_path, fmt, seed, threads, output, **flags):
    """Evolution-time and 1-norm bounds set by the mitigation budget."""
    cfg = load_config(config_path, BUDGET_DEFAULTS, {**flags, "seed": seed})
    if cfg["hamiltonian"] == "heisenberg":
        ham = heisenberg_disordered(cfg["n"], cfg["h"], np.random.default_rng(cfg["seed"]))
    else:
        if cfg["path"] is None:
            raise ConfigError("--path is required for a file Hamiltonian")
        ham = PauliHamiltonian.from_jsonl(Path(cfg["path"]).read_text())
    row = {
        "n_qubits": ham.n_qubits,
        "n_terms": ham.n_terms,
        "one_norm": ham.one_norm,
        "theta_budget": angle_budget(cfg["p"], cfg["alpha_rus"], cfg["p_total_cap"]),
        "T_max": max_evolution_time(ham, cfg["p"], cfg["alpha_rus"]),
    }
    if cfg["hamiltonian"] == "heisenberg":
        mean_norm = heisenberg_expected_norm(cfg["n"], cfg["h"])
        row["one_norm_mean"] = mean_norm
        row["T_max_mean"] = max_evolution_time(mean_norm, cfg["p"], cfg["alpha_rus"])
    row |= {
        "qpe_norm_bound": qpe_norm_bound(cfg["eps"], cfg["delta"], cfg["p"], cfg["alpha_rus"]),
    }
    emit([row], cfg, fmt, output, "angle-budget")


# ------------------------------------------------------------------ hubbard-info
HUBBARD_DEFAULTS = {"lx": 8, "ly": 8, "t": 1.0, "U": 4.0, "periodic": True, "terms_out": None}


@cli.command("hubbard-info")
@common
@click.option("--lx", type=int)
@click.option("--ly", type=int)
@click.option("--t", type=float)
@click.option("--U", "U", type=float)
@click.option("--periodic/--open", default=None)
@click.option("--terms-out", type=click.Path(dir_okay=False), help="Also write the Pauli terms as JSON lines.")
@guarded
def hubbard_info(config_path, fmt, seed, threads, output, **flags):
    """Term count, 1-norm and average clock cost of the 2D Hubbard model."""
    cfg = load_config(config_path, HUBBARD_DEFAULTS, flags)
    ham = hubbard_2d(cfg["lx"], cfg["ly"], cfg["t"], cfg["U"], cfg["periodic"])
    n_site = cfg["lx"] * cfg["ly"]
    if cfg["terms_out"]:
        Path(cfg["terms_out"]).write_text(ham.to_jsonl())
    row = {
        "lx": cfg["lx"],
        "ly": cfg["ly"],
        "n_qubits": ham.n_qubits,
        "n_terms": ham.n_terms,
        "one_norm": ham.one_norm,
        "avg_clock": avg_clock(ham),
        "terms_per_site": ham.n_terms / n_site,
        "norm_per_site": ham.one_norm / n_site,
    }
    emit([row], cfg, fmt, output, "hubbard-info")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
