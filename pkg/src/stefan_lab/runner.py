"""Configuration parsing, experiment dispatch and result files.

Configuration is a flat INI document with sections ``[model]``, ``[init]``,
``[grid]``, ``[classify]`` and ``[run]``.  Keys are strict: unknown keys are
errors and every defaulted value is echoed in ``metadata.json``.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dichotomy import (
    ClassifierSettings,
    Kind,
    bracket_mu,
    estimate_speed,
    simulate,
    speed_bracket,
)
from .errors import ConfigError, PreconditionError, StefanLabError
from .model import (
    InitialData,
    ModelParams,
    capital_lambda,
    speed_upper,
    thresholds,
    upper_solution_construct,
)
from .phase_plane import WaveNonlinearity, eta_star, q_eta, traveling_wave, z_eta, z_star
from .solver import GridSpec, profiles_table

KINDS = ("simulate", "thresholds", "phaseplane", "wave", "sweep-mu", "speed")

# config key -> ModelParams field
MODEL_KEYS = {
    "lambda": "lam", "b": "b", "m": "m", "d": "d", "nu": "nu",
    "c": "c", "mu": "mu", "rho": "rho", "h0": "h0",
}


@dataclass(frozen=True)
class InitSpec:
    family: str = "cosine"
    a_u: float = 0.5
    a_v: float = 0.5
    n_samples: int = 201

    def build(self, h0: float) -> InitialData:
        return InitialData.cosine(h0, self.a_u, self.a_v, self.n_samples)


@dataclass(frozen=True)
class RunSpec:
    kind: str = "simulate"
    out: str = "out"
    seed: int = 0
    delta: float = 0.1
    iters: int = 6
    eta_levels: int = 8
    wave_speed_factor: float = 1.1
    snapshots: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    init: InitSpec = InitSpec()
    grid: GridSpec = GridSpec()
    classify: ClassifierSettings = ClassifierSettings()
    run: RunSpec = RunSpec()
    defaulted: tuple = field(default=(), compare=False)


_SECTIONS = {"init": InitSpec, "grid": GridSpec, "classify": ClassifierSettings, "run": RunSpec}
_TYPES = {float: float, int: int, str: str, "float": float, "int": int, "str": str}


def _convert(section, key, raw, kind):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {kind.__name__}", key=key) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    unknown = set(cp.sections()) - {"model", *_SECTIONS}
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown section [{name}]", key=name)
    if not cp.has_section("model"):
        raise ConfigError("missing section [model]", key="model")

    model_values = {}
    for key in cp["model"]:
        if key not in MODEL_KEYS:
            raise ConfigError(f"unknown key {key!r} in [model]", key=key)
    for key, attr in MODEL_KEYS.items():
        if key not in cp["model"]:
            raise ConfigError(f"missing required key {key!r} in [model]", key=key)
        value = _convert("model", key, cp["model"][key], float)
        if value <= 0:
            raise ConfigError(f"{key} must be > 0, got {value!r}", key=key)
        model_values[attr] = value
    model = ModelParams(**model_values)

    defaulted = []
    parts = {}
    for section, cls in _SECTIONS.items():
        given = cp[section] if cp.has_section(section) else {}
        names = {f.name: f for f in fields(cls)}
        for key in given:
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
        values = {}
        for name, f in names.items():
            if name in given:
                values[name] = _convert(section, name, given[name], _TYPES[f.type])
            else:
                defaulted.append(f"{section}.{name}")
        try:
            parts[section] = cls(**values)
        except (StefanLabError, ValueError) as exc:
            key = next((k for k in values if k in str(exc)), section)
            raise ConfigError(f"[{section}] {exc}", key=key) from exc

    cfg = ExperimentConfig(model=model, defaulted=tuple(defaulted), **parts)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Check every module precondition the requested experiment depends on."""
    run, model, init = cfg.run, cfg.model, cfg.init
    if run.kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {run.kind!r}", key="kind")
    if init.family != "cosine":
        raise ConfigError(f"unsupported initial family {init.family!r}", key="family")
    if init.a_u < 0 or init.a_v < 0 or (init.a_u == 0 and init.a_v == 0):
        raise ConfigError("amplitudes must be >= 0 and not both zero", key="a_u")
    if init.n_samples < 3:
        raise ConfigError("n_samples must be >= 3", key="n_samples")
    if not run.delta > 0:
        raise ConfigError("delta must be > 0", key="delta")
    if run.snapshots < 0:
        raise ConfigError("snapshots must be >= 0", key="snapshots")
    c = cfg.classify
    if not (c.vanish_tol > 0 and c.spread_factor > 1 and c.stall_factor > 0):
        raise ConfigError("classifier tolerances must be positive (spread_factor > 1)", key="spread_factor")
    if not (0 < c.tail_fraction <= 1 and 0 < c.speed_tail <= 1):
        raise ConfigError("tail fractions must lie in (0, 1]", key="tail_fraction")
    if c.max_extensions < 0 or c.extension_factor <= 1:
        raise ConfigError("max_extensions >= 0 and extension_factor > 1 required", key="extension_factor")
    if run.kind in ("simulate", "thresholds", "sweep-mu", "speed") and not model.prey_viable:
        raise ConfigError("this experiment requires m*lambda > b", key="lambda")
    if run.kind == "phaseplane":
        if not model.coexistence_regime:
            raise ConfigError("phaseplane requires 0 < m*lambda - b < b*nu/c", key="lambda")
        if run.eta_levels < 1:
            raise ConfigError("eta_levels must be >= 1", key="eta_levels")
    if run.kind == "wave" and not run.wave_speed_factor > 1:
        raise ConfigError("wave_speed_factor must be > 1", key="wave_speed_factor")
    if run.kind == "sweep-mu":
        if not model.h0 < capital_lambda(model):
            raise ConfigError("sweep-mu requires h0 < Lambda", key="h0")
        if run.iters < 4:
            raise ConfigError("iters must be >= 4", key="iters")


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def config_sections(cfg: ExperimentConfig) -> dict:
    out = {"model": {key: getattr(cfg.model, attr) for key, attr in MODEL_KEYS.items()}}
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        out[section] = {f.name: getattr(obj, f.name) for f in fields(obj)}
    return out


def emit_config(cfg: ExperimentConfig) -> str:
    """Serialise ``cfg`` so that ``parse_config`` reproduces it exactly."""
    lines = []
    for section, values in config_sections(cfg).items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {_fmt(value)}" for key, value in values.items())
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(float(v)) for v in row])


def write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, allow_nan=False, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Kind):
        return obj.value
    raise TypeError(f"not serialisable: {type(obj).__name__}")


ERRATA = {
    "speed": [
        "auxiliary single-species fronts use the gradient Stefan law s' = -kappa*phi_x(t, s(t))",
        "auxiliary predator systems keep the diffusivity d",
    ],
    "upper_solution": [
        "cosine upper-solution decay rate uses min(1, d) as the diffusion factor",
    ],
}


def metadata(cfg: ExperimentConfig, errata=()) -> dict:
    return {
        "version": __version__,
        "config": config_sections(cfg),
        "defaulted": list(cfg.defaulted),
        "errata_applied": list(errata),
        "choices": {
            "wave_nonlinearity_u_fixed": "u* (coexistence prey density)",
            "initial_family": f"{cfg.init.family} (package default family)",
        },
    }


def _trajectory_rows(tr):
    return tr.records()


def _write_profile(path, state):
    write_csv(path, ("y", "x", "u", "v"), profiles_table(state))


def _run_thresholds(cfg, out):
    p = cfg.model
    init = cfg.init.build(p.h0)
    th = thresholds(p, init)
    write_json(out / "thresholds.json", th.as_dict())
    errata = []
    try:
        us = upper_solution_construct(p, init, cfg.run.delta)
    except PreconditionError as exc:
        write_json(out / "upper_solution.json", {"available": False, "reason": str(exc)})
    else:
        errata = ERRATA["upper_solution"]
        write_json(out / "upper_solution.json", {
            "available": True, "delta": us.delta, "beta": us.beta, "M": us.M, "mu0": us.mu0,
            "sigma_inf": us.sigma_inf,
        })
    summary = f"thresholds: Lambda={th.capital_lambda:.6g} Z*={th.z_star:.6g} mu_zero={th.mu_zero} speed_upper={th.speed_upper:.6g}"
    return summary, errata


def _snapshot_times(cfg):
    k = cfg.run.snapshots
    if k <= 0:
        return ()
    return tuple(cfg.grid.t_end * i / k for i in range(k + 1))


def _run_simulate(cfg, out):
    p = cfg.model
    init = cfg.init.build(p.h0)
    snaps = _snapshot_times(cfg)
    tr, verdict = simulate(p, init, cfg.grid, cfg.classify, early_stop=not snaps, snapshot_times=snaps)
    write_csv(out / "trajectory.csv", ("t", "h", "h_prime", "u_max", "v_max"), _trajectory_rows(tr))
    _write_profile(out / "profile_final.csv", tr.final)
    for i, snap in enumerate(tr.snapshots):
        _write_profile(out / f"profile_{i:03d}.csv", snap)
    if verdict.kind is Kind.SPREADING:
        try:
            verdict.speed_estimate = estimate_speed(tr, cfg.classify.speed_tail, cfg.classify.min_speed_duration)
        except PreconditionError:
            verdict.speed_estimate = None
    write_json(out / "verdict.json", verdict.record())
    summary = f"simulate: {verdict.kind.value} h_final={verdict.h_final:.6g} sup_final={verdict.sup_final:.3g} t={tr.t[-1]:.6g}"
    return summary, []


def _run_phaseplane(cfg, out):
    w = WaveNonlinearity.from_params(cfg.model)
    top = eta_star(w)
    rows = []
    for k in range(1, cfg.run.eta_levels + 1):
        eta = top * 2.0 ** (-k)
        rows.append((eta, q_eta(w, eta), z_eta(w, eta)))
    write_csv(out / "phaseplane.csv", ("eta", "q_eta", "z_eta"), rows)
    write_json(out / "phaseplane.json", {
        "u_fixed": w.u_fixed, "theta": w.theta, "eta_star": top, "z_star": z_star(w),
    })
    return f"phaseplane: eta*={top:.6g} Z*={z_star(w):.6g} z_eta(last)={rows[-1][2]:.6g}", []


def _run_wave(cfg, out):
    s = cfg.run.wave_speed_factor * speed_upper(cfg.model)
    pair = traveling_wave(cfg.model, s)
    write_csv(out / "wave_phi.csv", ("z", "q", "p"), pair.phi.table())
    write_csv(out / "wave_psi.csv", ("z", "q", "p"), pair.psi.table())
    write_json(out / "wave.json", {"s": s, "phi_end": pair.phi.q_end, "psi_end": pair.psi.q_end})
    return f"wave: s={s:.6g} phi(end)={pair.phi.q_end:.6g} psi(end)={pair.psi.q_end:.6g}", []


def _run_sweep_mu(cfg, out):
    p = cfg.model
    init = cfg.init.build(p.h0)
    br = bracket_mu(p, init, cfg.grid, cfg.run.iters, cfg.classify, cfg.run.delta, keep_trajectories=True)
    probes = []
    for i, (mu, kind, tr) in enumerate(br.probes):
        name = f"probe_{i:03d}.csv"
        write_csv(out / name, ("t", "h", "h_prime", "u_max", "v_max"), _trajectory_rows(tr))
        probes.append({"mu": mu, "kind": kind.value, "trajectory": name})
    write_json(out / "bracket.json", br.record())
    write_json(out / "probes.json", probes)
    return f"sweep-mu: mu_lo={br.mu_lo:.6g} mu_hi={br.mu_hi:.6g} probes={len(probes)}", ERRATA["upper_solution"]


def _run_speed(cfg, out):
    p = cfg.model
    init = cfg.init.build(p.h0)
    tr, verdict = simulate(p, init, cfg.grid, cfg.classify, early_stop=False)
    write_csv(out / "trajectory.csv", ("t", "h", "h_prime", "u_max", "v_max"), _trajectory_rows(tr))
    if verdict.kind is not Kind.SPREADING:
        write_json(out / "verdict.json", verdict.record())
        raise PreconditionError(f"speed experiment needs a spreading run; got {verdict.kind.value}")
    verdict.speed_estimate = estimate_speed(tr, cfg.classify.speed_tail, cfg.classify.min_speed_duration)
    write_json(out / "verdict.json", verdict.record())
    sb = speed_bracket(p, init, cfg.grid, cfg=cfg.classify)
    record = sb.as_dict()
    lo, hi = sb.interval()
    record.update(interval_low=lo, interval_high=hi if math.isfinite(hi) else None)
    write_json(out / "speed_bracket.json", record)
    return f"speed: estimate={verdict.speed_estimate:.6g} bracket=[{lo:.6g}, {hi:.6g}]", ERRATA["speed"]


_DISPATCH = {
    "simulate": _run_simulate,
    "thresholds": _run_thresholds,
    "phaseplane": _run_phaseplane,
    "wave": _run_wave,
    "sweep-mu": _run_sweep_mu,
    "speed": _run_speed,
}


def dispatch(cfg: ExperimentConfig, out_dir: Optional[os.PathLike] = None) -> str:
    """Run the configured experiment and write its files; returns the summary line."""
    validate(cfg)
    out = Path(out_dir if out_dir is not None else cfg.run.out)
    out.mkdir(parents=True, exist_ok=True)
    summary, errata = _DISPATCH[cfg.run.kind](cfg, out)
    write_json(out / "metadata.json", metadata(cfg, errata))
    return summary


def override(cfg: ExperimentConfig, kind=None, out=None, seed=None) -> ExperimentConfig:
    changes = {k: v for k, v in (("kind", kind), ("out", out), ("seed", seed)) if v is not None}
    if not changes:
        return cfg
    defaulted = tuple(d for d in cfg.defaulted if d.split(".", 1)[1] not in changes or not d.startswith("run."))
    new = replace(cfg, run=replace(cfg.run, **changes), defaulted=defaulted)
    validate(new)
    return new
