"""Spreading/vanishing verdicts, mu-bracketing and front-speed checks.

The dichotomy is asymptotic; the classifier uses finite-time proxies:

* Vanishing: ``max(|u|, |v|) < vanish_tol`` and ``h' < stall_factor*Lambda/t_end``.
* Spreading: ``h > spread_factor*Lambda`` and ``h'`` stays above the same stall
  level over the last ``tail_fraction`` of the run.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError, PreconditionError
from .model import (
    CoexistenceState,
    InitialData,
    ModelParams,
    Thresholds,
    UpperSolution,
    thresholds,
    upper_solution_construct,
)
from .solver import GridSpec, SingleSpecies, Trajectory, run, run_single

log = logging.getLogger(__name__)


class Kind(str, Enum):
    SPREADING = "Spreading"
    VANISHING = "Vanishing"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class ClassifierSettings:
    vanish_tol: float = 1e-3
    spread_factor: float = 2.0
    stall_factor: float = 1e-4
    tail_fraction: float = 0.1
    speed_tail: float = 0.5
    min_speed_duration: float = 5.0
    max_extensions: int = 1
    extension_factor: float = 4.0


@dataclass
class Verdict:
    kind: Kind
    h_final: float
    sup_final: float
    speed_estimate: Optional[float] = None
    evidence: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "kind": self.kind.value,
            "h_final": self.h_final,
            "sup_final": self.sup_final,
            "speed_estimate": self.speed_estimate,
        }


@dataclass(frozen=True)
class SpeedBracket:
    """Tail speeds of the four single-species systems; ``None`` if that system vanished."""

    s_upper_sys: Optional[float]
    k_upper_sys: Optional[float]
    s_lower_sys: Optional[float]
    k_lower_sys: Optional[float]

    def interval(self) -> tuple[float, float]:
        lows = [s for s in (self.s_lower_sys, self.k_lower_sys) if s is not None]
        highs = [s for s in (self.s_upper_sys, self.k_upper_sys) if s is not None]
        return (max(lows) if lows else 0.0, min(highs) if highs else math.inf)

    def as_dict(self) -> dict:
        return asdict(self)


def _stall_level(th: Thresholds, t_end: float, cfg: ClassifierSettings) -> float:
    return cfg.stall_factor * th.capital_lambda / t_end


def classify(tr: Trajectory, th: Thresholds, cfg: ClassifierSettings = ClassifierSettings()) -> Verdict:
    h_final = float(tr.h[-1])
    sup_final = float(max(tr.u_max[-1], tr.v_max[-1]))
    stall = _stall_level(th, tr.grid.t_end, cfg)
    tail = tr.t >= tr.t[-1] * (1.0 - cfg.tail_fraction)
    evidence = {
        "t_final": float(tr.t[-1]),
        "h_prime_final": float(tr.h_prime[-1]),
        "stall_level": stall,
        "min_tail_h_prime": float(tr.h_prime[tail].min()),
        "capital_lambda": th.capital_lambda,
    }
    if sup_final < cfg.vanish_tol and tr.h_prime[-1] < stall:
        kind = Kind.VANISHING
    elif h_final > cfg.spread_factor * th.capital_lambda and evidence["min_tail_h_prime"] > stall:
        kind = Kind.SPREADING
    else:
        kind = Kind.UNDECIDED
    return Verdict(kind, h_final, sup_final, None, evidence)


def _stop_rule(th: Thresholds, t_end: float, cfg: ClassifierSettings):
    stall = _stall_level(th, t_end, cfg)
    # run past the spreading mark so the tail window sees a moving front
    mark = 1.25 * cfg.spread_factor * th.capital_lambda

    def stop(state):
        if state.h > mark:
            return True
        return state.h_prime < stall and max(state.u.max(), state.v.max()) < cfg.vanish_tol

    return stop


def simulate(
    p: ModelParams,
    init: InitialData,
    grid: GridSpec,
    cfg: ClassifierSettings = ClassifierSettings(),
    early_stop: bool = True,
    snapshot_times: Sequence[float] = (),
) -> tuple[Trajectory, Verdict]:
    """Run and classify, extending ``t_end`` up to ``cfg.max_extensions`` times."""
    th = thresholds(p, init)
    g = grid
    for attempt in range(cfg.max_extensions + 1):
        stop = _stop_rule(th, g.t_end, cfg) if early_stop else None
        tr = run(p, init, g, snapshot_times=snapshot_times, stop=stop)
        verdict = classify(tr, th, cfg)
        verdict.evidence["extensions"] = attempt
        if verdict.kind is not Kind.UNDECIDED:
            return tr, verdict
        log.info("undecided at t=%.4g (mu=%.6g); extending", tr.t[-1], p.mu)
        g = replace(g, t_end=g.t_end * cfg.extension_factor)
    return tr, verdict


def check_spreading_limits(tr: Trajectory, eq: Optional[CoexistenceState], window: float) -> dict:
    """Sup-distance of the final profiles from ``(u*, v*)`` on ``[0, window]``."""
    if eq is None:
        return {"applicable": False, "u_residual": None, "v_residual": None, "window": window}
    final = tr.final
    if window > final.h:
        raise PreconditionError(f"window {window} exceeds the final front {final.h}")
    inside = final.x <= window
    return {
        "applicable": True,
        "u_residual": float(np.max(np.abs(final.u[inside] - eq.u_star))),
        "v_residual": float(np.max(np.abs(final.v[inside] - eq.v_star))),
        "window": window,
    }


def estimate_speed(tr: Trajectory, tail: float = 0.5, min_duration: float = 5.0) -> float:
    """Least-squares slope of ``h`` against ``t`` over the final ``tail`` of the run."""
    t, h = tr.t, tr.h
    duration = float(t[-1] - t[0])
    if duration < min_duration:
        raise PreconditionError(f"run lasts {duration:.4g} < {min_duration:.4g}; too short for a speed")
    keep = t >= t[0] + (1.0 - tail) * duration
    if keep.sum() < 3:
        raise PreconditionError("too few records in the fitting window")
    slope, _ = np.polyfit(t[keep], h[keep], 1)
    return float(slope)


@dataclass
class MuBracket:
    mu_lo: float
    mu_hi: float
    probes: list = field(default_factory=list)

    def record(self) -> dict:
        return {"mu_lo": self.mu_lo, "mu_hi": self.mu_hi}


def bracket_mu(
    p: ModelParams,
    init: InitialData,
    grid: GridSpec,
    iters: int = 6,
    cfg: ClassifierSettings = ClassifierSettings(),
    delta: float = 0.1,
    keep_trajectories: bool = False,
) -> MuBracket:
    """Bisect on ``mu`` between a vanishing and a spreading seed.

    Seeds are ``mu0`` from the cosine construct (halved until Vanishing) and
    ``mu_zero`` from the closed-form thresholds (doubled until Spreading).
    Bisection is geometric, so the bracket ratio shrinks like ``2**-iters`` in
    the exponent.  Every probe is kept in ``probes``.
    """
    th = thresholds(p, init)
    if not p.h0 < th.capital_lambda:
        raise PreconditionError("bracket_mu requires h0 < Lambda")
    if iters < 4:
        raise PreconditionError("iters must be >= 4")
    probes = []

    def probe(mu):
        tr, verdict = simulate(p.replace(mu=mu), init, grid, cfg)
        if verdict.kind is Kind.UNDECIDED:
            raise NumericalError(
                f"probe at mu = {mu:.6g} stayed undecided after extension",
                mu=mu, evidence=verdict.evidence, probes=[(m, k.value) for m, k, _ in probes],
            )
        probes.append((mu, verdict.kind, tr if keep_trajectories else None))
        log.info("mu=%.6g -> %s (h=%.4g)", mu, verdict.kind.value, verdict.h_final)
        return verdict.kind

    try:
        lo = upper_solution_construct(p, init, delta).mu0
    except PreconditionError:
        lo = th.mu_zero / 16.0 if th.mu_zero else 1.0
    while probe(lo) is not Kind.VANISHING:
        lo *= 0.5
    hi = th.mu_zero if th.mu_zero is not None else 2.0 * lo
    while probe(hi) is not Kind.SPREADING:
        hi *= 2.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if probe(mid) is Kind.SPREADING:
            hi = mid
        else:
            lo = mid
    return MuBracket(lo, hi, probes)


_SYSTEMS = ("s_upper_sys", "s_lower_sys", "k_upper_sys", "k_lower_sys")


def _aux_species(p: ModelParams, kappa=None, tau=None):
    k1, k2 = kappa if kappa is not None else (p.mu, p.mu)
    t1, t2 = tau if tau is not None else (p.mu * p.rho, p.mu * p.rho)
    return {
        "s_upper_sys": SingleSpecies(p.lam, 1.0, k1),
        "s_lower_sys": SingleSpecies(p.lam - p.b / p.m, 1.0, k2),
        "k_upper_sys": SingleSpecies(p.nu + p.c, p.d, t1),
        "k_lower_sys": SingleSpecies(p.nu, p.d, t2),
    }


def _aux_speed(args):
    name, species, x0, w0, grid, tail, min_duration, vanish_tol = args
    tr = run_single(species, x0, w0, grid)
    if tr.u_max[-1] < vanish_tol:
        return name, None
    return name, estimate_speed(tr, tail, min_duration)


def speed_bracket(
    p: ModelParams,
    init: InitialData,
    grid: GridSpec,
    kappa: Optional[tuple[float, float]] = None,
    tau: Optional[tuple[float, float]] = None,
    cfg: ClassifierSettings = ClassifierSettings(),
    max_workers: int = 1,
) -> SpeedBracket:
    """Asymptotic speeds of the four single-species free-boundary problems.

    Prey systems use growth ``lam`` (upper) and ``lam - b/m`` (lower) with
    expansion ``kappa`` (default ``(mu, mu)``); predator systems use growth
    ``nu + c`` and ``nu`` with diffusivity ``d`` and expansion ``tau`` (default
    ``(mu*rho, mu*rho)``).  Initial data are ``u0`` resp. ``v0`` on ``[0, h0]``.
    """
    if p.lam - p.b / p.m <= 0:
        raise PreconditionError("the lower prey system needs lam > b/m")
    species = _aux_species(p, kappa, tau)
    jobs = []
    for name in _SYSTEMS:
        w0 = init.u0 if name.startswith("s_") else init.v0
        jobs.append((name, species[name], init.x, w0, grid, cfg.speed_tail, cfg.min_speed_duration, cfg.vanish_tol))
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = dict(pool.map(_aux_speed, jobs))
    else:
        results = dict(map(_aux_speed, jobs))
    return SpeedBracket(**results)


def verify_comparison(
    tr: Trajectory,
    construct: UpperSolution,
    snapshot_times: Sequence[float],
    tol: Optional[float] = None,
) -> tuple[bool, float]:
    """Check ``u, v <= M*exp(-beta*t)*cos(pi*x/(2*sigma))`` and ``h <= sigma`` at snapshots.

    Returns ``(passed, worst)`` where ``worst`` is the largest excess of the
    solution over the upper solution (negative when everything is strictly
    below).
    """
    p = tr.params
    if p.mu > construct.mu0:
        raise PreconditionError(
            f"mu = {p.mu:.6g} exceeds the construct's mu0 = {construct.mu0:.6g}; no comparison applies"
        )
    if tol is None:
        tol = 1e-3 * construct.M
    worst = -math.inf
    for t in snapshot_times:
        try:
            snap = tr.snapshot_at(t)
        except KeyError as exc:
            raise PreconditionError(f"missing snapshot at t = {t}") from exc
        sigma = float(construct.sigma(snap.t))
        bar = construct.profile(snap.t, snap.x)
        worst = max(
            worst,
            float(np.max(snap.u - bar)),
            float(np.max(snap.v - bar)),
            snap.h - sigma,
        )
    return worst <= tol, worst
