"""Front-fixing finite differences for the free-boundary system.

With ``y = x/h(t)`` the habitat becomes ``[0, 1]`` and each species obeys::

    w_t = D*w_yy/h**2 + (y*h'/h)*w_y + R(u, v)

on the nodes ``y_j = j/n`` (``j = 0..n``).  Node ``n`` is the Dirichlet front,
node ``0`` carries the Neumann condition through a mirrored ghost value.  Each
step lags ``h'`` from the current gradients, moves the front explicitly and
solves one tridiagonal system per species (implicit diffusion, explicit
advection and reaction).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, NumericalError
from .model import InitialData, ModelParams, reaction_u, reaction_v

CLAMP_SILENT = 1e-12
CLAMP_FATAL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    n: int = 200
    dt: float = 0.005
    t_end: float = 50.0
    dt_safety: float = 0.5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise DomainError(f"n must be an integer >= 16, got {self.n!r}")
        if not self.dt > 0:
            raise DomainError(f"dt must be > 0, got {self.dt!r}")
        if not self.t_end > 0:
            raise DomainError(f"t_end must be > 0, got {self.t_end!r}")
        if not self.dt_safety > 0:
            raise DomainError(f"dt_safety must be > 0, got {self.dt_safety!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)

    @property
    def dy(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True, eq=False)
class SolutionState:
    t: float
    h: float
    h_prime: float
    u: np.ndarray
    v: np.ndarray

    @property
    def n(self) -> int:
        return self.u.size - 1

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.u.size)

    @property
    def x(self) -> np.ndarray:
        return self.h * self.y


@dataclass(eq=False)
class Trajectory:
    """Per-step records plus optional profile snapshots and the final state."""

    params: ModelParams
    grid: GridSpec
    t: np.ndarray
    h: np.ndarray
    h_prime: np.ndarray
    u_max: np.ndarray
    v_max: np.ndarray
    snapshots: list = field(default_factory=list)
    final: Optional[SolutionState] = None
    max_clamp: float = 0.0
    stopped_early: bool = False

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def snapshot_at(self, t: float, atol: float = 1e-9) -> SolutionState:
        for snap in self.snapshots:
            if abs(snap.t - t) <= atol:
                return snap
        raise KeyError(f"no snapshot at t = {t}")

    def records(self) -> np.ndarray:
        return np.column_stack([self.t, self.h, self.h_prime, self.u_max, self.v_max])


def boundary_gradient(state: SolutionState) -> tuple[float, float]:
    """x-derivatives of ``u`` and ``v`` at the front.

    Three-point one-sided stencil in ``y``, using that both species vanish at
    ``y = 1``, divided by ``h``.
    """
    return _front_slope(state.u, state.h), _front_slope(state.v, state.h)


def _front_slope(w: np.ndarray, h: float) -> float:
    n = w.size - 1
    return (-4.0 * w[n - 1] + w[n - 2]) * n / (2.0 * h)


def _diffusion_bands(coef: float, dt: float, n: int) -> np.ndarray:
    # (I - dt*coef*L) on nodes 0..n-1; ghost w[-1] = w[1] at node 0, w[n] = 0
    r = dt * coef * n * n
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :] = -r
    ab[0, 1] = -2.0 * r
    return ab


def _advance(w, h_old, h_new, h_prime, coef_d, rate, dt):
    """Advance one species on nodes ``0..n-1``; returns the full array with ``w[n] = 0``."""
    n = w.size - 1
    y = np.linspace(0.0, 1.0, n + 1)
    rhs = w[:n] + dt * rate[:n]
    if h_prime != 0.0:
        # central first difference; vanishes at y = 0 by symmetry
        grad = np.zeros(n)
        grad[1:] = (w[2:] - w[:-2]) * (0.5 * n)
        rhs += dt * (y[:n] * h_prime / h_old) * grad
    ab = _diffusion_bands(coef_d / h_new**2, dt, n)
    out = np.empty(n + 1)
    try:
        out[:n] = solve_banded((1, 1), ab, rhs, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal solve failed: {exc}") from exc
    out[n] = 0.0
    return out


def _clamp(w: np.ndarray, t: float, name: str) -> float:
    low = float(w.min())
    if low >= 0.0:
        return 0.0
    if low < -CLAMP_FATAL:
        raise NumericalError(
            f"{name} went negative ({low:.3e}) at t = {t:.6g}; reduce dt",
            t=t, min_value=low,
        )
    np.maximum(w, 0.0, out=w)
    return -low


def initial_state(p: ModelParams, init: InitialData, grid: GridSpec) -> SolutionState:
    """Interpolate the initial data linearly onto the normalized grid."""
    if abs(init.h0 - p.h0) > 1e-12 * max(1.0, p.h0):
        raise DomainError(f"initial data live on [0, {init.h0}] but h0 = {p.h0}")
    x = grid.y * p.h0
    u = np.interp(x, init.x, init.u0)
    v = np.interp(x, init.x, init.v0)
    u[-1] = v[-1] = 0.0
    gu, gv = _front_slope(u, p.h0), _front_slope(v, p.h0)
    return SolutionState(0.0, p.h0, -p.mu * (gu + p.rho * gv), u, v)


def step(state: SolutionState, p: ModelParams, dt) -> tuple[SolutionState, float]:
    """One semi-implicit step; returns the new state and clamp size.

    ``dt`` is a step size or a :class:`GridSpec` (its nominal ``dt`` is used).
    """
    if isinstance(dt, GridSpec):
        dt = dt.dt
    u, v, h = state.u, state.v, state.h
    gu, gv = _front_slope(u, h), _front_slope(v, h)
    hp = -p.mu * (gu + p.rho * gv)
    h_new = h + dt * hp
    u_new = _advance(u, h, h_new, hp, 1.0, reaction_u(u, v, p), dt)
    v_new = _advance(v, h, h_new, hp, p.d, reaction_v(u, v, p), dt)
    t_new = state.t + dt
    clamp = max(_clamp(u_new, t_new, "u"), _clamp(v_new, t_new, "v"))
    hp_new = -p.mu * (_front_slope(u_new, h_new) + p.rho * _front_slope(v_new, h_new))
    return SolutionState(t_new, h_new, hp_new, u_new, v_new), clamp


def _march(state, advance, front_speed, grid, snapshot_times, stop, record_every):
    dy = grid.dy
    snaps_due = sorted(float(s) for s in (() if snapshot_times is None else snapshot_times))
    if any(s < 0 or s > grid.t_end for s in snaps_due):
        raise DomainError("snapshot times must lie in [0, t_end]")
    snapshots = []
    while snaps_due and snaps_due[0] <= 0.0:
        snapshots.append(state)
        snaps_due.pop(0)

    rec = [(state.t, state.h, state.h_prime, float(state.u.max()), float(state.v.max()))]
    max_clamp = 0.0
    stopped = False
    k = 0
    eps = 1e-12 * max(1.0, grid.t_end)
    while state.t < grid.t_end - eps:
        dt = grid.dt
        hp = front_speed(state)
        while hp * dt > grid.dt_safety * state.h * dy:
            dt *= 0.5
        target = snaps_due[0] if snaps_due else grid.t_end
        if state.t + dt > target - eps:
            dt = target - state.t
        try:
            state, clamp = advance(state, dt)
        except NumericalError as exc:
            exc.diagnostics.setdefault("t", state.t)
            raise
        max_clamp = max(max_clamp, clamp)
        k += 1
        if snaps_due and abs(state.t - snaps_due[0]) <= eps:
            state = SolutionState(snaps_due.pop(0), state.h, state.h_prime, state.u, state.v)
            snapshots.append(state)
        done = stop is not None and stop(state)
        if k % record_every == 0 or done or state.t >= grid.t_end - eps:
            rec.append((state.t, state.h, state.h_prime, float(state.u.max()), float(state.v.max())))
        if done:
            stopped = True
            break
    return state, np.array(rec), snapshots, max_clamp, stopped


def run(
    p: ModelParams,
    init: InitialData,
    grid: GridSpec,
    snapshot_times: Sequence[float] = (),
    stop: Optional[Callable[[SolutionState], bool]] = None,
    record_every: int = 1,
) -> Trajectory:
    """Integrate the coupled system from ``init`` until ``grid.t_end`` or ``stop``.

    The step is halved while ``h'*dt > dt_safety*h*dy``.  Steps are shortened to
    land exactly on snapshot times and ``t_end``.
    """
    state = initial_state(p, init, grid)

    def advance(s, dt):
        return step(s, p, dt)

    def front_speed(s):
        return s.h_prime

    final, rec, snaps, clamp, stopped = _march(
        state, advance, front_speed, grid, snapshot_times, stop, record_every
    )
    return Trajectory(p, grid, *rec.T, snapshots=snaps, final=final, max_clamp=clamp, stopped_early=stopped)


@dataclass(frozen=True)
class SingleSpecies:
    """Logistic free-boundary problem ``w_t = D*w_xx + w*(growth - w)``, ``g' = -expansion*w_x``."""

    growth: float
    diffusivity: float
    expansion: float

    def __post_init__(self):
        for name in ("growth", "diffusivity", "expansion"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")


def run_single(
    species: SingleSpecies,
    x0: np.ndarray,
    w0: np.ndarray,
    grid: GridSpec,
    stop: Optional[Callable[[SolutionState], bool]] = None,
    record_every: int = 1,
) -> Trajectory:
    """Single-species counterpart of :func:`run`, same discretisation.

    The returned trajectory stores the species in ``u``; ``v`` is zero.
    """
    x0 = np.asarray(x0, dtype=float)
    h0 = float(x0[-1])
    w = np.interp(grid.y * h0, x0, np.asarray(w0, dtype=float))
    w[-1] = 0.0
    zero = np.zeros_like(w)
    g, D, k = species.growth, species.diffusivity, species.expansion

    def advance(s, dt):
        hp = -k * _front_slope(s.u, s.h)
        h_new = s.h + dt * hp
        w_new = _advance(s.u, s.h, h_new, hp, D, g * s.u - s.u * s.u, dt)
        t_new = s.t + dt
        clamp = _clamp(w_new, t_new, "w")
        return SolutionState(t_new, h_new, -k * _front_slope(w_new, h_new), w_new, zero), clamp

    state = SolutionState(0.0, h0, -k * _front_slope(w, h0), w, zero)
    final, rec, snaps, clamp, stopped = _march(
        state, advance, lambda s: s.h_prime, grid, (), stop, record_every
    )
    params = _SinglePlaceholder(species, h0)
    return Trajectory(params, grid, *rec.T, snapshots=snaps, final=final, max_clamp=clamp, stopped_early=stopped)


@dataclass(frozen=True)
class _SinglePlaceholder:
    species: SingleSpecies
    h0: float


def profiles_table(state: SolutionState) -> np.ndarray:
    """Columns ``y, x, u, v`` of a state."""
    return np.column_stack([state.y, state.x, state.u, state.v])
