"""Model parameters, reaction terms and closed-form thresholds.

The system is the ratio-dependent predator-prey model on a growing habitat
``[0, h(t)]``::

    u_t - u_xx   = lam*u - u**2 - b*u*v/(u + m*v)
    v_t - d*v_xx = nu*v  - v**2 + c*u*v/(u + m*v)
    u_x = v_x = 0 at x = 0;  u = v = 0 and h' = -mu*(u_x + rho*v_x) at x = h(t)

Everything in this module is a pure function of immutable inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, PreconditionError

PARAM_NAMES = ("lam", "b", "m", "d", "nu", "c", "mu", "rho", "h0")


@dataclass(frozen=True)
class ModelParams:
    """The nine positive constants of the model.

    ``lam`` is the prey growth rate (``lambda`` is reserved in Python).
    """

    lam: float
    b: float
    m: float
    d: float
    nu: float
    c: float
    mu: float
    rho: float
    h0: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise DomainError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f"{f.name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, f.name, float(value))

    @property
    def prey_viable(self) -> bool:
        return self.m * self.lam > self.b

    @property
    def coexistence_regime(self) -> bool:
        gap = self.m * self.lam - self.b
        return 0.0 < gap < self.b * self.nu / self.c

    def replace(self, **changes) -> "ModelParams":
        values = {name: getattr(self, name) for name in PARAM_NAMES}
        values.update(changes)
        return ModelParams(**values)

    def decoupled(self) -> "ModelParams":
        """Copy with ``b = c = 0``; for solver sanity checks only.

        The zero interaction coefficients violate the positivity invariant, so
        the copy bypasses validation.
        """
        out = object.__new__(ModelParams)
        for name in PARAM_NAMES:
            object.__setattr__(out, name, getattr(self, name))
        object.__setattr__(out, "b", 0.0)
        object.__setattr__(out, "c", 0.0)
        return out

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial profiles sampled on ``x`` in ``[0, h0]``.

    A profile may be identically zero (species absent); otherwise it must be
    positive on ``[0, h0)`` and vanish at ``h0``.
    """

    x: np.ndarray
    u0: np.ndarray
    v0: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u0 = np.asarray(self.u0, dtype=float)
        v0 = np.asarray(self.v0, dtype=float)
        if x.ndim != 1 or x.shape != u0.shape or x.shape != v0.shape:
            raise DomainError("x, u0 and v0 must be 1-D arrays of equal length")
        if x.size < 3:
            raise DomainError("need at least 3 samples")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise DomainError("x must start at 0 and be strictly increasing")
        h0 = x[-1]
        dx = np.max(np.diff(x))
        for name, w in (("u0", u0), ("v0", v0)):
            if w[-1] != 0.0:
                raise DomainError(f"{name}(h0) must be exactly 0")
            if not np.any(w):
                continue
            if np.any(w[:-1] <= 0):
                raise DomainError(f"{name} must be positive on [0, h0)")
            # Neumann compatibility at x = 0, to within the sampling resolution
            slope_tol = 10.0 * dx * np.max(w) / h0**2
            if abs(w[1] - w[0]) / (x[1] - x[0]) > slope_tol:
                raise DomainError(f"{name} violates u'(0) = 0 at this resolution")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "v0", v0)

    @property
    def h0(self) -> float:
        return float(self.x[-1])

    @property
    def n_samples(self) -> int:
        return int(self.x.size)

    @classmethod
    def cosine(cls, h0: float, a_u: float = 0.5, a_v: float = 0.5, n_samples: int = 201):
        """``a*cos(pi*x/(2*h0))`` profiles; these meet every compatibility condition."""
        if a_u < 0 or a_v < 0:
            raise DomainError("amplitudes must be >= 0")
        x = np.linspace(0.0, h0, n_samples)
        shape = np.cos(0.5 * np.pi * x / h0)
        shape[-1] = 0.0
        return cls(x, a_u * shape, a_v * shape)


@dataclass(frozen=True)
class CoexistenceState:
    u_star: float
    v_star: float
    A: float
    delta1: float


@dataclass(frozen=True)
class BoundQuadruple:
    u_upper: float
    u_lower: float
    v_upper: float
    v_lower: float
    iterations: int = 0


@dataclass(frozen=True)
class Thresholds:
    """Closed-form thresholds.  ``None`` marks a non-applicable branch."""

    capital_lambda: float
    z_star: float
    mu_star: Optional[float]
    mu_star_star: Optional[float]
    mu_zero: Optional[float]
    speed_upper: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _ratio(u, v, m):
    # u*v/(u + m*v), extended by 0 at the origin; bounded by min(u/m, v)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    denom = u + m * v
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, u * v / safe, 0.0)


def _check_nonnegative(u, v):
    if np.any(np.asarray(u) < 0) or np.any(np.asarray(v) < 0):
        raise DomainError("densities must be nonnegative")


def reaction_u(u, v, p: ModelParams):
    """Prey reaction ``lam*u - u**2 - b*u*v/(u + m*v)``; vectorised."""
    _check_nonnegative(u, v)
    u = np.asarray(u, dtype=float)
    out = p.lam * u - u * u - p.b * _ratio(u, v, p.m)
    return out if out.ndim else float(out)


def reaction_v(u, v, p: ModelParams):
    """Predator reaction ``nu*v - v**2 + c*u*v/(u + m*v)``; vectorised."""
    _check_nonnegative(u, v)
    v = np.asarray(v, dtype=float)
    out = p.nu * v - v * v + p.c * _ratio(u, v, p.m)
    return out if out.ndim else float(out)


def coexistence_state(p: ModelParams) -> CoexistenceState:
    """Positive constant steady state, valid when ``0 < m*lam - b < b*nu/c``."""
    if not p.coexistence_regime:
        raise PreconditionError(
            "coexistence state requires 0 < m*lam - b < b*nu/c "
            f"(m*lam - b = {p.m * p.lam - p.b:.6g}, b*nu/c = {p.b * p.nu / p.c:.6g})"
        )
    lam, b, m, nu, c = p.lam, p.b, p.m, p.nu, p.c
    A = lam * (2 * c * m**2 + b) - m * b * (nu + 2 * c)
    delta1 = A**2 + 4 * (b + c * m**2) * (b * (nu + c) - m * c * lam) * (m * lam - b)
    if delta1 < 0:
        raise NumericalError("negative discriminant inside the coexistence regime", delta1=delta1)
    u_star = (A + math.sqrt(delta1)) / (2 * (b + c * m**2))
    v_star = u_star * (lam - u_star) / (b - m * (lam - u_star))
    if not (u_star > 0 and v_star > 0):
        raise NumericalError("coexistence state is not positive", u_star=u_star, v_star=v_star)
    return CoexistenceState(u_star, v_star, A, delta1)


def equilibrium_residuals(u: float, v: float, p: ModelParams) -> tuple[float, float]:
    """Per-capita residuals of the two steady-state equations."""
    r = float(_ratio(u, v, p.m))
    # divide the ratio term through by u resp. v
    ru = p.lam - u - p.b * (r / u if u > 0 else 0.0)
    rv = p.nu - v + p.c * (r / v if v > 0 else 0.0)
    return ru, rv


def _prey_given_predator(v: float, p: ModelParams) -> float:
    # unique positive root of lam - u - b*v/(u + m*v) = 0
    if v == 0.0:
        return p.lam
    g = lambda u: p.lam - u - p.b * v / (u + p.m * v)
    return brentq(g, 0.0, p.lam, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _predator_given_prey(u: float, p: ModelParams) -> float:
    # unique positive root of nu - v + c*u/(u + m*v) = 0
    if u == 0.0:
        return p.nu
    g = lambda v: p.nu - v + p.c * u / (u + p.m * v)
    return brentq(g, 0.0, p.nu + p.c, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def bound_quadruple(p: ModelParams, tol: float = 1e-10, max_iter: int = 10_000) -> BoundQuadruple:
    """Limit bounds for the spreading case, by monotone iteration.

    Starting from ``u_upper = lam`` the sweep updates ``v_upper`` from
    ``u_upper``, ``u_lower`` from ``v_upper``, ``v_lower`` from ``u_lower`` and
    ``u_upper`` from ``v_lower`` until no entry moves by more than ``tol``.
    """
    if not p.prey_viable:
        raise PreconditionError("bound quadruple requires m*lam > b")
    u_up = p.lam
    v_up = p.nu + p.c
    u_lo = v_lo = 0.0
    for it in range(1, max_iter + 1):
        v_up_new = _predator_given_prey(u_up, p)
        u_lo_new = _prey_given_predator(v_up_new, p)
        v_lo_new = _predator_given_prey(u_lo_new, p)
        u_up_new = _prey_given_predator(v_lo_new, p)
        change = max(
            abs(u_up_new - u_up), abs(v_up_new - v_up),
            abs(u_lo_new - u_lo), abs(v_lo_new - v_lo),
        )
        u_up, v_up, u_lo, v_lo = u_up_new, v_up_new, u_lo_new, v_lo_new
        if change < tol:
            return BoundQuadruple(u_up, u_lo, v_up, v_lo, it)
    raise NumericalError(
        "bound quadruple iteration did not converge",
        iterations=max_iter, last_change=change,
        state=(u_up, u_lo, v_up, v_lo),
    )


def capital_lambda(p: ModelParams) -> float:
    """Critical habitat length; vanishing fronts never pass it."""
    if not p.prey_viable:
        raise PreconditionError("capital_lambda requires m*lam > b")
    return 0.5 * math.pi * min(math.sqrt(p.m / (p.m * p.lam - p.b)), math.sqrt(p.d / (p.nu + p.c)))


def z_star(p: ModelParams) -> float:
    return 0.5 * math.pi * math.sqrt(p.d / (p.nu + p.c))


def speed_upper(p: ModelParams) -> float:
    return 2.0 * max(math.sqrt(p.lam), math.sqrt(p.d * (p.nu + p.c)))


def thresholds(p: ModelParams, init: InitialData) -> Thresholds:
    """All closed-form thresholds for ``p`` and the initial data.

    ``mu_star``/``mu_star_star`` are ``None`` when ``h0`` is not strictly below
    the length in their bracket; ``mu_zero`` is the smallest applicable one.
    """
    if not p.prey_viable:
        raise PreconditionError("thresholds require m*lam > b")
    gap = p.m * p.lam - p.b
    int_u = float(np.trapezoid(init.u0, init.x))
    int_v = float(np.trapezoid(init.v0, init.x))
    h0 = p.h0

    mu_s = None
    room_u = 0.5 * math.pi * math.sqrt(p.m / gap) - h0
    if room_u > 0 and int_u > 0:
        mu_s = max(1.0, p.m * float(np.max(init.u0)) / gap) * room_u / int_u

    mu_ss = None
    room_v = z_star(p) - h0
    if room_v > 0 and int_v > 0:
        mu_ss = max(1.0, float(np.max(init.v0)) / p.nu) * (p.d / p.nu) * room_v / int_v

    applicable = [mu for mu in (mu_s, mu_ss) if mu is not None]
    return Thresholds(
        capital_lambda=capital_lambda(p),
        z_star=z_star(p),
        mu_star=mu_s,
        mu_star_star=mu_ss,
        mu_zero=min(applicable) if applicable else None,
        speed_upper=speed_upper(p),
    )


@dataclass(frozen=True)
class UpperSolution:
    """Decaying cosine upper solution for the vanishing criterion.

    ``u_bar = v_bar = M*exp(-beta*t)*cos(pi*x/(2*sigma(t)))`` with
    ``sigma(t) = h0*(1 + delta - delta/2*exp(-beta*t))``.  Every run with
    ``mu <= mu0`` stays below it, so its front never passes ``h0*(1 + delta)``.
    """

    h0: float
    delta: float
    beta: float
    M: float
    mu0: float

    def sigma(self, t):
        return self.h0 * (1.0 + self.delta - 0.5 * self.delta * np.exp(-self.beta * np.asarray(t)))

    @property
    def sigma_inf(self) -> float:
        return self.h0 * (1.0 + self.delta)

    def profile(self, t: float, x):
        """Upper-solution density at time ``t``; zero beyond ``sigma(t)``."""
        x = np.asarray(x, dtype=float)
        s = float(self.sigma(t))
        inside = x <= s
        vals = self.M * math.exp(-self.beta * t) * np.cos(0.5 * np.pi * np.minimum(x, s) / s)
        return np.where(inside, vals, 0.0)


def upper_solution_construct(p: ModelParams, init: InitialData, delta: float = 0.1) -> UpperSolution:
    """Build the cosine upper solution and the vanishing coefficient ``mu0``.

    ``M`` is the smallest constant with ``M*cos(pi*x/(2*sigma(0)))`` above both
    initial profiles, inflated by 1%.  The decay rate uses ``min(1, d)`` as the
    diffusion factor so the construct stays an upper solution when ``d < 1``.
    """
    if delta <= 0:
        raise PreconditionError("delta must be > 0")
    h0 = p.h0
    beta = 0.5 * min(1.0, p.d) * (0.5 * math.pi) ** 2 / (h0**2 * (1 + delta) ** 2) - 0.5 * max(p.lam, p.nu + p.c)
    if beta <= 0:
        raise PreconditionError(
            f"decay rate beta = {beta:.6g} <= 0; use a smaller delta "
            "(the construct is unavailable if h0 itself is too large)"
        )
    sigma0 = h0 * (1 + 0.5 * delta)
    weight = np.cos(0.5 * np.pi * init.x / sigma0)
    M = 1.01 * float(np.max(np.maximum(init.u0, init.v0) / weight))
    if M <= 0:
        raise PreconditionError("initial data are identically zero; no construct needed")
    mu0 = delta * beta * h0**2 / (2 * math.pi * M * (1 + p.rho))
    return UpperSolution(h0=h0, delta=delta, beta=beta, M=M, mu0=mu0)


def density_bounds(p: ModelParams, init: InitialData) -> tuple[float, float]:
    """Explicit sup-norm bounds ``max(lam, |u0|)`` and ``max(nu + c, |v0|)``."""
    return max(p.lam, float(np.max(init.u0))), max(p.nu + p.c, float(np.max(init.v0)))

