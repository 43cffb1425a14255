"""Finite-length waves, the critical elliptic problem and travelling fronts.

The wave equation ``d*q'' - s*q' + f(q) = 0`` is treated as the planar system
``q' = p, d*p' = s*p - f(q)`` with

    f(q) = nu*q - q**2 + c*u*q/(u + m*q)

where the prey density ``u`` is frozen at the coexistence value ``u*``, so
that ``theta = v*`` is the positive zero of ``f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import NumericalError, PreconditionError
from .model import ModelParams, coexistence_state, speed_upper

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_ODE_TOL = dict(rtol=1e-12, atol=1e-14)


@dataclass(frozen=True)
class WaveNonlinearity:
    u_fixed: float
    nu: float
    c: float
    m: float
    d: float
    scale: float = 1.0

    @classmethod
    def from_params(cls, p: ModelParams) -> "WaveNonlinearity":
        return cls(coexistence_state(p).u_star, p.nu, p.c, p.m, p.d)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self.nu * q - q * q + self.c * self.u_fixed * q / (self.u_fixed + self.m * q)
        out = self.scale * out
        return out if out.ndim else float(out)

    @property
    def slope0(self) -> float:
        """``f'(0) = nu + c`` (times ``scale``)."""
        return self.scale * (self.nu + self.c)

    @property
    def theta(self) -> float:
        """Positive zero of ``f``: root of ``m*q**2 - (m*nu - u)*q - u*(nu + c)``."""
        u, m = self.u_fixed, self.m
        bq = m * self.nu - u
        return (bq + math.sqrt(bq * bq + 4 * m * u * (self.nu + self.c))) / (2 * m)

    def primitive(self, q: float) -> float:
        """``int_0^q f`` by adaptive quadrature."""
        val, _ = quad(self, 0.0, q, epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    def mean_between(self, a, b):
        """Average of ``f`` over ``[a, b]`` (Gauss-Legendre, exact up to roundoff here)."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
        return 0.5 * np.sum(_GL_WEIGHTS * self(nodes), axis=-1)


@dataclass(frozen=True, eq=False)
class WaveProfile:
    z: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q_end: float
    z_end: float
    s: float
    eta: float

    def table(self) -> np.ndarray:
        return np.column_stack([self.z, self.q, self.p])


@dataclass(frozen=True, eq=False)
class TravelingWavePair:
    phi: WaveProfile
    psi: WaveProfile
    s: float


@dataclass(frozen=True, eq=False)
class CriticalProfile:
    """Positive solution of ``d*v'' + f(v) = 0`` on ``(0, Z)``, ``v'(0) = v(Z) = 0``."""

    x: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    v0: float
    Z: float

    def as_wave(self) -> WaveProfile:
        """Reflect to the phase-plane trajectory ``(v(Z - z), -v'(Z - z))``."""
        z = self.Z - self.x[::-1]
        return WaveProfile(z, self.v[::-1], -self.dv[::-1], self.v0, self.Z, 0.0, float(-self.dv[-1]))


def eta_star(w: WaveNonlinearity) -> float:
    """Largest initial slope whose ``s = 0`` trajectory still turns before ``theta``."""
    val, err = quad(w, 0.0, w.theta, epsabs=0.0, epsrel=1e-10, limit=200, full_output=False)
    if not np.isfinite(val) or val <= 0:
        raise NumericalError("quadrature of f on [0, theta] failed", value=val, error=err)
    return math.sqrt(2.0 / w.d * val)


def _check_eta(w, eta):
    top = eta_star(w)
    if not 0.0 < eta < top:
        raise PreconditionError(f"eta must lie in (0, eta*) = (0, {top:.12g}), got {eta!r}")
    return top


def q_eta(w: WaveNonlinearity, eta: float) -> float:
    """Turning height ``q`` with ``eta**2 = (2/d)*int_0^q f``, by bisection."""
    _check_eta(w, eta)
    target = 0.5 * w.d * eta * eta
    lo, hi = 0.0, w.theta
    # primitive is strictly increasing on (0, theta) since f > 0 there
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if w.primitive(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _z_integral(w, top):
    # r = top*sin(t)**2 turns the inverse-square-root end into a smooth integrand
    def integrand(t):
        s = math.sin(t)
        r = top * s * s
        avg = float(w.mean_between(r, top))
        return 2.0 * s * math.sqrt(top) / math.sqrt(2.0 / w.d * avg)

    val, _ = quad(integrand, 0.0, 0.5 * math.pi, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def z_eta(w: WaveNonlinearity, eta: float) -> float:
    """Length ``z`` at which the ``s = 0`` trajectory from ``(0, eta)`` reaches ``p = 0``."""
    return _z_integral(w, q_eta(w, eta))


def z_star(w: WaveNonlinearity) -> float:
    return 0.5 * math.pi * math.sqrt(w.d / w.slope0)


def _integrate_wave(w, s, q0, p0, horizon):
    def rhs(z, y):
        return (y[1], (s * y[1] - w(y[0])) / w.d)

    def turn(z, y):
        return y[1]

    turn.terminal = True
    turn.direction = -1
    return solve_ivp(rhs, (0.0, horizon), (q0, p0), method="RK45", events=turn, dense_output=True, **_ODE_TOL)


def finite_wave(w: WaveNonlinearity, s: float, eta: float, samples: int = 401, horizon: Optional[float] = None) -> WaveProfile:
    """Trajectory from ``(0, eta)`` to its first ``p = 0`` crossing.

    The crossing ``(q_end, z_end)`` comes from event location on the dense
    output of an adaptive RK45 integration.
    """
    if s < 0:
        raise PreconditionError("wave speed s must be >= 0")
    if eta <= 0:
        raise PreconditionError("eta must be > 0")
    if horizon is None:
        horizon = 200.0 * z_star(w)
    sol = _integrate_wave(w, s, 0.0, eta, horizon)
    if not sol.success or sol.t_events[0].size == 0:
        raise NumericalError("no finite wave for these inputs", s=s, eta=eta, horizon=horizon)
    z_end = float(sol.t_events[0][0])
    q_end = float(sol.y_events[0][0][0])
    z = np.linspace(0.0, z_end, samples)
    q, p = sol.sol(z)
    p[-1] = 0.0
    q[-1] = q_end
    return WaveProfile(z, q, p, q_end, z_end, s, eta)


def landing_length(w: WaveNonlinearity, v0: float, horizon: float):
    """First zero of the solution of ``d*v'' = -f(v)``, ``v(0) = v0``, ``v'(0) = 0``.

    Returns ``(x_zero, sol)``; ``x_zero`` is ``inf`` when no zero occurs before ``horizon``.
    """
    def rhs(x, y):
        return (y[1], -w(y[0]) / w.d)

    def hit(x, y):
        return y[0]

    hit.terminal = True
    hit.direction = -1
    sol = solve_ivp(rhs, (0.0, horizon), (v0, 0.0), method="RK45", events=hit, dense_output=True, **_ODE_TOL)
    if sol.t_events[0].size == 0:
        return math.inf, sol
    return float(sol.t_events[0][0]), sol


def solve_bvp_critical(w: WaveNonlinearity, Z: float, samples: int = 401, tol: float = 1e-10) -> Optional[CriticalProfile]:
    """Positive solution of the critical elliptic problem on ``(0, Z)``, or ``None``.

    Shoots on the height ``v(0)`` in ``(0, theta)``; the landing position of the
    first zero increases from ``Z*`` (small heights) to infinity (heights near
    ``theta``), so bisection on the height brackets ``Z`` whenever ``Z > Z*``.
    """
    if not Z > 0:
        raise PreconditionError("Z must be > 0")
    theta = w.theta
    horizon = 50.0 * max(Z, z_star(w))
    lo, hi = 1e-8 * theta, theta * (1.0 - 1e-12)
    z_lo, _ = landing_length(w, lo, horizon)
    if z_lo >= Z:
        return None
    z_hi, _ = landing_length(w, hi, horizon)
    if z_hi < Z:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        z_mid, sol = landing_length(w, mid, horizon)
        if abs(z_mid - Z) <= tol:
            break
        if z_mid < Z:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    else:
        raise NumericalError("critical BVP shooting did not converge", Z=Z)
    if abs(z_mid - Z) > 1e3 * tol:
        raise NumericalError("critical BVP landing mismatch", Z=Z, landing=z_mid)
    x = np.linspace(0.0, Z, samples)
    v, dv = sol.sol(x)
    return CriticalProfile(x, v, dv, mid, Z)


def _front(growth: float, D: float, s: float, floor: float = 1e-10, start_gap: float = 1e-6, samples: int = 801) -> WaveProfile:
    # monotone front of D*q'' - s*q' + q*(growth - q) = 0 joining 0 to growth
    r_neg = (s - math.sqrt(s * s + 4 * growth * D)) / (2 * D)
    q_start = (1.0 - start_gap) * growth
    p_start = r_neg * (q_start - growth)

    def rhs(z, y):
        return (y[1], (s * y[1] - y[0] * (growth - y[0])) / D)

    def low(z, y):
        return y[0] - floor * growth

    low.terminal = True
    low.direction = -1
    horizon = -1e4 * D / s
    sol = solve_ivp(rhs, (0.0, horizon), (q_start, p_start), method="RK45", events=low, dense_output=True, **_ODE_TOL)
    if sol.t_events[0].size == 0:
        raise NumericalError("front integration never approached zero", growth=growth, s=s)
    z0 = float(sol.t_events[0][0])
    length = -z0
    z_body = np.linspace(0.0, length, samples)
    q_body, p_body = sol.sol(z_body + z0)
    # linear tail past the start point until within floor of the limit
    tail_len = math.log(floor / start_gap) / r_neg
    z_tail = np.linspace(0.0, tail_len, samples // 4 + 1)[1:]
    gap = (q_start - growth) * np.exp(r_neg * z_tail)
    z = np.concatenate([z_body, length + z_tail])
    q = np.concatenate([q_body, growth + gap])
    p = np.concatenate([p_body, r_neg * gap])
    return WaveProfile(z, q, p, float(q[-1]), float(z[-1]), s, float(p[0]))


def traveling_wave(p: ModelParams, s: float, samples: int = 801) -> TravelingWavePair:
    """Monotone fronts for the prey (growth ``lam``) and predator (growth ``nu + c``).

    Each front is traced backward from the stable manifold of its saturated
    state.  Above the minimal speed the origin is a node, so the front only
    reaches zero asymptotically; the profile starts where it first drops to
    ``1e-10`` of its limit, and that point is placed at ``z = 0``.
    """
    bound = speed_upper(p)
    if not s > bound:
        raise PreconditionError(f"s = {s!r} <= {bound!r}: the profile would oscillate")
    phi = _front(p.lam, 1.0, s, samples=samples)
    psi = _front(p.nu + p.c, p.d, s, samples=samples)
    return TravelingWavePair(phi, psi, s)
