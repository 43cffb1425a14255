import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.optimize import fsolve

from stefan_lab import DomainError, InitialData, ModelParams, NumericalError, PreconditionError
from stefan_lab.model import (
    bound_quadruple,
    capital_lambda,
    coexistence_state,
    density_bounds,
    equilibrium_residuals,
    reaction_u,
    reaction_v,
    speed_upper,
    thresholds,
    upper_solution_construct,
    z_star,
)

from conftest import ref_params

# 40-digit evaluations of the closed forms (mpmath), frozen
U_STAR = 0.6830127018922193233818615853764680917357
V_STAR = 1.183012701892219323381861585376468091736
LAMBDA_REF = 1.282549830161864095544036359671006411467
SPEED_REF = 2.449489742783178098197284074705891391966
BETA_REF = 3.32834892606998290034483099168435997327


def _brute_root(p):
    # seed grid over the box [0, lam] x [0, nu + c], keep the positive root
    f = lambda z: list(equilibrium_residuals(z[0], z[1], p))
    best = None
    for u0 in np.linspace(0.1, p.lam, 5):
        for v0 in np.linspace(0.1, p.nu + p.c, 5):
            z, info, ok, _ = fsolve(f, [u0, v0], full_output=True, xtol=1e-12)
            if ok == 1 and z[0] > 1e-6 and z[1] > 1e-6:
                if best is None or np.max(np.abs(info["fvec"])) < np.max(np.abs(best[1])):
                    best = (z, info["fvec"])
    return best[0]


regime_params = st.builds(
    dict,
    lam=st.floats(0.2, 5.0),
    b=st.floats(0.05, 5.0),
    m=st.floats(0.2, 5.0),
    d=st.floats(0.1, 5.0),
    nu=st.floats(0.1, 5.0),
    c=st.floats(0.05, 5.0),
)


def _regime_kwargs(lam, m, d, nu, c, t):
    # b ranges over (m*lam*c/(c + nu), m*lam), which is 0 < m*lam - b < b*nu/c
    lo = m * lam * c / (c + nu)
    return dict(lam=lam, b=lo + t * (m * lam - lo), m=m, d=d, nu=nu, c=c)


regime_draws = st.builds(
    _regime_kwargs,
    lam=st.floats(0.2, 5.0),
    m=st.floats(0.2, 5.0),
    d=st.floats(0.1, 5.0),
    nu=st.floats(0.1, 5.0),
    c=st.floats(0.05, 5.0),
    t=st.floats(1e-3, 1 - 1e-3),
)


def _in_regime(kw):
    return ModelParams(mu=1.0, rho=1.0, h0=0.5, **kw).coexistence_regime


class TestParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError, match="lam"):
            ref_params(lam=-1.0)
        with pytest.raises(DomainError, match="h0"):
            ref_params(h0=0.0)
        with pytest.raises(DomainError):
            ref_params(mu=float("nan"))

    def test_regime_flags(self, ref):
        assert ref.prey_viable and ref.coexistence_regime
        assert not ref.replace(b=2.0).prey_viable
        # m*lam - b = 0.5 vs b*nu/c = 0.5/5 = 0.1
        assert not ref.replace(c=5.0).coexistence_regime

    def test_decoupled_bypasses_validation(self, ref):
        q = ref.decoupled()
        assert q.b == 0.0 and q.c == 0.0 and q.lam == ref.lam


class TestInitialData:
    def test_cosine_is_compatible(self):
        init = InitialData.cosine(0.7, 0.3, 0.9)
        assert init.h0 == 0.7
        assert init.u0[-1] == 0.0 and init.v0[-1] == 0.0
        assert np.all(init.u0[:-1] > 0)

    def test_rejects_nonzero_end(self):
        x = np.linspace(0, 1, 11)
        with pytest.raises(DomainError, match="exactly 0"):
            InitialData(x, 1 - x**2 + 0.1, np.cos(0.5 * np.pi * x))

    def test_rejects_neumann_violation(self):
        x = np.linspace(0, 1, 101)
        w = 1 - x
        with pytest.raises(DomainError, match="u'"):
            InitialData(x, w, w)

    def test_allows_absent_species(self):
        x = np.linspace(0, 1, 51)
        init = InitialData(x, np.zeros_like(x), 1 - x**2)
        assert not init.u0.any()


class TestReactions:
    def test_trivial_values(self, ref):
        assert reaction_u(0.0, 1.0, ref) == 0.0
        assert reaction_u(0.0, 0.0, ref) == 0.0
        assert reaction_v(1.0, 0.0, ref) == 0.0
        assert reaction_v(0.0, 0.0, ref) == 0.0
        v = 0.8
        assert reaction_v(0.0, v, ref) == pytest.approx(ref.nu * v - v * v, abs=1e-15)

    def test_vanish_at_coexistence(self, ref):
        assert abs(reaction_u(0.6830, 1.1830, ref)) < 1e-3
        assert abs(reaction_v(0.6830, 1.1830, ref)) < 1e-3
        assert abs(reaction_u(U_STAR, V_STAR, ref)) < 1e-14

    def test_negative_input(self, ref):
        with pytest.raises(DomainError):
            reaction_u(-1e-3, 0.5, ref)
        with pytest.raises(DomainError):
            reaction_v(np.array([0.1, 0.2]), np.array([0.1, -0.2]), ref)

    def test_vectorised(self, ref):
        u = np.linspace(0, 2, 7)
        v = np.linspace(0, 1, 7)
        out = reaction_u(u, v, ref)
        assert out.shape == (7,)
        assert out[0] == 0.0
        assert out[3] == pytest.approx(reaction_u(float(u[3]), float(v[3]), ref))

    @given(u=st.floats(0, 10), v=st.floats(0, 10))
    @settings(max_examples=300, deadline=None)
    def test_linear_bounds(self, u, v):
        p = ref_params()
        assert reaction_u(u, v, p) <= p.lam * u + 1e-12
        assert reaction_v(u, v, p) <= (p.nu + p.c) * v + 1e-12


class TestCoexistence:
    def test_reference_values(self, ref):
        eq = coexistence_state(ref)
        assert eq.A == pytest.approx(0.5, abs=1e-15)
        assert eq.delta1 == pytest.approx(0.75, abs=1e-15)
        assert eq.u_star == pytest.approx(U_STAR, abs=1e-15)
        assert eq.v_star == pytest.approx(V_STAR, abs=1e-15)
        ru, rv = equilibrium_residuals(eq.u_star, eq.v_star, ref)
        assert abs(ru) <= 1e-10 and abs(rv) <= 1e-10

    def test_matches_brute_force_root(self, ref):
        eq = coexistence_state(ref)
        u, v = _brute_root(ref)
        assert abs(u - eq.u_star) < 1e-8 and abs(v - eq.v_star) < 1e-8

    def test_regime_guard(self, ref):
        with pytest.raises(PreconditionError):
            coexistence_state(ref.replace(b=1.5))
        with pytest.raises(PreconditionError):
            coexistence_state(ref.replace(c=5.0))

    @given(kw=regime_draws)
    @settings(max_examples=1000, deadline=None)
    def test_residuals_over_regime(self, kw):
        assume(_in_regime(kw))
        p = ModelParams(mu=1.0, rho=1.0, h0=0.5, **kw)
        eq = coexistence_state(p)
        assert eq.u_star > 0 and eq.v_star > 0
        ru, rv = equilibrium_residuals(eq.u_star, eq.v_star, p)
        scale = max(1.0, p.lam, p.nu + p.c)
        assert abs(ru) <= 1e-10 * scale and abs(rv) <= 1e-10 * scale

    @given(kw=regime_draws)
    @settings(max_examples=100, deadline=None)
    def test_wave_nonlinearity_vanishes_at_v_star(self, kw):
        from stefan_lab.phase_plane import WaveNonlinearity

        assume(_in_regime(kw))
        p = ModelParams(mu=1.0, rho=1.0, h0=0.5, **kw)
        w = WaveNonlinearity.from_params(p)
        eq = coexistence_state(p)
        assert abs(w(eq.v_star)) <= 1e-10 * max(1.0, eq.v_star**2)
        assert w.theta == pytest.approx(eq.v_star, rel=1e-10)


class TestBoundQuadruple:
    def _residuals(self, q, p):
        r1 = equilibrium_residuals(q.u_lower, q.v_upper, p)[0]
        r2 = equilibrium_residuals(q.u_upper, q.v_lower, p)[0]
        r3 = equilibrium_residuals(q.u_upper, q.v_upper, p)[1]
        r4 = equilibrium_residuals(q.u_lower, q.v_lower, p)[1]
        return r1, r2, r3, r4

    def test_reference(self, ref):
        q = bound_quadruple(ref)
        assert max(abs(r) for r in self._residuals(q, ref)) <= 1e-8
        eq = coexistence_state(ref)
        assert q.u_lower <= eq.u_star + 1e-10 <= q.u_upper + 2e-10
        assert q.v_lower <= eq.v_star + 1e-10 <= q.v_upper + 2e-10

    def test_guard(self, ref):
        with pytest.raises(PreconditionError):
            bound_quadruple(ref.replace(b=1.0))

    def test_budget(self, ref):
        with pytest.raises(NumericalError) as info:
            bound_quadruple(ref, tol=0.0, max_iter=3)
        assert info.value.diagnostics["iterations"] == 3

    @given(kw=regime_draws)
    @settings(max_examples=150, deadline=None)
    def test_brackets_coexistence(self, kw):
        assume(_in_regime(kw))
        p = ModelParams(mu=1.0, rho=1.0, h0=0.5, **kw)
        q = bound_quadruple(p)
        eq = coexistence_state(p)
        assert max(abs(r) for r in self._residuals(q, p)) <= 1e-8
        slack = 1e-8
        assert q.u_lower <= q.u_upper + slack and q.v_lower <= q.v_upper + slack
        assert q.u_lower - slack <= eq.u_star <= q.u_upper + slack
        assert q.v_lower - slack <= eq.v_star <= q.v_upper + slack


class TestThresholds:
    def test_reference_closed_forms(self, ref):
        assert capital_lambda(ref) == pytest.approx(LAMBDA_REF, abs=1e-12)
        assert z_star(ref) == pytest.approx(LAMBDA_REF, abs=1e-12)
        assert speed_upper(ref) == pytest.approx(SPEED_REF, abs=1e-12)

    @given(kw=regime_params)
    @settings(max_examples=200, deadline=None)
    def test_lambda_vs_z_star(self, kw):
        p = ModelParams(mu=1.0, rho=1.0, h0=0.5, **kw)
        assume(p.prey_viable)
        L, Z = capital_lambda(p), z_star(p)
        assert L <= Z * (1 + 1e-14)
        prey_branch = 0.5 * math.pi * math.sqrt(p.m / (p.m * p.lam - p.b))
        assert L == pytest.approx(min(prey_branch, Z), rel=1e-14)

    def test_thresholds_record(self, small_setup):
        p, init = small_setup
        th = thresholds(p, init)
        assert th.capital_lambda == pytest.approx(LAMBDA_REF, abs=1e-12)
        assert th.mu_zero == min(th.mu_star, th.mu_star_star)
        # trapezoid integral of 0.5*cos on [0, h0] is close to h0/pi
        int_v = 0.5 * 2 * p.h0 / math.pi
        room = z_star(p) - p.h0
        assert th.mu_star_star == pytest.approx(1.0 * room / int_v, rel=1e-4)
        assert set(th.as_dict()) == {
            "capital_lambda", "z_star", "mu_star", "mu_star_star", "mu_zero", "speed_upper"
        }

    def test_mu_star_inverse_in_mass(self, small_setup):
        p, _ = small_setup
        a = thresholds(p, InitialData.cosine(p.h0, 0.1, 0.1)).mu_star
        b = thresholds(p, InitialData.cosine(p.h0, 0.2, 0.2)).mu_star
        # max{1, m|u0|/(m lam - b)} stays 1 for both amplitudes
        assert a / b == pytest.approx(2.0, rel=1e-12)

    def test_not_applicable_branch(self):
        p = ref_params(h0=2.5)
        th = thresholds(p, InitialData.cosine(2.5))
        assert th.mu_star is None and th.mu_star_star is None and th.mu_zero is None

    def test_density_bounds(self, ref):
        init = InitialData.cosine(ref.h0, 3.0, 0.2)
        assert density_bounds(ref, init) == (3.0, 1.5)


class TestUpperSolution:
    def test_reference_beta(self, ref):
        up = upper_solution_construct(ref, InitialData.cosine(0.5), delta=0.1)
        assert up.beta == pytest.approx(BETA_REF, abs=1e-12)
        assert up.mu0 > 0

    def test_sigma(self, ref):
        up = upper_solution_construct(ref, InitialData.cosine(0.5), delta=0.1)
        assert up.sigma(0.0) == pytest.approx(0.5 * 1.05, abs=1e-15)
        assert up.sigma(1e3) == pytest.approx(up.sigma_inf, abs=1e-15)
        assert up.sigma_inf == pytest.approx(0.55, abs=1e-15)

    def test_dominates_initial_data(self, small_setup):
        p, init = small_setup
        up = upper_solution_construct(p, init)
        bar = up.profile(0.0, init.x)
        assert np.all(bar >= np.maximum(init.u0, init.v0))
        # minimal M up to the 1% inflation
        ratio = np.max(np.maximum(init.u0, init.v0)[:-1] / bar[:-1])
        assert ratio == pytest.approx(1 / 1.01, rel=1e-12)

    def test_mu0_formula(self, small_setup):
        p, init = small_setup
        up = upper_solution_construct(p, init, delta=0.2)
        expect = 0.2 * up.beta * p.h0**2 / (2 * math.pi * up.M * (1 + p.rho))
        assert up.mu0 == pytest.approx(expect, rel=1e-14)

    def test_beta_guard(self):
        p = ref_params(h0=1.2)
        with pytest.raises(PreconditionError, match="delta"):
            upper_solution_construct(p, InitialData.cosine(1.2), delta=0.1)
