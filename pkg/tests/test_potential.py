import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaswitch.potential import (
    EXP_GUARD,
    LearnerConfig,
    PotentialRangeError,
    analytic_derivs,
    discrete_derivs,
    erfi,
    erfi_inv,
    erfi_scaled,
    grad_s,
    grad_s_array,
    heat_residual,
    heat_residual_relative,
    heat_residual_relative_array,
    phi,
    phi_array,
    potential_increment,
    potential_value,
    residual_delta,
    residual_delta_array,
    residual_delta_scaled,
)

from oracles import FROZEN, V_mp, delta_mp, erfi_mp, erfi_quad, erfi_special, fd_mp, phi_mp

CFG = LearnerConfig(C=1.0, G=1.0, lam=0.0, alpha=2.0)


# ---------------------------------------------------------------------------
# config


def test_default_alpha():
    assert LearnerConfig(1.0, 2.0, 3.0).alpha == pytest.approx(4 * 3 / 2 + 2)
    assert LearnerConfig.for_doubling(1.0, 2.0, 3.0).alpha == pytest.approx(8 * 3 / 2 + 2)


@pytest.mark.parametrize("kw", [dict(C=0, G=1), dict(C=1, G=0), dict(C=1, G=1, lam=-1),
                                dict(C=1, G=1, alpha=0), dict(C=math.inf, G=1)])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        LearnerConfig(**kw)


def test_admissibility_flag():
    assert LearnerConfig(1, 1, 1).alpha_is_admissible
    assert not LearnerConfig(1, 1, 1, alpha=1.0).alpha_is_admissible


# ---------------------------------------------------------------------------
# special functions


def test_erfi_one_matches_quadrature():
    assert abs(erfi(1.0) - FROZEN["erfi(1)"]) <= 1e-12 * FROZEN["erfi(1)"]
    assert erfi(1.0) == pytest.approx(erfi_quad(1.0), rel=1e-13)


@pytest.mark.parametrize("z", [1e-8, 1e-3, 0.3, 1.0, 2.5, 5.0, 6.99, 7.0, 7.01, 10.0, 20.0, 26.0])
def test_erfi_against_mpmath(z):
    ref = float(erfi_mp(z))
    assert erfi(z) == pytest.approx(ref, rel=5e-15)
    assert erfi(-z) == pytest.approx(-ref, rel=5e-15)


@pytest.mark.parametrize("z", [0.1, 1.0, 4.0, 9.0])
def test_erfi_against_scipy_special(z):
    assert erfi(z) == pytest.approx(erfi_special(z), rel=1e-13)


def test_erfi_guard():
    z = math.sqrt(EXP_GUARD) * 1.001
    with pytest.raises(PotentialRangeError):
        erfi(z)
    assert math.isfinite(erfi_scaled(z))


def test_erfi_zero_and_nonfinite():
    assert erfi(0.0) == 0.0
    with pytest.raises(ValueError):
        erfi(math.nan)


@given(st.floats(min_value=-25, max_value=25, allow_nan=False))
def test_erfi_is_odd(z):
    assert erfi(-z) == -erfi(z)


@given(st.floats(min_value=1e-6, max_value=25.0))
def test_erfi_scaled_consistent(z):
    assert erfi_scaled(z) == pytest.approx(math.exp(-z * z) * erfi(z), rel=1e-13)


@given(st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=300)
def test_erfi_inv_round_trip_and_bound(y):
    z = erfi_inv(y)
    assert abs(erfi(z) - y) <= 1e-10 * y
    assert z <= 1.0 + math.sqrt(math.log1p(y))
    assert erfi_inv(-y) == -z


@pytest.mark.parametrize("y", [1e-6, 0.01, 0.5, 1.0, 3.0, 6.9, 7.1, 12.0, 26.0])
def test_phi_against_mpmath(y):
    assert phi(y) == pytest.approx(float(phi_mp(y)), rel=5e-15)
    assert phi(-y) == phi(y)


def test_phi_array_matches_scalar():
    y = np.concatenate([np.linspace(-26, 26, 1001), [0.0, 7.0, -7.0]])
    ref = np.array([phi(v) for v in y])
    np.testing.assert_allclose(phi_array(y), ref, rtol=1e-14, atol=0)
    small = y[:5]
    np.testing.assert_array_equal(phi_array(small), ref[:5])


def test_phi_array_guard():
    with pytest.raises(PotentialRangeError):
        phi_array(np.full(100, 30.0))


# ---------------------------------------------------------------------------
# potential values


def test_potential_examples():
    assert potential_value(CFG, 1, 1) == pytest.approx(FROZEN["V(C=1,a=2,t=1,S=1)"], rel=1e-13)
    assert potential_value(CFG, 2, 2) == pytest.approx(FROZEN["V(C=1,a=2,t=2,S=2)"], rel=1e-13)
    assert potential_value(CFG, 0, 5.0) == 0.0


def test_potential_rejects_negative_time():
    with pytest.raises(ValueError):
        potential_value(CFG, -1, 0)


@given(st.integers(1, 5000), st.floats(-1.0, 1.0), st.sampled_from([0.0, 0.1, 1.0, 10.0]))
def test_potential_against_mpmath(t, frac, lam):
    cfg = LearnerConfig(1.0, 1.0, lam)
    S = frac * (t - 1)
    ref = V_mp(1.0, cfg.alpha, t, S)
    assert potential_value(cfg, t, S) == pytest.approx(float(ref), rel=1e-13, abs=1e-13)


@given(st.integers(1, 2000), st.floats(-1.0, 1.0))
def test_potential_even_and_linear_in_C(t, frac):
    S = frac * (t - 1)
    c1, c3 = LearnerConfig(1.0, 1.0), LearnerConfig(3.0, 1.0)
    assert potential_value(c1, t, S) == potential_value(c1, t, -S)
    assert potential_value(c3, t, S) == pytest.approx(3 * potential_value(c1, t, S), rel=1e-14)


def test_potential_increment():
    assert potential_increment(CFG, 5, 3.0) == pytest.approx(
        potential_value(CFG, 5, 3.0) - potential_value(CFG, 5, 0.0), rel=1e-13)


# ---------------------------------------------------------------------------
# derivatives


def test_discrete_derivative_examples():
    d = discrete_derivs(CFG, 2, 1)
    assert d.grad_s == pytest.approx(FROZEN["gradS(t=2,S=1)"], rel=1e-13)
    assert d.grad_t == pytest.approx(FROZEN["gradT(t=2,S=1)"], rel=1e-13)
    assert discrete_derivs(CFG, 1, 0).grad_s == 0.0
    with pytest.raises(ValueError):
        discrete_derivs(CFG, 0, 0)


def test_laplacian_consistent():
    d = discrete_derivs(CFG, 7, 2.5)
    ref = potential_value(CFG, 7, 3.5) + potential_value(CFG, 7, 1.5) - 2 * potential_value(CFG, 7, 2.5)
    assert d.lapl_s == pytest.approx(ref, rel=1e-12)


def test_analytic_derivative_examples():
    d = analytic_derivs(CFG, 1, 1)
    assert d.dSS == pytest.approx(FROZEN["dSS(t=1,S=1)"], rel=1e-14)
    assert analytic_derivs(CFG, 1, 0).dt == pytest.approx(-1 / math.sqrt(2), rel=1e-15)
    assert heat_residual(CFG, 1, 0) == pytest.approx(0.0, abs=1e-15)
    assert heat_residual(CFG, 1, 0, diffusivity=1.0) == pytest.approx(-1 / (2 * math.sqrt(2)), rel=1e-14)


@given(st.floats(1.0, 1e4), st.floats(-1.0, 1.0), st.sampled_from([0.0, 0.1, 1.0, 10.0]))
def test_heat_identity(t, frac, lam):
    cfg = LearnerConfig(1.0, 1.0, lam)
    S = frac * 50 * math.sqrt(t)
    assert abs(heat_residual_relative(cfg, t, S)) <= 1e-9


def test_heat_relative_array_matches():
    t = np.array([1.0, 10.0, 1e4, 16384.0])
    S = np.array([0.0, 5.0, 2000.0, 16000.0])
    ref = [heat_residual_relative(CFG, a, b, 1.3) for a, b in zip(t, S)]
    np.testing.assert_allclose(heat_residual_relative_array(CFG, t, S, 1.3), ref, rtol=1e-15)


@pytest.mark.parametrize("t,S", [(1, 0.3), (3, -1.7), (50, 20.0), (1000, 250.0), (1000, -900.0)])
def test_second_and_third_derivative_against_mpmath_fd(t, S):
    """Derivatives of the 40-digit closed form by central differences, h = 1e-4."""
    cfg = LearnerConfig(1.0, 1.0, 0.5)
    a = cfg.alpha
    d = analytic_derivs(cfg, t, S)
    f = lambda s: V_mp(1.0, a, t, s)
    assert d.dS == pytest.approx(float(fd_mp(f, S, 1e-4, 1)), rel=1e-6)
    assert d.dSS == pytest.approx(float(fd_mp(f, S, 1e-4, 2)), rel=1e-6)
    assert d.dSSS == pytest.approx(float(fd_mp(f, S, 1e-4, 3)), rel=1e-6)
    g = lambda tt: V_mp(1.0, a, tt, S)
    assert d.dt == pytest.approx(float(fd_mp(g, t, 1e-4, 1)), rel=1e-6)


def test_analytic_derivs_guard():
    with pytest.raises(PotentialRangeError) as exc:
        analytic_derivs(CFG, 1, 100.0)
    assert exc.value.t == 1 and exc.value.S == 100.0


# ---------------------------------------------------------------------------
# policy


def test_grad_s_matches_discrete_derivs():
    for t, S in [(1, 0), (2, 1), (9, -4.5), (400, 123.0)]:
        assert grad_s(CFG.C, CFG.alpha, t, S) == pytest.approx(discrete_derivs(CFG, t, S).grad_s, rel=1e-13)


def test_grad_s_array_matches_scalar():
    t = np.arange(1, 2001, dtype=float)
    S = np.linspace(-1, 1, 2000) * (t - 1)
    ref = np.array([grad_s(1.0, 2.0, a, b) for a, b in zip(t, S)])
    np.testing.assert_allclose(grad_s_array(1.0, 2.0, t, S), ref, rtol=1e-13, atol=1e-300)


@given(st.integers(1, 3000), st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_policy_odd_and_monotone(t, frac, step):
    S = frac * (t - 1)
    x = grad_s(1.0, 2.0, t, S)
    assert grad_s(1.0, 2.0, t, -S) == -x
    assert grad_s(1.0, 2.0, t, S + step) >= x


# ---------------------------------------------------------------------------
# one-step residual


def test_residual_example():
    assert residual_delta(CFG, 1, 0.0) == pytest.approx(FROZEN["delta(t=1,S=0,lam=0)"], rel=1e-13)


@pytest.mark.parametrize("lam,G", [(0.0, 1.0), (0.1, 1.0), (1.0, 15.0), (10.0, 1.0)])
@pytest.mark.parametrize("t,frac", [(1, 0.0), (2, 1.0), (5, -0.5), (40, 0.9), (300, 0.3)])
def test_residual_against_mpmath(lam, G, t, frac):
    cfg = LearnerConfig(1.0, G, lam)
    S = frac * (t - 1)
    ref = float(delta_mp(1.0, G, lam, cfg.alpha, t, S))
    assert residual_delta(cfg, t, S) == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_residual_scaled_and_array_agree():
    cfg = LearnerConfig(1.0, 1.0, 0.1)
    for t in (1, 2, 77, 1024, 16384):
        S = np.linspace(-(t - 1), t - 1, 41) if t > 1 else np.zeros(1)
        m, E = residual_delta_array(cfg, t, S)
        for k, s in enumerate(S):
            mk, Ek = residual_delta_scaled(cfg, t, float(s))
            assert E[k] == Ek
            assert m[k] == pytest.approx(mk, rel=1e-12, abs=1e-300)


def test_residual_scaled_past_guard_keeps_sign():
    cfg = LearnerConfig(1.0, 1.0, 0.0)
    m, E = residual_delta_scaled(cfg, 16384, 16000.0)
    assert E > EXP_GUARD and m < 0
    with pytest.raises(PotentialRangeError):
        residual_delta(cfg, 16384, 16000.0)


def test_residual_wrong_alpha_positive():
    cfg = LearnerConfig(1.0, 1.0, 1.0, alpha=1.0)
    S = np.linspace(-99, 99, 199)
    m, _ = residual_delta_array(cfg, 100, S)
    assert m.max() > 0


@pytest.mark.parametrize("v", [5e-324, 1e-310, 1e-160])
def test_series_terminate_on_tiny_arguments(v):
    assert erfi(v) == v
    assert phi(v) == pytest.approx(v * v / 2, abs=1e-320)
    np.testing.assert_array_equal(phi_array(np.full(40, v)), phi(v))
