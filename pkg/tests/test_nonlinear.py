import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from acsplit import AllenCahn, ConvergenceError, jk_scalar, make_basis
from acsplit import nonlinear
from acsplit.analysis import l6_constant_admissible, l6_polynomial
from acsplit.spectral import r_half_symbol

from conftest import band_limited

finite = st.floats(-1e4, 1e4, allow_nan=False)
admissible = st.tuples(st.floats(0.0, 0.49), st.floats(0.0, 3.0)).filter(
    lambda kb: 2 * kb[0] * kb[1] ** 2 < 0.999
)


def bisect(g, lo, hi, n=200):
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- pointwise maps ------------------------------------------------------------


@pytest.mark.parametrize("u,beta,expected", [(0.0, 0.7, 0.0), (1.3, 1.3, 0.0), (2.0, 1.0, 6.0)])
def test_f_pointwise(u, beta, expected):
    assert nonlinear.f_pointwise(u, beta) == pytest.approx(expected, abs=1e-14)


def test_jk_at_zero():
    assert jk_scalar(0.0, 0.3, 1.0) == 0.0


@given(finite, st.floats(0.0, 3.0))
def test_jk_zero_step_is_identity(s, beta):
    assert jk_scalar(s, 0.0, beta) == s


def test_jk_against_bisection():
    t = jk_scalar(1.0, 0.1, 1.0)
    ref = bisect(lambda x: 0.9 * x + 0.1 * x**3 - 1.0, 0.0, 2.0)
    assert abs(t + 0.1 * nonlinear.f_pointwise(t, 1.0) - 1.0) <= 1e-12
    assert t == pytest.approx(ref, abs=1e-12)


@given(finite, admissible)
def test_jk_residual(s, kb):
    k, beta = kb
    t = jk_scalar(s, k, beta)
    assert abs(t + k * nonlinear.f_pointwise(t, beta) - s) <= 1e-12 * (1 + abs(s))


@given(finite, finite, admissible)
def test_jk_monotone(s1, s2, kb):
    assume(s1 != s2)
    k, beta = kb
    lo, hi = sorted((s1, s2))
    assert jk_scalar(lo, k, beta) <= jk_scalar(hi, k, beta)


def test_jk_vectorised_matches_scalar(rng):
    s = rng.standard_normal((4, 5)) * 20
    out = jk_scalar(s, 0.2, 1.5)
    assert out.shape == s.shape
    for idx in np.ndindex(s.shape):
        assert out[idx] == pytest.approx(float(jk_scalar(s[idx], 0.2, 1.5)), abs=1e-12)


def test_jk_rejects_non_monotone_cubic():
    with pytest.raises(ValueError):
        jk_scalar(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        jk_scalar(1.0, -0.1, 1.0)


def test_jk_budget_exhaustion_reported():
    with pytest.raises(ConvergenceError):
        jk_scalar(np.array([1e3]), 0.1, 1.0, max_iter=1)


def test_lipschitz_constant_values():
    assert nonlinear.lipschitz_constant(0.0, 1.0) == 1.0
    assert nonlinear.lipschitz_constant(0.25, 1.0) == pytest.approx(math.sqrt(2.0))
    assert nonlinear.one_sided_constant(0.25, 1.0) == pytest.approx(2.0)


def test_step_ceiling_enforced(basis32):
    with pytest.raises(ValueError):
        AllenCahn(basis32, beta=1.0, k_max=0.5)
    ac = AllenCahn(basis32, beta=1.0, k_max=0.1)
    with pytest.raises(ValueError):
        ac.jk(basis32.zeros(), 0.2)
    with pytest.raises(ValueError):
        AllenCahn(basis32, beta=-1.0)


# -- field maps ----------------------------------------------------------------


@pytest.fixture(scope="module")
def ac():
    return AllenCahn(make_basis(32), beta=1.0)


def test_maps_vanish_at_zero(ac):
    z = ac.basis.zeros()
    for v in (ac.jk(z, 0.1), ac.fk(z, 0.1), ac.big_fk(z, 0.1), ac.f(z)):
        assert not np.any(v)


def test_jk_zero_step_identity_on_fields(ac, rng):
    v = band_limited(rng, ac.basis)
    assert np.max(np.abs(ac.jk(v, 0.0) - v)) <= 1e-12


def test_resolvent_identity_random_field(ac, rng):
    v = band_limited(rng, ac.basis, amp=2.0)
    k = 0.05
    assert np.linalg.norm(v - ac.jk(v, k) - k * ac.fk(v, k)) <= 1e-10


@given(st.integers(0, 2**31), st.floats(0.001, 0.45), st.floats(0.05, 4.0))
def test_resolvent_identity_property(seed, k, amp):
    ac = AllenCahn(make_basis(16), beta=1.0)
    v = band_limited(np.random.default_rng(seed), ac.basis, amp=amp)
    assert np.linalg.norm(v - ac.jk(v, k) - k * ac.fk(v, k)) <= 1e-10 * max(1.0, amp**3)


def test_big_fk_definition(ac, rng):
    v = band_limited(rng, ac.basis)
    r = r_half_symbol(ac.basis.eigenvalues, 0.1)
    np.testing.assert_allclose(ac.big_fk(v, 0.1), r * ac.fk(r * v, 0.1), rtol=1e-15)


def test_fk_composes_pointwise_before_projecting(ac, rng):
    v = band_limited(rng, ac.basis)
    b = ac.basis
    z = jk_scalar(b.to_nodal(v), 0.1, ac.beta)
    np.testing.assert_allclose(ac.fk(v, 0.1), b.to_spectral(nonlinear.f_pointwise(z, ac.beta)),
                               atol=1e-15)


@pytest.mark.parametrize("case", ["zero_field", "zero_step"])
def test_yosida_decomposition_trivial(ac, rng, case):
    v = ac.basis.zeros() if case == "zero_field" else band_limited(rng, ac.basis)
    k = 0.05 if case == "zero_field" else 0.0
    lhs, rhs = ac.yosida_decomposition(v, k)
    assert np.linalg.norm(lhs) <= 1e-12 and np.linalg.norm(rhs) <= 1e-12


def test_yosida_decomposition_random(ac, rng):
    v = band_limited(rng, ac.basis, amp=2.0)
    lhs, rhs = ac.yosida_decomposition(v, 0.05)
    assert np.linalg.norm(lhs - rhs) <= 1e-9


def test_maps_accept_batches(ac, rng):
    v = band_limited(rng, ac.basis, n=3)
    out = ac.big_fk(v, 0.1)
    assert out.shape == v.shape
    np.testing.assert_allclose(out[1], ac.big_fk(v[1], 0.1), atol=1e-15)


# -- randomized inequalities -----------------------------------------------------

pairs = st.tuples(st.integers(0, 2**31), st.floats(0.05, 3.0), st.floats(0.05, 3.0))


def _pair(seed, a, b, basis):
    rng = np.random.default_rng(seed)
    return band_limited(rng, basis, amp=a), band_limited(rng, basis, amp=b)


@given(pairs)
def test_f_one_sided_lipschitz(p):
    ac = AllenCahn(make_basis(16), beta=1.0)
    x, y = _pair(*p, ac.basis)
    d = x - y
    assert -np.dot(ac.f(x) - ac.f(y), d) <= ac.beta**2 * np.dot(d, d) + 1e-9


@pytest.mark.parametrize("k", [0.1, 0.01])
@given(p=pairs)
def test_resolvent_family_constants(k, p):
    ac = AllenCahn(make_basis(16), beta=1.0)
    x, y = _pair(*p, ac.basis)
    d = np.linalg.norm(x - y)
    C = ac.lipschitz_constant(k)
    osc = ac.one_sided_constant(k)
    assert np.linalg.norm(ac.jk(x, k) - ac.jk(y, k)) <= C * (1 + 1e-6) * d
    assert ac.basis.norm_s(ac.jk(x, k), 1) <= C * ac.basis.norm_s(x, 1) + 1e-6
    for F in (ac.fk, ac.big_fk):
        fx, fy = F(x, k), F(y, k)
        assert np.linalg.norm(fx - fy) <= (1 + 1e-6) * d / k
        assert -np.dot(fx - fy, x - y) <= osc * d * d + 1e-9
        assert -np.dot(fx, x) <= osc * np.dot(x, x) + 1e-9
        assert -ac.basis.inner_s(fx, x, 1) <= osc * ac.basis.norm_s(x, 1) ** 2 + 1e-6


@given(pairs, st.floats(0.005, 0.2), st.floats(0.005, 0.2))
def test_f_alpha_f_beta_decomposition(p, ka, kb):
    ac = AllenCahn(make_basis(16), beta=1.0)
    x, y = _pair(*p, ac.basis)
    lam = ac.basis.eigenvalues
    ra, rb = r_half_symbol(lam, ka), r_half_symbol(lam, kb)
    fa, fb = ac.fk(ra * x, ka), ac.fk(rb * y, kb)
    lhs = np.dot(ac.big_fk(x, ka) - ac.big_fk(y, kb), x - y)
    rhs = np.dot(fa - fb, ra * x - rb * y) - np.dot(fa, (ra - rb) * y) + np.dot(fb, (ra - rb) * x)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(lhs))


# -- L6 polynomial -------------------------------------------------------------------


def test_l6_polynomial_grid():
    g = np.linspace(-10, 10, 2001)
    for i in range(0, g.size, 500):
        assert np.all(l6_polynomial(g[i : i + 500, None], g[None, :], 18.0) >= 0)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_l6_polynomial_property(t, s):
    assert l6_polynomial(t, s, 18.0) >= -1e-9 * (t * t + s * s) ** 2


def test_l6_admissible_constants():
    assert l6_constant_admissible(18.0)
    assert not l6_constant_admissible(17.0)


def test_l6_fails_below_threshold():
    # at t = -s the ratio (t-s)^4 / (t^2+ts+s^2)^2 reaches 16
    assert l6_polynomial(1.0, -1.0, 15.9) < 0
    assert l6_polynomial(1.0, -1.0, 16.0) == 0
