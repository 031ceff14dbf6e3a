import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acsplit import NoisePath, coarsen, make_basis, make_covariance, sample_path
from acsplit.noise import apply_r_half_to_increment, operator_bound_q_a_r


@pytest.fixture(scope="module")
def cov64():
    return make_covariance(2.0, 1.0, make_basis(64))


def test_hs_norm_closed_form():
    cov = make_covariance(2.0, 1.0, make_basis(4))
    expected = math.pi**-2 * (1 + 1 / 4 + 1 / 9 + 1 / 16)
    assert cov.hs_a_half_sq == pytest.approx(expected, rel=1e-14)
    assert np.all(np.diff(cov.q) < 0) and np.all(cov.q > 0)


@pytest.mark.parametrize("mu", [0.0, -1.0])
def test_degenerate_mu_rejected(mu):
    with pytest.raises(ValueError):
        make_covariance(2.0, mu, make_basis(8))


def test_inadmissible_gamma_needs_flag():
    b = make_basis(50)
    with pytest.raises(ValueError):
        make_covariance(1.0, 1.0, b)
    cov = make_covariance(1.0, 1.0, b, allow_inadmissible=True)
    # lambda_m q_m = 1 for every mode: the truncated sum grows with the mode count
    assert cov.hs_a_half_sq == pytest.approx(50.0, rel=1e-14)


def test_boundary_gamma_accepted():
    make_covariance(1.6, 1.0, make_basis(8))


def test_same_seed_same_path(cov64):
    a = sample_path(cov64, 1.0, 32, seed=7)
    b = sample_path(cov64, 1.0, 32, seed=7)
    assert np.array_equal(a.increments, b.increments)
    c = sample_path(cov64, 1.0, 32, seed=8)
    assert not np.array_equal(a.increments, c.increments)


def test_zero_covariance_gives_zero_increments():
    cov = make_covariance(2.0, 0.0, make_basis(8), allow_inadmissible=True)
    assert not np.any(sample_path(cov, 1.0, 16, seed=1, samples=2).increments)


def test_mode_one_variance():
    b = make_basis(4)
    cov = make_covariance(2.0, b.eigenvalues[0] ** 2, b)  # q_1 = 1
    assert cov.q[0] == pytest.approx(1.0)
    path = sample_path(cov, 100.0, 10_000, seed=11)
    assert path.k == pytest.approx(0.01)
    var = path.increments[:, 0].var(ddof=1)
    assert abs(var / 0.01 - 1) < 0.05


def test_mode_truncation_preserves_retained_modes():
    small = sample_path(make_covariance(2.0, 1.0, make_basis(8)), 1.0, 16, seed=3)
    big = sample_path(make_covariance(2.0, 1.0, make_basis(16)), 1.0, 16, seed=3)
    assert np.array_equal(small.increments, big.increments[:, :8])


def test_sample_streams_independent_of_batch(cov64):
    batch = sample_path(cov64, 1.0, 16, seed=5, samples=6)
    one = sample_path(cov64, 1.0, 16, seed=5, samples=[4])
    assert np.array_equal(batch.increments[4], one.increments[0])
    first = sample_path(cov64, 1.0, 16, seed=5)
    assert np.array_equal(first.increments, batch.increments[0])


@pytest.mark.parametrize("bad", [dict(N_fine=0), dict(T=0.0), dict(N_fine=2.5)])
def test_sample_path_validation(cov64, bad):
    kw = dict(T=1.0, N_fine=8) | bad
    with pytest.raises(ValueError):
        sample_path(cov64, kw["T"], kw["N_fine"], seed=0)


def test_coarsen_identity(cov64):
    p = sample_path(cov64, 1.0, 16, seed=2)
    assert np.array_equal(coarsen(p, 1).increments, p.increments)


def test_coarsen_to_single_increment(cov64):
    p = sample_path(cov64, 1.0, 16, seed=2)
    acc = np.zeros(64)
    for row in p.fine:
        acc = acc + row
    one = coarsen(p, 16)
    assert one.N == 1 and one.k == pytest.approx(1.0)
    assert np.array_equal(one.increments[0], acc)


@given(st.sampled_from([(2, 2), (2, 4), (4, 2), (2, 2, 2), (8, 2)]))
def test_coarsening_composes_bitwise(factors):
    cov = make_covariance(2.0, 1.0, make_basis(8))
    p = sample_path(cov, 1.0, 64, seed=9, samples=2)
    step = p
    for f in factors:
        step = step.coarsen(f)
    total = math.prod(factors)
    assert np.array_equal(step.increments, p.coarsen(total).increments)
    assert step.k == p.k * total


def test_coarsen_rejects_non_divisor(cov64):
    p = sample_path(cov64, 1.0, 12, seed=2)
    with pytest.raises(ValueError):
        coarsen(p, 5)
    with pytest.raises(ValueError):
        coarsen(p, 0)


def test_brownian_partial_sums(cov64):
    p = sample_path(cov64, 1.0, 8, seed=4)
    assert not np.any(p.brownian_at(0))
    np.testing.assert_allclose(p.brownian_at(8), p.fine.sum(axis=0), atol=1e-15)
    np.testing.assert_allclose(p.increment_between(2, 6), p.brownian_at(6) - p.brownian_at(2),
                               atol=1e-15)
    with pytest.raises(ValueError):
        p.increment_between(5, 3)


def test_dump_round_trip(tmp_path, cov64):
    p = sample_path(cov64, 1.0, 32, seed=123, samples=3).coarsen(4)
    f = tmp_path / "noise.bin"
    p.dump(f)
    raw = f.read_bytes()
    assert raw[:8] == b"ACNOISE1"
    n_modes, N, k, seed, n_batch = struct.unpack_from("<QQdQQ", raw, 8)
    assert (n_modes, N, k, seed, n_batch) == (64, 8, p.k, 123, 3)
    q = NoisePath.load(f)
    assert np.array_equal(q.increments, p.increments)
    assert q.k == p.k and q.seed == 123


def test_load_rejects_foreign_file(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"not a dump at all")
    with pytest.raises(ValueError):
        NoisePath.load(f)


def test_r_half_on_increment():
    b = make_basis(8)
    dW = np.zeros(8)
    dW[0] = 1.0
    lam1 = b.eigenvalues[0]
    assert apply_r_half_to_increment(dW, 2.0 / lam1, b)[0] == pytest.approx(0.5)
    x = np.random.default_rng(0).standard_normal(8)
    assert np.array_equal(apply_r_half_to_increment(x, 0.0, b), x)
    with pytest.raises(ValueError):
        apply_r_half_to_increment(x, -1.0, b)


@given(st.integers(0, 2**31), st.floats(0.0, 10.0))
def test_r_half_is_contraction(seed, k):
    b = make_basis(16)
    x = np.random.default_rng(seed).standard_normal(16)
    assert np.linalg.norm(apply_r_half_to_increment(x, k, b)) <= np.linalg.norm(x) * (1 + 1e-15)


@given(st.floats(0.0, 100.0), st.floats(1.6, 4.0), st.floats(1e-3, 1e3))
def test_q_a_r_bound(k, gamma, mu):
    b = make_basis(32)
    cov = make_covariance(gamma, mu, b)
    assert operator_bound_q_a_r(cov, b, k) <= cov.hs_a_half * (1 + 1e-14)


def test_gaussian_moment_identity(cov64):
    b = make_basis(64)
    k = 0.01
    path = sample_path(cov64, k * 10_000, 10_000, seed=77)
    y = apply_r_half_to_increment(path.increments, k, b)
    sq = np.sum(y * y, axis=-1)
    expected = k * cov64.hs_r_half_sq(b, k)
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(sq.mean() - expected) <= 3 * se
