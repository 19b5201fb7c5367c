import cmath
import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_ergodic.arith import (
    ArithParams, FiniteFieldFn, arith_enumeration, arith_points_array, build_arith_set,
    default_shifts, dyadic_half_prime, first_coordinate_increasing, freiman,
    freiman_bijective, gamma1, gamma2, gamma_transfer, is_prime, make_params, mu_prime,
    mu_prime_points, nu3_dense, nu3_fiber, nu_prime, osc_profile, prime_schedule,
    product_factorization_error, product_mu_hat, product_weil_check, smoothing_psi_l1,
    telescoping_sums, varphi, varphi_sum, weil_bruteforce_max, weil_check, x_point,
)
from sparse_ergodic.errors import ConditionError


def naive_dft(values, moduli):
    """Oracle: the O(|G|^2) transform sum_n f(n) e(sum n_i xi_i / p_i)."""
    pts = list(itertools.product(*(range(p) for p in moduli)))
    out = np.zeros(tuple(moduli), dtype=complex)
    for xi in pts:
        out[xi] = sum(values[n] * cmath.exp(2j * math.pi * sum(a * b / p for a, b, p in zip(n, xi, moduli)))
                      for n in pts)
    return out


def test_is_prime_against_sieve():
    sieve = [True] * 2000
    sieve[0] = sieve[1] = False
    for i in range(2, 45):
        for k in range(i * i, 2000, i):
            sieve[k] = False
    assert [n for n in range(2000) if is_prime(n)] == [n for n in range(2000) if sieve[n]]


@pytest.mark.parametrize("k,p", [(2, 5), (3, 11)])
def test_dyadic_half_examples(k, p):
    assert dyadic_half_prime(k) == (p, False)
    assert 2 ** k < p and p * p < 2 ** (2 * k + 1)


def test_dyadic_half_schedule():
    s = prime_schedule("dyadic-half", 6)
    assert s.primes[:2] == (5, 11) and not s.warning
    for k, p in enumerate(s.primes, start=2):
        # oracle: smallest prime strictly between 2^k and 2^(k+1/2)
        want = next(n for n in range(2 ** k + 1, 2 ** (k + 1)) if is_prime(n))
        assert p == want and p < 2 ** (k + 0.5)


def test_dyadic_half_repeats():
    s = prime_schedule("dyadic-half", 6, gamma=0.5)
    assert len(s.repeated) == 6
    assert any(a == b for a, b in zip(s.repeated, s.repeated[1:]))


def test_ratio_schedule():
    s = prime_schedule("ratio", 4, c=2, C=4, p1=5)
    assert s.primes[:2] == (5, 11)
    for a, b in zip(s.primes, s.primes[1:]):
        assert 2 * a <= b < 4 * a
        assert not any(is_prime(n) for n in range(2 * a, b))


def test_schedule_errors():
    with pytest.raises(ValueError):
        prime_schedule("ratio", 0)
    with pytest.raises(ValueError):
        prime_schedule("lunar", 3)
    with pytest.raises(ConditionError):
        prime_schedule("ratio", 3, p1=9)


def test_curve_point_examples():
    assert x_point(3, 5, 1, 2) == (3, 4)
    assert x_point(2, 3, 2, 1) == (5,)
    for p, q, d in [(5, 1, 2), (7, 2, 2), (11, 3, 1)]:
        assert x_point(0, p, q, d) == (0,) * d


def test_freiman_p3():
    img = sorted(freiman((a, b), 3, 2, 1)[0] for a in range(3) for b in range(3))
    assert img == list(range(9))


@pytest.mark.parametrize("p,q,d", [(p, q, d) for p in (2, 3, 5, 7, 11) for q in (1, 2) for d in (1, 2)
                                   if p ** (q * d) <= 20000])
def test_freiman_bijective(p, q, d):
    assert freiman_bijective(p, q, d)


def test_build_blocks():
    params = make_params(2, 1, 4)
    seen = set()
    for k in range(1, 5):
        S = build_arith_set(params, k)
        assert len(S) == len(set(S)) == params.primes[k - 1]
        p, a = params.primes[k - 1], params.shifts[k - 1]
        assert S == tuple(tuple(ai + xi for ai, xi in zip(a, ((j % p), (j * j) % p))) for j in range(p))
        assert not seen & set(S)
        seen |= set(S)
        assert first_coordinate_increasing(params, k)
    assert all(params.conditions().values())


def test_points_array_matches_enumeration():
    for d, q, K in [(2, 1, 5), (1, 2, 4), (2, 2, 3), (1, 3, 3)]:
        params = make_params(d, q, K)
        arr = arith_points_array(params)
        assert [tuple(int(x) for x in r) for r in arr] == arith_enumeration(params)


def test_block_shells_disjoint():
    params = make_params(1, 2, 5)
    radii = [params.block_radii(k) for k in range(1, 6)]
    assert all(r1[1] < r2[0] for r1, r2 in zip(radii, radii[1:]))


def test_shift_condition_refused():
    primes = (5, 11)
    bad = ArithParams(2, 1, primes, ((5, 0), (6, 0)))
    with pytest.raises(ConditionError):
        bad.validate()
    with pytest.raises(ValueError):
        build_arith_set(make_params(2, 1, 2), 3)


def test_q2_first_coordinate_not_monotone():
    # with q >= 2 the first coordinate mixes two digits, so ordering by j is a choice
    params = make_params(1, 2, 3)
    assert not all(first_coordinate_increasing(params, k) for k in range(1, 4))


def test_dft_against_naive():
    rng = np.random.default_rng(1)
    moduli = (3, 5)
    vals = rng.normal(size=moduli) + 1j * rng.normal(size=moduli)
    fn = FiniteFieldFn(moduli, vals)
    assert np.allclose(fn.dft(), naive_dft(vals, moduli), atol=1e-10)
    assert fn.dft_at((2, 4)) == pytest.approx(complex(naive_dft(vals, moduli)[2, 4]), abs=1e-10)


@given(st.sampled_from([(2,), (5,), (3, 3), (2, 3, 5)]), st.integers(0, 1000))
@settings(max_examples=25)
def test_parseval(moduli, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=moduli) + 1j * rng.normal(size=moduli)
    assert FiniteFieldFn(moduli, vals).parseval_gap() < 1e-9


def test_mu_nu_prime_transforms():
    for p, m in [(5, 2), (7, 3)]:
        mh, nh = mu_prime(p, m).dft(), nu_prime(p, m).dft()
        assert mh[(0,) * m] == pytest.approx(1)
        assert nh[(0,) * m] == pytest.approx(1)
        nh[(0,) * m] = 0
        assert np.abs(nh).max() < 1e-12


def test_weil_m2_p7_gauss_sum():
    rep = weil_check(7, 2)
    assert rep.max_nonzero == pytest.approx(7 ** -0.5, abs=1e-12)
    assert rep.max_nonzero <= rep.bound + 1e-12 and rep.passed
    spec = np.abs(naive_dft(mu_prime(7, 2).values, (7, 7)))
    assert spec[1:, 0] == pytest.approx(np.zeros(6), abs=1e-12)      # theta_2 = 0, theta_1 != 0
    assert spec[:, 1:] == pytest.approx(np.full((7, 6), 7 ** -0.5), abs=1e-12)
    assert rep.frequencies == 48


def test_weil_m3_p11():
    rep = weil_check(11, 3)
    assert rep.max_nonzero <= 2 / math.sqrt(11) + 1e-12
    assert rep.max_nonzero == pytest.approx(weil_bruteforce_max(11, 3), abs=1e-12)
    assert rep.at_zero == pytest.approx(1)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_weil_sweep_small(m):
    for p in [n for n in range(m + 2, 32) if is_prime(n)]:
        rep = weil_check(p, m)
        assert rep.passed, (p, m)
        if p ** m <= 30000:
            assert rep.max_nonzero == pytest.approx(weil_bruteforce_max(p, m), abs=1e-12)


def test_weil_refuses_small_p():
    with pytest.raises(ConditionError):
        weil_check(3, 3)
    with pytest.raises(ConditionError):
        weil_check(9, 2)


def test_product_weil_example():
    rep = product_weil_check((5, 7), 2)
    assert rep.pattern_max[frozenset({0, 1})] == pytest.approx(35 ** -0.5, abs=1e-12)
    assert rep.patterns_pass
    assert rep.exhaustive_max_error < 1e-12


def test_product_nu_indicator_and_factorization():
    assert product_factorization_error((5, 7, 11), 2, n_freq=100) < 1e-12
    theta0 = (0,) * 6
    assert product_mu_hat((5, 7, 11), 2, theta0) == pytest.approx(1)


def test_varphi_trapezoid():
    for p in (3, 5, 11, 13):
        vals = [varphi(n, p) for n in range(-p, 2 * p)]
        assert all(0 <= v <= 1 for v in vals)
        assert all(varphi(n, p) == 1 for n in range(p))
        assert varphi((-p - 1) // 2, p) == 0 and varphi(3 * (p - 1) // 2, p) == 0
        assert varphi_sum(p) == sum(vals) and p <= varphi_sum(p) <= 3 * p


def test_psi_requires_odd():
    with pytest.raises(ConditionError):
        smoothing_psi_l1(4)
    with pytest.raises(ValueError):
        smoothing_psi_l1(11, eta=1.0)


def test_psi_profile():
    ps = [p for p in range(11, 200) if is_prime(p)]
    reps = [smoothing_psi_l1(p) for p in ps]
    for r in reps:
        assert r.at_xi0 <= 3 * r.p + 1e-9
        assert r.identity_residual < 1e-8 and r.chain_ok
    # eta = 0 at xi = 0 is the plain sum of the trapezoid
    r0 = smoothing_psi_l1(11, eta=0.0)
    assert r0.at_xi0 == pytest.approx(float(varphi_sum(11)))
    d2 = [r.d2_l1 for r in reps]
    assert all(a > b for a, b in zip(d2, d2[1:]))
    ratios = [r.ratio for r in reps]
    assert max(ratios) / min(ratios) <= 2


def test_gamma_q1_identity():
    p = 7
    f = {(1, 3): F(1, 2), (6, 0): F(1, 3)}
    g = gamma1(f, p, 2)
    assert gamma2(g, p, 1, 2) == type(gamma2(g, p, 1, 2))(2, g)


def test_gamma1_window_and_lifts():
    p = 11
    f = {(2,): F(1)}
    g = gamma1(f, p, 1)
    assert set(g) == {(2,), (13,)}
    assert g[(2,)] == 1 and g[(13,)] == varphi(13, p) > 0


@pytest.mark.parametrize("p,q,d", [(5, 2, 1), (7, 1, 2), (11, 1, 2), (3, 1, 1)])
def test_transfer_report(p, q, d):
    rep = gamma_transfer(p, q, d)
    assert rep.fourier_max_error < 1e-9
    assert rep.majorization and rep.support_in_window
    assert rep.nu3_l1 == rep.nu3_l1_closed


@pytest.mark.parametrize("p,q,d", [(5, 2, 1), (7, 1, 2), (3, 2, 1)])
def test_nu3_fiber_against_dense(p, q, d):
    dense = nu3_dense(p, q, d)
    fib = nu3_fiber(p, q)
    for n, v in dense.items():
        assert v == math.prod((fib.get(c, 0) for c in n), start=F(1))
    assert sum(abs(v) for _, v in dense.items()) == sum(fib.values()) ** d


def test_nu3_l1_bounded_in_p():
    for q, d in [(1, 1), (2, 1), (1, 2)]:
        m = q * d
        for p in [p for p in range(11, 102) if is_prime(p)]:
            l1 = sum(nu3_fiber(p, q).values()) ** d
            assert l1 <= 3 ** m


def test_majorization_exact():
    p, q, d = 7, 1, 2
    g = gamma1(mu_prime_points(p, q * d), p, q * d)
    mu3 = gamma2(g, p, q, d)
    for j in range(p):
        assert mu3[x_point(j, p, q, d)] >= F(1, p ** (q * d))


def test_osc_profile():
    params = make_params(1, 2, 4)
    prof = osc_profile(params, grid=64, samples=4)
    for a, b in prof.total_mass:
        assert a == pytest.approx(1) and b == pytest.approx(1)
    assert all(t <= n + 1e-12 for t, n in prof.telescoping)
    assert all(x >= 0 for x in prof.sup_diff)
    s = prof.sup_diff
    assert s[1] > s[2] > s[3]
    with pytest.raises(ConditionError):
        osc_profile(params, Ns=(3, 5))


def test_telescoping_needs_monotone_radii():
    with pytest.raises(ValueError):
        telescoping_sums([0.1, 0.2], 1, 16, 1)
    for tot, norm in telescoping_sums([0.5, 0.2, 0.05, 0.01], 2, 32, 5):
        assert tot <= norm + 1e-12


def test_default_shifts_clear():
    primes = (5, 11, 23)
    sh = default_shifts(primes, 2, 2)
    for k in range(1, 3):
        assert sh[k][0] > sh[k - 1][0] + primes[k - 1] ** 2
