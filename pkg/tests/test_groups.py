import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_ergodic.blocks import tempelman_folner_report
from sparse_ergodic.errors import ConditionError
from sparse_ergodic.groups import (
    MODELS, WordBall, banach_density_estimate, cantor_numbers, cyclic, default_group_blocks,
    difference_set, expectation_growth, gap_profile_and_thin, get_model, group_block_sequence,
    group_block_set, group_convolve, group_reflect, heis3, infer_degree, l1_ball_size,
    operator_ratio, partition_valid, r_growth_constant, sample_group_random, sigma_weights,
    three_color_partition, tt_star_norm, word_ball_growth, zd, zd_ball_array, zd_moment_ratio,
)
from sparse_ergodic.lattice import SparseMeasure, convolve
from sparse_ergodic.random_sparse import SpeckledConfig, enumerate_sequence, speckled_points


def mitm_length(model, g, R):
    """Oracle: word length through a split g = a b with a, b in the radius-R ball."""
    wb = WordBall.grow(model, R)
    best = math.inf
    for a, la in wb.length.items():
        b = model.mul(model.inv(a), g)
        if b in wb.length:
            best = min(best, la + wb.length[b])
    return best


heis_elems = st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-4, 4))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_models_are_valid(name):
    get_model(name).check()


def test_unknown_model():
    with pytest.raises((KeyError, ValueError)):
        get_model("free2")


@given(heis_elems, heis_elems, heis_elems)
def test_heisenberg_group_laws(a, b, c):
    H = heis3()
    assert H.mul(H.mul(a, b), c) == H.mul(a, H.mul(b, c))
    assert H.mul(a, H.inv(a)) == H.identity == H.mul(H.inv(a), a)
    assert H.mul(a, H.identity) == a


def test_heisenberg_is_not_abelian():
    H = heis3()
    X, Y = (1, 0, 0), (0, 1, 0)
    assert H.mul(X, Y) != H.mul(Y, X)


def test_z2_ball_sizes():
    wb = WordBall.grow(zd(2), 20)
    assert wb.sizes == [2 * N * N + 2 * N + 1 for N in range(21)]
    assert all(l1_ball_size(2, N) == 2 * N * N + 2 * N + 1 for N in range(21))
    assert word_ball_growth(zd(2), 20, folner=False).degree == 2


@pytest.mark.parametrize("d,norm", [(1, "l1"), (2, "sup"), (3, "l1")])
def test_zd_ball_array_matches_bfs(d, norm):
    N = 4
    arr = {tuple(int(x) for x in p) for p in zd_ball_array(d, N, norm)}
    assert arr == WordBall.grow(zd(d, norm), N).ball(N)


def test_ball_zero_and_nesting():
    H = heis3()
    wb = WordBall.grow(H, 6)
    assert wb.ball(0) == {H.identity}
    for n in range(6):
        B, B1 = wb.ball(n), wb.ball(n + 1)
        assert B <= B1
        assert {H.mul(g, a) for g in B for a in H.generators} == B1


def test_heisenberg_growth():
    rep = word_ball_growth(heis3(), 20, folner=False)
    assert rep.degree == 4
    band = rep.ratios[11:20]
    assert max(band) / min(band) < 1.2


@given(st.integers(0, 10 ** 6))
@settings(max_examples=30)
def test_word_length_meet_in_the_middle(seed):
    H = heis3()
    wb = WordBall.grow(H, 8)
    elems = sorted(wb.length)
    g = elems[seed % len(elems)]
    assert wb.length[g] == mitm_length(H, g, 4)
    assert H.rho(g) == wb.length[g]


def test_distance_symmetric():
    H = heis3()
    wb = WordBall.grow(H, 4)
    el = sorted(wb.length)[::7]
    for g, h in itertools.product(el[:12], repeat=2):
        assert H.distance(g, h) == H.distance(h, g)


def test_infer_degree_exact_powers():
    for d in range(0, 6):
        assert infer_degree([max(1, n) ** d for n in range(30)]) == d


def brute_lattice(a, b):
    out = {}
    for x, u in a.items():
        for y, v in b.items():
            z = tuple(p + q for p, q in zip(x, y))
            out[z] = out.get(z, 0) + u * v
    return {z: v for z, v in out.items() if v}


@given(st.dictionaries(st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
                       st.fractions(-3, 3, max_denominator=5), max_size=6),
       st.dictionaries(st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
                       st.fractions(-3, 3, max_denominator=5), max_size=6))
def test_group_convolution_on_z2_matches_lattice(a, b):
    got = group_convolve(zd(2), a, b)
    assert SparseMeasure(2, got) == convolve(SparseMeasure(2, a), SparseMeasure(2, b))
    assert got == brute_lattice({k: v for k, v in a.items() if v}, {k: v for k, v in b.items() if v})


def test_tt_star_toy():
    H = heis3()
    g = (1, 0, 0)
    nu = {H.identity: 1, g: -1}
    base = group_convolve(H, group_reflect(H, nu), nu)
    assert base == {H.identity: 2, g: -1, H.inv(g): -1}
    assert tt_star_norm(H, nu, 1).l1 == 4


def test_tt_star_powers():
    H = heis3()
    nu = {H.identity: 1, (1, 0, 0): -1, (0, 1, 0): 1}
    t1, t2 = tt_star_norm(H, nu, 1), tt_star_norm(H, nu, 2)
    assert t2.l1 <= t1.l1 ** 2 + 1e-12
    with pytest.raises(ValueError):
        tt_star_norm(H, nu, 4)


@pytest.mark.parametrize("seed", range(4))
def test_operator_norm_trivial_bound(seed):
    H = heis3()
    s = sample_group_random(H, 1.5, 2, seed=seed)
    bound = tt_star_norm(H, s.nu, 1).op_upper
    wb = WordBall.grow(H, 3)
    elems = sorted(wb.length)
    rs = np.random.default_rng(seed)
    for _ in range(5):
        phi = {g: float(x) for g, x in zip(elems, rs.normal(size=len(elems)))}
        assert operator_ratio(H, s.nu, phi) <= bound + 1e-9


def test_sample_group_random_structure():
    H = heis3()
    s = sample_group_random(H, 1.5, 2, seed=3)
    scale = 2.0 ** ((1.5 - 4) * 2)
    assert s.mu[H.identity] == scale                     # P(xi_e) = 1
    for g, v in s.nu.items():
        assert v == pytest.approx(s.mu.get(g, 0) - s.expected[g])
    assert s.r_j == len(s.mu) and s.R_j <= 4
    assert sample_group_random(H, 1.5, 2, seed=3).mu == s.mu
    with pytest.raises(ValueError):
        sample_group_random(H, 4.5, 2)


def test_nu_mass_centred_on_average():
    model = zd(2)
    totals = [sum(sample_group_random(model, 1.0, 3, seed=s).nu.values()) for s in range(300)]
    s = sample_group_random(model, 1.0, 3, seed=0)
    scale = 2.0 ** ((1.0 - 2) * 3)
    sd = scale * math.sqrt(s.var_sum / 300)
    assert abs(np.mean(totals)) < 5 * sd


def test_zd_marginals_match_speckled_rule():
    # the probability at each point is rho^-alpha, so over many seeds the hit
    # rate on the sphere rho = 4 matches 4^-alpha
    model = zd(2, "sup")
    sphere = [g for g in WordBall.grow(model, 4).length if model.rho(g) == 4]
    hits = sum(1 for s in range(200) for g in sphere if g in sample_group_random(model, 1.0, 2, seed=s).mu)
    n = 200 * len(sphere)
    p = 4 ** -1.0
    assert abs(hits / n - p) < 5 * math.sqrt(p * (1 - p) / n)


def test_expectation_growth_heisenberg():
    S, slope = expectation_growth(heis3(), 1.5, 16)
    assert abs(slope - 2.5) < 0.2
    wb = WordBall.grow(heis3(), 16)
    assert S[16] == pytest.approx(sum(c * (1.0 if n == 0 else n ** -1.5) for n, c in enumerate(wb.layers)))


def test_sigma_weights_rebuild_profile():
    H = heis3()
    N, alpha = 6, 1.5
    w = sigma_weights(H, alpha, N)
    wb = WordBall.grow(H, N)
    sizes = wb.sizes
    for g, l in wb.length.items():
        rebuilt = sum(w[n] / sizes[n] for n in range(l, N + 1))
        want = N ** (alpha - 4) * (1.0 if l == 0 else l ** -alpha)
        assert rebuilt == pytest.approx(want, rel=1e-12)


def test_r_growth_constant():
    assert r_growth_constant([1, 2, 4, 8]) == pytest.approx(15 / 8)
    assert r_growth_constant([1, 1, 1]) == pytest.approx(3.0)


def test_zd_moment_ratio_against_direct():
    d, alpha, j, seed = 2, 1.0, 2, 5
    l2sq, var2 = zd_moment_ratio(d, alpha, j, seed)
    pts = zd_ball_array(d, 2 ** j)
    model = zd(d)
    from sparse_ergodic import rng as R
    u = R.uniform_array(seed, (R.GROUP,), pts)
    rho = np.abs(pts).sum(axis=1)
    pr = np.where(rho == 0, 1.0, np.maximum(rho, 1) ** -alpha)
    eta = {tuple(int(x) for x in p): float(v) for p, v in zip(pts, (u < pr) - pr) if v}
    auto = group_convolve(model, group_reflect(model, eta), eta)
    assert l2sq == pytest.approx(sum(v * v for v in auto.values()), rel=1e-9)
    assert var2 == pytest.approx(float(np.sum(pr * (1 - pr))) ** 2)


def test_group_blocks_z1_matches_interval_sets():
    model = zd(1)
    ells, shifts = default_group_blocks(model, 4)
    rows = group_block_sequence(model, ells, shifts)
    for row in rows:
        S = group_block_set(model, ells, shifts, row.k, row.r)
        assert tempelman_folner_report(sorted(S)).ratio == row.ratio
        assert len(difference_set(model, S)) == row.diff


def test_group_blocks_r0_is_complete_blocks():
    model = heis3()
    ells, shifts = default_group_blocks(model, 3)
    S = group_block_set(model, ells, shifts, 1, 0)
    want = {model.mul(shifts[0], g) for g in WordBall.grow(model, ells[0]).ball(ells[0])}
    assert S == want | {shifts[1]}


def test_single_block_ratio_bound():
    model = heis3()
    ell = 3
    wb = WordBall.grow(model, 2 * ell)
    B = wb.ball(ell)
    D = difference_set(model, {model.mul((5, 0, 0), g) for g in B})
    assert len(D) <= len(wb.ball(2 * ell))


def test_group_blocks_refuse_bad_spacing():
    with pytest.raises(ConditionError):
        group_block_sequence(zd(1), [3, 3], [(1,), (2,)])


def test_three_colour_path():
    model = zd(1)
    E = [(0,), (1,), (2,), (3,)]
    classes = three_color_partition(model, E, (1,))
    assert len(classes) == 2
    assert all(partition_valid(model, E, (1,), classes).values())


def test_three_colour_odd_cycle():
    model = cyclic(3)
    E = [(0,), (1,), (2,)]
    classes = three_color_partition(model, E, (1,))
    assert len(classes) == 3
    assert all(partition_valid(model, E, (1,), classes).values())


def test_three_colour_empty_and_identity():
    model = zd(1)
    assert three_color_partition(model, [(0,), (5,)], (1,)) == []
    with pytest.raises(ConditionError):
        three_color_partition(model, [(0,)], (0,))


@given(st.sets(st.tuples(st.integers(-2, 2), st.integers(-2, 2), st.integers(-3, 3)), max_size=40),
       st.sampled_from([(1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1), (-1, 2, 1)]))
def test_three_colour_heisenberg(E, h):
    model = heis3()
    classes = three_color_partition(model, E, h)
    assert all(partition_valid(model, E, h, classes).values())


@given(st.integers(2, 9), st.sets(st.integers(0, 8)), st.integers(1, 8))
def test_three_colour_cyclic(n, E, h):
    h %= n
    if h == 0:
        return
    model = cyclic(n)
    E = [(x % n,) for x in E]
    classes = three_color_partition(model, E, (h,))
    assert all(partition_valid(model, E, (h,), classes).values())


def test_cantor_numbers():
    c = cantor_numbers(10)
    assert c == [1, 3, 4, 9, 10, 12, 13, 27, 28, 30]


def brute_dmin(pts):
    out = []
    for n, p in enumerate(pts):
        out.append(min((max(abs(a - b) for a, b in zip(p, q)) for q in pts[:n]), default=math.inf))
    return out


def test_arithmetic_progression_gaps():
    seq = [(5 * n,) for n in range(1, 200)]
    prof = gap_profile_and_thin(seq, [2, 3, 5])
    assert all(v == 0 for v in prof.beta.values())
    assert len(prof.kept) == len(seq) and prof.min_gap_ok


def test_gap_beta_against_bruteforce():
    seq = enumerate_sequence(SpeckledConfig(d=2, gamma=0.8, seed=2), 300)
    grid = [2, 3, 4, 6]
    prof = gap_profile_and_thin(seq, grid, budget=0.5)
    dmin = brute_dmin(seq)
    for (j, M), b in prof.beta.items():
        lo, hi = 2 ** j, min(2 ** (j + 1), len(seq) + 1)
        assert b == F(sum(1 for n in range(lo, hi) if dmin[n - 1] < M), 2 ** j)
    # beta is nondecreasing in M and the schedule respects the budget
    for j in range(prof.jmax + 1):
        row = [prof.beta[(j, M)] for M in prof.M_grid]
        assert row == sorted(row)
    assert sum(prof.beta[(j, M)] for j, M in prof.schedule.items()) <= F(1, 2)
    assert prof.min_gap_ok
    for n in prof.kept:
        assert dmin[n - 1] >= prof.schedule[int(math.log2(n))]


def test_cantor_beta_does_not_vanish():
    seq = [(x,) for x in cantor_numbers(2 ** 10 - 1)]
    prof = gap_profile_and_thin(seq, [2])
    assert all(prof.beta[(j, 2)] >= F(1, 4) for j in range(1, 10))


def test_gap_requires_order():
    with pytest.raises(ConditionError):
        gap_profile_and_thin([(3,), (1,)], [2])


def test_banach_density_everything():
    N = 5
    pts = zd_ball_array(2, 4 * N, "sup")
    assert banach_density_estimate(pts, N, shifts=np.zeros((1, 2), dtype=int))["ratio"] == 1.0


def test_banach_density_block_set_stays_large():
    # one full interval block of length 2N+1 per scale: a centred shift sees density 1
    blocks = np.concatenate([np.arange(10 ** k, 10 ** k + 2 * 10 ** (k - 1) + 1) for k in range(1, 5)])
    for N in (10, 100, 1000):
        c = 10 ** (len(str(N))) + N
        rep = banach_density_estimate(blocks, N, shifts=np.array([[c]]))
        assert rep["ratio"] == 1.0 and rep["lower_bound"]


def test_banach_density_speckled_decreasing():
    cfg = SpeckledConfig(d=2, gamma=0.8, seed=0)
    pts = np.concatenate([speckled_points(cfg, j) for j in range(0, 10)])
    vals = [banach_density_estimate(pts, N)["ratio"] for N in (64, 128, 256)]
    assert vals[0] > vals[1] > vals[2]
