import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparse_ergodic.arith import arith_points_array, make_params
from sparse_ergodic.dynamics import (
    ActionModel, Neumaier, Observable, ball_family, evaluate_average, lacunary_times,
    lattice_enumeration, maximal_function_window, oscillation_sum, transference_check,
)
from sparse_ergodic.errors import ConditionError
from sparse_ergodic.lattice import SparseMeasure, convolve


def test_fixed_point_rotation_is_exact():
    rot = ActionModel.torus_rotation(((F(3, 8), 0.0), (0.0, F(1, 4))))
    n = np.array([[2 ** 40 + 3, -5]])
    st_ = rot.act(n, (0.5, 0.0))
    want = [(F(1, 2) + (2 ** 40 + 3) * F(3, 8)) % 1, (-5 * F(1, 4)) % 1]
    assert [F(int(v), 2 ** 64) for v in st_[0]] == want


def test_torus_average_matches_direct_floats():
    rot = ActionModel.torus_rotation()
    a1 = math.sqrt(2) - 1
    pts = lattice_enumeration(2, 500)
    f = Observable.cosine(2, axis=0)
    tr = evaluate_average(rot, f, (0.1, 0.2), pts, [10, 100, 500])
    for N, v in zip(tr.Ns, tr.values):
        direct = math.fsum(math.cos(2 * math.pi * (0.1 + n1 * a1)) for n1, _ in pts[:N]) / N
        assert v == pytest.approx(direct, abs=1e-9)
    assert tr.mean == 0


def test_constant_observable():
    rot = ActionModel.torus_rotation()
    tr = evaluate_average(rot, Observable.constant(1), (0.3, 0.7), lattice_enumeration(2, 300), [1, 17, 300])
    assert all(v == pytest.approx(1.0, abs=1e-15) for v in tr.values)
    fin = ActionModel.finite_shift(7)
    t2 = evaluate_average(fin, Observable.from_table(np.ones((7, 7), dtype=np.int64)), (0, 0),
                          lattice_enumeration(2, 50), [5, 50])
    assert t2.values == (1, 1)


def test_full_lattice_average_goes_to_zero():
    rot = ActionModel.torus_rotation()
    pts = lattice_enumeration(2, 201 ** 2)
    tr = evaluate_average(rot, Observable.cosine(), (0.0, 0.0), pts, [201 ** 2])
    assert abs(tr.values[0]) < 0.01


def test_arithmetic_set_average_small():
    params = make_params(2, 1, 8)
    pts = arith_points_array(params)
    rot = ActionModel.torus_rotation()
    tr = evaluate_average(rot, Observable.cosine(), (0.0, 0.0), pts, [len(pts)])
    assert abs(tr.values[0]) < 0.05


def test_finite_orbit_average_exact():
    L = 101
    table = np.array([(x * x + 3) % 17 for x in range(L)], dtype=np.int64)
    f = Observable.from_table(table)
    act = ActionModel.finite_shift(L, [[5]])
    pts = np.arange(1, 3 * L + 1)[:, None]
    tr = evaluate_average(act, f, (4,), pts, [L, 2 * L, 3 * L])
    assert all(v == f.mean for v in tr.values)
    assert isinstance(tr.values[0], F) and f.mean == F(int(table.sum()), L)


def test_finite_block_average_exact_2d():
    L = 101
    f = Observable.cell_indicator(L, (3, 10), (40, 12))
    act = ActionModel.finite_shift(L)
    ax = np.arange(L)
    box = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    tr = evaluate_average(act, f, (0, 0), box, [L * L])
    assert tr.values[0] == f.mean == F(37 * 2, L * L)


def test_dimension_and_length_errors():
    rot = ActionModel.torus_rotation()
    with pytest.raises(ValueError):
        evaluate_average(rot, Observable.cosine(), (0, 0), np.zeros((5, 3), dtype=int), [2])
    with pytest.raises(ValueError):
        evaluate_average(rot, Observable.cosine(), (0, 0), lattice_enumeration(2, 5), [6])


def test_commuting_and_bijective():
    assert ActionModel.torus_rotation().check_commuting()
    fin = ActionModel.finite_shift(13, [[1, 2], [5, 7]])
    assert fin.check_commuting() and fin.check_bijective()


@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=25)
def test_average_bounded_and_linear(seed, a, b):
    rot = ActionModel.torus_rotation()
    pts = lattice_enumeration(2, 400)
    x0 = ((seed % 1000) / 1000, (seed // 1000 % 1000) / 1000)
    f = Observable.trig([[1, 0], [0, 2], [3, -1]], [0.5, 0.25j, -0.2])
    g = Observable.cosine(2, axis=1)
    h = Observable.trig(np.vstack([f.freqs, g.freqs]), np.concatenate([a * f.coeffs, b * g.coeffs]))
    Ns = [1, 7, 99, 400]
    tf, tg, th = (evaluate_average(rot, o, x0, pts, Ns) for o in (f, g, h))
    for vf, vg, vh in zip(tf.values, tg.values, th.values):
        assert abs(vf) <= f.sup + 1e-12
        assert vh == pytest.approx(a * vf + b * vg, abs=1e-9)


def test_neumaier_against_fsum():
    xs = [1e16, 1.0, -1e16, 3.0, 1e-8] * 1000
    acc = Neumaier()
    for x in xs:
        acc.add(x)
    exact = math.fsum(xs)
    assert acc.value == pytest.approx(exact, rel=1e-15)
    assert abs(sum(xs) - exact) > 1e3 * abs(acc.value - exact)


def test_oscillation_sum_bruteforce():
    values = {t: (-1) ** t / t for t in range(1, 41)}
    times = lacunary_times(40, 1.3)
    t_seq = times[::2]
    want = 0.0
    for a, b in zip(t_seq, t_seq[1:]):
        want += max(abs(values[t] - values[b]) for t in times if a <= t <= b) ** 2
    assert oscillation_sum(times, values, t_seq) == pytest.approx(want)


def test_maximal_delta_ball_family():
    fam = ball_family(2, [0, 1, 2])
    mw = maximal_function_window(SparseMeasure.delta((0, 0)), fam, ((-2, -2), (2, 2)))
    assert mw.at((0, 0)) == 1
    assert mw.at((1, -1)) == F(1, 9)
    assert mw.at((2, 1)) == F(1, 25)
    dist = mw.distribution([F(1, 30), F(1, 10), F(1, 2)])
    assert [c for _, c in dist] == [25, 9, 1]


def test_maximal_window_refuses_truncation():
    with pytest.raises(ConditionError):
        maximal_function_window(SparseMeasure.delta((0, 0)), ball_family(2, [3]), ((-2, -2), (2, 2)))


@given(st.dictionaries(st.tuples(st.integers(-3, 3), st.integers(-3, 3)),
                       st.fractions(0, 4, max_denominator=3), min_size=1, max_size=6))
@settings(max_examples=30)
def test_maximal_exact_vs_float_vs_bruteforce(phi_d):
    phi = SparseMeasure(2, phi_d)
    fam = ball_family(2, [0, 1, 2])
    win = ((-5, -5), (5, 5))
    ex = maximal_function_window(phi, fam, win)
    fl = maximal_function_window(phi.to_float(), [m.to_float() for m in fam], win)
    brute = {}
    for m in fam:
        for x, v in convolve(phi, m).items():
            brute[x] = max(brute.get(x, 0), abs(v))
    for x in np.ndindex(11, 11):
        x = (x[0] - 5, x[1] - 5)
        assert ex.at(x) == brute.get(x, 0) >= 0
        assert fl.at(x) == pytest.approx(float(ex.at(x)), abs=1e-12)
    lams = [F(k, 16) for k in range(1, 40)]
    counts = [c for _, c in ex.distribution(lams)]
    assert counts == sorted(counts, reverse=True)


def test_transference_indicator():
    L = 128
    f = np.zeros((L, L), dtype=np.int64)
    f[60:64, 30:33] = 1
    rep = transference_check(L, ball_family(2, [0, 1]), f, K=16)
    assert rep.holds and rep.interior_agrees
    assert rep.edge_factor == F(35, 33) ** 2
    assert rep.measured_factor <= 1.2


def test_transference_constant():
    L = 48
    f = np.full((L, L), 3, dtype=np.int64)
    rep = transference_check(L, ball_family(2, [0, 1, 2]), f, K=10, lambdas=[F(1), F(5, 2)])
    for row in rep.rows:
        assert row.dyn_count == L * L and row.holds
    assert rep.interior_agrees


def test_transference_single_scale():
    L = 64
    rs = np.random.default_rng(3)
    f = (rs.random((L, L)) < 0.05).astype(np.int64)
    rep = transference_check(L, ball_family(2, [1]), f, K=12)
    assert rep.holds and rep.interior_agrees
    assert 1 <= rep.measured_factor <= float(rep.edge_factor)


def test_transference_refuses_large_family():
    f = np.zeros((32, 32), dtype=np.int64)
    with pytest.raises(ConditionError):
        transference_check(32, ball_family(2, [8]), f, K=4)
