"""Random sparse sets on Z^d: speckled (independent points) and plaid (products
of independent one-dimensional sets), their mean-zero companions, cancellation
profiles of nu * nu~, and empirical weak-(1,1) sweeps."""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from . import rng
from .errors import BudgetExceeded
from .lattice import SparseMeasure, as_fraction, pow2, shell_count, sup_norm

DEFAULT_MAX_CELLS = 1 << 26  # correlation grid cells per FFT


@dataclass(frozen=True)
class SpeckledConfig:
    d: int = 2
    gamma: float = 0.8
    seed: int = 0
    jmin: int = 1
    jmax: int = 6

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d >= 1")
        if not 0 <= self.gamma < self.d:
            raise ValueError("gamma must lie in [0, d)")
        if self.jmin < 0 or self.jmax < self.jmin:
            raise ValueError("bad j-range")

    def prob(self, j: int):
        return pow2(-as_fraction(self.gamma) * j)


@dataclass(frozen=True)
class PlaidConfig:
    d: int = 2
    alpha: float = 0.4
    seed: int = 0
    jmin: int = 1
    jmax: int = 6
    diagonal: bool = False

    def __post_init__(self):
        if self.diagonal:
            raise ValueError("the diagonal plaid variant is not supported")
        if self.d < 1:
            raise ValueError("d >= 1")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.jmin < 1 or self.jmax < self.jmin:
            raise ValueError("plaid scales start at j = 1")


# shells as arrays

def shell_array(d: int, j: int, positive: bool = False) -> np.ndarray:
    """Points of the sup-norm shell 2^j <= |n| < 2^(j+1), lexicographically sorted.

    With ``positive`` only points with every coordinate > 0 are kept.
    """
    hi = 2 ** (j + 1)
    ax = np.arange(1 if positive else -hi + 1, hi, dtype=np.int64)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.abs(pts).max(axis=1) >= 2 ** j
    return pts[keep]


def speckled_coins(cfg: SpeckledConfig, pts: np.ndarray, j: int) -> np.ndarray:
    """xi_n for the given points of shell j (P = 2^(-gamma j))."""
    u = rng.uniform_array(cfg.seed, (rng.SPECKLED, cfg.d), pts)
    return u < float(cfg.prob(j))


def speckled_points(cfg: SpeckledConfig, j: int) -> np.ndarray:
    pts = shell_array(cfg.d, j)
    return pts[speckled_coins(cfg, pts, j)]


def _weights_speckled(cfg: SpeckledConfig, j: int):
    a = pow2((as_fraction(cfg.gamma) - cfg.d) * j)   # height of mu_j
    c = Fraction(1, 2 ** (cfg.d * j))                   # E mu_j on the shell
    if isinstance(a, float):
        c = float(c)
    return a, c


def sample_speckled(cfg: SpeckledConfig, j: int) -> tuple[SparseMeasure, SparseMeasure]:
    """mu_j = 2^((gamma-d)j) xi_n on shell j and nu_j = mu_j - 2^(-dj) there."""
    pts = shell_array(cfg.d, j)
    xi = speckled_coins(cfg, pts, j)
    a, c = _weights_speckled(cfg, j)
    tp = [tuple(int(x) for x in p) for p in pts]
    mu = SparseMeasure(cfg.d, {p: a for p, on in zip(tp, xi) if on}, tag=f"speckled-mu(j={j})")
    nu = SparseMeasure(cfg.d, {p: (a - c if on else -c) for p, on in zip(tp, xi)}, tag=f"speckled-nu(j={j})")
    return mu, nu


def expected_speckled(cfg: SpeckledConfig, j: int) -> SparseMeasure:
    _, c = _weights_speckled(cfg, j)
    return SparseMeasure(cfg.d, {tuple(int(x) for x in p): c for p in shell_array(cfg.d, j)}, tag="E mu")


def plaid_axis_coins(cfg: PlaidConfig, axis: int, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    u = rng.uniform_array(cfg.seed, (rng.PLAID, axis), n)
    return u < n.astype(np.float64) ** (-float(cfg.alpha))


def _plaid_arrays(cfg: PlaidConfig, j: int):
    """Grid [1, 2^(j+1)-1]^d with shell mask, presence and expectation arrays."""
    L = 2 ** (j + 1) - 1
    n = np.arange(1, L + 1, dtype=np.int64)
    d = cfg.d
    coins = [plaid_axis_coins(cfg, i, n) for i in range(d)]
    probs = n.astype(np.float64) ** (-float(cfg.alpha))
    present = np.ones((L,) * d, dtype=bool)
    expect = np.ones((L,) * d, dtype=np.float64)
    for i in range(d):
        shape = [1] * d
        shape[i] = L
        present = present & coins[i].reshape(shape)
        expect = expect * probs.reshape(shape)
    grids = np.meshgrid(*([n] * d), indexing="ij")
    shell = np.maximum.reduce(grids) >= 2 ** j
    return shell, present & shell, np.where(shell, expect, 0.0)


def sample_plaid(cfg: PlaidConfig, j: int) -> tuple[SparseMeasure, SparseMeasure]:
    """mu_j = 2^(d(alpha-1)j) prod xi_{i,n_i} on the positive shell, nu_j = mu_j - E mu_j."""
    shell, present, expect = _plaid_arrays(cfg, j)
    a = pow2(cfg.d * (as_fraction(cfg.alpha) - 1) * j)
    af = float(a)
    exact = cfg.alpha == 0 and isinstance(a, Fraction)
    mu_e, nu_e = {}, {}
    for idx in zip(*np.nonzero(shell)):
        p = tuple(int(i) + 1 for i in idx)
        e = a if exact else af * float(expect[idx])
        m = (a if exact else af) if present[idx] else 0
        if m:
            mu_e[p] = m
        nu_e[p] = m - e
    return (SparseMeasure(cfg.d, mu_e, tag=f"plaid-mu(j={j})"),
            SparseMeasure(cfg.d, nu_e, tag=f"plaid-nu(j={j})"))


# correlation machinery

def _fft_shape(n: int, d: int) -> tuple[int, ...]:
    return (sfft.next_fast_len(n, real=True),) * d


def _check_cells(j_values: Iterable[int], d: int, max_cells: int, where: str) -> None:
    for j in j_values:
        L = 2 ** (j + 2) - 1
        shape = _fft_shape(2 * L - 1, d)
        cells = math.prod(shape)
        if cells > max_cells:
            raise BudgetExceeded(f"{where} at j={j}", cells, max_cells)


def _centered(arr: np.ndarray, L: int) -> np.ndarray:
    """Cut lags -(L-1)..(L-1) on every axis from a circular correlation."""
    idx = np.r_[np.arange(arr.shape[0] - (L - 1), arr.shape[0]), np.arange(0, L)]
    out = arr
    for ax in range(arr.ndim):
        out = np.take(out, idx, axis=ax)
    return out


def _int_round(x: np.ndarray, what: str) -> np.ndarray:
    r = np.rint(x)
    err = float(np.max(np.abs(x - r))) if x.size else 0.0
    if err > 0.25:
        raise ArithmeticError(f"{what}: FFT rounding residual {err}")
    return r.astype(np.int64)


def _overlap(L1: int, L2: int, h: np.ndarray) -> np.ndarray:
    """#([-L1, L1] cap ([-L2, L2] + h)) in one coordinate."""
    lo = np.maximum(-L1, -L2 + h)
    hi = np.minimum(L1, L2 + h)
    return np.maximum(hi - lo + 1, 0)


def shell_overlap_counts(d: int, j: int) -> np.ndarray:
    """K(h) = #(shell cap (shell + h)) for all lags |h| < 2^(j+2), exact."""
    o, i = 2 ** (j + 1) - 1, 2 ** j - 1
    h = np.arange(-(2 * o), 2 * o + 1, dtype=np.int64)

    def box(L1, L2):
        f = _overlap(L1, L2, h)
        out = f
        for _ in range(d - 1):
            out = np.multiply.outer(out, f)
        return out

    return box(o, o) - box(o, i) - box(i, o) + box(i, i)


@functools.lru_cache(maxsize=1)
def _shell_spectrum(d: int, j: int, shape: tuple[int, ...]) -> np.ndarray:
    o = 2 ** (j + 1) - 1
    shellG = np.ones((2 * o + 1,) * d, dtype=np.float64)
    shellG[tuple(slice(o - (2 ** j - 1), o + 2 ** j) for _ in range(d))] = 0.0
    out = sfft.rfftn(shellG, shape)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SpeckledCorrelation:
    """nu_j * nu_j~ on lags [-(L-1), L-1]^d, L = 2^(j+2) - 1, from exact counts.

    nu * nu~(h) = a^2 (R(h) - p (A(h) + A(-h)) + p^2 K(h)), where R is the
    autocorrelation count of the sampled set S, A(h) = #{n in S : n - h in
    shell} and K(h) = #(shell cap (shell + h)).
    """
    j: int
    size: int
    shell_size: int
    at0: object
    values: np.ndarray
    radius: int


def speckled_correlation(cfg: SpeckledConfig, j: int, max_cells: int = DEFAULT_MAX_CELLS) -> SpeckledCorrelation:
    d = cfg.d
    _check_cells([j], d, max_cells, "speckled correlation")
    o = 2 ** (j + 1) - 1
    L = 2 * o + 1                     # side of the shell's bounding box
    pts = speckled_points(cfg, j)
    G = np.zeros((L,) * d, dtype=np.float64)
    if len(pts):
        G[tuple((pts + o).T)] = 1.0
    shape = _fft_shape(2 * L - 1, d)
    FG = sfft.rfftn(G, shape)
    FS = _shell_spectrum(d, j, shape)
    R = _int_round(_centered(sfft.irfftn(FG * np.conj(FG), shape), L), "R")
    A = _int_round(_centered(sfft.irfftn(FG * np.conj(FS), shape), L), "A")
    del FG, FS
    K = shell_overlap_counts(d, j)
    a, c = _weights_speckled(cfg, j)
    af = float(a)
    p = float(c) / af if af else 0.0
    Aneg = A[tuple(slice(None, None, -1) for _ in range(d))]
    vals = af * af * (R - p * (A + Aneg) + (p * p) * K)
    n = len(pts)
    M = shell_count(d, j)
    at0 = n * (a - c) ** 2 + (M - n) * c ** 2    # ||nu_j||_2^2
    radius = int(np.abs(pts).max()) if n else 0
    return SpeckledCorrelation(j, n, M, at0, vals, radius)


@dataclass(frozen=True)
class ProfileRow:
    trial: int
    seed: int
    j: int
    at0: float
    at0_conv: float
    sup_punctured: float
    r_j: int
    R_j: int


@dataclass(frozen=True)
class CancellationProfile:
    rows: tuple[ProfileRow, ...]
    slopes: tuple[float | None, ...]
    expected_slope: float
    origin_ratios: tuple[tuple[float, ...], ...]
    degenerate: tuple[tuple[int, int], ...] = ()


def ols_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    return float((xm * (y - y.mean())).sum() / (xm * xm).sum())


def trial_seed(seed: int, t: int) -> int:
    return seed + t


def cancellation_profile(cfg: SpeckledConfig, trials: int = 1, max_cells: int = DEFAULT_MAX_CELLS) -> CancellationProfile:
    if trials < 1:
        raise ValueError("trials >= 1")
    js = list(range(cfg.jmin, cfg.jmax + 1))
    _check_cells(js, cfg.d, max_cells, "speckled correlation")
    rows, slopes, ratios, degenerate = [], [], [], []
    for t in range(trials):
        tc = SpeckledConfig(cfg.d, cfg.gamma, trial_seed(cfg.seed, t), cfg.jmin, cfg.jmax)
        xs, ys, rs = [], [], []
        for j in js:
            corr = speckled_correlation(tc, j, max_cells)
            v = corr.values
            center = tuple(s // 2 for s in v.shape)
            at0_conv = float(v[center])
            absv = np.abs(v)
            absv[center] = 0.0
            sup = float(absv.max())
            rows.append(ProfileRow(t, tc.seed, j, float(corr.at0), at0_conv, sup, corr.size, corr.radius))
            if corr.size == 0:
                degenerate.append((t, j))
                continue
            xs.append(j)
            ys.append(math.log2(sup) if sup > 0 else float("-inf"))
            rs.append(float(corr.at0) / 2.0 ** ((float(cfg.gamma) - cfg.d) * j))
        slopes.append(ols_slope(xs, ys) if len(xs) >= 2 and all(math.isfinite(y) for y in ys) else None)
        ratios.append(tuple(rs))
    expected = float(cfg.gamma) - 1.5 * cfg.d
    return CancellationProfile(tuple(rows), tuple(slopes), expected, tuple(ratios), tuple(degenerate))


# plaid correlations and the chi decomposition

def patterns(d: int) -> list[tuple[int, ...]]:
    return [I for r in range(d + 1) for I in itertools.combinations(range(d), r)]


@dataclass(frozen=True)
class PlaidCorrelation:
    j: int
    values: np.ndarray        # lags -(L-1)..(L-1), L = 2^(j+1) - 1
    chi: dict                 # pattern I -> array with the same shape
    sup_by_pattern: dict
    reconstruction_exact: bool
    at0: float
    l2_squared: float


def pattern_masks(shape: tuple[int, ...]) -> dict:
    d = len(shape)
    center = [s // 2 for s in shape]
    nz = []
    for ax in range(d):
        v = np.arange(shape[ax]) != center[ax]
        sh = [1] * d
        sh[ax] = shape[ax]
        nz.append(v.reshape(sh))
    masks = {}
    for I in patterns(d):
        m = np.ones(shape, dtype=bool)
        for ax in range(d):
            m = m & (nz[ax] if ax in I else ~nz[ax])
        masks[I] = m
    return masks


def plaid_correlation(cfg: PlaidConfig, j: int, max_cells: int = DEFAULT_MAX_CELLS) -> PlaidCorrelation:
    d = cfg.d
    L = 2 ** (j + 1) - 1
    shape = _fft_shape(2 * L - 1, d)
    if math.prod(shape) > max_cells:
        raise BudgetExceeded(f"plaid correlation at j={j}", math.prod(shape), max_cells)
    shell, present, expect = _plaid_arrays(cfg, j)
    a = float(pow2(d * (as_fraction(cfg.alpha) - 1) * j))
    V = a * present.astype(np.float64) - a * expect
    F = sfft.rfftn(V, shape)
    C = _centered(sfft.irfftn(F * np.conj(F), shape), L)
    masks = pattern_masks(C.shape)
    chi = {I: np.where(m, C, 0.0) for I, m in masks.items()}
    total = np.zeros_like(C)
    for I in patterns(d):
        total = total + chi[I]
    exact = bool(np.array_equal(total, C))
    sups = {I: float(np.abs(C[m]).max()) if m.any() else 0.0 for I, m in masks.items()}
    center = tuple(s // 2 for s in C.shape)
    return PlaidCorrelation(j, C, chi, sups, exact, float(C[center]), float((V * V).sum()))


@dataclass(frozen=True)
class PlaidProfile:
    cfg: PlaidConfig
    trials: int
    sups: dict                 # (trial, j) -> {I: sup}
    reconstruction: dict       # (trial, j) -> bool
    exponents: dict            # I -> -d - #I/2 + d alpha


def plaid_profile(cfg: PlaidConfig, trials: int = 1, max_cells: int = DEFAULT_MAX_CELLS) -> PlaidProfile:
    sups, rec = {}, {}
    for t in range(trials):
        tc = PlaidConfig(cfg.d, cfg.alpha, trial_seed(cfg.seed, t), cfg.jmin, cfg.jmax)
        for j in range(cfg.jmin, cfg.jmax + 1):
            pc = plaid_correlation(tc, j, max_cells)
            sups[(t, j)] = pc.sup_by_pattern
            rec[(t, j)] = pc.reconstruction_exact
    expo = {I: -cfg.d - len(I) / 2 + cfg.d * float(cfg.alpha) for I in patterns(cfg.d)}
    return PlaidProfile(cfg, trials, sups, rec, expo)


def pattern_order_violations(sup_by_pattern: dict) -> list[tuple]:
    """Pairs I strictly inside I' whose sup for I' exceeds the sup for I."""
    bad = []
    for I, J in itertools.permutations(sup_by_pattern, 2):
        if set(I) < set(J) and sup_by_pattern[J] > sup_by_pattern[I]:
            bad.append((I, J))
    return bad


# sequences

def enumerate_sequence(cfg: SpeckledConfig, count: int, max_j: int = 12) -> list[tuple[int, ...]]:
    """The sampled set in order of sup-norm, ties broken lexicographically."""
    out: list[tuple[int, ...]] = []
    j = 0
    while len(out) < count:
        if j > max_j:
            raise ValueError(f"only {len(out)} points in shells 0..{max_j}, asked for {count}")
        pts = speckled_points(cfg, j)
        if len(pts):
            norms = np.abs(pts).max(axis=1)
            keys = [pts[:, i] for i in range(cfg.d - 1, -1, -1)] + [norms]
            pts = pts[np.lexsort(keys)]
            out.extend(tuple(int(x) for x in p) for p in pts)
        j += 1
    return out[:count]


# weak (1,1) sweep

@dataclass(frozen=True)
class WeakSweep:
    lambdas: tuple
    counts: tuple[int, ...]
    constants: tuple[float, ...]
    constant: float
    l1: object


def weak11_sweep(family: Sequence[SparseMeasure], f: SparseMeasure, lambdas: Iterable,
                 max_points: int = 5_000_000) -> WeakSweep:
    from .dynamics import maximal_function_window

    lams = tuple(lambdas)
    radius = max((max((sup_norm(p) for p in m), default=0) for m in family), default=0)
    fr = max((sup_norm(p) for p in f), default=0)
    window = (tuple(-(fr + radius) for _ in range(f.d)), tuple(fr + radius for _ in range(f.d)))
    mf = maximal_function_window(f, family, window, max_points=max_points)
    l1 = sum(abs(v) for _, v in f.items())
    counts = tuple(mf.level_count(lam) for lam in lams)
    consts = tuple(float(lam) * c / float(l1) for lam, c in zip(lams, counts))
    return WeakSweep(lams, counts, consts, max(consts, default=0.0), l1)


def tall_delta_function(points: Iterable[tuple[int, ...]], d: int, height=1) -> SparseMeasure:
    return SparseMeasure(d, {tuple(p): height for p in points}, tag="tall-deltas")
