"""Finitely generated groups with polynomial growth: word balls, block
sequences, random subsets and their TT* norms, the three-colouring of the
translation graph, gap thinning and Banach density estimates.

Elements are integer tuples in a normal form; each model knows how to
multiply and invert them.  Built in: Z^d with the l^1 generators (e, +-e_i)
or the sup-norm ("king") generators {-1, 0, 1}^d, the discrete Heisenberg
group, and the cyclic groups Z_n.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import rng
from .errors import BudgetExceeded, ConditionError
from .lattice import SparseMeasure

Elem = tuple[int, ...]


@dataclass(frozen=True)
class GroupModel:
    name: str
    identity: Elem
    generators: tuple[Elem, ...]
    mul: Callable[[Elem, Elem], Elem] = field(compare=False, repr=False)
    inv: Callable[[Elem], Elem] = field(compare=False, repr=False)
    degree: int = 0                      # growth degree, when known
    abelian_dim: int = 0                 # d for the Z^d models, else 0
    norm: str = ""                       # "l1" / "sup" for Z^d models

    def check(self) -> "GroupModel":
        gens = set(self.generators)
        if self.identity not in gens:
            raise ConditionError("identity", "generating set must contain e")
        if any(self.inv(g) not in gens for g in gens):
            raise ConditionError("symmetric", "generating set must be closed under inverses")
        return self

    def rho(self, g: Elem) -> int:
        """Word length of g (closed form for Z^d, BFS otherwise)."""
        if self.abelian_dim:
            return sum(abs(x) for x in g) if self.norm == "l1" else max((abs(x) for x in g), default=0)
        ball = WordBall.grow(self, 0)
        n = 0
        while g not in ball.length:
            n += 1
            ball = WordBall.grow(self, n)
        return ball.length[g]

    def distance(self, g: Elem, h: Elem) -> int:
        return self.rho(self.mul(g, self.inv(h)))


def zd(d: int, norm: str = "l1") -> GroupModel:
    if norm == "l1":
        gens = [tuple(0 for _ in range(d))]
        for i in range(d):
            for s in (1, -1):
                gens.append(tuple(s if k == i else 0 for k in range(d)))
    elif norm == "sup":
        gens = list(itertools.product((-1, 0, 1), repeat=d))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return GroupModel(f"z{d}" + ("" if norm == "l1" else "-sup"), (0,) * d, tuple(gens),
                      lambda a, b: tuple(x + y for x, y in zip(a, b)),
                      lambda a: tuple(-x for x in a), d, d, norm).check()


def _heis_mul(a: Elem, b: Elem) -> Elem:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1])


def _heis_inv(a: Elem) -> Elem:
    return (-a[0], -a[1], -a[2] + a[0] * a[1])


def heis3() -> GroupModel:
    gens = ((0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
    return GroupModel("heis3", (0, 0, 0), gens, _heis_mul, _heis_inv, 4).check()


def cyclic(n: int) -> GroupModel:
    if n < 2:
        raise ValueError("n >= 2")
    gens = tuple(sorted({(0,), (1 % n,), ((n - 1) % n,)}))
    return GroupModel(f"cyclic{n}", (0,), gens, lambda a, b: ((a[0] + b[0]) % n,),
                      lambda a: ((-a[0]) % n,), 0).check()


MODELS = {"z1": lambda: zd(1), "z2": lambda: zd(2), "z3": lambda: zd(3),
          "z2-sup": lambda: zd(2, "sup"), "heis3": heis3}


def get_model(name: str) -> GroupModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown group {name!r}; choose from {sorted(MODELS)}") from None


# word balls

@dataclass
class WordBall:
    model: GroupModel
    radius: int
    length: dict                       # element -> rho(g, e)
    layers: list[int]                  # #{g: rho = n} for n = 0..radius

    @classmethod
    def grow(cls, model: GroupModel, radius: int, max_size: int = 5_000_000) -> "WordBall":
        length = {model.identity: 0}
        frontier = [model.identity]
        layers = [1]
        gens = [g for g in model.generators if g != model.identity]
        for n in range(1, radius + 1):
            nxt = []
            for g in frontier:
                for a in gens:
                    h = model.mul(g, a)
                    if h not in length:
                        length[h] = n
                        nxt.append(h)
            if len(length) > max_size:
                raise BudgetExceeded(f"word ball of {model.name}", len(length), max_size)
            layers.append(len(nxt))
            frontier = nxt
            if not nxt:      # finite group exhausted
                layers.extend([0] * (radius - n))
                break
        return cls(model, radius, length, layers)

    @property
    def sizes(self) -> list[int]:
        return list(itertools.accumulate(self.layers))

    def ball(self, n: int) -> set:
        return {g for g, l in self.length.items() if l <= n}

    def __len__(self) -> int:
        return len(self.length)


def zd_ball_array(d: int, N: int, norm: str = "l1") -> np.ndarray:
    """All points of the radius-N ball of Z^d as an (n, d) array, row-major order."""
    ax = np.arange(-N, N + 1)
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r = np.abs(pts).sum(axis=1) if norm == "l1" else np.abs(pts).max(axis=1)
    return pts[r <= N]


def l1_ball_size(d: int, N: int) -> int:
    return sum(2 ** i * math.comb(d, i) * math.comb(N, i) for i in range(d + 1))


@dataclass(frozen=True)
class GrowthReport:
    model: str
    sizes: tuple[int, ...]
    degree: int
    ratios: tuple[float, ...]            # #A^N / N^degree, N >= 1
    local_slopes: tuple[float, ...]
    folner: tuple[float, ...]            # max over generators of #(aA^N sym-diff A^N)/#A^N


def infer_degree(sizes: Sequence[int], lo: int | None = None) -> int:
    """Integer d making #A^N / N^d flattest (least log-variance) on N in [lo, N_max]."""
    Nmax = len(sizes) - 1
    lo = max(1, Nmax // 2) if lo is None else lo
    Ns = np.arange(lo, Nmax + 1)
    logs = np.log(np.array([sizes[n] for n in Ns], dtype=float))
    best = min(range(0, 11), key=lambda d: float(np.var(logs - d * np.log(Ns))))
    return best


def word_ball_growth(model: GroupModel, N_max: int, folner: bool = True) -> GrowthReport:
    wb = WordBall.grow(model, N_max)
    sizes = tuple(wb.sizes)
    deg = infer_degree(sizes)
    ratios = tuple(sizes[n] / n ** deg for n in range(1, N_max + 1))
    slopes = tuple(math.log(sizes[n] / sizes[n - 1]) / math.log(n / (n - 1)) for n in range(2, N_max + 1))
    fol: list[float] = []
    if folner:
        for n in range(1, N_max):
            B = wb.ball(n)
            worst = 0.0
            for a in model.generators:
                shifted = {model.mul(a, g) for g in B}
                worst = max(worst, len(shifted ^ B) / len(B))
            fol.append(worst)
    return GrowthReport(model.name, sizes, deg, ratios, slopes, tuple(fol))


# group measures and convolution

def group_convolve(model: GroupModel, a: dict, b: dict, max_pairs: int = 20_000_000) -> dict:
    """(a * b)(x) = sum_{g h = x} a(g) b(h), in a's then b's insertion order."""
    if len(a) * len(b) > max_pairs:
        raise BudgetExceeded("group convolution", len(a) * len(b), max_pairs)
    out: dict = {}
    for g, u in a.items():
        for h, v in b.items():
            x = model.mul(g, h)
            out[x] = out.get(x, 0) + u * v
    return {x: v for x, v in out.items() if v}


def group_reflect(model: GroupModel, a: dict) -> dict:
    """a~(g) = conj(a(g^-1)); values here are real."""
    return {model.inv(g): v for g, v in a.items()}


def as_sparse_measure(a: dict, d: int) -> SparseMeasure:
    return SparseMeasure(d, a, tag="group")


@dataclass(frozen=True)
class GroupSample:
    mu: dict
    nu: dict
    expected: dict
    r_j: int
    R_j: int
    var_sum: float          # sum_g Var(eta_g) over the ball
    var2_sum: float         # sum_g Var(eta_g)^2


def presence_prob(model: GroupModel, rho: int, alpha) -> float:
    return 1.0 if rho == 0 else float(rho) ** (-float(alpha))


def sample_group_random(model: GroupModel, alpha, j: int, seed: int = 0,
                        ball: WordBall | None = None) -> GroupSample:
    """mu_j = 2^((alpha-d) j) xi_g on A^(2^j), xi_g ~ Bernoulli(rho(g,e)^-alpha).

    P(xi_e = 1) is taken to be 1.  Coins are keyed by (seed, element).
    """
    d = model.degree
    if not 0 < float(alpha) < d:
        raise ValueError(f"alpha must lie in (0, {d})")
    N = 2 ** j
    ball = ball if ball is not None and ball.radius >= N else WordBall.grow(model, N)
    scale = 2.0 ** ((float(alpha) - d) * j)
    mu, nu, ex = {}, {}, {}
    vs = v2 = 0.0
    for g, l in ball.length.items():
        if l > N:
            continue
        pr = presence_prob(model, l, alpha)
        u = rng.uniform(seed, rng.GROUP, *g)
        xi = 1 if u < pr else 0
        ex[g] = scale * pr
        if xi:
            mu[g] = scale
        val = scale * (xi - pr)
        if val:
            nu[g] = val
        var = pr * (1 - pr)
        vs += var
        v2 += var * var
    R = max((ball.length[g] for g in nu), default=0)
    return GroupSample(mu, nu, ex, len(mu), R, vs, v2)


def expectation_growth(model: GroupModel, alpha, N_max: int) -> tuple[list[float], float]:
    """S(N) = sum_{g in A^N} P(xi_g = 1) and the fitted exponent on [N_max/2, N_max]."""
    wb = WordBall.grow(model, N_max)
    S, tot = [], 0.0
    for n, c in enumerate(wb.layers):
        tot += c * presence_prob(model, n, alpha)
        S.append(tot)
    Ns = np.arange(max(1, N_max // 2), N_max + 1)
    slope = float(np.polyfit(np.log(Ns), np.log([S[n] for n in Ns]), 1)[0])
    return S, slope


def sigma_weights(model: GroupModel, alpha, N: int, ball: WordBall | None = None) -> list[float]:
    """Coefficients a_(n,N) with E mu_N = sum_n a_(n,N) (uniform average on A^n).

    E mu_N puts N^(alpha-d) rho^-alpha on each element; writing this radial
    profile as a combination of normalized ball indicators gives the weights.
    """
    d = model.degree
    ball = ball if ball is not None and ball.radius >= N else WordBall.grow(model, N)
    sizes = ball.sizes
    w = [float(N) ** (float(alpha) - d) * presence_prob(model, n, alpha) for n in range(N + 1)]
    return [(w[n] - (w[n + 1] if n < N else 0.0)) * sizes[n] for n in range(N + 1)]


def r_growth_constant(rs: Sequence[int]) -> float:
    """Smallest C_0 with sum_{j<=k} r_j <= C_0 r_k for every k."""
    run, worst = 0, 0.0
    for r in rs:
        run += r
        worst = max(worst, run / r if r else math.inf)
    return worst


# TT* norms

@dataclass(frozen=True)
class TTStar:
    M: int
    l1: float
    l2: float
    op_upper: float          # ||(nu~ * nu)^M||_1^(1/2M)


def tt_star_norm(model: GroupModel, nu: dict, M: int = 1, max_pairs: int = 20_000_000) -> TTStar:
    if M not in (1, 2, 3):
        raise ValueError("M must be 1, 2 or 3")
    base = group_convolve(model, group_reflect(model, nu), nu, max_pairs)
    cur = base
    for _ in range(M - 1):
        cur = group_convolve(model, cur, base, max_pairs)
    l1 = float(sum(abs(v) for v in cur.values()))
    l2 = math.sqrt(float(sum(v * v for v in cur.values())))
    return TTStar(M, l1, l2, l1 ** (1 / (2 * M)))


def operator_ratio(model: GroupModel, nu: dict, phi: dict) -> float:
    """||nu * phi||_2 / ||phi||_2 for one test function."""
    out = group_convolve(model, nu, phi)
    num = math.sqrt(sum(float(v) ** 2 for v in out.values()))
    den = math.sqrt(sum(float(v) ** 2 for v in phi.values()))
    return num / den


def zd_moment_ratio(d: int, alpha, j: int, seed: int, norm: str = "l1") -> tuple[float, float]:
    """(||eta~ * eta||_2^2, (sum Var eta)^2) for the unscaled centred coins on Z^d.

    Uses an FFT on a padded box; the autocorrelation of a real array is
    |F|^2 in frequency, so ||eta~*eta||_2^2 = sum |F|^4 / #cells.
    """
    from scipy import fft as sfft
    N = 2 ** j
    pts = zd_ball_array(d, N, norm)
    rho = np.abs(pts).sum(axis=1) if norm == "l1" else np.abs(pts).max(axis=1)
    pr = np.where(rho == 0, 1.0, np.maximum(rho, 1).astype(float) ** (-float(alpha)))
    u = rng.uniform_array(seed, (rng.GROUP,), pts)
    eta = (u < pr).astype(float) - pr
    L = 2 * N + 1
    grid = np.zeros((L,) * d)
    grid[tuple((pts + N).T)] = eta
    shape = tuple(sfft.next_fast_len(2 * L - 1) for _ in range(d))
    F = sfft.rfftn(grid, shape)
    P = (F * np.conj(F)).real
    # rfftn keeps half the last axis: weight the interior columns twice
    wts = np.full(P.shape[-1], 2.0)
    wts[0] = 1.0
    if shape[-1] % 2 == 0:
        wts[-1] = 1.0
    l2sq = float(np.sum(P * P * wts) / math.prod(shape))
    var = float(np.sum(pr * (1 - pr)))
    return l2sq, var * var


# block sequences

@dataclass(frozen=True)
class GroupBlockRow:
    k: int
    r: int
    size: int
    diff: int
    ratio: Fraction


def group_block_conditions(model: GroupModel, ells: Sequence[int], shifts: Sequence[Elem], C=1) -> dict[str, bool]:
    rho = [model.rho(a) for a in shifts]
    C = Fraction(C)
    return {
        "spacing": all(rho[k + 1] > rho[k] + ells[k] for k in range(len(shifts) - 1)),
        "regularity": all(ells[k] >= C * rho[k - 1] for k in range(1, len(ells))),
    }


def group_block_set(model: GroupModel, ells: Sequence[int], shifts: Sequence[Elem], k: int, r: int,
                    balls: dict | None = None) -> set:
    """S(k, r) = (union_{i<=k} a_i A^(l_i)) union a_(k+1) A^r (k is 1-based)."""
    balls = {} if balls is None else balls

    def ball(n):
        if n not in balls:
            balls[n] = WordBall.grow(model, n).ball(n)
        return balls[n]
    S = set()
    for i in range(k):
        S |= {model.mul(shifts[i], g) for g in ball(ells[i])}
    if r > 0 or k < len(shifts):
        if k >= len(shifts):
            raise ValueError("no block k+1 to draw the partial ball from")
        S |= {model.mul(shifts[k], g) for g in ball(r)}
    return S


def difference_set(model: GroupModel, S: set) -> set:
    inv = [model.inv(h) for h in S]
    return {model.mul(g, hi) for g in S for hi in inv}


def group_block_sequence(model: GroupModel, ells: Sequence[int], shifts: Sequence[Elem],
                         rs: Sequence[int] | None = None, C=1, max_pairs: int = 20_000_000) -> list[GroupBlockRow]:
    conds = group_block_conditions(model, ells, shifts, C)
    for name, ok in conds.items():
        if not ok:
            raise ConditionError(name, f"ells={list(ells)} shifts={list(shifts)}")
    rows, balls = [], {}
    for k in range(1, len(ells)):
        grid = rs if rs is not None else sorted({0, 1, ells[k] // 2, ells[k] - 1})
        for r in grid:
            if not 0 <= r < ells[k]:
                continue
            S = group_block_set(model, ells, shifts, k, r, balls)
            if len(S) ** 2 > max_pairs:
                raise BudgetExceeded("difference set", len(S) ** 2, max_pairs)
            D = difference_set(model, S)
            rows.append(GroupBlockRow(k, r, len(S), len(D), Fraction(len(D), len(S))))
    return rows


def default_group_blocks(model: GroupModel, K: int, ell1: int = 1, C=1) -> tuple[list[int], list[Elem]]:
    """Disjoint blocks along a generator direction satisfying the spacing rules.

    l_k = max(l_1, ceil(C rho(a_(k-1)))) and rho(a_k) = rho(a_(k-1)) + l_(k-1) + l_k + 1.
    """
    gen = next(g for g in model.generators if g != model.identity and all(x >= 0 for x in g))
    ells: list[int] = []
    shifts: list[Elem] = []
    a, rho_prev = model.identity, 0
    for k in range(K):
        ell = max(ell1, math.ceil(Fraction(C) * rho_prev)) if k else ell1
        steps = (ells[-1] if k else 0) + ell + 1
        for _ in range(steps):
            a = model.mul(a, gen)
        ells.append(ell)
        shifts.append(a)
        rho_prev = model.rho(a)
    return ells, shifts


# three-colouring

def three_color_partition(model: GroupModel, E: Iterable[Elem], h: Elem) -> list[set]:
    """Split D = {g in E: hg in E} into at most three classes.

    In the graph with edges g -> hg every vertex has in- and out-degree at
    most one, so components are paths or cycles.  Colours alternate along
    each component; an odd cycle takes a third colour on its last vertex.
    Inside a class the dependency pairs {g, hg} are pairwise disjoint.
    """
    if h == model.identity:
        raise ConditionError("h != e", "the translation must be nontrivial")
    E = set(E)
    D = {g for g in E if model.mul(h, g) in E}
    hinv = model.inv(h)
    color: dict = {}
    for start in sorted(D):
        if start in color:
            continue
        # walk back to the head of a path, or detect a cycle
        g = start
        seen = {g}
        while True:
            prev = model.mul(hinv, g)
            if prev not in D or prev in seen:
                break
            g = prev
            seen.add(g)
        head = g
        comp = [head]
        g = model.mul(h, head)
        while g in D and g != head:
            comp.append(g)
            g = model.mul(h, g)
        cyc = g == head and model.mul(hinv, head) in D
        for i, x in enumerate(comp):
            color[x] = i % 2
        if cyc and len(comp) % 2 == 1:
            color[comp[-1]] = 2
    classes = [set() for _ in range(3)]
    for g, c in color.items():
        classes[c].add(g)
    return [c for c in classes if c]


def partition_valid(model: GroupModel, E: Iterable[Elem], h: Elem, classes: list[set]) -> dict[str, bool]:
    E = set(E)
    D = {g for g in E if model.mul(h, g) in E}
    union = set().union(*classes) if classes else set()
    disjoint = sum(len(c) for c in classes) == len(union)
    dep_ok = True
    for c in classes:
        used: set = set()
        for g in c:
            pair = {g, model.mul(h, g)}
            if used & pair:
                dep_ok = False
            used |= pair
    return {"at_most_three": len(classes) <= 3, "disjoint": disjoint,
            "covering": union == D, "independent": dep_ok}


# gaps and thinning

def cantor_numbers(count: int) -> list[int]:
    """Positive integers whose base-3 digits are all 0 or 1, increasing."""
    out = []
    n = 1
    while len(out) < count:
        out.append(int(bin(n)[2:], 3))
        n += 1
    return out


@dataclass(frozen=True)
class GapProfile:
    M_grid: tuple[int, ...]
    beta: dict                       # (j, M) -> beta_{j,M} (Fraction)
    schedule: dict                   # j -> M_j
    kept: tuple[int, ...]            # thinned indices n_k (1-based)
    ratio: float                     # n_K / K at the last kept index
    min_gap_ok: bool                 # kept n in block j sits at distance >= M_j from all earlier points
    jmax: int

    def ratio_at(self, k: int) -> float:
        return self.kept[k - 1] / k


def _earliest_near(points: np.ndarray, rmax: int, p: float) -> np.ndarray:
    """For each index n, the distance to the nearest earlier point if < rmax+1 (else inf)."""
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=rmax + 1e-9, p=p, output_type="ndarray")
    dmin = np.full(len(points), np.inf)
    if len(pairs):
        a, b = pairs.min(axis=1), pairs.max(axis=1)
        dist = np.linalg.norm(points[a] - points[b], ord=p, axis=1)
        np.minimum.at(dmin, b, dist)
    return dmin


def gap_profile_and_thin(seq: Sequence[Elem], M_grid: Sequence[int], budget: float = 1.0,
                         norm: str = "sup", check_order: bool = True) -> GapProfile:
    """beta_{j,M} over dyadic index blocks [2^j, 2^(j+1)) and the greedy thinning.

    Distances are the word metric of Z^d with the chosen generators (sup or
    l^1).  M_j is the largest grid value keeping sum_{i<=j} beta_{i,M_i}
    within ``budget`` (M = 1 removes nothing and is always allowed).
    """
    pts = np.asarray(seq, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts[:, None]
    p = np.inf if norm == "sup" else 1
    r = np.abs(pts).max(axis=1) if norm == "sup" else np.abs(pts).sum(axis=1)
    if check_order and np.any(np.diff(r) < 0):
        raise ConditionError("ordered", "rho(g_n, e) must be nondecreasing")
    grid = tuple(sorted(set(int(M) for M in M_grid) | {1}))
    dmin = _earliest_near(pts.astype(float), max(grid) - 1, p)
    n_total = len(pts)
    jmax = int(math.log2(n_total)) if n_total else -1
    beta, sched = {}, {}
    removed = np.zeros(n_total + 1, dtype=bool)         # 1-based
    spent = Fraction(0)
    for j in range(jmax + 1):
        lo, hi = 2 ** j, min(2 ** (j + 1), n_total + 1)
        block = dmin[lo - 1:hi - 1]
        for M in grid:
            beta[(j, M)] = Fraction(int(np.count_nonzero(block < M)), 2 ** j)
        choice = max(M for M in grid if spent + beta[(j, M)] <= budget)
        sched[j] = choice
        spent += beta[(j, choice)]
        removed[lo:hi] = block < choice
    kept = tuple(int(n) for n in range(1, n_total + 1) if not removed[n])
    ok = True
    for n in kept:
        j = int(math.log2(n))
        if dmin[n - 1] < sched[j]:
            ok = False
            break
    ratio = kept[-1] / len(kept) if kept else math.nan
    return GapProfile(grid, beta, sched, kept, ratio, ok, jmax)


# Banach density

def banach_density_estimate(points: np.ndarray, N: int, shifts: np.ndarray | None = None,
                            n_shifts: int = 256, seed: int = 0, norm: str = "sup") -> dict:
    """max over sampled g of #(F intersect (g + ball_N)) / #ball_N on Z^d.

    Shifts default to the origin plus ``n_shifts`` points drawn from the
    radius-2N ball; the value is a lower bound of the supremum over all g.
    """
    points = np.asarray(points, dtype=np.int64)
    if points.ndim == 1:
        points = points[:, None]
    d = points.shape[1]
    p = np.inf if norm == "sup" else 1
    ball = (2 * N + 1) ** d if norm == "sup" else l1_ball_size(d, N)
    if shifts is None:
        keys = np.arange(n_shifts)[:, None]
        u = np.stack([rng.uniform_array(seed, (rng.SHIFTS, ax), keys) for ax in range(d)], axis=1)
        cand = np.floor(u * (4 * N + 1)).astype(np.int64) - 2 * N
        if norm == "l1":
            cand = cand[np.abs(cand).sum(axis=1) <= 2 * N]
        shifts = np.vstack([np.zeros((1, d), dtype=np.int64), cand])
    shifts = np.asarray(shifts, dtype=np.int64).reshape(-1, d)
    tree = cKDTree(points.astype(float))
    counts = tree.query_ball_point(shifts.astype(float), r=N + 1e-9, p=p, return_length=True)
    i = int(np.argmax(counts))
    return {"N": N, "ratio": float(counts[i]) / ball, "shift": tuple(int(x) for x in shifts[i]),
            "shifts": len(shifts), "lower_bound": True}
