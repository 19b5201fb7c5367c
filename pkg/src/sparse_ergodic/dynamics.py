"""Measure-preserving Z^d actions and ergodic averages along sparse sequences.

Two kinds of action: rotations of a torus T^D (one frequency vector per
generator) and shifts of a finite torus Z_L^D.  Torus phases are carried as
64-bit fixed point numbers, so T(n) x is exact up to the quantization of the
frequencies and never drifts with |n|.  Finite models use integer
arithmetic throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .errors import BudgetExceeded, ConditionError
from .lattice import SparseMeasure, convolve

TWO64 = float(2 ** 64)


def _to_fixed(x: float) -> np.uint64:
    """Fractional part of x as a 64-bit fixed point integer."""
    fr = Fraction(x) % 1
    return np.uint64(int(fr * 2 ** 64) % 2 ** 64)


QUADRATIC = {"sqrt2": math.sqrt(2) - 1, "sqrt3": math.sqrt(3) - 1,
             "golden": (math.sqrt(5) - 1) / 2, "sqrt5": math.sqrt(5) - 2}


@dataclass
class ActionModel:
    """kind = "torus": state in [0,1)^D, generator i adds vectors[i] mod 1.
    kind = "finite": state in Z_L^D, generator i adds vectors[i] mod L."""
    kind: str
    vectors: np.ndarray           # (d, D)
    L: int = 0
    _fixed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors))
        if self.kind == "torus":
            self._fixed = np.array([[_to_fixed(v) for v in row] for row in self.vectors], dtype=np.uint64)
        elif self.kind == "finite":
            if self.L < 1:
                raise ValueError("finite model needs L >= 1")
            self.vectors = self.vectors.astype(np.int64) % self.L
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @property
    def d(self) -> int:
        return self.vectors.shape[0]

    @property
    def D(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def torus_rotation(cls, alphas=None) -> "ActionModel":
        if alphas is None:
            alphas = ((QUADRATIC["sqrt2"], 0.0), (0.0, QUADRATIC["sqrt3"]))
        return cls("torus", np.asarray(alphas, dtype=float))

    @classmethod
    def finite_shift(cls, L: int, vectors=None, d: int = 2) -> "ActionModel":
        if vectors is None:
            vectors = np.eye(d, dtype=np.int64)
        return cls("finite", np.asarray(vectors, dtype=np.int64), L)

    def act(self, n: np.ndarray, x) -> np.ndarray:
        """States T(n) x for each row n of an (N, d) integer array.

        Torus states are returned as uint64 fixed point, finite states as int64.
        """
        n = np.atleast_2d(np.asarray(n, dtype=np.int64))
        if n.shape[1] != self.d:
            raise ValueError(f"points have dimension {n.shape[1]}, action has {self.d} generators")
        if self.kind == "torus":
            x0 = np.array([_to_fixed(v) for v in np.broadcast_to(x, (self.D,))], dtype=np.uint64)
            out = np.broadcast_to(x0, (len(n), self.D)).copy()
            nu = n.astype(np.uint64)            # two's complement wrap is the right residue
            with np.errstate(over="ignore"):
                for i in range(self.d):
                    out += nu[:, i:i + 1] * self._fixed[i][None, :]
            return out
        x0 = np.broadcast_to(np.asarray(x, dtype=np.int64), (self.D,))
        return (x0[None, :] + (n % self.L) @ self.vectors) % self.L

    def check_commuting(self, trials: int = 16, seed: int = 0) -> bool:
        """T_i T_j x = T_j T_i x on random states (exact in both representations)."""
        for t in range(trials):
            if self.kind == "torus":
                x = [rng.uniform(seed, rng.TESTFN, t, a) for a in range(self.D)]
            else:
                x = [rng.hash64(seed, rng.TESTFN, t, a) % self.L for a in range(self.D)]
            for i in range(self.d):
                for j in range(self.d):
                    ei = np.zeros((1, self.d), dtype=np.int64)
                    ej = ei.copy()
                    ei[0, i] = 1
                    ej[0, j] = 1
                    a = self.act(ei + ej, x)
                    b = self.act(ej + ei, x)
                    if not np.array_equal(a, b):
                        return False
        return True

    def check_bijective(self) -> bool:
        """Each generator permutes Z_L^D (finite models only)."""
        if self.kind != "finite":
            raise ValueError("permutation check is for finite models")
        states = np.indices((self.L,) * self.D).reshape(self.D, -1).T
        for i in range(self.d):
            img = (states + self.vectors[i]) % self.L
            code = np.ravel_multi_index(img.T, (self.L,) * self.D)
            if len(np.unique(code)) != len(code):
                return False
        return True


@dataclass
class Observable:
    """Trigonometric polynomial sum_k c_k e(k.x) (real part) or a table on Z_L^D.

    ``mean`` is exact: c_0 for trig polynomials, a Fraction for tables.
    """
    kind: str
    freqs: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    table: np.ndarray | None = None

    @classmethod
    def trig(cls, freqs, coeffs) -> "Observable":
        return cls("trig", np.atleast_2d(np.asarray(freqs, dtype=np.int64)), np.asarray(coeffs, dtype=complex))

    @classmethod
    def cosine(cls, D: int = 2, axis: int = 0) -> "Observable":
        k = np.zeros((2, D), dtype=np.int64)
        k[0, axis], k[1, axis] = 1, -1
        return cls.trig(k, [0.5, 0.5])

    @classmethod
    def constant(cls, c=1, D: int = 2) -> "Observable":
        return cls.trig(np.zeros((1, D), dtype=np.int64), [c])

    @classmethod
    def from_table(cls, table) -> "Observable":
        return cls("table", table=np.asarray(table))

    @classmethod
    def cell_indicator(cls, L: int, lo: Sequence[int], hi: Sequence[int]) -> "Observable":
        """1 on the box prod [lo_i, hi_i) of Z_L^D."""
        t = np.zeros((L,) * len(lo), dtype=np.int64)
        t[tuple(slice(a, b) for a, b in zip(lo, hi))] = 1
        return cls.from_table(t)

    @property
    def mean(self):
        if self.kind == "trig":
            zero = np.all(self.freqs == 0, axis=1)
            return complex(self.coeffs[zero].sum()).real
        t = self.table
        if t.dtype.kind in "iu":
            return Fraction(int(t.sum()), t.size)
        return float(t.mean())

    @property
    def sup(self) -> float:
        if self.kind == "trig":
            return float(np.abs(self.coeffs).sum())
        return float(np.abs(self.table).max())

    def __call__(self, states: np.ndarray) -> np.ndarray:
        if self.kind == "trig":
            if states.dtype != np.uint64:
                raise ValueError("trig observables act on torus states")
            # phase k.x mod 1 in fixed point, wrapping arithmetic
            ph = _fixed_dot(states, self.freqs)
            ang = ph.astype(np.float64) / TWO64 * 2 * np.pi
            return (np.cos(ang) * self.coeffs.real[None, :] - np.sin(ang) * self.coeffs.imag[None, :]).sum(axis=1)
        if states.dtype == np.uint64:
            raise ValueError("table observables act on finite states")
        return self.table[tuple(states.T)]


def _fixed_dot(states: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    out = np.zeros((len(states), len(freqs)), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for a in range(states.shape[1]):
            out += states[:, a:a + 1] * freqs[:, a].astype(np.uint64)[None, :]
    return out


# averages

class Neumaier:
    """Compensated running sum."""

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


@dataclass(frozen=True)
class AverageTrace:
    Ns: tuple[int, ...]
    values: tuple                  # A_N f(x0): floats (torus) or Fractions (finite)
    mean: object
    deviations: tuple[float, ...]
    tail_deviation: float          # max deviation over the last quarter of the schedule
    lacunary: tuple[int, ...]
    t_seq: tuple[int, ...]
    oscillation: float
    sup_f: float

    def rows(self) -> list[tuple[int, object, float]]:
        return list(zip(self.Ns, self.values, self.deviations))


def lacunary_times(Nmax: int, ratio: float = 1.1) -> list[int]:
    out, t = [], 1.0
    while int(t) <= Nmax:
        if not out or int(t) != out[-1]:
            out.append(int(t))
        t *= ratio
    return out


def oscillation_sum(times: Sequence[int], values: dict, t_seq: Sequence[int]) -> float:
    """sum_n (max_{t in I, t_(n-1) <= t <= t_n} |A_t - A_(t_n)|)^2."""
    tot = 0.0
    for a, b in zip(t_seq, t_seq[1:]):
        seg = [t for t in times if a <= t <= b]
        worst = max((abs(float(values[t]) - float(values[b])) for t in seg), default=0.0)
        tot += worst * worst
    return tot


def evaluate_average(action: ActionModel, f: Observable, x0, enumeration, schedule: Iterable[int],
                     lacunary: Sequence[int] | None = None, t_seq: Sequence[int] | None = None,
                     chunk: int = 1 << 16) -> AverageTrace:
    """A_N f(x0) = (1/N) sum_{k<=N} f(T(a_k) x0) for N in the schedule.

    Prefix sums are accumulated once along the enumeration: compensated
    floats for torus models, exact integers or Fractions for finite ones.
    """
    pts = np.asarray(enumeration, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != action.d:
        raise ValueError(f"enumeration has dimension {pts.shape[1]}, action has {action.d} generators")
    Ns = sorted(set(int(N) for N in schedule))
    if Ns and Ns[0] < 1:
        raise ValueError("N must be >= 1")
    lac = list(lacunary) if lacunary is not None else lacunary_times(Ns[-1] if Ns else 1)
    need = sorted(set(Ns) | set(lac) | set(t_seq or ()))
    if need and need[-1] > len(pts):
        raise ValueError(f"schedule needs {need[-1]} points, enumeration has {len(pts)}")
    exact = action.kind == "finite" and f.kind == "table" and f.table.dtype.kind in "iu"
    acc = Neumaier()
    total_int = 0
    values: dict[int, object] = {}
    pos = 0
    for N in need:
        while pos < N:
            stop = min(N, pos + chunk)
            v = f(action.act(pts[pos:stop], x0))
            if exact:
                total_int += int(np.sum(v, dtype=np.int64))
            else:
                for x in np.asarray(v, dtype=float):
                    acc.add(float(x))
            pos = stop
        values[N] = Fraction(total_int, N) if exact else acc.value / N
    mean = f.mean
    devs = tuple(float(abs(values[N] - mean)) for N in Ns)
    q = max(1, len(Ns) // 4)
    ts = list(t_seq) if t_seq is not None else lac[::4]
    osc = oscillation_sum(lac, values, ts)
    return AverageTrace(tuple(Ns), tuple(values[N] for N in Ns), mean, devs, max(devs[-q:], default=0.0),
                        tuple(lac), tuple(ts), osc, f.sup)


def lattice_enumeration(d: int, count: int) -> np.ndarray:
    """Z^d by sup-norm shells, lexicographic inside a shell (the full lattice)."""
    R = 0
    while (2 * R + 1) ** d < count:
        R += 1
    ax = np.arange(-R, R + 1)
    pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d)
    order = np.lexsort([pts[:, i] for i in range(d - 1, -1, -1)] + [np.abs(pts).max(axis=1)])
    return pts[order][:count]


# maximal functions

@dataclass
class MaximalWindow:
    lo: tuple[int, ...]
    hi: tuple[int, ...]
    exact: bool
    values: object                 # dict point -> Fraction (exact) or dense array over the window
    scales: int

    def level_count(self, lam) -> int:
        """#{x in window: sup_j |phi * mu_j|(x) > lam}, lam > 0."""
        if lam <= 0:
            raise ValueError("lambda must be positive")
        if self.exact:
            lam = Fraction(lam) if not isinstance(lam, float) else Fraction(lam)
            return sum(1 for v in self.values.values() if v > lam)
        return int(np.count_nonzero(self.values > float(lam)))

    def distribution(self, lams: Iterable) -> list[tuple[object, int]]:
        return [(lam, self.level_count(lam)) for lam in lams]

    def at(self, pt: Sequence[int]):
        if self.exact:
            return self.values.get(tuple(pt), Fraction(0))
        return float(self.values[tuple(p - a for p, a in zip(pt, self.lo))])


def _bbox(m: SparseMeasure) -> tuple[np.ndarray, np.ndarray] | None:
    if not len(m):
        return None
    a = np.array(list(m.support()), dtype=np.int64)
    return a.min(axis=0), a.max(axis=0)


def maximal_function_window(phi: SparseMeasure, family: Sequence[SparseMeasure], window,
                            max_points: int = 1 << 24, max_pairs: int = 50_000_000) -> MaximalWindow:
    """sup_j |phi * mu_j| on a box window = (lo, hi), both corners inclusive.

    The window must contain supp(phi) + supp(mu_j) for every j; anything
    smaller is refused rather than truncated.  Rational inputs are handled
    exactly, otherwise in float64.
    """
    lo = tuple(int(v) for v in window[0])
    hi = tuple(int(v) for v in window[1])
    d = phi.d
    if len(lo) != d or len(hi) != d:
        raise ValueError("window dimension mismatch")
    cells = math.prod(b - a + 1 for a, b in zip(lo, hi))
    if cells > max_points:
        raise BudgetExceeded("maximal window", cells, max_points)
    bp = _bbox(phi)
    for m in family:
        bm = _bbox(m)
        if bp is None or bm is None:
            continue
        if np.any(bp[0] + bm[0] < lo) or np.any(bp[1] + bm[1] > hi):
            raise ConditionError("window", "window does not contain supp(phi) + supp(mu_j)")
    exact = all(isinstance(v, Fraction) for m in [phi, *family] for _, v in m.items())
    if exact:
        best: dict = {}
        for m in family:
            for x, v in convolve(phi, m, max_pairs=max_pairs).items():
                a = abs(v)
                if a > best.get(x, 0):
                    best[x] = a
        return MaximalWindow(lo, hi, True, best, len(family))
    shape = tuple(b - a + 1 for a, b in zip(lo, hi))
    best_arr = np.zeros(shape)
    xp = np.array(list(phi.support()), dtype=np.int64).reshape(-1, d) - np.array(lo)
    wp = np.array([float(phi[tuple(x + np.array(lo))]) for x in xp]) if len(xp) else np.zeros(0)
    for m in family:
        if not len(m) or not len(xp):
            continue
        hm = np.array(list(m.support()), dtype=np.int64)
        wm = np.array([float(m[tuple(h)]) for h in hm])
        if len(xp) * len(hm) > max_pairs:
            raise BudgetExceeded("maximal convolution pairs", len(xp) * len(hm), max_pairs)
        out = np.zeros(cells)
        step = max(1, (1 << 22) // len(hm))
        for s in range(0, len(xp), step):
            tgt = xp[s:s + step, None, :] + hm[None, :, :]
            lin = np.ravel_multi_index(tgt.reshape(-1, d).T, shape)
            out += np.bincount(lin, weights=(wp[s:s + step, None] * wm[None, :]).ravel(), minlength=cells)
        np.maximum(best_arr, np.abs(out.reshape(shape)), out=best_arr)
    return MaximalWindow(lo, hi, False, best_arr, len(family))


def ball_family(d: int, radii: Iterable[int], norm: str = "sup") -> list[SparseMeasure]:
    """Normalized indicators of the word balls of Z^d (sup or l^1 generators)."""
    from .groups import zd_ball_array
    out = []
    for r in radii:
        pts = zd_ball_array(d, r, norm)
        w = Fraction(1, len(pts))
        out.append(SparseMeasure(d, {tuple(int(x) for x in p): w for p in pts}, tag=f"ball{r}"))
    return out


# transference

@dataclass(frozen=True)
class TransferenceRow:
    lam: Fraction
    dyn_count: int                 # #{x in Z_L^D: sup_j |A_j f(x)| > lam}
    group_count: Fraction          # (1/#A^(K+R)) sum_x #{g: M phi_x(g) > lam}
    bound: Fraction                # edge factor * group_count
    holds: bool


@dataclass(frozen=True)
class TransferenceReport:
    L: int
    K: int
    R: int
    edge_factor: Fraction
    rows: tuple[TransferenceRow, ...]
    interior_agrees: bool          # M phi_x(g) = M f(x+g) for |g| <= K, every x

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    @property
    def measured_factor(self) -> float:
        """max over lambda of dyn_count / group_count (<= edge factor when the inequality holds)."""
        vals = [r.dyn_count / r.group_count for r in self.rows if r.group_count]
        return float(max(vals, default=0))


def _integer_family(family: Sequence[SparseMeasure]):
    out = []
    for m in family:
        den = math.lcm(*(Fraction(v).denominator for _, v in m.items())) if len(m) else 1
        out.append([(tuple(h), int(Fraction(v) * den)) for h, v in m.items()] + [den])
    return out


def _circular_max(f: np.ndarray, fam, keep=None) -> list[np.ndarray]:
    """Per scale, the integer array sum_h w_h f(. + h) on Z_L^D (optionally only h with keep(h))."""
    outs = []
    for entry in fam:
        *terms, den = entry
        acc = np.zeros_like(f, dtype=np.int64)
        for h, w in terms:
            if keep is not None and not keep(h):
                continue
            acc += w * np.roll(f, tuple(-x for x in h), axis=tuple(range(f.ndim)))
        outs.append((acc, den))
    return outs


def _count_above(outs, lam: Fraction) -> int:
    mask = None
    for acc, den in outs:
        m = np.abs(acc) * lam.denominator > lam.numerator * den
        mask = m if mask is None else (mask | m)
    return int(np.count_nonzero(mask)) if mask is not None else 0


def transference_check(L: int, family: Sequence[SparseMeasure], f, K: int = 16,
                       lambdas: Iterable = (Fraction(1, 16), Fraction(1, 8), Fraction(1, 4), Fraction(1, 2)),
                       max_factor: float = 2.0) -> TransferenceReport:
    """Compare the maximal function of a Z_L^D shift with its pullbacks to Z^D.

    For x in Z_L^D let phi_x(g) = f(x + g) on the sup ball B of radius K + R
    (R the family radius).  Every g with |g| <= K sees the same values as the
    dynamical side, which gives
        #{Mf > lam} <= (#B / #A^K) * (1/#B) sum_x #{g: M phi_x(g) > lam}.
    Both sides are computed exactly with integer weights.
    """
    f = np.asarray(f.table if isinstance(f, Observable) else f)
    if f.dtype.kind not in "iu":
        raise ValueError("transference check needs an integer-valued f")
    D = f.ndim
    if any(s != L for s in f.shape):
        raise ValueError("f must be an array on Z_L^D")
    R = max((max((max(abs(x) for x in h) for h in m.support()), default=0) for m in family), default=0)
    edge = Fraction(2 * (K + R) + 1, 2 * K + 1) ** D
    if edge > max_factor:
        raise ConditionError("edge factor", f"K={K}, R={R} gives factor {float(edge):.3f}")
    if 2 * (K + 2 * R) + 1 > L:
        raise ConditionError("edge factor", f"window 2(K+2R)+1 = {2 * (K + 2 * R) + 1} exceeds L={L}")
    fam = _integer_family(family)
    lams = [Fraction(l) for l in lambdas]
    full = _circular_max(f, fam)
    dyn = [_count_above(full, lam) for lam in lams]
    B = K + R
    group_tot = [0] * len(lams)
    interior_ok = True
    W = K + 2 * R
    cache: dict = {}
    for g in np.ndindex(*([2 * W + 1] * D)):
        g = tuple(x - W for x in g)
        if max(abs(x) for x in g) <= K:
            # the truncation never bites here; the sum over x is a circular count
            for i, c in enumerate(dyn):
                group_tot[i] += c
            continue
        keep_key = tuple(sorted({h for entry in fam for h, _ in entry[:-1]
                                 if max(abs(a + b) for a, b in zip(g, h)) <= B}))
        if keep_key not in cache:
            ks = set(keep_key)
            outs = _circular_max(f, fam, keep=lambda h: h in ks)
            cache[keep_key] = [_count_above(outs, lam) for lam in lams]
        for i, c in enumerate(cache[keep_key]):
            group_tot[i] += c
    # spot check: the interior identity on one offset against a direct pullback
    x0 = (0,) * D
    phi = {}
    for g in np.ndindex(*([2 * B + 1] * D)):
        g = tuple(x - B for x in g)
        v = int(f[tuple((a + b) % L for a, b in zip(x0, g))])
        if v:
            phi[g] = Fraction(v)
    if phi and family:
        win = (tuple([-W] * D), tuple([W] * D))
        mw = maximal_function_window(SparseMeasure(D, phi), family, win)
        for g in [(0,) * D, (K,) + (0,) * (D - 1), (-K,) * D]:
            dv = max(abs(Fraction(int(acc[tuple(a % L for a in g)]), den)) for acc, den in full)
            if mw.at(g) != dv:
                interior_ok = False
    size_B = (2 * B + 1) ** D
    rows = []
    for lam, dc, gt in zip(lams, dyn, group_tot):
        gc = Fraction(gt, size_B)
        rows.append(TransferenceRow(lam, dc, gc, edge * gc, dc <= edge * gc))
    return TransferenceReport(L, K, R, edge, tuple(rows), interior_ok)
