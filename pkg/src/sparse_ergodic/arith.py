"""Deterministic sparse sets built from polynomial curves over Z_p.

The curve {(j, j^2, ..., j^m)} in Z_p^m is pushed into Z^d by a base-p digit
map, one block per prime.  This module holds the pieces needed to check the
Fourier side of that construction numerically: the exhaustive character-sum
sweep, the trapezoid smoothing and its dual l^1 norm, the two transfer
operators, the oscillation bookkeeping for the block averages, and the
product variant.
"""
from __future__ import annotations

import cmath
import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, ConditionError
from .lattice import SparseMeasure, as_fraction, sup_norm

TWO_PI_I = 2j * math.pi


def e(x: float) -> complex:
    return cmath.exp(TWO_PI_I * x)


# primes and schedules

def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    if n % 3 == 0:
        return n == 3
    f = 5
    while f * f <= n:
        if n % f == 0 or n % (f + 2) == 0:
            return False
        f += 6
    return True


def primes_between(lo: int, hi: int) -> list[int]:
    """Primes p with lo <= p <= hi."""
    return [n for n in range(max(lo, 2), hi + 1) if is_prime(n)]


def dyadic_half_prime(k: int) -> tuple[int, bool]:
    """Smallest prime in (2^k, 2^(k+1/2)); falls back to (2^k, 2^(k+1)).

    Returns (prime, used_fallback).  Membership p < 2^(k+1/2) is tested as
    p^2 < 2^(2k+1), so no irrational comparison is involved.
    """
    lo = 2 ** k
    n = lo + 1
    while n * n < 2 ** (2 * k + 1):
        if is_prime(n):
            return n, False
        n += 1
    n = lo + 1
    while n < 2 * lo:
        if is_prime(n):
            return n, True
        n += 1
    raise ValueError(f"no prime in (2^{k}, 2^{k + 1})")


def _first_dyadic_half_k() -> int:
    k = 0
    while True:
        _, fb = dyadic_half_prime(k) if k > 0 else (None, True)
        if not fb:
            return k
        k += 1


@dataclass(frozen=True)
class PrimeSchedule:
    mode: str
    primes: tuple[int, ...]
    fallback: tuple[bool, ...]
    params: dict = field(default_factory=dict)
    repeated: tuple[int, ...] = ()      # p'_k ~ 2^(gamma k), by repeating terms

    @property
    def warning(self) -> bool:
        return any(self.fallback)


def prime_schedule(mode: str, count: int, *, c=2, C=4, p1: int | None = None,
                   m: int = 1, gamma: float | None = None) -> PrimeSchedule:
    """Prime schedules.

    ``ratio``: p_1 (default: smallest prime > max(m, 3)) then greedily the
    smallest prime in [c p_k, C p_k).  ``dyadic-half``: the smallest prime in
    (2^k, 2^(k+1/2)) for consecutive k from the first k where one exists.
    With ``gamma`` the schedule p'_k = P(ceil(k gamma)) is emitted as well,
    which repeats terms whenever ceil(k gamma) stalls.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode == "ratio":
        c, C = as_fraction(c), as_fraction(C)
        if not (1 < c < C):
            raise ValueError("need 1 < c < C")
        p = p1 if p1 is not None else next(n for n in itertools.count(max(m, 3) + 1) if is_prime(n))
        if not is_prime(p) or p <= m:
            raise ConditionError("p1", f"{p} must be a prime larger than m={m}")
        out = [p]
        while len(out) < count:
            lo, hi = math.ceil(c * out[-1]), math.ceil(C * out[-1]) - 1
            nxt = next((n for n in range(lo, hi + 1) if is_prime(n)), None)
            if nxt is None:
                raise ConditionError("ratio", f"no prime in [{lo}, {hi}]")
            out.append(nxt)
        return PrimeSchedule("ratio", tuple(out), (False,) * count, {"c": str(c), "C": str(C)})
    if mode == "dyadic-half":
        k0 = _first_dyadic_half_k()
        ps, fb = zip(*(dyadic_half_prime(k) for k in range(k0, k0 + count)))
        rep: tuple[int, ...] = ()
        if gamma is not None:
            if gamma <= 0:
                raise ValueError("gamma must be positive")
            rep = tuple(dyadic_half_prime(max(math.ceil(k * gamma), k0))[0] for k in range(1, count + 1))
        return PrimeSchedule("dyadic-half", tuple(ps), tuple(fb), {"k0": k0, "gamma": gamma}, rep)
    raise ValueError(f"unknown schedule mode {mode!r}")


# curve sets and their block enumeration

def curve_point(j: int, p: int, m: int) -> tuple[int, ...]:
    return tuple(pow(j, i, p) for i in range(1, m + 1))


def freiman(jv: Sequence[int], p: int, q: int, d: int) -> tuple[int, ...]:
    """Digit map Z^m -> Z^d, coordinate t = sum_i p^(i-1) j_(tq+i)."""
    return tuple(sum(p ** i * jv[t * q + i] for i in range(q)) for t in range(d))


def x_point(j: int, p: int, q: int, d: int) -> tuple[int, ...]:
    return freiman(curve_point(j, p, q * d), p, q, d)


def default_shifts(primes: Sequence[int], q: int, d: int) -> tuple[tuple[int, ...], ...]:
    """Shifts along the first axis, each clear of the previous block."""
    out, A = [], 0
    for k, p in enumerate(primes):
        A = p ** q if k == 0 else max(A + primes[k - 1] ** q + 1, p ** q)
        out.append((A,) + (0,) * (d - 1))
    return tuple(out)


@functools.lru_cache(maxsize=64)
def _validate_cached(params: "ArithParams") -> None:
    params._validate()


@dataclass(frozen=True)
class ArithParams:
    d: int
    q: int
    primes: tuple[int, ...]
    shifts: tuple[tuple[int, ...], ...]
    c: object = 2
    C: object = 4
    shift_C: object = 3

    @property
    def m(self) -> int:
        return self.q * self.d

    @property
    def K(self) -> int:
        return len(self.primes)

    def block_radii(self, k: int) -> tuple[int, int]:
        """(min, max) sup-norm over the points of block k (1-based)."""
        norms = np.abs(block_array(self, k)).max(axis=1)
        return int(norms.min()), int(norms.max())

    def conditions(self) -> dict[str, bool]:
        ps, q = self.primes, self.q
        c, C, sC = as_fraction(self.c), as_fraction(self.C), as_fraction(self.shift_C)
        norms = [sup_norm(a) for a in self.shifts]
        radii = [self.block_radii(k) for k in range(1, self.K + 1)]
        return {
            "primes": all(is_prime(p) for p in ps),
            "exceeds_m": all(p > self.m for p in ps),
            "ratio": all(c * a <= b < C * a for a, b in zip(ps, ps[1:])),
            "shift_growth": all(norms[k - 1] + ps[k - 1] ** q < norms[k] for k in range(1, self.K)),
            "shift_bound": all(n <= sC * p ** q for n, p in zip(norms, ps)),
            "disjoint_shells": all(r1[1] < r2[0] for r1, r2 in zip(radii, radii[1:])),
        }

    def validate(self) -> "ArithParams":
        _validate_cached(self)
        return self

    def _validate(self) -> None:
        if len(self.shifts) != len(self.primes) or any(len(a) != self.d for a in self.shifts):
            raise ConditionError("shape", "one shift in Z^d per prime")
        for name, ok in self.conditions().items():
            if not ok:
                raise ConditionError(name, f"primes={self.primes} shifts={self.shifts}")


def make_params(d: int, q: int, count: int, *, c=2, C=4, p1: int | None = None,
                shift_C=3) -> ArithParams:
    sched = prime_schedule("ratio", count, c=c, C=C, p1=p1, m=q * d)
    return ArithParams(d, q, sched.primes, default_shifts(sched.primes, q, d), c, C, shift_C).validate()


def build_arith_set(params: ArithParams, k: int, check: bool = True) -> tuple[tuple[int, ...], ...]:
    """S_k = {a_k + x_{k,j}: 0 <= j < p_k}, ordered by j (k is 1-based)."""
    if not 1 <= k <= params.K:
        raise ValueError(f"block {k} outside schedule of length {params.K}")
    if check:
        params.validate()
    p, a = params.primes[k - 1], params.shifts[k - 1]
    return tuple(tuple(ai + xi for ai, xi in zip(a, x_point(j, p, params.q, params.d))) for j in range(p))


def arith_enumeration(params: ArithParams, kmax: int | None = None) -> list[tuple[int, ...]]:
    """Block by block, and by j inside a block."""
    params.validate()
    out: list[tuple[int, ...]] = []
    for k in range(1, (kmax or params.K) + 1):
        out.extend(build_arith_set(params, k, check=False))
    return out


def block_array(params: ArithParams, k: int) -> np.ndarray:
    """Points of S_k as an int64 array (p_k, d), ordered by j."""
    m, q, d = params.m, params.q, params.d
    p = params.primes[k - 1]
    j = np.arange(p, dtype=np.int64)
    pw = np.ones(p, dtype=np.int64)
    cols = []
    for _ in range(m):
        pw = (pw * j) % p
        cols.append(pw)
    out = np.empty((p, d), dtype=np.int64)
    for t in range(d):
        out[:, t] = sum(p ** i * cols[t * q + i] for i in range(q)) + params.shifts[k - 1][t]
    return out


def arith_points_array(params: ArithParams, kmax: int | None = None) -> np.ndarray:
    """Same enumeration as ``arith_enumeration`` as an int64 array (n, d)."""
    params.validate()
    chunks = [block_array(params, k) for k in range(1, (kmax or params.K) + 1)]
    return np.concatenate(chunks) if chunks else np.zeros((0, params.d), dtype=np.int64)


def first_coordinate_increasing(params: ArithParams, k: int) -> bool:
    xs = [pt[0] for pt in build_arith_set(params, k, check=False)]
    return all(a < b for a, b in zip(xs, xs[1:]))


# finite field functions

class FiniteFieldFn:
    """Complex function on prod_i Z_{p_i}, stored densely.

    The transform is f^(xi) = sum_n f(n) e(sum_i n_i xi_i / p_i), evaluated by
    direct summation, one axis at a time with a root table per modulus.
    """

    def __init__(self, moduli: Sequence[int], values: np.ndarray):
        self.moduli = tuple(int(p) for p in moduli)
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != self.moduli:
            raise ValueError(f"values shape {values.shape} does not match moduli {self.moduli}")
        self.values = values
        self._dft: np.ndarray | None = None

    @classmethod
    def from_points(cls, moduli: Sequence[int], weights: dict) -> "FiniteFieldFn":
        v = np.zeros(tuple(moduli), dtype=np.complex128)
        for pt, w in weights.items():
            v[tuple(int(x) % p for x, p in zip(pt, moduli))] += complex(w)
        return cls(moduli, v)

    @property
    def size(self) -> int:
        return int(self.values.size)

    def dft_at(self, xi: Sequence[int]) -> complex:
        nz = np.argwhere(self.values != 0)
        if not len(nz):
            return 0j
        ph = np.zeros(len(nz))
        for ax, (p, x) in enumerate(zip(self.moduli, xi)):
            ph += (nz[:, ax] * int(x) % p) / p
        return complex(np.sum(self.values[tuple(nz.T)] * np.exp(TWO_PI_I * ph)))

    def dft(self) -> np.ndarray:
        if self._dft is None:
            out = self.values
            for ax, p in enumerate(self.moduli):
                n = np.arange(p)
                W = np.exp(TWO_PI_I * (np.outer(n, n) % p) / p)
                out = np.moveaxis(np.tensordot(out, W, axes=([ax], [0])), -1, ax)
            self._dft = out
        return self._dft

    def parseval_gap(self) -> float:
        lhs = float(np.sum(np.abs(self.values) ** 2))
        rhs = float(np.sum(np.abs(self.dft()) ** 2)) / self.size
        return abs(lhs - rhs)


def mu_prime_points(p: int, m: int) -> dict:
    """mu' = (1/p) sum_j delta_(j, j^2, ..., j^m) as an exact point map."""
    return {curve_point(j, p, m): Fraction(1, p) for j in range(p)}


def mu_prime(p: int, m: int) -> FiniteFieldFn:
    return FiniteFieldFn((p,) * m, _dense(p, m, mu_prime_points(p, m)))


def nu_prime(p: int, m: int) -> FiniteFieldFn:
    return FiniteFieldFn((p,) * m, np.full((p,) * m, 1.0 / p ** m, dtype=np.complex128))


def _dense(p: int, m: int, pts: dict) -> np.ndarray:
    v = np.zeros((p,) * m, dtype=np.complex128)
    for pt, w in pts.items():
        v[pt] += float(w)
    return v


# character sum sweep

@dataclass(frozen=True)
class WeilReport:
    p: int
    m: int
    max_nonzero: float
    argmax: tuple[int, ...]
    bound: float
    violations: int
    at_zero: float
    frequencies: int

    @property
    def passed(self) -> bool:
        return self.violations == 0 and abs(self.at_zero - 1) < 1e-12


def _curve_spectrum_slices(p: int, m: int):
    """Yield (theta_m, |mu'^| over the axes (theta_2, ..., theta_(m-1), theta_1)).

    For fixed (theta_2, ..., theta_m) the sum over j is a length-p DFT of
    e((theta_2 j^2 + ... + theta_m j^m)/p) evaluated at theta_1, so each
    slice costs one batched FFT.
    """
    j = np.arange(p, dtype=np.int64)
    pw = {i: np.array([pow(int(x), i, p) for x in j], dtype=np.int64) for i in range(2, m + 1)}
    roots = np.exp(TWO_PI_I * np.arange(p) / p)
    mid = m - 2
    base = np.zeros((p,) * mid + (p,), dtype=np.int64)
    for t in range(mid):
        coef = np.arange(p, dtype=np.int64).reshape([p if i == t else 1 for i in range(mid)] + [1])
        base = base + coef * pw[t + 2]
    base %= p
    for tm in range(p):
        idx = (base + tm * pw[m]) % p
        # numpy's inverse transform carries e(+k j / p) / p, which is mu'^ itself
        yield tm, np.abs(np.fft.ifft(roots[idx], axis=-1))


def weil_check(p: int, m: int, tol: float = 1e-9) -> WeilReport:
    """Exhaustive sweep of |mu'^(theta)| over theta in Z_p^m minus 0."""
    if not is_prime(p):
        raise ConditionError("prime", f"{p} is not prime")
    if p <= m:
        raise ConditionError("p > m", f"p={p}, m={m}")
    if m < 2:
        raise ValueError("the curve needs degree m >= 2")
    bound = (m - 1) / math.sqrt(p)
    best, arg, viol, at0 = -1.0, (), 0, float("nan")
    for tm, amp in _curve_spectrum_slices(p, m):
        if tm == 0:
            zero_idx = (0,) * amp.ndim
            at0 = float(amp[zero_idx])
            amp = amp.copy()
            amp[zero_idx] = -1.0
        viol += int(np.count_nonzero(amp > bound + tol))
        i = int(np.argmax(amp))
        if amp.flat[i] > best:
            best = float(amp.flat[i])
            loc = np.unravel_index(i, amp.shape)
            # loc = (theta_2..theta_{m-1}, theta_1)
            arg = (int(loc[-1]),) + tuple(int(x) for x in loc[:-1]) + (tm,)
    return WeilReport(p, m, best, arg, bound, viol, at0, p ** m - 1)


def weil_bruteforce_max(p: int, m: int) -> float:
    """max over theta != 0 of |mu'^(theta)| by the direct transform of the dense mu'."""
    amp = np.abs(mu_prime(p, m).dft())
    amp[(0,) * m] = -1
    return float(amp.max())


def weil_sweep(m_values: Iterable[int] = (2, 3, 4), pmax: int = 101) -> list[WeilReport]:
    out = []
    for m in m_values:
        for p in primes_between(m + 2, pmax):
            out.append(weil_check(p, m))
    return out


# product construction

@dataclass(frozen=True)
class ProductWeilReport:
    primes: tuple[int, ...]
    m: int
    pattern_max: dict          # frozenset of nonzero factor blocks -> max |mu_r'^|
    pattern_bound: dict        # same keys -> prod over the pattern of (m-1)/sqrt(p_i)
    literal_bound: float       # (m-1)^r / prod sqrt(p_i)
    literal_violations: int    # nonzero frequencies above the literal bound
    exhaustive_max_error: float  # |direct - factored| over the whole dual group, when computed

    @property
    def patterns_pass(self) -> bool:
        return all(self.pattern_max[P] <= self.pattern_bound[P] + 1e-9 for P in self.pattern_max)


def _factor_spectrum(p: int, m: int) -> np.ndarray:
    """Complex mu'^ over Z_p^m (dense), via the batched sweep."""
    j = np.arange(p)
    out = np.empty((p,) * m, dtype=np.complex128)
    for idx in itertools.product(range(p), repeat=m - 1):
        ph = np.zeros(p, dtype=np.int64)
        for t, th in enumerate(idx):
            ph = (ph + th * np.array([pow(int(x), t + 2, p) for x in j])) % p
        vals = np.exp(TWO_PI_I * ph / p)
        out[(slice(None),) + idx] = np.fft.ifft(vals)
    return out


def product_mu_hat(primes: Sequence[int], m: int, theta: Sequence[int]) -> complex:
    """Direct sum over the product support for one frequency in prod Z_{p_i}^m."""
    tot = 0j
    ranges = [range(p) for p in primes]
    for js in itertools.product(*ranges):
        ph = Fraction(0)
        for i, (p, jj) in enumerate(zip(primes, js)):
            th = theta[i * m:(i + 1) * m]
            ph += Fraction(sum(t * pow(jj, k + 1, p) for k, t in enumerate(th)) % p, p)
        tot += e(float(ph))
    return tot / math.prod(primes)


def product_weil_check(primes: Sequence[int], m: int, exhaustive_limit: int = 20_000) -> ProductWeilReport:
    primes = tuple(primes)
    for p in primes:
        if not is_prime(p) or p <= m:
            raise ConditionError("p > m", f"p={p}, m={m}")
    r = len(primes)
    specs = [_factor_spectrum(p, m) for p in primes]
    mags = [np.abs(s) for s in specs]
    nz_max = []
    for mg in mags:
        t = mg.copy()
        t[(0,) * m] = -1
        nz_max.append(float(t.max()))
    pmax, pbound = {}, {}
    for size in range(1, r + 1):
        for P in itertools.combinations(range(r), size):
            key = frozenset(P)
            pmax[key] = math.prod(nz_max[i] for i in P)
            pbound[key] = math.prod((m - 1) / math.sqrt(primes[i]) for i in P)
    literal = (m - 1) ** r / math.prod(math.sqrt(p) for p in primes)
    # literal-bound violations, counted from the factored magnitudes
    total = np.ones((1,) * 0)
    for mg in mags:
        total = np.multiply.outer(total, mg)
    flat = total.reshape(-1).copy()
    flat[0] = -1
    viol = int(np.count_nonzero(flat > literal + 1e-9))
    err = float("nan")
    size = math.prod(p ** m for p in primes)
    if size <= exhaustive_limit:
        err = 0.0
        moduli = tuple(p for p in primes for _ in range(m))
        pts = {}
        for js in itertools.product(*[range(p) for p in primes]):
            key = tuple(x for p, jj in zip(primes, js) for x in curve_point(jj, p, m))
            pts[key] = pts.get(key, 0) + 1.0 / math.prod(primes)
        direct = FiniteFieldFn.from_points(moduli, pts).dft()
        fact = np.ones((1,) * 0, dtype=np.complex128)
        for s in specs:
            fact = np.multiply.outer(fact, s)
        err = float(np.max(np.abs(direct - fact)))
    return ProductWeilReport(primes, m, pmax, pbound, literal, viol, err)


def product_factorization_error(primes: Sequence[int], m: int, n_freq: int = 100, seed: int = 0) -> float:
    """max |direct - product of factor sums| over random frequencies."""
    from . import rng
    primes = tuple(primes)
    worst = 0.0
    for t in range(n_freq):
        theta = []
        for i, p in enumerate(primes):
            theta += [rng.hash64(seed, rng.TESTFN, t, i, k) % p for k in range(m)]
        direct = product_mu_hat(primes, m, theta)
        fact = 1 + 0j
        for i, p in enumerate(primes):
            fact *= product_mu_hat((p,), m, theta[i * m:(i + 1) * m])
        worst = max(worst, abs(direct - fact))
    return worst


def product_set(params_list: Sequence[ArithParams], k: int) -> list[tuple[int, ...]]:
    """prod_i S_{i,k} in Z^(r d)."""
    blocks = [build_arith_set(P, k) for P in params_list]
    return [tuple(x for pt in combo for x in pt) for combo in itertools.product(*blocks)]


# smoothing

def _check_odd_prime(p: int) -> None:
    if p % 2 == 0 or p < 3:
        raise ConditionError("odd p", f"p={p}")


def varphi(n: int, p: int) -> Fraction:
    """Trapezoid on [-p, 2p-1]: 1 on [0, p-1], 0 outside ((-p-1)/2, 3(p-1)/2)."""
    lo, hi = (-p - 1) // 2, 3 * (p - 1) // 2
    if 0 <= n <= p - 1:
        return Fraction(1)
    if n <= lo or n >= hi:
        return Fraction(0)
    if n < 0:
        return Fraction(n - lo, -lo)
    return Fraction(hi - n, hi - (p - 1))


def varphi_table(p: int) -> list[Fraction]:
    """varphi on j = -p .. 2p-1 (index j + p)."""
    _check_odd_prime(p)
    return [varphi(j, p) for j in range(-p, 2 * p)]


def varphi_sum(p: int) -> Fraction:
    return sum(varphi_table(p), Fraction(0))


@dataclass(frozen=True)
class PsiReport:
    p: int
    eta: float
    l1: float
    ratio: float               # l1 / p
    at_xi0: float
    phi_sum: Fraction
    d2_l1: float               # ||Delta^2 Phi||_1
    inv_sum: float             # sum_{xi != 0} |e(xi/3p) - 1|^-2
    identity_residual: float   # max_xi |(-|e(xi/3p)-1|^2) psi^(xi) - sum Delta^2 Phi e(j xi/3p)|
    chain_ok: bool             # |psi^(xi)| <= ||Delta^2 Phi||_1 / |e(xi/3p)-1|^2 for xi != 0


def smoothing_psi_l1(p: int, eta: float | None = None, C: float = 1.0) -> PsiReport:
    """l^1 norm on Z_{3p} of the transform of Phi(j) = varphi(j) e(j eta)."""
    _check_odd_prime(p)
    if eta is None:
        eta = 1 / (2 * p)
    if abs(eta) > C / p:
        raise ValueError(f"|eta| must be <= {C}/p")
    N = 3 * p
    js = np.arange(-p, 2 * p)
    phi = np.array([float(v) for v in varphi_table(p)])
    Phi = phi * np.exp(TWO_PI_I * js * eta)
    xi = np.arange(N)
    W = np.exp(TWO_PI_I * (np.outer(js, xi) % N) / N)
    psi_hat = Phi @ W
    # centered second difference, periodic on Z_{3p}; Phi vanishes near both ends
    d2 = np.roll(Phi, -1) - 2 * Phi + np.roll(Phi, 1)
    d2_hat = d2 @ W
    chord2 = np.abs(np.exp(TWO_PI_I * xi / N) - 1) ** 2
    resid = float(np.max(np.abs(-chord2 * psi_hat - d2_hat)))
    d2_l1 = float(np.sum(np.abs(d2)))
    nz = xi != 0
    inv_sum = float(np.sum(1.0 / chord2[nz]))
    chain = bool(np.all(np.abs(psi_hat[nz]) <= d2_l1 / chord2[nz] + 1e-9))
    l1 = float(np.sum(np.abs(psi_hat)))
    return PsiReport(p, float(eta), l1, l1 / p, float(abs(psi_hat[0])), varphi_sum(p),
                     d2_l1, inv_sum, resid, chain)


# transfer operators

def gamma1(f: dict, p: int, m: int) -> dict:
    """Smoothly cut-off lift of f on Z_p^m to Z^m, supported in [-p, 2p-1]^m.

    Each residue r has the three lifts r - p, r, r + p per coordinate in the
    window, so the output is assembled from the support of f directly.
    """
    phi = varphi_table(p)
    out: dict = {}
    for r, v in f.items():
        if not v:
            continue
        r = tuple(int(x) % p for x in r)
        for shifts in itertools.product((-1, 0, 1), repeat=m):
            jv = tuple(ri + p * s for ri, s in zip(r, shifts))
            w = math.prod((phi[x + p] for x in jv), start=Fraction(1))
            if w:
                out[jv] = out.get(jv, 0) + w * v
    return out


def gamma2(g: dict, p: int, q: int, d: int) -> SparseMeasure:
    acc: dict = {}
    for jv, v in g.items():
        n = freiman(jv, p, q, d)
        acc[n] = acc.get(n, 0) + v
    return SparseMeasure(d, acc, tag="gamma2")


def freiman_bijective(p: int, q: int, d: int) -> bool:
    """F maps [0, p-1]^m onto [0, p^q - 1]^d injectively (exhaustive)."""
    m = q * d
    grids = np.indices((p,) * m).reshape(m, -1)
    weights = np.array([p ** i for i in range(q)], dtype=np.int64)
    img = np.stack([weights @ grids[t * q:(t + 1) * q] for t in range(d)])
    # flatten the d-dimensional image to one integer and count distinct values
    P = p ** q
    code = np.zeros(img.shape[1], dtype=np.int64)
    for t in range(d):
        code = code * P + img[t]
    in_box = bool(np.all((img >= 0) & (img < P)))
    return in_box and len(np.unique(code)) == p ** m == P ** d


def nu3_fiber(p: int, q: int) -> dict[int, Fraction]:
    """One output coordinate of Gamma2 Gamma1 nu'.

    nu' is uniform, so Gamma1 nu' = p^-m prod varphi and the image under F
    factorizes over the d output coordinates; this returns the factor
    g(n) = p^-q sum_{F_1(j) = n} prod_i varphi(j_i).
    """
    phi = varphi_table(p)
    # integer weights: varphi * L, L clears both ramp denominators
    L = math.lcm(*(v.denominator for v in phi))
    w = {j: int(phi[j + p] * L) for j in range(-p, 2 * p) if phi[j + p]}
    acc: dict[int, int] = {}
    for js in itertools.product(w, repeat=q):
        n = sum(p ** i * x for i, x in enumerate(js))
        acc[n] = acc.get(n, 0) + math.prod(w[x] for x in js)
    den = L ** q * p ** q
    return {n: Fraction(v, den) for n, v in acc.items() if v}


@dataclass(frozen=True)
class TransferReport:
    p: int
    q: int
    d: int
    fourier_max_error: float
    majorization: bool
    nu3_l1: Fraction
    nu3_l1_closed: Fraction
    support_in_box: bool       # inside [-q p^q, q p^q]^d
    support_in_window: bool    # inside F([-p, 2p-1]^m), the exact image of the lifting window
    mu3_support: int


def _ft_point_map(pts: dict, theta: np.ndarray) -> complex:
    keys = np.array(list(pts.keys()), dtype=np.float64)
    vals = np.array([float(v) for v in pts.values()])
    return complex(np.sum(vals * np.exp(TWO_PI_I * (keys @ theta))))


def gamma_transfer(p: int, q: int, d: int, n_freq: int = 100, seed: int = 0,
                   f: dict | None = None) -> TransferReport:
    """Checks on Gamma = Gamma2 Gamma1 applied to mu' (or to a given f on Z_p^m)."""
    from . import rng
    _check_odd_prime(p)
    m = q * d
    if p <= m:
        raise ConditionError("p > m", f"p={p}, m={m}")
    f = mu_prime_points(p, m) if f is None else f
    g1 = gamma1(f, p, m)
    mu3 = gamma2(g1, p, q, d)
    worst = 0.0
    for t in range(n_freq):
        theta = np.array([rng.uniform(seed, rng.TESTFN, t, i) for i in range(d)])
        lhs = complex(sum(float(v) * e(float(np.dot(n, theta))) for n, v in mu3.items()))
        lifted = np.array([theta[tt] * p ** i for tt in range(d) for i in range(q)])
        rhs = _ft_point_map(g1, lifted)
        worst = max(worst, abs(lhs - rhs))
    # majorization on the unshifted block S-bar, only meaningful for mu'
    bar = {x_point(j, p, q, d) for j in range(p)}
    thr = Fraction(1, p ** m)
    major = all(mu3[x] >= thr for x in bar)
    fib = nu3_fiber(p, q)
    l1 = sum(abs(v) for v in fib.values()) ** d
    closed = (varphi_sum(p) / p) ** m
    box = q * p ** q
    in_box = all(sup_norm(n) <= box for n in mu3) and all(abs(n) <= box for n in fib)
    geo = (p ** q - 1) // (p - 1)
    lo, hi = -p * geo, (2 * p - 1) * geo
    in_win = all(lo <= c <= hi for n in mu3 for c in n) and all(lo <= n <= hi for n in fib)
    return TransferReport(p, q, d, worst, major, l1, closed, in_box, in_win, len(mu3))


def nu3_dense(p: int, q: int, d: int) -> SparseMeasure:
    """Gamma2 Gamma1 nu' assembled point by point (small p only)."""
    m = q * d
    if (3 * p) ** m > 2_000_000:
        raise BudgetExceeded("nu3_dense", (3 * p) ** m, 2_000_000)
    f = {r: Fraction(1, p ** m) for r in itertools.product(range(p), repeat=m)}
    return gamma2(gamma1(f, p, m), p, q, d)


# oscillation machinery

def _dirichlet(P: int, t: np.ndarray, G: int, roots: np.ndarray) -> np.ndarray:
    """sum_{x<P} e(x t / G) for integer t, exact closed form."""
    t = np.asarray(t) % G
    out = np.empty(t.shape, dtype=np.complex128)
    zero = t == 0
    out[zero] = P
    tz = t[~zero]
    out[~zero] = (roots[(P * tz) % G] - 1) / (roots[tz] - 1)
    return out


@dataclass(frozen=True)
class OscProfile:
    Ns: tuple[int, ...]
    sup_diff: tuple[float, ...]         # grid sup of |mu_N^ - nu_N^| (a lower bound of the true sup)
    grid: int
    block_ends: tuple[int, ...]
    lacunary: tuple[int, ...]
    fmult_sum: float                    # grid sup over alpha of sum_t |nu_t^ - V_t^|
    fmult_low: float                    # part of that sum from k(t) < K(alpha)
    fmult_high: float                   # part from k(t) > K(alpha)
    telescoping: tuple[tuple[float, float], ...]   # (sum_n ||V f - V f||^2, ||f||^2) per sample f
    total_mass: tuple[tuple[float, float], ...]    # (mu_N^(0), nu_N^(0))


def _block_index(params: ArithParams, N: int) -> tuple[int, int]:
    """(k(N), j(N)): the N-th point sits in block k at position j (1-based count)."""
    tot = 0
    for k, p in enumerate(params.primes, start=1):
        if N <= tot + p:
            return k, N - tot
        tot += p
    raise ConditionError("coverage", f"N={N} exceeds the {params.K} blocks")


def _nu_hat(params: ArithParams, N: int, T: np.ndarray, G: int, roots: np.ndarray) -> np.ndarray:
    kN, jN = _block_index(params, N)
    q, d, m = params.q, params.d, params.m
    out = np.zeros(T.shape[0], dtype=np.complex128)
    for k in range(1, kN + 1):
        p = params.primes[k - 1]
        P = p ** q
        w = Fraction(jN, p ** m) if k == kN else Fraction(1, p ** (m - 1))
        a = np.array(params.shifts[k - 1], dtype=np.int64)
        piece = roots[(T @ a) % G]
        for t in range(d):
            piece = piece * _dirichlet(P, T[:, t], G, roots)
        out += float(w) * piece
    return out / N


def _mu_hat(points: np.ndarray, T: np.ndarray, G: int, roots: np.ndarray, chunk: int = 512) -> np.ndarray:
    out = np.zeros(T.shape[0], dtype=np.complex128)
    for s in range(0, len(points), chunk):
        ph = (T @ points[s:s + chunk].T) % G
        out += roots[ph].sum(axis=1)
    return out / len(points)


def block_ends(params: ArithParams) -> list[int]:
    return list(itertools.accumulate(params.primes))


def telescoping_sums(radii: Sequence[float], d: int, L: int, samples: int, seed: int = 0) -> list[tuple[float, float]]:
    """sum_n ||V_{t_(n-1)} f - V_{t_n} f||^2 for random f on Z_L^d.

    V_t keeps the frequencies xi/L (wrapped to [-1/2, 1/2)) of sup-norm at most
    the given radius.  Radii must be nonincreasing, so consecutive differences
    have disjoint frequency supports.
    """
    from . import rng
    if any(b > a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be nonincreasing")
    freqs = np.fft.fftfreq(L)
    grids = np.meshgrid(*([freqs] * d), indexing="ij")
    amax = np.max(np.abs(np.stack(grids)), axis=0)
    out = []
    for s in range(samples):
        keys = np.indices((L,) * d).reshape(d, -1).T
        f = rng.uniform_array(seed, (rng.TESTFN, s), keys).reshape((L,) * d) - 0.5
        f = f / np.sqrt(np.sum(f * f))
        F = np.fft.fftn(f)
        V = [np.fft.ifftn(F * (amax <= r)) for r in radii]
        tot = sum(float(np.sum(np.abs(V[n - 1] - V[n]) ** 2)) for n in range(1, len(V)))
        out.append((tot, float(np.sum(f * f))))
    return out


def osc_profile(params: ArithParams, Ns: Sequence[int] | None = None, grid: int = 64,
                lacunary: Sequence[int] | None = None, samples: int = 20, L: int = 128,
                seed: int = 0) -> OscProfile:
    """Fourier comparison of mu_N (the block average) with nu_N (block cubes).

    nu_N places weight p_k^(1-m) on each complete block cube a_k + [0, p_k^q-1]^d
    and j(N) p^-m on the current one; mu_N is the uniform average of the first
    N enumerated points.  Frequencies are the grid (Z/grid)^d.
    """
    params.validate()
    ends = block_ends(params)
    Ns = tuple(ends) if Ns is None else tuple(Ns)
    if len([n for n in Ns if n in ends]) < 2:
        raise ConditionError("coverage", "need at least two complete blocks among N")
    d, G = params.d, grid
    if G ** d > 1 << 20:
        raise BudgetExceeded("osc grid", G ** d, 1 << 20)
    roots = np.exp(TWO_PI_I * np.arange(G) / G)
    T = np.indices((G,) * d).reshape(d, -1).T.astype(np.int64)
    pts = np.array(arith_enumeration(params), dtype=np.int64)
    sups, masses = [], []
    for N in Ns:
        mh = _mu_hat(pts[:N], T, G, roots)
        nh = _nu_hat(params, N, T, G, roots)
        sups.append(float(np.max(np.abs(mh - nh))))
        masses.append((float(mh[0].real), float(nh[0].real)))
    # sharp-cutoff multipliers along a lacunary set of times
    lac = tuple(ends) if lacunary is None else tuple(lacunary)
    alpha = np.where(T > G // 2, T - G, T) / G
    amax = np.max(np.abs(alpha), axis=1)
    per_t = []
    for t in lac:
        kt, _ = _block_index(params, t)
        V = (amax <= 1 / params.primes[kt - 1]).astype(float)
        per_t.append((kt, np.abs(_nu_hat(params, t, T, G, roots) - V)))
    total = sum(v for _, v in per_t)
    best = int(np.argmax(total))
    # K(alpha): the block whose scale 1/p_K is closest to |alpha|
    a = amax[best]
    K = 0 if a == 0 else int(np.argmin([abs(math.log(a * p)) for p in params.primes])) + 1
    low = float(sum(v[best] for k, v in per_t if k < K))
    high = float(sum(v[best] for k, v in per_t if k > K))
    radii = [1 / params.primes[_block_index(params, t)[0] - 1] for t in lac]
    tel = telescoping_sums(radii, d, L, samples, seed)
    return OscProfile(Ns, tuple(sups), G, tuple(ends), lac, float(total[best]), low, high,
                      tuple(tel), tuple(masses))
