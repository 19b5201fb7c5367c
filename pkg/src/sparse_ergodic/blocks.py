"""Block constructions on Z and Z^d: plaid block plans, intermediate sets,
Tempelman/Folner diagnostics, the square-block divergence witness and the
diagonal (corners-first) variant."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import BudgetExceeded, ConditionError

Interval = tuple[int, int]  # inclusive


# finite unions of integer intervals

def merge_intervals(ivs: Iterable[Interval]) -> tuple[Interval, ...]:
    out: list[list[int]] = []
    for lo, hi in sorted(iv for iv in ivs if iv[0] <= iv[1]):
        if out and lo <= out[-1][1] + 1:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((a, b) for a, b in out)


@dataclass(frozen=True)
class IntervalSet:
    """A finite subset of Z stored as disjoint, non-adjacent closed intervals."""
    intervals: tuple[Interval, ...]

    @classmethod
    def of(cls, ivs: Iterable[Interval]) -> "IntervalSet":
        return cls(merge_intervals(ivs))

    @classmethod
    def from_points(cls, pts: Iterable[int]) -> "IntervalSet":
        return cls.of((p, p) for p in pts)

    def __len__(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    def __contains__(self, x: int) -> bool:
        return any(lo <= x <= hi for lo, hi in self.intervals)

    def to_set(self, limit: int = 10_000_000) -> set[int]:
        if len(self) > limit:
            raise BudgetExceeded("IntervalSet.to_set", len(self), limit)
        return {x for lo, hi in self.intervals for x in range(lo, hi + 1)}

    def issubset(self, other: "IntervalSet") -> bool:
        return all(any(a <= lo and hi <= b for a, b in other.intervals) for lo, hi in self.intervals)

    def difference_set(self) -> "IntervalSet":
        """F - F."""
        return IntervalSet.of((l1 - h2, h1 - l2) for l1, h1 in self.intervals for l2, h2 in self.intervals)

    def shift(self, t: int) -> "IntervalSet":
        return IntervalSet(tuple((lo + t, hi + t) for lo, hi in self.intervals))

    def symmetric_difference_size(self, other: "IntervalSet") -> int:
        inter = 0
        for a, b in self.intervals:
            for c, e in other.intervals:
                lo, hi = max(a, c), min(b, e)
                if lo <= hi:
                    inter += hi - lo + 1
        return len(self) + len(other) - 2 * inter


# block plans

@dataclass(frozen=True)
class BlockPlan:
    """Offsets u_k and lengths a_k of the blocks [u_k+1, u_k+a_k] (k = 1, 2, ...)."""
    u: tuple[int, ...]
    a: tuple[int, ...]
    C: float = 1.0
    growth_threshold: float = 0.1

    def __post_init__(self):
        if len(self.u) != len(self.a) or not self.u:
            raise ValueError("u and a must be nonempty and of equal length")

    @property
    def K(self) -> int:
        return len(self.a)

    def growth_ratios(self) -> list[Fraction]:
        """(sum_{i<k} a_i)/a_k for k = 2..K."""
        return [Fraction(sum(self.a[:k]), self.a[k]) for k in range(1, self.K)]

    def conditions(self) -> dict[str, bool]:
        u, a = self.u, self.a
        g = self.growth_ratios()
        return {
            "positive": all(x >= 1 for x in a),
            "wellspaced": all(u[k + 1] >= u[k] + a[k] for k in range(self.K - 1)),
            "growingblocks": all(g[i + 1] < g[i] for i in range(len(g) - 1))
            and (not g or g[-1] < self.growth_threshold),
            "regularity": all(a[k] >= self.C * u[k - 1] for k in range(1, self.K)),
        }

    def validate(self) -> "BlockPlan":
        for name, ok in self.conditions().items():
            if not ok:
                raise ConditionError(name, f"plan u={self.u}, a={self.a}")
        return self

    def block(self, k: int) -> Interval:
        return (self.u[k - 1] + 1, self.u[k - 1] + self.a[k - 1])

    def union(self, k: int) -> IntervalSet:
        """A(k), the union of the first k blocks."""
        return IntervalSet.of(self.block(i) for i in range(1, k + 1))


def generate_plan(K: int, rho: float = 1.0, u1: int = 1, a1: int = 2, C: float | None = None,
                  growth_threshold: float = 0.1) -> BlockPlan:
    """Default generator: gap g_k = a_{k-1}, u_k = u_{k-1} + a_{k-1} + g_k and
    a_k = ceil(rho * k * u_k).

    The factor k makes sum_{i<k} a_i / a_k decay like 1/(2 rho k); without it
    the ratio stays near 1 and the growth condition fails.
    """
    if K < 1:
        raise ValueError("K >= 1")
    u, a = [u1], [a1]
    for k in range(2, K + 1):
        uk = u[-1] + 2 * a[-1]
        u.append(uk)
        a.append(math.ceil(Fraction(str(rho)) * k * uk))
    return BlockPlan(tuple(u), tuple(a), float(rho) if C is None else C, growth_threshold)


def intermediate_set(plan: BlockPlan, k: int, r: int) -> IntervalSet:
    """A(k,r) = A(k-1) u [u_k+1, u_k+r]."""
    if not 1 <= k <= plan.K:
        raise ValueError(f"plan has {plan.K} blocks, asked for k={k}")
    if not 1 <= r <= plan.a[k - 1]:
        raise ValueError(f"r={r} outside [1, a_k={plan.a[k - 1]}]")
    uk = plan.u[k - 1]
    return IntervalSet.of([plan.block(i) for i in range(1, k)] + [(uk + 1, uk + r)])


# Tempelman / Folner

@dataclass(frozen=True)
class TempelmanReport:
    size: int
    difference_size: int
    ratio: Fraction
    folner_defects: dict


def _as_points(F) -> set:
    if isinstance(F, IntervalSet):
        return F.to_set()
    pts = set()
    for p in F:
        pts.add(p if isinstance(p, tuple) else (p,))
    return pts


def tempelman_folner_report(F, generators: Sequence = ()) -> TempelmanReport:
    """#(F-F)/#F and #(gF symdiff F)/#F for each generator g, exactly."""
    if isinstance(F, IntervalSet):
        if len(F) == 0:
            raise ValueError("empty set")
        diff = len(F.difference_set())
        defects = {}
        for g in generators:
            gg = g[0] if isinstance(g, tuple) else g
            defects[g] = Fraction(F.symmetric_difference_size(F.shift(gg)), len(F))
        return TempelmanReport(len(F), diff, Fraction(diff, len(F)), defects)
    pts = _as_points(F)
    if not pts:
        raise ValueError("empty set")
    diff = {tuple(x - y for x, y in zip(p, q)) for p in pts for q in pts}
    defects = {}
    for g in generators:
        gt = g if isinstance(g, tuple) else (g,)
        moved = {tuple(x + y for x, y in zip(gt, p)) for p in pts}
        defects[g] = Fraction(len(moved ^ pts), len(pts))
    return TempelmanReport(len(pts), len(diff), Fraction(len(diff), len(pts)), defects)


def difference_count(F) -> int:
    pts = _as_points(F)
    return len({tuple(x - y for x, y in zip(p, q)) for p in pts for q in pts})


def product_set(X: Iterable, Y: Iterable) -> set[tuple]:
    Xp, Yp = _as_points(X), _as_points(Y)
    return {x + y for x in Xp for y in Yp}


def r_grid(a_k: int, extra: Iterable[int] = ()) -> list[int]:
    """Sample of r in [1, a_k]: small values, dyadic fractions of a_k, and extras."""
    rs = {1, 2, 3, a_k}
    rs |= {max(1, a_k >> t) for t in range(a_k.bit_length() + 1)}
    rs |= {r for r in extra if 1 <= r <= a_k}
    return sorted(r for r in rs if 1 <= r <= a_k)


@dataclass(frozen=True)
class TempelmanGridRow:
    k: int
    r: int
    size: int
    ratio: Fraction
    defect: Fraction
    running_max: Fraction


def plan_constant(plan: BlockPlan) -> Fraction:
    """The constant M4 + M5 from the block-by-block difference-set estimate.

    M1 is the largest Tempelman ratio of the complete unions A(k), M2 bounds
    #(A(k-1)-A(k-1))/a_{k-1}, M3 bounds (u_{k-2}+a_{k-2})/a_{k-1}; then
    #(A(k,r)-A(k,r)) <= M2 a_{k-1} + 2((M3+1) a_{k-1} + 2r + 1) + 2r - 1
    gives M4 = M2 + 2 M3 + 4 and M5 = 6 (using a_{k-1} >= 1, r >= 1).
    """
    u, a = plan.u, plan.a
    M2 = max((Fraction(len(plan.union(k - 1).difference_set()), a[k - 2]) for k in range(2, plan.K + 1)),
             default=Fraction(1))
    M3 = max((Fraction(u[k - 3] + a[k - 3], a[k - 2]) for k in range(3, plan.K + 1)), default=Fraction(0))
    return M2 + 2 * M3 + 4 + 6


def tempelman_grid(plan: BlockPlan, kmax: int | None = None,
                   rs: Callable[[int, int], list[int]] | None = None) -> list[TempelmanGridRow]:
    """Ratios of A(k,r) over a (k, r) grid, in lexicographic order, with running max."""
    kmax = plan.K if kmax is None else kmax
    rows: list[TempelmanGridRow] = []
    best = Fraction(0)
    for k in range(1, kmax + 1):
        ak = plan.a[k - 1]
        grid = rs(k, ak) if rs else r_grid(ak, plan.a[: k - 1] + tuple(x + 1 for x in plan.a[: k - 1]))
        for r in grid:
            A = intermediate_set(plan, k, r)
            rep = tempelman_folner_report(A, generators=(1,))
            best = max(best, rep.ratio)
            rows.append(TempelmanGridRow(k, r, rep.size, rep.ratio, rep.folner_defects[1], best))
    return rows


def running_max_by_k(rows: list[TempelmanGridRow]) -> list[Fraction]:
    out: dict[int, Fraction] = {}
    for row in rows:
        out[row.k] = row.running_max
    return [out[k] for k in sorted(out)]


# the unrestricted rectangle count

def unrestricted_divergence_count(s_enum: Sequence[int] | None, t_enum: Sequence[int] | None, n: int) -> dict:
    """#E_n for E_n = {(s_r, t_s) : r s <= n}.

    The enumerations only need to be strictly increasing (so distinct index
    pairs give distinct points); the count is then sum_{r<=n} floor(n/r).
    ``None`` stands for the identity enumeration.
    """
    if n < 1:
        raise ValueError("n >= 1")
    for seq in (s_enum, t_enum):
        if seq is not None:
            if len(seq) < n:
                raise ValueError("enumeration shorter than n")
            if any(seq[i + 1] <= seq[i] for i in range(n - 1)):
                raise ValueError("enumeration is not strictly increasing")
    r0 = math.isqrt(n)
    count = 2 * sum(n // r for r in range(1, r0 + 1)) - r0 * r0
    return {"n": n, "count": count, "ratio": count / (n * math.log(n)) if n > 1 else float("nan")}


def divergence_pairs_bruteforce(n: int) -> set[tuple[int, int]]:
    return {(r, s) for r in range(1, n + 1) for s in range(1, n // r + 1)}


# square blocks along an axis, and the witness

@dataclass(frozen=True)
class SquarePlan:
    """Blocks (a_k, 0) + [0, s_k)^2 in Z^2.

    The diameter of a block is taken as l_k = sqrt(2) s_k, so the quantities
    in the witness formulas are exact in terms of the integer sides s_k.
    """
    s: tuple[int, ...]
    a: tuple[int, ...]
    C: int = 1

    def conditions(self) -> dict[str, bool]:
        s, a, K = self.s, self.a, len(self.s)
        csq = self.C * self.C
        return {
            # (1) squares; (4) shifts on the first axis: true by representation
            "squares": all(x >= 1 for x in s),
            # (2) l_k^2 <= |a_k|
            "diameter_vs_shift": all(2 * s[k] ** 2 <= a[k] for k in range(K)),
            # (3) (sqrt2/2) l_{k+1} > (sum_{i<=k} l_i^2)^2
            "lacunary_diameters": all(s[k + 1] > (2 * sum(x * x for x in s[: k + 1])) ** 2 for k in range(K - 1)),
            # |a_{k+1}| > |a_k| + l_k
            "spacing": all(a[k + 1] > a[k] and (a[k + 1] - a[k]) ** 2 > 2 * s[k] ** 2 for k in range(K - 1)),
            # l_k >= C |a_{k-1}|
            "regularity": all(2 * s[k] ** 2 >= csq * a[k - 1] ** 2 for k in range(1, K)),
        }

    def validate(self) -> "SquarePlan":
        for name, ok in self.conditions().items():
            if not ok:
                raise ConditionError(name, f"s={self.s}")
        return self


def generate_square_plan(kmax: int, s1: int = 1) -> SquarePlan:
    s = [s1]
    for _ in range(kmax - 1):
        s.append((2 * sum(x * x for x in s)) ** 2 + 1)
    a = []
    for k, sk in enumerate(s):
        lo = 2 * sk * sk
        if k:
            lo = max(lo, a[-1] + 2 * s[k - 1] + 1)
        a.append(lo)
    return SquarePlan(tuple(s), tuple(a))


def _count_block_in_disc(ax: int, side: int, R2: int, max_columns: int) -> tuple[int, int]:
    """Points of (ax,0)+[0,side)^2 in the closed Euclidean disc of squared radius R2,
    and how many of them lie on the block's left face x = ax."""
    if (ax + side - 1) ** 2 + (side - 1) ** 2 <= R2:
        return side * side, side
    total = face = 0
    x = 0
    while x < side and (ax + x) ** 2 <= R2:
        if x >= max_columns:
            raise BudgetExceeded("disc count columns", x, max_columns)
        rem = R2 - (ax + x) ** 2
        cnt = min(side, math.isqrt(rem) + 1)
        total += cnt
        if x == 0:
            face = cnt
        x += 1
    return total, face


@dataclass(frozen=True)
class DivergenceWitnessReport:
    k: tuple[int, ...]
    left_face_average: tuple[Fraction, ...]
    left_face_bound: tuple[float, ...]
    block_end_average: tuple[Fraction, ...]
    block_end_formula: tuple[float, ...]
    norm: str = "euclidean"
    params: dict = field(default_factory=dict)


def _witness_average(plan: SquarePlan, R2: int, max_columns: int) -> Fraction:
    count = mass = 0
    for ax, side in zip(plan.a, plan.s):
        if ax * ax > R2:
            break
        c, face = _count_block_in_disc(ax, side, R2, max_columns)
        count += c
        mass += face  # f = 1 exactly on the left faces x = a_k, 0 <= y < s_k inside S
    return Fraction(mass, count) if count else Fraction(0)


def divergence_witness(plan: SquarePlan, kmax: int | None = None, max_columns: int = 10_000) -> DivergenceWitnessReport:
    plan.validate()
    kmax = len(plan.s) if kmax is None else kmax
    if kmax > len(plan.s):
        raise ValueError("plan too short")
    ks, lf, lfb, be, bef = [], [], [], [], []
    for k in range(1, kmax + 1):
        s, a = plan.s[:k], plan.a[:k]
        # r_k^2 = |a_k|^2 + l_k^2 / 2
        lf.append(_witness_average(plan, a[-1] ** 2 + s[-1] ** 2, max_columns))
        prev = sum(x * x for x in s[:-1])
        lfb.append(s[-1] / (prev + s[-1]))  # (sqrt2/2 l_k)/((1/2) sum l_i^2 + sqrt2/2 l_k)
        end_R2 = (a[-1] + s[-1] - 1) ** 2 + (s[-1] - 1) ** 2
        be.append(_witness_average(plan, end_R2, max_columns))
        ell = [math.sqrt(2) * x for x in s]
        bef.append(math.sqrt(2) * math.fsum(ell) / math.fsum(x * x for x in ell))
        ks.append(k)
    return DivergenceWitnessReport(tuple(ks), tuple(lf), tuple(lfb), tuple(be), tuple(bef),
                                   params={"s": plan.s, "a": plan.a})


# diagonal shifts

def _box_union_count(boxes: list[tuple[tuple[int, int], ...]]) -> int:
    """Lattice points in a union of boxes given as per-axis inclusive ranges."""
    boxes = [b for b in boxes if all(lo <= hi for lo, hi in b)]
    if not boxes:
        return 0
    d = len(boxes[0])
    cuts = [sorted({v for b in boxes for v in (b[i][0], b[i][1] + 1)}) for i in range(d)]
    total = 0
    for cell in itertools.product(*(range(len(c) - 1) for c in cuts)):
        lo = [cuts[i][cell[i]] for i in range(d)]
        hi = [cuts[i][cell[i] + 1] - 1 for i in range(d)]
        if any(all(b[i][0] <= lo[i] and hi[i] <= b[i][1] for i in range(d)) for b in boxes):
            total += math.prod(h - l + 1 for l, h in zip(lo, hi))
    return total


@dataclass(frozen=True)
class PrismPlan:
    """Cubes (a_k,...,a_k) + [0, s_k)^d."""
    d: int
    s: tuple[int, ...]
    a: tuple[int, ...]

    def boxes(self) -> list[tuple[tuple[int, int], ...]]:
        return [tuple((a, a + s - 1) for _ in range(self.d)) for a, s in zip(self.a, self.s)]

    def conditions(self, C: float = 1.0) -> dict[str, bool]:
        s, a = self.s, self.a
        return {
            "spacing": all(a[k + 1] > a[k] + s[k] for k in range(len(s) - 1)),
            "regularity": all(s[k] >= C * a[k - 1] for k in range(1, len(s))),
        }


def generate_prism_plan(d: int, kmax: int, s1: int = 2, growth: int = 4) -> PrismPlan:
    s, a = [s1], [1]
    for _ in range(kmax - 1):
        a.append(a[-1] + s[-1] + 1)
        s.append(growth * (a[-1] + s[-1]))
    return PrismPlan(d, tuple(s), tuple(a))


def corners_first_check(plan: PrismPlan, radii: Iterable[int]) -> list[dict]:
    """Tempelman ratios of S cap B_r (sup-norm balls) for the given radii."""
    rows = []
    for r in radii:
        parts = []
        for box in plan.boxes():
            clipped = tuple((max(lo, -r), min(hi, r)) for lo, hi in box)
            if all(lo <= hi for lo, hi in clipped):
                parts.append(clipped)
        if not parts:
            rows.append({"r": r, "size": 0, "diff": 0, "ratio": None, "skipped": True})
            continue
        size = _box_union_count(parts)
        diffs = [tuple((p[i][0] - q[i][1], p[i][1] - q[i][0]) for i in range(plan.d)) for p in parts for q in parts]
        dsize = _box_union_count(diffs)
        rows.append({"r": r, "size": size, "diff": dsize, "ratio": Fraction(dsize, size), "skipped": False})
    return rows
