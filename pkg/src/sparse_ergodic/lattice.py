"""Sparse measures on Z^d, dyadic cubes and the Calderon-Zygmund decomposition."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping

from .errors import BudgetExceeded, PrecisionBudgetError

Point = tuple[int, ...]

DEFAULT_MAX_PAIRS = 50_000_000
DEFAULT_MAX_BITS = 1 << 14


def sup_norm(pt: Iterable[int]) -> int:
    return max((abs(c) for c in pt), default=0)


def _coerce(v):
    if isinstance(v, bool):
        raise TypeError("boolean measure value")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return v
    # numpy scalars and the like
    if hasattr(v, "is_integer") and float(v).is_integer() and not isinstance(v, complex):
        return Fraction(int(v))
    return float(v)


class SparseMeasure:
    """Finitely supported signed function on Z^d.

    Values are Fractions (``exact``) or, when any input value is a float, all
    floats.  Zero entries are never stored.  Instances are treated as
    immutable.
    """

    __slots__ = ("d", "_e", "exact", "tag")

    def __init__(self, d: int, entries: Mapping[Point, object] | Iterable = (), tag: str = ""):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        items = entries.items() if isinstance(entries, Mapping) else entries
        e: dict[Point, object] = {}
        any_float = False
        for pt, v in items:
            pt = tuple(int(c) for c in pt)
            if len(pt) != d:
                raise ValueError(f"point {pt} is not in Z^{d}")
            v = _coerce(v)
            any_float |= isinstance(v, float)
            if v:
                e[pt] = e.get(pt, 0) + v
        if any_float:
            e = {p: float(v) for p, v in e.items()}
        e = {p: v for p, v in e.items() if v}
        self.d = d
        self._e = e
        self.exact = not any_float
        self.tag = tag

    # construction helpers
    @classmethod
    def delta(cls, pt: Iterable[int], value=1, tag: str = "delta") -> "SparseMeasure":
        pt = tuple(pt)
        return cls(len(pt), {pt: value}, tag)

    @classmethod
    def zero(cls, d: int) -> "SparseMeasure":
        return cls(d, {})

    def _new(self, e, tag=None) -> "SparseMeasure":
        return SparseMeasure(self.d, e, self.tag if tag is None else tag)

    # mapping protocol
    def __getitem__(self, pt) -> object:
        return self._e.get(tuple(pt), Fraction(0) if self.exact else 0.0)

    def __len__(self) -> int:
        return len(self._e)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._e)

    def __contains__(self, pt) -> bool:
        return tuple(pt) in self._e

    def items(self):
        return self._e.items()

    def support(self) -> frozenset[Point]:
        return frozenset(self._e)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMeasure):
            return NotImplemented
        return self.d == other.d and self._e == other._e

    def __hash__(self):
        return hash((self.d, frozenset(self._e.items())))

    def __repr__(self) -> str:
        kind = "exact" if self.exact else "float"
        return f"SparseMeasure(d={self.d}, n={len(self)}, {kind}, tag={self.tag!r})"

    # linear structure
    def __add__(self, other: "SparseMeasure") -> "SparseMeasure":
        _check_dim(self, other)
        e = dict(self._e)
        for p, v in other.items():
            e[p] = e.get(p, 0) + v
        return self._new(e.items())

    def __neg__(self) -> "SparseMeasure":
        return self._new({p: -v for p, v in self._e.items()})

    def __sub__(self, other: "SparseMeasure") -> "SparseMeasure":
        return self + (-other)

    def scale(self, c) -> "SparseMeasure":
        c = _coerce(c)
        return self._new({p: c * v for p, v in self._e.items()})

    def reflect(self) -> "SparseMeasure":
        """The reflected measure a~(x) = a(-x)."""
        return self._new({tuple(-c for c in p): v for p, v in self._e.items()})

    def restrict(self, keep: Callable[[Point], bool], tag=None) -> "SparseMeasure":
        return self._new({p: v for p, v in self._e.items() if keep(p)}, tag)

    def translate(self, shift: Iterable[int]) -> "SparseMeasure":
        s = tuple(shift)
        return self._new({tuple(a + b for a, b in zip(p, s)): v for p, v in self._e.items()})

    def total(self):
        return sum(self._e.values(), Fraction(0) if self.exact else 0.0)

    def to_float(self) -> "SparseMeasure":
        return self._new({p: float(v) for p, v in self._e.items()})

    # serialization
    def to_jsonl(self) -> str:
        lines = []
        for p in sorted(self._e):
            v = self._e[p]
            num, den = (v.numerator, v.denominator) if self.exact else v.as_integer_ratio()
            lines.append(json.dumps({"pt": list(p), "num": num, "den": den}, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str, d: int | None = None, tag: str = "jsonl") -> "SparseMeasure":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if d is None:
            if not rows:
                raise ValueError("cannot infer dimension of an empty measure")
            d = len(rows[0]["pt"])
        return cls(d, [(tuple(r["pt"]), Fraction(r["num"], r["den"])) for r in rows], tag)


def _check_dim(a: SparseMeasure, b: SparseMeasure) -> None:
    if a.d != b.d:
        raise ValueError(f"dimension mismatch: {a.d} vs {b.d}")


def _check_bits(m: SparseMeasure, max_bits: int) -> None:
    if not m.exact:
        return
    for v in m._e.values():
        if v.numerator.bit_length() > max_bits or v.denominator.bit_length() > max_bits:
            raise PrecisionBudgetError(f"entry needs more than {max_bits} bits")


def convolve(a: SparseMeasure, b: SparseMeasure, *, max_pairs: int = DEFAULT_MAX_PAIRS,
             max_bits: int = DEFAULT_MAX_BITS) -> SparseMeasure:
    """(a*b)(x) = sum_y a(y) b(x-y), by direct double sum."""
    _check_dim(a, b)
    pairs = len(a) * len(b)
    if pairs > max_pairs:
        raise BudgetExceeded("convolve", pairs, max_pairs)
    acc: dict[Point, object] = {}
    if a.d == 1:
        for (x,), u in a.items():
            for (y,), v in b.items():
                k = (x + y,)
                acc[k] = acc.get(k, 0) + u * v
    elif a.d == 2:
        for (x0, x1), u in a.items():
            for (y0, y1), v in b.items():
                k = (x0 + y0, x1 + y1)
                acc[k] = acc.get(k, 0) + u * v
    else:
        for x, u in a.items():
            for y, v in b.items():
                k = tuple(p + q for p, q in zip(x, y))
                acc[k] = acc.get(k, 0) + u * v
    out = SparseMeasure(a.d, acc, f"({a.tag})*({b.tag})")
    _check_bits(out, max_bits)
    return out


def autocorrelation(a: SparseMeasure, **kw) -> SparseMeasure:
    """a * a~, whose value at 0 is the squared l2 norm."""
    return convolve(a, a.reflect(), **kw)


@dataclass(frozen=True)
class MeasureStats:
    l1: object
    l2_squared: object
    l2: float
    linf: object
    linf_punctured: object
    support_size: int
    support_radius: int

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.__dict__.items()}


def measure_stats(a: SparseMeasure) -> MeasureStats:
    zero = Fraction(0) if a.exact else 0.0
    vals = list(a._e.values())
    origin = (0,) * a.d
    l2sq = sum((v * v for v in vals), zero)
    return MeasureStats(
        l1=sum((abs(v) for v in vals), zero),
        l2_squared=l2sq,
        l2=math.sqrt(l2sq),
        linf=max((abs(v) for v in vals), default=zero),
        linf_punctured=max((abs(v) for p, v in a._e.items() if p != origin), default=zero),
        support_size=len(vals),
        support_radius=max((sup_norm(p) for p in a._e), default=0),
    )


# shells in the sup norm

def shell_count(d: int, j: int) -> int:
    """#{n in Z^d : 2^j <= |n| < 2^(j+1)}."""
    return (2 ** (j + 2) - 1) ** d - (2 ** (j + 1) - 1) ** d


def shell_points(d: int, j: int) -> Iterator[Point]:
    lo, hi = 2 ** j, 2 ** (j + 1)
    rng = range(-hi + 1, hi)
    for p in itertools.product(rng, repeat=d):
        if sup_norm(p) >= lo:
            yield p


# dyadic cubes

@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    corner: Point

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def volume(self) -> int:
        return self.side ** len(self.corner)

    @classmethod
    def containing(cls, pt: Iterable[int], level: int) -> "DyadicCube":
        return cls(level, tuple(c >> level for c in pt))

    def contains(self, pt: Iterable[int]) -> bool:
        return all((c >> self.level) == k for c, k in zip(pt, self.corner))

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(k >> 1 for k in self.corner))

    def children(self) -> list["DyadicCube"]:
        if self.level == 0:
            raise ValueError("level-0 cubes have no children")
        base = tuple(2 * k for k in self.corner)
        return [DyadicCube(self.level - 1, tuple(b + o for b, o in zip(base, off)))
                for off in itertools.product((0, 1), repeat=len(base))]

    def points(self) -> Iterator[Point]:
        s = self.side
        return itertools.product(*(range(k * s, (k + 1) * s) for k in self.corner))


# Calderon-Zygmund decomposition

@dataclass(frozen=True)
class CZDecomposition:
    f: SparseMeasure
    lam: object
    good: SparseMeasure
    bad: tuple[tuple[DyadicCube, SparseMeasure], ...]

    @property
    def d(self) -> int:
        return self.f.d

    def reconstruct(self) -> SparseMeasure:
        out = self.good
        for _, b in self.bad:
            out = out + b
        return out

    def bad_at_level(self, s: int) -> SparseMeasure:
        """b_s, the sum of the bad parts on level-s cubes."""
        out = SparseMeasure.zero(self.d)
        for q, b in self.bad:
            if q.level == s:
                out = out + b
        return out

    def levels(self) -> list[int]:
        return sorted({q.level for q, _ in self.bad})

    def invariants(self) -> dict[str, bool]:
        d, lam = self.d, self.lam
        cubes = [q for q, _ in self.bad]
        disjoint = True
        for q1, q2 in itertools.combinations(cubes, 2):
            lo, hi = (q1, q2) if q1.level <= q2.level else (q2, q1)
            anc = lo
            while anc.level < hi.level:
                anc = anc.parent()
            if anc == hi:
                disjoint = False
                break
        l1f = measure_stats(self.f).l1
        return {
            "reconstruction": self.reconstruct() == self.f,
            "disjoint_cubes": disjoint,
            "good_bounded": measure_stats(self.good).linf <= 2 ** d * lam,
            "cube_count": sum(q.volume for q in cubes) * lam <= 2 ** d * l1f,
            "bad_l1": all(measure_stats(b).l1 <= 2 ** d * lam * q.volume for q, b in self.bad),
            "bad_supported_in_cube": all(all(q.contains(p) for p in b) for q, b in self.bad),
        }


def cz_decompose(f: SparseMeasure, lam) -> CZDecomposition:
    """Stopping-time decomposition at height lam.

    Selects the maximal dyadic cubes whose |f|-average exceeds lam.  The bad
    parts are f restricted to those cubes (no mean-zero correction), and the
    good part is f off them.
    """
    if not lam > 0:
        raise ValueError("height must be positive")
    if len(f) == 0:
        return CZDecomposition(f, lam, f, ())
    absf = {p: abs(v) for p, v in f.items()}
    total = sum(absf.values())
    # a level where every cube average is <= lam
    top = 0
    while (1 << (f.d * top)) * lam < total:
        top += 1
    # mass per cube, level by level, only over cubes that carry mass
    owner: dict[Point, DyadicCube] = {}
    selected: list[DyadicCube] = []
    frontier: dict[Point, list[Point]] = {}
    for p in absf:
        frontier.setdefault(tuple(c >> top for c in p), []).append(p)
    level = top
    while level > 0 and frontier:
        nxt: dict[Point, list[Point]] = {}
        child_level = level - 1
        for pts in frontier.values():
            groups: dict[Point, list[Point]] = {}
            for p in pts:
                groups.setdefault(tuple(c >> child_level for c in p), []).append(p)
            for ck, cpts in groups.items():
                mass = sum(absf[p] for p in cpts)
                if mass > lam * (1 << (f.d * child_level)):
                    q = DyadicCube(child_level, ck)
                    selected.append(q)
                    for p in cpts:
                        owner[p] = q
                else:
                    nxt[ck] = cpts
        frontier = nxt
        level = child_level
    bad = []
    for q in sorted(selected):
        bad.append((q, f.restrict(lambda p, q=q: owner.get(p) == q, tag="cz-bad")))
    good = f.restrict(lambda p: p not in owner, tag="cz-good")
    return CZDecomposition(f, lam, good, tuple(bad))


# height splits

def as_fraction(x) -> Fraction:
    """Read a parameter as the decimal the user typed (0.8 -> 4/5)."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def pow2(e):
    """2^e, exact when e is an integer and a float otherwise."""
    e = as_fraction(e)
    if e.denominator == 1:
        return Fraction(2) ** int(e)
    return 2.0 ** float(e)


def _threshold(exponent, j: int):
    return pow2(as_fraction(exponent) * j)


@dataclass(frozen=True)
class HeightSplit:
    """Per-level pieces of a height split at scale j.

    ``small[s]`` is B^(j)_s.  For the speckled variant ``large[s][()]`` is
    b^(j)_s; for the plaid variant ``large[s][I]`` is b^{j,I}_s for each proper
    subset I of the axes (0-based).
    """
    j: int
    variant: str
    thresholds: dict
    large: dict
    small: dict


def split_by_height(cz: CZDecomposition, j: int, *, gamma=None, alpha=None,
                    variant: str = "speckled", eps=0.05) -> HeightSplit:
    d = cz.d
    if variant == "speckled":
        if gamma is None:
            raise ValueError("speckled split needs gamma")
        t = _threshold(d - gamma, j)
        large, small = {}, {}
        for s in cz.levels():
            bs = cz.bad_at_level(s)
            large[s] = {(): bs.restrict(lambda p, bs=bs: abs(bs[p]) > t, tag="b(j)")}
            small[s] = bs.restrict(lambda p, bs=bs: not abs(bs[p]) > t, tag="B(j)")
        return HeightSplit(j, variant, {(): t}, large, small)
    if variant == "plaid":
        if alpha is None:
            raise ValueError("plaid split needs alpha")
        subsets = [I for r in range(d) for I in itertools.combinations(range(d), r)]
        thr = {}
        for I in subsets:
            thr[I] = _threshold(d - d * alpha, j) if not I else _threshold(d - alpha * (d - len(I)) + eps, j)
        large, small = {}, {}
        for s in cz.levels():
            bs = cz.bad_at_level(s)
            flagged: set[Point] = set()
            large[s] = {}
            for I in subsets:
                if not I:
                    sel = {p for p, v in bs.items() if abs(v) > thr[I]}
                else:
                    rest = [i for i in range(d) if i not in I]
                    sums: dict = {}
                    keys = {}
                    for p, v in bs.items():
                        key = (tuple(c >> j for c in p), tuple(p[i] for i in rest))
                        keys[p] = key
                        sums[key] = sums.get(key, 0) + abs(v)
                    sel = {p for p in bs if sums[keys[p]] > thr[I]}
                flagged |= sel
                large[s][I] = bs.restrict(lambda p, sel=sel: p in sel, tag=f"b(j,{I})")
            small[s] = bs.restrict(lambda p, fl=flagged: p not in fl, tag="B(j)")
        return HeightSplit(j, variant, thr, large, small)
    raise ValueError(f"unknown variant {variant!r}")


def mixed_norm(b: SparseMeasure, I: tuple[int, ...], j: int):
    """max over level-j cubes Q and fixed off-I coordinates of the l1 sum over the I coordinates."""
    rest = [i for i in range(b.d) if i not in I]
    sums: dict = {}
    for p, v in b.items():
        key = (tuple(c >> j for c in p), tuple(p[i] for i in rest))
        sums[key] = sums.get(key, 0) + abs(v)
    return max(sums.values(), default=0)
