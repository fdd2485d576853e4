"""Bias partitions, rounding vectors, clause patterns and oblivious values.

A pattern for ``L = 2*ell + 1`` classes is a ``2L``-tuple of counts
``(c+[-ell], ..., c+[+ell], c-[-ell], ..., c-[+ell])`` summing to ``k``.
Class ``i`` lives at offset ``i + ell`` inside each half.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .instance import Assignment, Instance, as_fraction


@dataclass(frozen=True)
class BiasPartition:
    """Thresholds ``0 <= t_0 < t_1 < ... < t_ell = 1``."""

    t: tuple[Fraction, ...]

    def __post_init__(self):
        t = tuple(as_fraction(v) for v in self.t)
        object.__setattr__(self, "t", t)
        if len(t) < 2:
            raise ValueError("a bias partition needs at least (t_0, t_1)")
        if t[0] < 0 or t[-1] != 1:
            raise ValueError("need t_0 >= 0 and t_ell = 1")
        if any(a >= b for a, b in zip(t, t[1:])):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def ell(self) -> int:
        return len(self.t) - 1

    @property
    def L(self) -> int:
        return 2 * self.ell + 1

    def upper(self, i: int) -> Fraction:
        """sup of class ``i``."""
        if i >= 0:
            return self.t[i]
        return -self.t[-i - 1]

    def lower(self, i: int) -> Fraction:
        """inf of class ``i``."""
        if i > 0:
            return self.t[i - 1]
        return -self.t[-i]

    def __str__(self):
        return "(" + ",".join(_fmt(v) for v in self.t) + ")"


@dataclass(frozen=True)
class RoundingVector:
    p: tuple[Fraction, ...]

    def __post_init__(self):
        p = tuple(as_fraction(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if not p:
            raise ValueError("empty rounding vector")
        if any(not 0 <= v <= 1 for v in p):
            raise ValueError("rounding probabilities must lie in [0, 1]")

    @property
    def ell(self) -> int:
        return len(self.p)

    def prob_plus_one(self, cls: int) -> Fraction:
        """Probability that a variable of bias class ``cls`` is rounded to +1."""
        if cls == 0:
            return Fraction(1, 2)
        return self.p[cls - 1] if cls > 0 else 1 - self.p[-cls - 1]

    def __str__(self):
        return "(" + ",".join(_fmt(v) for v in self.p) + ")"


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{float(v):.12g}"


def as_partition(t) -> BiasPartition:
    return t if isinstance(t, BiasPartition) else BiasPartition(tuple(t))


def as_rounding(p) -> RoundingVector:
    return p if isinstance(p, RoundingVector) else RoundingVector(tuple(p))


def _check_dims(t: BiasPartition, p: RoundingVector):
    if t.ell != p.ell:
        raise ValueError(f"partition has ell={t.ell} but rounding vector has {p.ell} entries")


@dataclass(frozen=True, order=True)
class Pattern:
    ell: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != 2 * (2 * self.ell + 1):
            raise ValueError("pattern length must be 2L")
        if any(c < 0 for c in self.counts):
            raise ValueError("pattern counts must be nonnegative")

    @classmethod
    def from_classes(cls, ell: int, plus: Mapping[int, int] = {}, minus: Mapping[int, int] = {}) -> "Pattern":
        L = 2 * ell + 1
        counts = [0] * (2 * L)
        for i, c in plus.items():
            counts[i + ell] += c
        for i, c in minus.items():
            counts[L + i + ell] += c
        return cls(ell, tuple(counts))

    @property
    def L(self) -> int:
        return 2 * self.ell + 1

    @property
    def k(self) -> int:
        return sum(self.counts)

    def plus(self, i: int) -> int:
        return self.counts[i + self.ell]

    def minus(self, i: int) -> int:
        return self.counts[self.L + i + self.ell]

    @property
    def is_positive(self) -> bool:
        return not any(self.counts[self.L:])

    def render(self) -> str:
        return ":".join(map(str, self.counts[: self.L])) + "|" + ":".join(map(str, self.counts[self.L:]))

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        left, right = text.split("|")
        plus = [int(v) for v in left.split(":")]
        minus = [int(v) for v in right.split(":")]
        if len(plus) != len(minus) or len(plus) % 2 == 0:
            raise ValueError(f"bad pattern {text!r}")
        return cls((len(plus) - 1) // 2, tuple(plus + minus))

    def __str__(self):
        return self.render()


def pattern_count(k: int, ell: int) -> int:
    L = 2 * ell + 1
    return comb(k + 2 * L - 1, 2 * L - 1)


@lru_cache(maxsize=16)
def pattern_array(k: int, ell: int) -> np.ndarray:
    """All patterns as an ``(N, 2L)`` int array.

    Order is descending lexicographic on the count vector, so row 0 is
    ``c+[-ell] = k``. This is the column order of every LP built here.
    """
    if k < 1 or ell < 1:
        raise ValueError("need k >= 1 and ell >= 1")
    width = 2 * (2 * ell + 1)
    combos = np.array(list(combinations_with_replacement(range(width), k)), dtype=np.int64)
    out = np.zeros((len(combos), width), dtype=np.int64)
    rows = np.repeat(np.arange(len(combos)), k)
    np.add.at(out, (rows, combos.ravel()), 1)
    out.setflags(write=False)
    return out


def enumerate_patterns(k: int, ell: int) -> list[Pattern]:
    return [Pattern(ell, tuple(int(v) for v in row)) for row in pattern_array(k, ell)]


@lru_cache(maxsize=16)
def _pattern_index(k: int, ell: int) -> dict[tuple[int, ...], int]:
    return {tuple(int(v) for v in row): j for j, row in enumerate(pattern_array(k, ell))}


def pattern_index(pattern: Pattern) -> int:
    return _pattern_index(pattern.k, pattern.ell)[pattern.counts]


def bias_class(t: BiasPartition, b) -> int:
    t = as_partition(t)
    b = as_fraction(b)
    if not -1 <= b <= 1:
        raise ValueError("bias outside [-1, 1]")
    if abs(b) <= t.t[0]:
        return 0
    if b > 0:
        for i in range(1, t.ell + 1):
            if b <= t.t[i]:
                return i
    else:
        for i in range(1, t.ell + 1):
            if b >= -t.t[i]:
                return -i
    raise AssertionError("unreachable: thresholds end at 1")


def classes_from_counts(wp: np.ndarray, wm: np.ndarray, t: BiasPartition) -> np.ndarray:
    """Vectorized exact bias classes from integer positive/negative weights."""
    t = as_partition(t)
    wp = np.asarray(wp, dtype=np.int64)
    wm = np.asarray(wm, dtype=np.int64)
    d = wp - wm
    s = wp + wm
    if np.any(s <= 0):
        raise ValueError("every variable needs positive total weight")
    cls = np.zeros(len(d), dtype=np.int64)
    for j, tj in enumerate(t.t[:-1]):
        # d/s > tj  <=>  d*den > num*s
        above = d * tj.denominator > tj.numerator * s
        below = d * tj.denominator < -tj.numerator * s
        cls += above.astype(np.int64) - below.astype(np.int64)
    return cls


def instance_classes(inst: Instance, t: BiasPartition) -> list[int]:
    t = as_partition(t)
    return [bias_class(t, b) for b in inst.biases()]


def _pattern_from_classes(clause, classes: Sequence[int], ell: int) -> Pattern:
    L = 2 * ell + 1
    counts = [0] * (2 * L)
    for v in clause.positive:
        counts[classes[v - 1] + ell] += 1
    for v in clause.negative:
        counts[L + classes[v - 1] + ell] += 1
    return Pattern(ell, tuple(counts))


def pattern_of_clause(inst: Instance, t: BiasPartition, j: int) -> Pattern:
    t = as_partition(t)
    if not 0 <= j < inst.m:
        raise IndexError(f"clause index {j} out of range")
    return _pattern_from_classes(inst.clauses[j], instance_classes(inst, t), t.ell)


def clause_patterns(inst: Instance, t: BiasPartition) -> list[Pattern]:
    t = as_partition(t)
    classes = instance_classes(inst, t)
    return [_pattern_from_classes(c, classes, t.ell) for c in inst.clauses]


def sat_prob(c: Pattern, p: RoundingVector) -> Fraction:
    """Probability that a clause of pattern ``c`` is satisfied (0**0 == 1)."""
    p = as_rounding(p)
    if p.ell != c.ell:
        raise ValueError("pattern and rounding vector disagree on ell")
    out = Fraction(1, 2 ** (c.plus(0) + c.minus(0)))
    for i in range(1, c.ell + 1):
        pi = p.p[i - 1]
        out *= pi ** (c.plus(i) + c.minus(-i)) * (1 - pi) ** (c.minus(i) + c.plus(-i))
    return out


def sat_probs(k: int, p: RoundingVector) -> np.ndarray:
    """Float satisfaction probabilities for every pattern, in table order."""
    p = as_rounding(p)
    ell = p.ell
    L = 2 * ell + 1
    P = pattern_array(k, ell)
    cp, cm = P[:, :L], P[:, L:]
    log = -(cp[:, ell] + cm[:, ell]) * np.log(2.0)
    out = np.exp(log)
    for i in range(1, ell + 1):
        pi = float(p.p[i - 1])
        e1 = cp[:, ell + i] + cm[:, ell - i]
        e0 = cm[:, ell + i] + cp[:, ell - i]
        out *= np.where(e1 > 0, pi ** e1, 1.0) * np.where(e0 > 0, (1.0 - pi) ** e0, 1.0)
    return out


def sat_probs_exact(k: int, p: RoundingVector) -> list[Fraction]:
    p = as_rounding(p)
    return [sat_prob(c, p) for c in enumerate_patterns(k, p.ell)]


def oblivious_value(inst: Instance, t, p) -> Fraction:
    """Expected value of the oblivious rounding, exact."""
    t, p = as_partition(t), as_rounding(p)
    _check_dims(t, p)
    cache: dict[Pattern, Fraction] = {}
    total = Fraction(0)
    for c, pat in zip(inst.clauses, clause_patterns(inst, t)):
        if pat not in cache:
            cache[pat] = sat_prob(pat, p)
        total += cache[pat] * c.weight
    return total / inst.total_weight


def sample_rounding(inst: Instance, t, p, seed: int) -> Assignment:
    t, p = as_partition(t), as_rounding(p)
    _check_dims(t, p)
    rng = np.random.default_rng(seed)
    probs = np.array([float(p.prob_plus_one(c)) for c in instance_classes(inst, t)])
    u = rng.random(inst.n)
    return tuple(int(v) for v in np.where(u < probs, 1, -1))


class SnapshotArray(dict):
    """Pattern -> weight mapping for one ``(k, ell)``; missing patterns are 0."""

    def __init__(self, k: int, ell: int, entries: Mapping[Pattern, object] = ()):
        super().__init__(entries)
        self.k = k
        self.ell = ell

    def __missing__(self, key):
        return 0

    def total(self):
        return sum(self.values())

    def to_vector(self) -> np.ndarray:
        vec = np.zeros(pattern_count(self.k, self.ell))
        idx = _pattern_index(self.k, self.ell)
        for pat, w in self.items():
            vec[idx[pat.counts]] = float(w)
        return vec

    @classmethod
    def from_vector(cls, k: int, ell: int, vec) -> "SnapshotArray":
        P = pattern_array(k, ell)
        return cls(k, ell, {Pattern(ell, tuple(int(v) for v in P[j])): vec[j] for j in np.flatnonzero(vec)})

    def l1_distance(self, other: Mapping[Pattern, object]) -> float:
        keys = set(self) | set(other)
        return float(sum(abs(float(self.get(c, 0)) - float(other.get(c, 0))) for c in keys))

    def to_csv(self, exact: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pattern", "weight"])
        for pat in sorted(self, key=lambda c: pattern_index(c)):
            val = self[pat]
            if exact:
                val = as_fraction(val)
                txt = f"{val.numerator}/{val.denominator}"
            else:
                txt = f"{float(val):.12g}"
            w.writerow([pat.render(), txt])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SnapshotArray":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["pattern", "weight"]:
            raise ValueError("snapshot CSV must start with header pattern,weight")
        entries = {}
        for pat_txt, w_txt in rows[1:]:
            pat = Pattern.parse(pat_txt)
            entries[pat] = Fraction(w_txt) if "/" in w_txt else float(w_txt)
        if not entries:
            raise ValueError("empty snapshot")
        first = next(iter(entries))
        return cls(first.k, first.ell, entries)


def snapshot(inst: Instance, t) -> SnapshotArray:
    t = as_partition(t)
    snap = SnapshotArray(inst.k, t.ell)
    for c, pat in zip(inst.clauses, clause_patterns(inst, t)):
        snap[pat] = snap[pat] + c.weight
    tw = inst.total_weight
    for pat in snap:
        snap[pat] /= tw
    return snap


class SnapshotEstimate(NamedTuple):
    raw: object
    estimate: object


def snapshot_estimate_value(Mhat: Mapping[Pattern, object], p, eps=0) -> SnapshotEstimate:
    """Linear read-out of a snapshot estimate.

    ``raw`` is the sum of ``prob(c) * Mhat(c)`` and ``estimate = raw - eps``,
    where ``eps`` bounds the l1 error of ``Mhat``.
    """
    p = as_rounding(p)
    if any(float(w) < 0 for w in Mhat.values()):
        raise ValueError("snapshot estimate entries must be nonnegative")
    exact = isinstance(eps, (int, Fraction)) and all(isinstance(w, (int, Fraction)) for w in Mhat.values())
    if exact:
        raw = sum((sat_prob(c, p) * w for c, w in Mhat.items()), Fraction(0))
        return SnapshotEstimate(raw, raw - eps)
    raw = sum(float(sat_prob(c, p)) * float(w) for c, w in Mhat.items())
    return SnapshotEstimate(raw, raw - float(eps))


def piecewise_linear_params(ell: int, x, y) -> tuple[BiasPartition, RoundingVector]:
    """Uniform partition with a two-piece linear rounding curve.

    The curve goes (0, 1/2) -> (x, y) -> (1, 1) and is sampled at the right
    endpoint ``i/ell`` of each positive class.
    """
    x, y = as_fraction(x), as_fraction(y)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if not 0 < x < 1:
        raise ValueError("x must lie in (0, 1)")
    if not Fraction(1, 2) <= y <= 1:
        raise ValueError("y must lie in [1/2, 1]")
    t = tuple(Fraction(i, ell) for i in range(ell + 1))

    def f(b: Fraction) -> Fraction:
        if b <= x:
            return Fraction(1, 2) + (y - Fraction(1, 2)) * b / x
        return y + (1 - y) * (b - x) / (1 - x)

    return BiasPartition(t), RoundingVector(tuple(f(b) for b in t[1:]))
