"""Max-kAND instances, assignments, values and biases.

Everything here is exact: weights and biases are :class:`fractions.Fraction`.
Variables are 1-indexed and assignments are tuples over ``{+1, -1}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

import numpy as np

Assignment = tuple[int, ...]

BRUTE_FORCE_CAP = 24

_HEADER = re.compile(r"^kand\s+(\d+)\s+(\d+)\s+(\d+)\s*$")


class InstanceError(ValueError):
    """Raised for malformed instances or instance files."""


def as_fraction(x) -> Fraction:
    """Exact rational from int/Fraction/str; floats go through their repr so 0.01 -> 1/100."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True)
class Clause:
    positive: frozenset[int]
    negative: frozenset[int]
    weight: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "positive", frozenset(self.positive))
        object.__setattr__(self, "negative", frozenset(self.negative))
        object.__setattr__(self, "weight", as_fraction(self.weight))
        if self.positive & self.negative:
            raise InstanceError("variable appears both positively and negatively in a clause")
        if self.weight < 0:
            raise InstanceError("clause weight must be nonnegative")

    @property
    def arity(self) -> int:
        return len(self.positive) + len(self.negative)

    @property
    def variables(self) -> frozenset[int]:
        return self.positive | self.negative

    def satisfied_by(self, x: Assignment) -> bool:
        return all(x[v - 1] == 1 for v in self.positive) and all(x[v - 1] == -1 for v in self.negative)

    def literals(self) -> list[int]:
        """Signed literals sorted by variable id."""
        return sorted(list(self.positive) + [-v for v in self.negative], key=abs)


@dataclass(frozen=True)
class Instance:
    k: int
    n: int
    clauses: tuple[Clause, ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        if self.k < 2:
            raise InstanceError("arity k must be at least 2")
        if not self.clauses:
            raise InstanceError("instance has no clauses")
        seen = set()
        for c in self.clauses:
            if c.arity != self.k:
                raise InstanceError(f"clause has {c.arity} literals, expected {self.k}")
            for v in c.variables:
                if not 1 <= v <= self.n:
                    raise InstanceError(f"variable {v} out of range 1..{self.n}")
            seen |= c.variables
        missing = set(range(1, self.n + 1)) - seen
        if missing:
            raise InstanceError(f"variables appear in no clause: {sorted(missing)[:10]}")
        if self.total_weight <= 0:
            raise InstanceError("total clause weight must be positive")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def total_weight(self) -> Fraction:
        return sum((c.weight for c in self.clauses), Fraction(0))

    @property
    def is_input_form(self) -> bool:
        return all(c.weight == 1 for c in self.clauses)

    def signed_weights(self) -> tuple[list[Fraction], list[Fraction]]:
        """Per-variable (w+, w-) lists, index 0 is variable 1."""
        wp = [Fraction(0)] * self.n
        wm = [Fraction(0)] * self.n
        for c in self.clauses:
            for v in c.positive:
                wp[v - 1] += c.weight
            for v in c.negative:
                wm[v - 1] += c.weight
        return wp, wm

    def biases(self) -> list[Fraction]:
        wp, wm = self.signed_weights()
        out = []
        for v, (a, b) in enumerate(zip(wp, wm), start=1):
            if a + b == 0:
                raise InstanceError(f"variable {v} has zero total weight")
            out.append((a - b) / (a + b))
        return out

    def scaled(self, factor) -> "Instance":
        factor = as_fraction(factor)
        return Instance(self.k, self.n, [Clause(c.positive, c.negative, c.weight * factor) for c in self.clauses])


def _parse_weight(tok: str) -> Fraction:
    try:
        w = Fraction(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise InstanceError(f"bad weight {tok!r}") from exc
    if w < 0:
        raise InstanceError(f"negative weight {tok!r}")
    return w


def parse_instance(text: str) -> Instance:
    """Parse the ``kand <k> <n> <m>`` text format."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise InstanceError("empty instance file")
    mh = _HEADER.match(lines[0])
    if not mh:
        raise InstanceError(f"malformed header {lines[0]!r}")
    k, n, m = map(int, mh.groups())
    body = lines[1:]
    if len(body) != m:
        raise InstanceError(f"header declares {m} clauses, found {len(body)}")
    clauses = []
    for lineno, ln in enumerate(body, start=2):
        toks = ln.split()
        w = _parse_weight(toks[0])
        lits = toks[1:]
        if len(lits) != k:
            raise InstanceError(f"line {lineno}: {len(lits)} literals, expected {k}")
        pos, neg = set(), set()
        for tok in lits:
            if tok[0] not in "+-" or not tok[1:].isdigit():
                raise InstanceError(f"line {lineno}: bad literal {tok!r}")
            v = int(tok[1:])
            if not 1 <= v <= n:
                raise InstanceError(f"line {lineno}: variable {v} out of range 1..{n}")
            if v in pos or v in neg:
                raise InstanceError(f"line {lineno}: repeated variable {v}")
            (pos if tok[0] == "+" else neg).add(v)
        clauses.append(Clause(pos, neg, w))
    return Instance(k, n, clauses)


def _format_weight(w: Fraction) -> str:
    return str(w.numerator) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"


def format_instance(inst: Instance, comment: str | None = None) -> str:
    out = []
    if comment:
        out.extend(f"# {ln}" for ln in comment.splitlines())
    out.append(f"kand {inst.k} {inst.n} {inst.m}")
    for c in inst.clauses:
        lits = " ".join(f"+{v}" if v > 0 else f"-{-v}" for v in c.literals())
        out.append(f"{_format_weight(c.weight)} {lits}")
    return "\n".join(out) + "\n"


def check_assignment(inst: Instance, x: Sequence[int]) -> Assignment:
    x = tuple(int(v) for v in x)
    if len(x) != inst.n:
        raise InstanceError(f"assignment has length {len(x)}, expected {inst.n}")
    if any(v not in (1, -1) for v in x):
        raise InstanceError("assignment entries must be +1 or -1")
    return x


def assignment_value(inst: Instance, x: Sequence[int]) -> Fraction:
    x = check_assignment(inst, x)
    sat = sum((c.weight for c in inst.clauses if c.satisfied_by(x)), Fraction(0))
    return sat / inst.total_weight


def bias(inst: Instance, v: int) -> Fraction:
    if not 1 <= v <= inst.n:
        raise InstanceError(f"variable {v} out of range")
    wp = sum((c.weight for c in inst.clauses if v in c.positive), Fraction(0))
    wm = sum((c.weight for c in inst.clauses if v in c.negative), Fraction(0))
    if wp + wm == 0:
        raise InstanceError(f"variable {v} has zero total weight")
    return (wp - wm) / (wp + wm)


def flip(inst: Instance, y: Sequence[int]) -> Instance:
    """Swap the sign of every occurrence of variables with ``y_v = -1``."""
    y = check_assignment(inst, y)
    out = []
    for c in inst.clauses:
        pos = {v for v in c.positive if y[v - 1] == 1} | {v for v in c.negative if y[v - 1] == -1}
        neg = {v for v in c.positive if y[v - 1] == -1} | {v for v in c.negative if y[v - 1] == 1}
        out.append(Clause(pos, neg, c.weight))
    return Instance(inst.k, inst.n, out)


def symmetric_pair_instance(k: int) -> Instance:
    if k < 2:
        raise InstanceError("k must be at least 2")
    vs = range(1, k + 1)
    return Instance(k, k, [Clause(vs, (), 1), Clause((), vs, 1)])


def _bits_to_assignment(bits: int, n: int) -> Assignment:
    # variable 1 is the most significant bit; a set bit means -1
    return tuple(-1 if (bits >> (n - 1 - i)) & 1 else 1 for i in range(n))


def brute_force_optimum(inst: Instance, cap: int = BRUTE_FORCE_CAP) -> tuple[Assignment, Fraction]:
    """Exhaustive maximum over all 2^n assignments.

    Ties go to the lexicographically smallest assignment with +1 < -1.
    """
    n = inst.n
    if n > cap:
        raise InstanceError(f"brute force limited to n <= {cap}, got n = {n}")
    den = lcm(*(c.weight.denominator for c in inst.clauses))
    iw = [int(c.weight * den) for c in inst.clauses]
    dtype = np.int64 if sum(iw) < 2**62 else object
    masks = []
    for c in inst.clauses:
        pm = sum(1 << (n - v) for v in c.positive)
        nm = sum(1 << (n - v) for v in c.negative)
        masks.append((pm, nm))
    best_val, best_bits = None, 0
    chunk = 1 << min(n, 20)
    for start in range(0, 1 << n, chunk):
        xs = np.arange(start, start + chunk, dtype=np.int64)
        tot = np.zeros(chunk, dtype=dtype)
        for (pm, nm), w in zip(masks, iw):
            if w == 0:
                continue
            # bit set <=> variable is -1, so negatives must be set and positives clear
            ok = ((xs & nm) == nm) & ((xs & pm) == 0)
            tot[ok] += w
        i = int(np.argmax(tot))
        if best_val is None or tot[i] > best_val:
            best_val, best_bits = tot[i], start + i
    return _bits_to_assignment(best_bits, n), Fraction(int(best_val), den) / inst.total_weight


def all_assignments(n: int) -> Iterable[Assignment]:
    for bits in range(1 << n):
        yield _bits_to_assignment(bits, n)
