"""Single-pass snapshot estimators on simulated clause streams.

Streams hold unit-weight clauses as two ``(m, k)`` arrays: 1-based variable
ids and literal signs (+1 positive, -1 negative). All randomness comes from
``numpy.random.Generator(Philox(seed))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .instance import Clause, Instance, InstanceError
from .oblivious import (
    Pattern,
    SnapshotArray,
    as_partition,
    as_rounding,
    classes_from_counts,
    pattern_count,
    sat_prob,
)

DEFAULT_C = 32


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class ClauseStream:
    k: int
    n: int
    variables: np.ndarray
    signs: np.ndarray
    order: str = "given"

    @property
    def m(self) -> int:
        return len(self.variables)

    @classmethod
    def from_instance(cls, inst: Instance, order: str = "given") -> "ClauseStream":
        if not inst.is_input_form:
            raise InstanceError("streams carry unit-weight clauses only")
        vs = np.empty((inst.m, inst.k), dtype=np.int64)
        sg = np.empty((inst.m, inst.k), dtype=np.int64)
        for j, c in enumerate(inst.clauses):
            lits = c.literals()
            vs[j] = [abs(v) for v in lits]
            sg[j] = [1 if v > 0 else -1 for v in lits]
        return cls(inst.k, inst.n, vs, sg, order)

    def to_instance(self) -> Instance:
        clauses = []
        for vs, sg in zip(self.variables.tolist(), self.signs.tolist()):
            clauses.append(Clause([v for v, s in zip(vs, sg) if s > 0], [v for v, s in zip(vs, sg) if s < 0]))
        return Instance(self.k, self.n, clauses)

    def clause_multiset(self) -> list[tuple]:
        return sorted(tuple(sorted(zip(v, s))) for v, s in zip(self.variables.tolist(), self.signs.tolist()))


def shuffle_stream(inst: Instance, seed) -> ClauseStream:
    """Uniformly permuted copy of ``inst`` (Fisher-Yates via ``Generator.permutation``)."""
    base = ClauseStream.from_instance(inst)
    perm = make_rng(seed).permutation(base.m)
    return ClauseStream(base.k, base.n, base.variables[perm], base.signs[perm], f"shuffled({seed})")


@dataclass
class EstimatorOutput:
    estimate: float
    raw: float
    offset: float
    stored_clauses: int
    tracked_vars: int
    q: float
    Mhat: SnapshotArray
    counts: dict = field(default_factory=dict)
    full_storage: bool = False

    @property
    def space_used(self) -> int:
        return self.stored_clauses + self.tracked_vars

    @property
    def sample_size(self) -> int:
        return self.stored_clauses


def _signed_degrees(stream: ClauseStream, tracked: np.ndarray | None = None):
    """Positive/negative occurrence counts per variable (index 0 unused)."""
    v = stream.variables.ravel()
    s = stream.signs.ravel()
    if tracked is not None:
        keep = tracked[v]
        v, s = v[keep], s[keep]
    wp = np.bincount(v[s > 0], minlength=stream.n + 1)
    wm = np.bincount(v[s < 0], minlength=stream.n + 1)
    return wp, wm


def _pattern_counts(variables, signs, cls_of, ell: int) -> dict[Pattern, int]:
    if len(variables) == 0:
        return {}
    L = 2 * ell + 1
    slots = cls_of[variables] + ell + np.where(signs < 0, L, 0)
    rows = np.zeros((len(variables), 2 * L), dtype=np.int64)
    np.add.at(rows, (np.repeat(np.arange(len(variables)), variables.shape[1]), slots.ravel()), 1)
    uniq, cnt = np.unique(rows, axis=0, return_counts=True)
    return {Pattern(ell, tuple(int(x) for x in u)): int(c) for u, c in zip(uniq, cnt)}


def _classes(stream: ClauseStream, t, tracked=None) -> np.ndarray:
    wp, wm = _signed_degrees(stream, tracked)
    cls_of = np.zeros(stream.n + 1, dtype=np.int64)
    idx = np.flatnonzero(wp + wm)
    cls_of[idx] = classes_from_counts(wp[idx], wm[idx], t)
    return cls_of


def exact_snapshot(stream: ClauseStream, t) -> SnapshotArray:
    t = as_partition(t)
    counts = _pattern_counts(stream.variables, stream.signs, _classes(stream, t), t.ell)
    return SnapshotArray(stream.k, t.ell, {c: Fraction(x, stream.m) for c, x in counts.items()})


def _readout(Mhat: SnapshotArray, p, eps: float, K: int) -> tuple[float, float, float]:
    p = as_rounding(p)
    raw = float(sum(float(sat_prob(c, p)) * float(w) for c, w in Mhat.items()))
    offset = eps * K
    return min(max(raw - offset, 0.0), 1.0), raw, offset


def random_order_estimate(stream: ClauseStream, t, p, eps: float, C: float = DEFAULT_C, seed=None) -> EstimatorOutput:
    """Keep the first ``ceil(C/eps^2)`` clauses and track their variables' biases.

    ``M(c)`` is estimated by the fraction of stored clauses with pattern ``c``.
    The returned estimate is ``sum prob(c) M(c) - eps * |Ptn|`` clamped to
    ``[0, 1]``. ``seed`` is accepted for a uniform interface; the stream order
    is the only source of randomness.
    """
    t, p = as_partition(t), as_rounding(p)
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = eps * eps / C
    if q > 1:
        raise ValueError("sampling rate eps^2/C exceeds 1")
    size = math.ceil(1 / q)
    full = stream.m <= size
    E = slice(0, min(size, stream.m))
    Ev, Es = stream.variables[E], stream.signs[E]
    tracked = np.zeros(stream.n + 1, dtype=bool)
    tracked[np.unique(Ev)] = True
    cls_of = _classes(stream, t, tracked)
    counts = _pattern_counts(Ev, Es, cls_of, t.ell)
    nE = len(Ev)
    Mhat = SnapshotArray(stream.k, t.ell, {c: x / nE for c, x in counts.items()})
    K = pattern_count(stream.k, t.ell)
    est, raw, off = _readout(Mhat, p, eps, K)
    return EstimatorOutput(est, raw, off, nE, int(tracked.sum()), q, Mhat, counts, full)


def sampling_rate_bounded_degree(k: int, D: int, m: int, eps: float, C: float = DEFAULT_C) -> float:
    return (C * D / (m * eps * eps)) ** (1.0 / k)


def bounded_degree_estimate(stream: ClauseStream, D: int, m: int, t, p, eps: float,
                            C: float = DEFAULT_C, seed=0) -> EstimatorOutput:
    """Sample every variable with probability ``q`` up front; keep clauses inside the sample.

    ``M(c)`` is estimated by ``X(c) / (q^k m)`` where ``X(c)`` counts stored
    clauses with pattern ``c``. A rate ``q >= 1`` stores everything.
    """
    t, p = as_partition(t), as_rounding(p)
    if eps <= 0 or D < 1 or m < 1:
        raise ValueError("need eps > 0, D >= 1 and m >= 1")
    q = sampling_rate_bounded_degree(stream.k, D, m, eps, C)
    full = q >= 1
    rng = make_rng(seed)
    tracked = np.zeros(stream.n + 1, dtype=bool)
    if full:
        q = 1.0
        tracked[1:] = True
    else:
        tracked[1:] = rng.random(stream.n) < q
    inside = tracked[stream.variables].all(axis=1)
    Ev, Es = stream.variables[inside], stream.signs[inside]
    cls_of = _classes(stream, t, tracked)
    counts = _pattern_counts(Ev, Es, cls_of, t.ell)
    scale = q ** stream.k * m
    Mhat = SnapshotArray(stream.k, t.ell, {c: x / scale for c, x in counts.items()})
    K = pattern_count(stream.k, t.ell)
    est, raw, off = _readout(Mhat, p, eps, K)
    return EstimatorOutput(est, raw, off, len(Ev), int(tracked.sum()), q, Mhat, counts, full)


def max_degree(inst) -> int:
    if isinstance(inst, ClauseStream):
        return int(np.bincount(inst.variables.ravel()).max())
    deg: dict[int, int] = {}
    for c in inst.clauses:
        for v in c.variables:
            deg[v] = deg.get(v, 0) + 1
    return max(deg.values())


@dataclass(frozen=True)
class BiasProfile:
    """How literal signs are drawn.

    ``uniform``: fair coin. ``skewed``: negative with probability ``q``.
    ``planted``: agrees with a hidden assignment with probability ``q``.
    """

    kind: str = "uniform"
    q: float = 0.5
    assignment: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "skewed", "planted"):
            raise ValueError(f"unknown bias profile {self.kind!r}")
        if not 0 <= self.q <= 1:
            raise ValueError("profile probability must lie in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "BiasProfile":
        name, _, arg = text.partition(":")
        if name == "uniform":
            return cls()
        return cls(name, float(arg) if arg else 0.5)


def _fix_duplicates(slots: np.ndarray, rng: np.random.Generator, max_rounds: int = 10_000):
    """Swap entries until no clause (row) repeats a variable."""
    m, k = slots.shape
    for _ in range(max_rounds):
        srt = np.sort(slots, axis=1)
        bad_rows = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
        if not len(bad_rows):
            return slots
        for r in bad_rows:
            row = slots[r]
            _, first = np.unique(row, return_index=True)
            dup_pos = [j for j in range(k) if j not in set(first.tolist())]
            for j in dup_pos:
                r2 = int(rng.integers(m))
                j2 = int(rng.integers(k))
                a, b = slots[r, j], slots[r2, j2]
                if r2 == r or b in slots[r] or a in slots[r2]:
                    continue
                slots[r, j], slots[r2, j2] = b, a
    raise InstanceError("could not place variables without repeats; loosen the degree cap")


def generate_random_instance(k: int, n: int, m: int, profile: BiasProfile | str = "uniform",
                             degree_cap: int | None = None, seed=0) -> Instance:
    """Unit-weight random instance in which every variable occurs at least once."""
    return generate_random_stream(k, n, m, profile, degree_cap, seed).to_instance()


def generate_random_stream(k: int, n: int, m: int, profile: BiasProfile | str = "uniform",
                           degree_cap: int | None = None, seed=0) -> ClauseStream:
    if isinstance(profile, str):
        profile = BiasProfile.parse(profile)
    if k < 2 or n < k or m < 1:
        raise InstanceError("need k >= 2, n >= k and m >= 1")
    total = m * k
    if total < n:
        raise InstanceError(f"{m} clauses of arity {k} cannot cover {n} variables")
    if degree_cap is not None and degree_cap * n < total:
        raise InstanceError(f"degree cap {degree_cap} too small for {m} clauses on {n} variables")
    rng = make_rng(seed)
    extra = total - n
    if degree_cap is None:
        more = rng.integers(1, n + 1, size=extra)
    else:
        pool = np.repeat(np.arange(1, n + 1), degree_cap - 1)
        more = rng.choice(pool, size=extra, replace=False) if extra else np.zeros(0, dtype=np.int64)
    slots = np.concatenate([np.arange(1, n + 1), more])
    slots = rng.permutation(slots).reshape(m, k)
    slots = _fix_duplicates(slots, rng)
    u = rng.random((m, k))
    if profile.kind == "uniform":
        signs = np.where(u < 0.5, -1, 1)
    elif profile.kind == "skewed":
        signs = np.where(u < profile.q, -1, 1)
    else:
        hidden = profile.assignment
        if hidden is None:
            hidden = np.where(rng.random(n) < 0.5, -1, 1)
        hidden = np.concatenate([[0], np.asarray(hidden, dtype=np.int64)])
        if len(hidden) != n + 1:
            raise InstanceError("planted assignment has the wrong length")
        agree = hidden[slots]
        signs = np.where(u < profile.q, agree, -agree)
    return ClauseStream(k, n, slots.astype(np.int64), signs.astype(np.int64))
