"""Factor-revealing LPs for oblivious Max-kAND algorithms.

The primal has one variable ``W(c)`` per pattern (columns in
:func:`pattern_array` order), one equality row ``sum_{PosPtn} W = 1`` and, per
class ``i`` in ``-ell..ell``, an upper row then a lower row::

    (1 - t+_i) W+(i) - (1 + t+_i) W-(i) <= 0
    (t-_i - 1) W+(i) + (t-_i + 1) W-(i) <= 0

The dual variables are laid out as ``[z+, z-, y-_{-ell..ell}, y+_{-ell..ell}]``
where ``y+_i`` prices the upper row and ``y-_i`` the lower row.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .instance import Clause, Instance, as_fraction, brute_force_optimum, flip
from .lp import DEFAULT_TOL, LPResult, SolverError, StandardFormLP, solve
from .oblivious import (
    BiasPartition,
    Pattern,
    RoundingVector,
    SnapshotArray,
    _check_dims,
    as_partition,
    as_rounding,
    bias_class,
    clause_patterns,
    pattern_array,
    piecewise_linear_params,
    sat_prob,
    sat_probs,
)

DEFAULT_NICE_EPS = Fraction(1, 10**6)
DEFAULT_CLAUSE_CAP = 10**6


class FeasibleWeights(SnapshotArray):
    """Pattern weights ``W(c)`` for the primal LP."""

    def w_plus(self, i: int):
        return sum((c.plus(i) * w for c, w in self.items()), 0)

    def w_minus(self, i: int):
        return sum((c.minus(i) * w for c, w in self.items()), 0)

    def pos_total(self):
        return sum((w for c, w in self.items() if c.is_positive), 0)

    def objective(self, p):
        p = as_rounding(p)
        if all(isinstance(w, (int, Fraction)) for w in self.values()):
            return sum((sat_prob(c, p) * w for c, w in self.items()), Fraction(0))
        return float(sum(float(sat_prob(c, p)) * float(w) for c, w in self.items()))

    def to_vector(self, exact: bool = False) -> np.ndarray:
        if not exact:
            return super().to_vector()
        from .oblivious import _pattern_index, pattern_count

        vec = np.full(pattern_count(self.k, self.ell), Fraction(0), dtype=object)
        idx = _pattern_index(self.k, self.ell)
        for pat, w in self.items():
            vec[idx[pat.counts]] = as_fraction(w)
        return vec

    def bias_rows(self, t) -> dict[int, tuple]:
        """Per class ``i``: (upper row value, lower row value); feasible means both <= 0."""
        t = as_partition(t)
        out = {}
        for i in range(-self.ell, self.ell + 1):
            wp, wm = self.w_plus(i), self.w_minus(i)
            tu, tl = t.upper(i), t.lower(i)
            if not isinstance(wp, (int, Fraction)) or not isinstance(wm, (int, Fraction)):
                tu, tl = float(tu), float(tl)
            out[i] = ((1 - tu) * wp - (1 + tu) * wm, (tl - 1) * wp + (tl + 1) * wm)
        return out

    def is_feasible(self, t, tol=0) -> bool:
        if any(w < 0 for w in self.values()):
            return False
        if abs(self.pos_total() - 1) > tol:
            return False
        return all(u <= tol and lo <= tol for u, lo in self.bias_rows(t).values())


@lru_cache(maxsize=8)
def _structure(k: int, ell: int):
    P = pattern_array(k, ell)
    L = 2 * ell + 1
    pos = (P[:, L:].sum(axis=1) == 0)
    return P, pos


def _bias_row_matrix(k: int, t: BiasPartition, exact: bool) -> np.ndarray:
    P, _ = _structure(k, t.ell)
    L = t.L
    rows = []
    for ci, i in enumerate(range(-t.ell, t.ell + 1)):
        cp, cm = P[:, ci], P[:, L + ci]
        tu, tl = t.upper(i), t.lower(i)
        if exact:
            cp_o, cm_o = cp.astype(object), cm.astype(object)
            rows.append((1 - tu) * cp_o - (1 + tu) * cm_o)
            rows.append((tl - 1) * cp_o + (tl + 1) * cm_o)
        else:
            tu, tl = float(tu), float(tl)
            rows.append((1 - tu) * cp - (1 + tu) * cm)
            rows.append((tl - 1) * cp + (tl + 1) * cm)
    return np.array(rows, dtype=object if exact else float)


def _objective(k: int, p: RoundingVector, exact: bool) -> np.ndarray:
    if exact:
        return np.array([sat_prob(Pattern(p.ell, tuple(int(v) for v in row)), p)
                         for row in pattern_array(k, p.ell)], dtype=object)
    return sat_probs(k, p)


def build_primal(k: int, t, p, exact: bool = False) -> StandardFormLP:
    t, p = as_partition(t), as_rounding(p)
    _check_dims(t, p)
    _, pos = _structure(k, t.ell)
    c = _objective(k, p, exact)
    if exact:
        a_eq = np.array([Fraction(int(v)) for v in pos], dtype=object)[None, :]
        one, zero = Fraction(1), Fraction(0)
    else:
        a_eq = pos.astype(float)[None, :]
        one, zero = 1.0, 0.0
    G = _bias_row_matrix(k, t, exact)
    return StandardFormLP(c, a_eq, [one], G, [zero] * len(G))


def build_dual(k: int, t, p, exact: bool = False) -> StandardFormLP:
    t, p = as_partition(t), as_rounding(p)
    _check_dims(t, p)
    _, pos = _structure(k, t.ell)
    G = _bias_row_matrix(k, t, exact)
    upper, lower = G[0::2], G[1::2]
    dtype = object if exact else float
    one = Fraction(1) if exact else 1.0
    posv = np.array([one if v else 0 * one for v in pos], dtype=dtype)
    A = np.column_stack([posv, -posv, -lower.T, -upper.T])
    L = t.L
    cost = np.array([-one, one] + [0 * one] * (2 * L), dtype=dtype)
    return StandardFormLP(cost, None, [], A, _objective(k, p, exact))


def dual_point(z, y_minus, y_plus, exact: bool = False) -> np.ndarray:
    """Assemble a dual variable vector from ``z`` and per-class ``y`` lists."""
    zp, zm = (z, 0 * z) if z >= 0 else (0 * z, -z)
    vals = [zp, zm] + list(y_minus) + list(y_plus)
    return np.array(vals, dtype=object if exact else float)


@dataclass
class RatioResult:
    value: float
    weights: FeasibleWeights | None
    iterations: int
    seconds: float
    k: int
    t: BiasPartition
    p: RoundingVector
    tol: float
    method: str
    lp: LPResult = field(repr=False, default=None)

    def metadata(self) -> dict:
        return {
            "k": self.k,
            "partition": [str(v) for v in self.t.t],
            "rounding": [str(v) for v in self.p.p],
            "piecewise_evaluation": "right endpoint",
            "solver_tolerance": self.tol,
            "method": self.method,
            "ratio": self.value,
            "lp_iterations": self.iterations,
            "seconds": self.seconds,
        }


def approximation_ratio(k: int, t, p, tol: float = DEFAULT_TOL, method: str = "primal",
                        backend: str | None = None) -> RatioResult:
    """Worst-case ratio of the oblivious algorithm ``(t, p)`` on Max-kAND.

    ``method="dual"`` solves the dual instead; the value is the same but no
    worst-case weights are reported.
    """
    t, p = as_partition(t), as_rounding(p)
    if method == "primal":
        res = solve(build_primal(k, t, p), tol=tol, backend=backend)
    elif method == "dual":
        res = solve(build_dual(k, t, p), tol=tol, backend=backend)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not res.optimal:
        raise SolverError(f"factor-revealing LP reported {res.status.value}")
    if method == "primal":
        x = np.where(res.x > 1e-13, res.x, 0.0)
        W = FeasibleWeights.from_vector(k, t.ell, x)
        W = FeasibleWeights(k, t.ell, {c: float(w) for c, w in W.items()})
        value = res.value
    else:
        W, value = None, -res.value
    return RatioResult(value, W, res.iterations, res.seconds, k, t, p, tol, method, res)


def witness_solution_from_instance(inst: Instance, t) -> FeasibleWeights:
    """Pattern-aggregated weights of ``inst`` after flipping to an all-(+1) optimum.

    Total weight is rescaled to ``1/val`` so the positive patterns sum to 1;
    the objective then equals ``Obl/val`` exactly.
    """
    t = as_partition(t)
    x, val = brute_force_optimum(inst)
    flipped = flip(inst, x)
    scale = 1 / (val * inst.total_weight)
    W = FeasibleWeights(inst.k, t.ell)
    for c, pat in zip(flipped.clauses, clause_patterns(flipped, t)):
        W[pat] = W[pat] + c.weight * scale
    return W


def _monochrome(k: int, ell: int, i: int, positive: bool) -> Pattern:
    return Pattern.from_classes(ell, plus={i: k}) if positive else Pattern.from_classes(ell, minus={i: k})


def nice_solution(W: FeasibleWeights, k: int, t, eps=DEFAULT_NICE_EPS, tol: float = 1e-12) -> FeasibleWeights:
    """Make every nonzero class ``i != 0`` satisfy its bias rows strictly.

    A tight lower row gets ``eps`` on the all-``c+_i`` pattern, a tight upper
    row gets ``eps`` on the all-``c-_i`` pattern, then the positive patterns
    are rescaled back to total 1. Classes carrying no weight are left alone:
    perturbing them would create a class whose bias sits outside its interval.
    """
    t = as_partition(t)
    exact = all(isinstance(w, (int, Fraction)) for w in W.values())
    row_tol = 0 if exact else tol
    if not W.is_feasible(t, row_tol if exact else 1e-9):
        raise ValueError("weights are not feasible for this partition")
    eps = as_fraction(eps) if exact else float(eps)
    for _ in range(60):
        out = FeasibleWeights(k, t.ell, dict(W))
        rows = W.bias_rows(t)
        for i in range(-t.ell, t.ell + 1):
            if i == 0 or W.w_plus(i) + W.w_minus(i) == 0:
                continue
            upper, lower = rows[i]
            if lower >= -row_tol:
                c = _monochrome(k, t.ell, i, True)
                out[c] = out[c] + eps
            if upper >= -row_tol:
                c = _monochrome(k, t.ell, i, False)
                out[c] = out[c] + eps
        s = out.pos_total()
        for c in out:
            out[c] = out[c] / s
        new_rows = out.bias_rows(t)
        ok = all(
            i == 0 or out.w_plus(i) + out.w_minus(i) == 0 or (u < -row_tol and lo < -row_tol)
            for i, (u, lo) in new_rows.items()
        )
        if ok:
            return out
        eps = eps / 2
    raise ValueError("could not make the weights nice")


def _class_biases(W: FeasibleWeights) -> dict[int, Fraction]:
    out = {}
    for i in range(-W.ell, W.ell + 1):
        wp, wm = W.w_plus(i), W.w_minus(i)
        if wp + wm > 0:
            out[i] = (wp - wm) / (wp + wm)
    return out


def instance_from_solution(W: FeasibleWeights, k: int, t, clause_cap: int = DEFAULT_CLAUSE_CAP) -> Instance:
    """Materialize the symmetric instance realising ``W``.

    Each class ``i`` that carries weight gets ``k`` variables ``(i, 1..k)``;
    classes with no weight get none, so ``n <= L*k``. Variable ids run over
    used classes in increasing order, copies innermost. A pattern ``c`` turns
    into one clause per way of picking disjoint positive and negative copies
    in every class, each weighing ``W(c)/|J_c|``.
    """
    t = as_partition(t)
    Wq = FeasibleWeights(k, t.ell, {c: as_fraction(w) for c, w in W.items() if w != 0})
    if not Wq:
        raise ValueError("empty weights")
    biases = _class_biases(Wq)
    for i, b in biases.items():
        if bias_class(t, b) != i:
            raise ValueError(f"weights are not nice: class {i} has bias {b} outside its interval")
    used = sorted(biases)
    base = {i: j * k for j, i in enumerate(used)}

    def size(c: Pattern) -> int:
        out = 1
        for i in range(-t.ell, t.ell + 1):
            out *= comb(k, c.plus(i)) * comb(k - c.plus(i), c.minus(i))
        return out

    total = sum(size(c) for c in Wq)
    if total > clause_cap:
        raise ValueError(f"instance would have {total} clauses, cap is {clause_cap}")

    clauses = []
    for c in sorted(Wq, key=lambda c: c.counts, reverse=True):
        w = Wq[c] / size(c)
        per_class = []
        for i in range(-t.ell, t.ell + 1):
            a, b = c.plus(i), c.minus(i)
            if a + b == 0:
                continue
            copies = range(1, k + 1)
            opts = []
            for pos in itertools.combinations(copies, a):
                rest = [v for v in copies if v not in pos]
                for neg in itertools.combinations(rest, b):
                    opts.append(([base[i] + v for v in pos], [base[i] + v for v in neg]))
            per_class.append(opts)
        for choice in itertools.product(*per_class):
            pos = [v for pp, _ in choice for v in pp]
            neg = [v for _, nn in choice for v in nn]
            clauses.append(Clause(pos, neg, w))
    return Instance(k, len(used) * k, clauses)


def superoblivious_hard_solution(k: int) -> FeasibleWeights:
    """Sparse worst-case weights for the sign-only rounding ``t = (0, 1)``."""
    if k < 2:
        raise ValueError("k must be at least 2")
    W = FeasibleWeights(k, 1)
    if k % 2:
        h = (k - 1) // 2
        W[Pattern.from_classes(1, plus={-1: h, 1: h + 1})] = Fraction(1)
        W[Pattern.from_classes(1, minus={-1: h + 1, 1: h})] = Fraction(k - 1, k + 1)
    else:
        h = k // 2
        D = k * k + (k + 2) ** 2
        g = Fraction((k + 1) * (k + 2), D)
        W[Pattern.from_classes(1, plus={-1: h, 1: h})] = Fraction(3 * k + 2, D) / g
        W[Pattern.from_classes(1, plus={-1: h - 1, 1: h + 1})] = Fraction(k * k, D) / g
        W[Pattern.from_classes(1, minus={-1: h, 1: h})] = Fraction(k * k + k + 2, D) / g
    return W


def objective_curve(W: FeasibleWeights, k: int, p_grid) -> list[tuple[object, object]]:
    if W.ell != 1:
        raise ValueError("objective_curve needs single-threshold (ell = 1) weights")
    return [(p, W.objective((p,))) for p in p_grid]


def r_k(k: int, p):
    """Objective of :func:`superoblivious_hard_solution` times its normalizer.

    Maximized over ``[0, 1]`` at ``p*_k``; exact for rational ``p``.
    """
    if isinstance(p, float):
        one = 1.0
    else:
        p, one = as_fraction(p), Fraction(1)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if k % 2:
        return p ** ((k + 1) // 2) * (one - p) ** ((k - 1) // 2)
    h = k // 2
    D = k * k + (k + 2) ** 2
    sym = (p * (one - p)) ** h
    skew = p ** (h + 1) * (one - p) ** (h - 1)
    return ((k + 2) ** 2 * sym + k * k * skew) / D


def r_k_normalizer(k: int) -> Fraction:
    if k % 2:
        return Fraction(k + 1, 2 * k)
    return Fraction((k + 1) * (k + 2), k * k + (k + 2) ** 2)


@dataclass
class GridCell:
    k: int
    ell: int
    x: float
    y: float
    ratio: float | None
    lp_iterations: int
    seconds: float
    error: str | None = None


@dataclass
class GridResult:
    best: GridCell | None
    cells: list[GridCell]

    def to_csv(self) -> str:
        lines = ["k,l,x,y,ratio,lp_iterations,seconds"]
        for c in self.cells:
            if c.ratio is None:
                continue
            lines.append(f"{c.k},{c.ell},{c.x:g},{c.y:g},{c.ratio:.10f},{c.lp_iterations},{c.seconds:.3f}")
        return "\n".join(lines) + "\n"

    def sidecar(self, tol: float) -> str:
        meta = {
            "piecewise_evaluation": "right endpoint",
            "solver_tolerance": tol,
            "best": None if self.best is None else vars(self.best),
            "failed_cells": [vars(c) for c in self.cells if c.error],
        }
        return json.dumps(meta, indent=2)


def _grid_cell(args) -> GridCell:
    k, ell, x, y, tol, backend = args
    t0 = time.perf_counter()
    try:
        t, p = piecewise_linear_params(ell, x, y)
        res = approximation_ratio(k, t, p, tol=tol, backend=backend)
        return GridCell(k, ell, x, y, res.value, res.iterations, time.perf_counter() - t0)
    except (SolverError, ValueError) as exc:
        return GridCell(k, ell, x, y, None, 0, time.perf_counter() - t0, str(exc))


def grid_search(k: int, ell: int, xs, ys, tol: float = DEFAULT_TOL, threads: int = 1,
                backend: str | None = None) -> GridResult:
    """Best two-piece rounding curve over the grid ``xs x ys``.

    Ties within 1e-12 go to the lexicographically smallest ``(x, y)``.
    """
    jobs = [(k, ell, float(x), float(y), tol, backend) for x in xs for y in ys]
    if not jobs:
        raise ValueError("empty grid")
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            cells = list(ex.map(_grid_cell, jobs))
    else:
        cells = [_grid_cell(j) for j in jobs]
    good = [c for c in cells if c.ratio is not None]
    best = None
    if good:
        top = max(c.ratio for c in good)
        best = min((c for c in good if c.ratio >= top - 1e-12), key=lambda c: (c.x, c.y))
    return GridResult(best, cells)
