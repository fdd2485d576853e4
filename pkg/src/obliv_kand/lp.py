"""Standard-form linear programs and a revised simplex solver.

Problems are ``min c.x`` subject to ``A_eq x = b_eq``, ``A_le x <= b_le`` and
``x >= 0``.  The solver keeps slack and artificial columns implicit: a basis
is a set ``S`` of structural columns together with the set ``T`` of rows not
covered by a basic logical column, and only the ``|S| x |S|`` block
``A[T, S]`` is ever factored.  That keeps an iteration cheap both for the
factor-revealing primal (tens of rows, up to ~10^5-10^6 columns) and for its
dual (many rows, few columns).

The backend can be swapped with ``OBLIV_KAND_SOLVER``:

* unset or ``simplex`` -- the built-in solver below
* ``highs`` -- :func:`scipy.optimize.linprog` with HiGHS
* ``external:<path>`` -- run ``<path> <dumpfile>`` on an LP dump; it must print
  ``optimal <value>`` and then the solution on one line, or ``infeasible`` /
  ``unbounded``.
"""

from __future__ import annotations

import enum
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import lu_factor, lu_solve

DEFAULT_TOL = 1e-9
BLAND_STREAK = 50
SOLVER_ENV = "OBLIV_KAND_SOLVER"


class SolverError(RuntimeError):
    """Numerical trouble or an iteration limit; never a silent wrong answer."""


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def _as_matrix(rows, n, dtype):
    if rows is None or len(rows) == 0:
        return np.zeros((0, n), dtype=dtype)
    return np.asarray(rows, dtype=dtype).reshape(-1, n)


@dataclass
class StandardFormLP:
    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_le: np.ndarray = None
    b_le: np.ndarray = None

    def __post_init__(self):
        exact = _is_exact(self.c)
        dtype = object if exact else float
        self.c = np.asarray(self.c, dtype=dtype)
        n = len(self.c)
        self.A_eq = _as_matrix(self.A_eq, n, dtype)
        self.A_le = _as_matrix(self.A_le, n, dtype)
        self.b_eq = np.asarray([] if self.b_eq is None else self.b_eq, dtype=dtype)
        self.b_le = np.asarray([] if self.b_le is None else self.b_le, dtype=dtype)
        if len(self.b_eq) != len(self.A_eq) or len(self.b_le) != len(self.A_le):
            raise ValueError("row count and right-hand side length disagree")
        if not exact:
            for arr in (self.c, self.A_eq, self.b_eq, self.A_le, self.b_le):
                if not np.all(np.isfinite(arr)):
                    raise ValueError("LP data must be finite")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def exact(self) -> bool:
        return self.c.dtype == object

    def as_float(self) -> "StandardFormLP":
        if not self.exact:
            return self
        f = lambda a: np.asarray(a, dtype=float)
        return StandardFormLP(f(self.c), f(self.A_eq), f(self.b_eq), f(self.A_le), f(self.b_le))


def _is_exact(arr) -> bool:
    a = np.asarray(arr, dtype=object).ravel()
    return a.size > 0 and all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in a)


@dataclass
class LPResult:
    status: Status
    value: float | None = None
    x: np.ndarray | None = None
    iterations: int = 0
    duals: np.ndarray | None = None  # eq rows then le rows
    seconds: float = 0.0
    backend: str = "simplex"

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class FeasibilityReport:
    passed: bool
    worst: object
    violations: list = field(default_factory=list)  # (kind, index, amount)
    residuals: dict = field(default_factory=dict)


def check_feasible(lp: StandardFormLP, x, tol=DEFAULT_TOL) -> FeasibilityReport:
    """Per-row residuals of ``x``; exact when both LP and ``x`` are rational."""
    exact = lp.exact and _is_exact(x)
    x = np.asarray(x, dtype=object if exact else float)
    if len(x) != lp.n_vars:
        raise ValueError(f"point has {len(x)} entries, LP has {lp.n_vars} variables")
    if not exact:
        lp = lp.as_float()
    zero = Fraction(0) if exact else 0.0
    eq_res = lp.A_eq.dot(x) - lp.b_eq if len(lp.A_eq) else np.zeros(0)
    le_res = lp.A_le.dot(x) - lp.b_le if len(lp.A_le) else np.zeros(0)
    violations = []
    worst = zero
    for i, r in enumerate(eq_res):
        amt = abs(r)
        worst = max(worst, amt)
        if amt > tol:
            violations.append(("eq", i, amt))
    for i, r in enumerate(le_res):
        amt = max(r, zero)
        worst = max(worst, amt)
        if amt > tol:
            violations.append(("le", i, amt))
    for j, v in enumerate(x):
        amt = max(-v, zero)
        worst = max(worst, amt)
        if amt > tol:
            violations.append(("bound", j, amt))
    return FeasibilityReport(not violations, worst, violations, {"eq": eq_res, "le": le_res})


class _RevisedSimplex:
    """Two-phase revised simplex with implicit logical columns."""

    def __init__(self, lp: StandardFormLP, tol: float, max_iter: int, bland_streak: int):
        lp = lp.as_float()
        self.n = lp.n_vars
        self.m_eq = len(lp.b_eq)
        self.A = np.ascontiguousarray(np.vstack([lp.A_eq, lp.A_le]))
        self.b = np.concatenate([lp.b_eq, lp.b_le])
        self.c = lp.c.copy()
        self.m = len(self.b)
        self.tol = tol
        self.piv_tol = 1e-9
        self.opt_tol = tol
        self.max_iter = max_iter
        self.bland_streak = bland_streak
        self.iterations = 0

        m, n = self.m, self.n
        self.is_le = np.arange(m) >= self.m_eq
        # logical ids: slack of row i is n+i, artificial of row i is n+m+i
        self.art_sign = np.where(self.b < 0, -1.0, 1.0)
        self.cover = np.empty(m, dtype=np.int64)
        for i in range(m):
            if self.is_le[i] and self.b[i] >= 0:
                self.cover[i] = n + i
            else:
                self.cover[i] = n + m + i
        self.S: list[int] = []
        self.T: list[int] = []

    # basis helpers -----------------------------------------------------------

    def _sigma(self, i: int) -> float:
        return 1.0 if self.cover[i] < self.n + self.m else self.art_sign[i]

    def _covered(self) -> np.ndarray:
        return np.flatnonzero(self.cover >= 0)

    def _factor(self):
        if not self.S:
            self.K = None
            return
        K = self.A[np.ix_(self.T, self.S)]
        self.K = lu_factor(K, check_finite=False)
        diag = np.abs(np.diag(self.K[0]))
        if diag.min() <= 1e-13 * max(1.0, diag.max()):
            raise SolverError("basis matrix became singular")

    def _solve(self, rhs_T, trans=0):
        if self.K is None:
            return np.zeros(0)
        return lu_solve(self.K, rhs_T, trans=trans, check_finite=False)

    def _column(self, q: int) -> np.ndarray:
        if q < self.n:
            return self.A[:, q]
        col = np.zeros(self.m)
        if q < self.n + self.m:
            col[q - self.n] = 1.0
        else:
            i = q - self.n - self.m
            col[i] = self.art_sign[i]
        return col

    def _ftran(self, a: np.ndarray, C: np.ndarray, sig: np.ndarray):
        wS = self._solve(a[self.T]) if self.S else np.zeros(0)
        wC = sig * (a[C] - (self.A[np.ix_(C, self.S)] @ wS if self.S else 0.0))
        return wS, wC

    def _cost(self, var: int, phase: int) -> float:
        if var < self.n:
            return self.c[var] if phase == 2 else 0.0
        if var >= self.n + self.m:
            return 1.0 if phase == 1 else 0.0
        return 0.0

    # main loop ---------------------------------------------------------------

    def run(self) -> LPResult:
        needs_phase1 = np.any(self.cover >= self.n + self.m)
        if needs_phase1:
            status = self._iterate(phase=1)
            xS, xC, C = self._primal()
            art = [(i, xC[j]) for j, i in enumerate(C) if self.cover[i] >= self.n + self.m]
            infeas = sum(max(v, 0.0) for _, v in art)
            if status is Status.UNBOUNDED:
                raise SolverError("phase 1 reported unbounded")
            if infeas > self.tol * max(1.0, np.abs(self.b).max()):
                return LPResult(Status.INFEASIBLE, iterations=self.iterations)
        status = self._iterate(phase=2)
        if status is Status.UNBOUNDED:
            return LPResult(Status.UNBOUNDED, iterations=self.iterations)
        xS, xC, C = self._primal()
        x = np.zeros(self.n)
        x[self.S] = xS
        x = np.where(np.abs(x) < 1e-14, 0.0, x)
        y = self._duals(2)
        return LPResult(Status.OPTIMAL, float(self.c @ x), x, self.iterations, duals=y)

    def _primal(self):
        C = self._covered()
        sig = np.array([self._sigma(i) for i in C])
        xS = self._solve(self.b[self.T]) if self.S else np.zeros(0)
        rest = self.b[C] - (self.A[np.ix_(C, self.S)] @ xS if self.S else 0.0)
        return xS, sig * rest, C

    def _duals(self, phase: int) -> np.ndarray:
        y = np.zeros(self.m)
        C = self._covered()
        for i in C:
            y[i] = self._cost(int(self.cover[i]), phase) * self._sigma(i)
        if self.S:
            cS = np.array([self._cost(j, phase) for j in self.S])
            rhs = cS - self.A[np.ix_(C, self.S)].T @ y[C]
            y[self.T] = self._solve(rhs, trans=1)
        return y

    def _iterate(self, phase: int) -> Status:
        n, m = self.n, self.m
        cost = self.c if phase == 2 else np.zeros(n)
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                raise SolverError(f"iteration limit {self.max_iter} reached")
            self._factor()
            xS, xC, C = self._primal()
            y = self._duals(phase)

            # pricing
            nz = np.flatnonzero(y)
            d = cost - (y[nz] @ self.A[nz] if len(nz) else 0.0)
            if np.isscalar(d):
                d = np.full(n, d)
            d = np.array(d, dtype=float)
            if self.S:
                d[self.S] = np.inf
            d_slack = np.full(m, np.inf)
            free_slack = self.is_le & (self.cover != n + np.arange(m))
            d_slack[free_slack] = -y[free_slack]
            bland = streak >= self.bland_streak
            q = self._choose_entering(d, d_slack, bland)
            if q is None:
                return Status.OPTIMAL

            a = self._column(q)
            sig = np.array([self._sigma(i) for i in C])
            wS, wC = self._ftran(a, C, sig)

            # ratio test over basic structurals then covered logicals
            vals = np.concatenate([xS, xC])
            w = np.concatenate([wS, wC])
            ids = np.concatenate([np.asarray(self.S, dtype=np.int64), self.cover[C]])
            ratios = np.full(len(w), np.inf)
            pos = w > self.piv_tol
            ratios[pos] = np.maximum(vals[pos], 0.0) / w[pos]
            if phase == 2:
                # artificials left in the basis are pinned at zero
                pinned = (ids >= n + m) & (np.abs(w) > self.piv_tol)
                ratios[pinned] = 0.0
            if not np.isfinite(ratios).any():
                return Status.UNBOUNDED
            best = ratios.min()
            cand = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
            if bland:
                r = cand[np.argmin(ids[cand])]
            else:
                r = cand[np.argmax(np.abs(w[cand]))]
            streak = streak + 1 if best <= 1e-12 else 0
            self._pivot(q, r, C)
            self.iterations += 1

    def _choose_entering(self, d, d_slack, bland):
        cand_s = np.flatnonzero(d < -self.opt_tol)
        cand_l = np.flatnonzero(d_slack < -self.opt_tol)
        if not len(cand_s) and not len(cand_l):
            return None
        if bland:
            return int(cand_s[0]) if len(cand_s) else int(self.n + cand_l[0])
        js = int(np.argmin(d)) if len(cand_s) else None
        jl = int(np.argmin(d_slack)) if len(cand_l) else None
        if jl is None or (js is not None and d[js] <= d_slack[jl]):
            return js
        return self.n + jl

    def _pivot(self, q: int, r: int, C: np.ndarray):
        n, m = self.n, self.m
        nS = len(self.S)
        if q < n:
            if r < nS:
                self.S[r] = q
            else:
                row = int(C[r - nS])
                self.cover[row] = -1
                self.S.append(q)
                self.T.append(row)
            return
        row_in = q - n  # slack entering
        if r < nS:
            # slack of an uncovered row replaces a structural
            pos = self.T.index(row_in)
            self.S.pop(r)
            self.T.pop(pos)
            self.cover[row_in] = q
            return
        row_out = int(C[r - nS])
        if row_out == row_in:
            self.cover[row_in] = q
            return
        pos = self.T.index(row_in)
        self.T[pos] = row_out
        self.cover[row_out] = -1
        self.cover[row_in] = q


def _solve_builtin(lp, tol, max_iter, bland_streak):
    return _RevisedSimplex(lp, tol, max_iter, bland_streak).run()


def _solve_highs(lp: StandardFormLP) -> LPResult:
    from scipy.optimize import linprog

    lp = lp.as_float()
    res = linprog(
        lp.c,
        A_ub=lp.A_le if len(lp.A_le) else None,
        b_ub=lp.b_le if len(lp.A_le) else None,
        A_eq=lp.A_eq if len(lp.A_eq) else None,
        b_eq=lp.b_eq if len(lp.A_eq) else None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        return LPResult(Status.INFEASIBLE, backend="highs")
    if res.status == 3:
        return LPResult(Status.UNBOUNDED, backend="highs")
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    return LPResult(Status.OPTIMAL, float(res.fun), np.asarray(res.x), int(res.nit), backend="highs")


def _solve_external(lp: StandardFormLP, path: str) -> LPResult:
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as fh:
        fh.write(dump_lp(lp))
        name = fh.name
    try:
        proc = subprocess.run([path, name], capture_output=True, text=True, check=False)
    finally:
        os.unlink(name)
    if proc.returncode != 0:
        raise SolverError(f"external solver exited with {proc.returncode}: {proc.stderr.strip()}")
    lines = proc.stdout.strip().splitlines()
    if not lines:
        raise SolverError("external solver produced no output")
    head = lines[0].split()
    if head[0] == "infeasible":
        return LPResult(Status.INFEASIBLE, backend="external")
    if head[0] == "unbounded":
        return LPResult(Status.UNBOUNDED, backend="external")
    if head[0] != "optimal" or len(lines) < 2:
        raise SolverError(f"cannot parse external solver output: {lines[0]!r}")
    x = np.array([float(v) for v in lines[1].split()])
    return LPResult(Status.OPTIMAL, float(head[1]), x, backend="external")


def solve(lp: StandardFormLP, tol: float = DEFAULT_TOL, max_iter: int = 200_000,
          bland_streak: int = BLAND_STREAK, backend: str | None = None) -> LPResult:
    """Solve ``lp``; an optimal answer is checked against ``tol`` before returning."""
    backend = backend or os.environ.get(SOLVER_ENV, "simplex")
    t0 = time.perf_counter()
    if backend == "simplex":
        res = _solve_builtin(lp, tol, max_iter, bland_streak)
    elif backend == "highs":
        res = _solve_highs(lp)
    elif backend.startswith("external:"):
        res = _solve_external(lp, backend.split(":", 1)[1])
    else:
        raise ValueError(f"unknown solver backend {backend!r}")
    res.seconds = time.perf_counter() - t0
    if res.optimal:
        flp = lp.as_float()
        scale = max(1.0, float(np.abs(flp.b_eq).max(initial=0)), float(np.abs(flp.b_le).max(initial=0)))
        # HiGHS and external solvers work to their own tolerance
        check_tol = tol * scale * max(1.0, float(np.abs(res.x).sum())) if backend == "simplex" else 1e-6 * scale
        rep = check_feasible(flp, res.x, check_tol)
        if not rep.passed:
            raise SolverError(f"solution violates constraints by {rep.worst:.3g}")
    return res


def _fmt_num(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _fmt_row(row) -> str:
    return " ".join(f"{j}:{_fmt_num(v)}" for j, v in enumerate(row) if v != 0)


def dump_lp(lp: StandardFormLP) -> str:
    """Plain-text dump: ``min``, ``eq`` and ``le`` lines with sparse ``idx:coef`` terms."""
    out = [f"# vars {lp.n_vars}", f"min {_fmt_row(lp.c)}".rstrip()]
    for row, rhs in zip(lp.A_eq, lp.b_eq):
        out.append(f"eq {_fmt_num(rhs)} {_fmt_row(row)}".rstrip())
    for row, rhs in zip(lp.A_le, lp.b_le):
        out.append(f"le {_fmt_num(rhs)} {_fmt_row(row)}".rstrip())
    return "\n".join(out) + "\n"


def _parse_num(tok: str):
    if "/" in tok:
        return Fraction(tok)
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def load_lp(text: str) -> StandardFormLP:
    n = None
    obj = {}
    eq, le = [], []
    for ln in text.splitlines():
        toks = ln.split()
        if not toks:
            continue
        if toks[0] == "#":
            if len(toks) >= 3 and toks[1] == "vars":
                n = int(toks[2])
            continue
        kind = toks[0]
        if kind == "min":
            obj = _parse_terms(toks[1:])
        elif kind in ("eq", "le"):
            (eq if kind == "eq" else le).append((_parse_num(toks[1]), _parse_terms(toks[2:])))
        else:
            raise ValueError(f"unknown LP dump line {ln!r}")
    if n is None:
        idx = [j for d in [obj] + [r for _, r in eq + le] for j in d]
        n = max(idx) + 1 if idx else 0
    exact = all(isinstance(v, (int, Fraction)) for d in [obj] + [r for _, r in eq + le] for v in d.values())
    dtype = object if exact else float
    zero = Fraction(0) if exact else 0.0

    def dense(d):
        row = np.full(n, zero, dtype=dtype)
        for j, v in d.items():
            row[j] = v
        return row

    return StandardFormLP(
        dense(obj),
        [dense(r) for _, r in eq] or None,
        [v for v, _ in eq],
        [dense(r) for _, r in le] or None,
        [v for v, _ in le],
    )


def _parse_terms(toks):
    out = {}
    for tok in toks:
        j, v = tok.split(":", 1)
        out[int(j)] = _parse_num(v)
    return out
