"""Closed-form constants and exact certificates for sign-based rounding.

The certificate family works with the single-threshold partition ``t = (delta, 1)``
and rounding ``p = ((1 + gamma)/2)``. Given ``X, Y >= 0`` and ``beta``, the
sparse dual point

    z = 2 beta / 2^k,  y+_{-1} = X beta / (k 2^k),  y+_0 = Y beta / (k 2^k)

is feasible exactly when, for all ``i, j >= 0`` with ``i + j <= k``,

    (1+delta)(1-(i+j)/k) Y + (1-delta)(j/k) X      <= R(i, j)
    2 - (1-delta)(1-(i+j)/k) Y - (1+delta)(i/k) X  <= R(i, j)

with ``R(i, j) = beta^-1 (1-gamma)^i (1+gamma)^j``. A feasible point proves a
ratio of at least ``2^-(k-1) beta``.

Note on ``alpha*_k``: the expanded form ``2^-(k-1) ((1-gamma_k)(1+gamma_k))^floor(k/2)``
is used throughout. The compact form ``2 (p*(1-p*))^floor(k/2)`` agrees for
even ``k`` but is twice as large for odd ``k`` (4/9 vs 2/9 at ``k = 3``); see
:func:`alpha_compact`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .factor_lp import approximation_ratio, build_dual, dual_point
from .instance import as_fraction
from .lp import FeasibilityReport, check_feasible


@dataclass(frozen=True)
class KandConstants:
    k: int
    gamma_k: Fraction
    p_star: Fraction
    alpha_star: Fraction

    @property
    def half(self) -> int:
        return self.k // 2

    @property
    def beta(self) -> Fraction:
        """``(1 - gamma_k^2)^floor(k/2)``, so that ``alpha* = 2^-(k-1) beta``."""
        return (1 - self.gamma_k ** 2) ** self.half


def constants(k: int) -> KandConstants:
    if k < 2:
        raise ValueError("k must be at least 2")
    g = Fraction(1, k) if k % 2 else Fraction(1, k + 1)
    h = k // 2
    alpha = Fraction(1, 2 ** (k - 1)) * ((1 - g) * (1 + g)) ** h
    return KandConstants(k, g, (1 + g) / 2, alpha)


def alpha_compact(k: int) -> Fraction:
    """The compact expression ``2 (p*(1-p*))^floor(k/2)``; off by 2x at odd ``k``."""
    c = constants(k)
    return 2 * (c.p_star * (1 - c.p_star)) ** (k // 2)


@dataclass
class BernoulliReport:
    k: int
    margins: dict[tuple[int, int], Fraction]
    tight: frozenset

    @property
    def passed(self) -> bool:
        return all(m >= 0 for m in self.margins.values())

    @property
    def worst(self) -> Fraction:
        return min(self.margins.values())


def predicted_tight_set(k: int) -> frozenset:
    h = k // 2
    if k % 2 == 0:
        return frozenset({(h, h), (h - 1, h), (h - 1, h + 1)})
    return frozenset({(h, h), (h, h + 1), (h + 1, h)})


def check_bernoulli(k: int) -> BernoulliReport:
    """Exact margins of ``1 + (j-i)/k <= (1-g)^(i-h) (1+g)^(j-h)`` over ``i + j <= k``."""
    c = constants(k)
    g, h = c.gamma_k, c.half
    lo, hi = 1 - g, 1 + g
    margins = {}
    for i in range(k + 1):
        for j in range(k + 1 - i):
            rhs = lo ** (i - h) * hi ** (j - h)
            margins[(i, j)] = rhs - (1 + Fraction(j - i, k))
    tight = frozenset(ij for ij, m in margins.items() if m == 0)
    return BernoulliReport(k, margins, tight)


def _num(v):
    return v if isinstance(v, Fraction) else as_fraction(v) if isinstance(v, (int, str)) else v


def _family_terms(k, delta, gamma, X, Y, i, j):
    """(F1 lhs, F2 lhs, beta * rhs) at ``(i, j)``."""
    s = 1 - Fraction(i + j, k)
    f1 = (1 + delta) * s * Y + (1 - delta) * Fraction(j, k) * X
    f2 = 2 - (1 - delta) * s * Y - (1 + delta) * Fraction(i, k) * X
    return f1, f2, (1 - gamma) ** i * (1 + gamma) ** j


@dataclass
class SuffCondReport:
    passed: bool
    worst_margin: object
    worst_at: tuple[str, int, int]
    margins: dict = field(repr=False, default_factory=dict)

    def tight(self) -> set:
        return {key for key, m in self.margins.items() if m == 0}


def check_suff_cond(k: int, delta, gamma, beta, X, Y) -> SuffCondReport:
    """Evaluate both inequality families; exact when every input is rational."""
    vals = [delta, gamma, beta, X, Y]
    if all(isinstance(v, (int, Fraction, str)) for v in vals):
        delta, gamma, beta, X, Y = (as_fraction(v) for v in vals)
    else:
        delta, gamma, beta, X, Y = (float(v) for v in vals)
    if not (0 <= delta <= 1 and 0 <= gamma <= 1):
        raise ValueError("need 0 <= delta, gamma <= 1")
    if X < 0 or Y < 0 or beta <= 0:
        raise ValueError("need X, Y >= 0 and beta > 0")
    margins = {}
    for i in range(k + 1):
        for j in range(k + 1 - i):
            f1, f2, r = _family_terms(k, delta, gamma, X, Y, i, j)
            margins[("F1", i, j)] = r / beta - f1
            margins[("F2", i, j)] = r / beta - f2
    at = min(margins, key=lambda key: (margins[key], key))
    return SuffCondReport(margins[at] >= 0, margins[at], at, margins)


@dataclass
class DualCertificate:
    k: int
    delta: object
    gamma: object
    beta: object
    X: object
    Y: object
    z: object
    y_plus_m1: object
    y_plus_0: object
    report: FeasibilityReport

    @property
    def feasible(self) -> bool:
        return self.report.passed

    @property
    def certified_ratio(self):
        """Lower bound on the ratio of ``t = (delta, 1), p = ((1+gamma)/2)``."""
        return self.z

    @property
    def partition(self):
        return (self.delta, 1)

    @property
    def rounding(self):
        return ((1 + self.gamma) / 2,)

    def vector(self):
        exact = isinstance(self.z, Fraction)
        zero = Fraction(0) if exact else 0.0
        return dual_point(self.z, [zero] * 3, [self.y_plus_m1, self.y_plus_0, zero], exact=exact)


def dual_certificate(k: int, delta, gamma, beta, X, Y, tol=0) -> DualCertificate:
    """Build the sparse dual point and check it against the full dual LP.

    With rational inputs the check runs in exact arithmetic at ``tol = 0``.
    """
    vals = [delta, gamma, beta, X, Y]
    exact = all(isinstance(v, (int, Fraction, str)) for v in vals)
    if exact:
        delta, gamma, beta, X, Y = (as_fraction(v) for v in vals)
    else:
        delta, gamma, beta, X, Y = (float(v) for v in vals)
        tol = tol or 1e-12
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    scale = beta / (k * 2 ** k)
    z = 2 * beta / 2 ** k
    cert = DualCertificate(k, delta, gamma, beta, X, Y, z, X * scale, Y * scale, None)
    lp = build_dual(k, (delta, 1), ((1 + gamma) / 2,), exact=exact)
    cert.report = check_feasible(lp, cert.vector(), tol)
    return cert


def baseline_certificate(k: int) -> DualCertificate:
    """``delta = 0, X = 2, Y = 1, beta = (1 - gamma_k^2)^floor(k/2)``: certifies ``alpha*_k``."""
    c = constants(k)
    return dual_certificate(k, Fraction(0), c.gamma_k, c.beta, Fraction(2), Fraction(1))


@dataclass
class CoreStrictResult:
    k: int
    eps: Fraction
    delta: Fraction
    eta: Fraction
    gamma: Fraction
    beta: Fraction
    X: Fraction
    Y: Fraction
    halvings: int


class CoreStrictError(RuntimeError):
    pass


def _core_constraints(k, delta, gamma, beta, pairs):
    """Six strict constraints ``a X + b Y < r`` at the Bernoulli tight pairs."""
    out = []
    for i, j in pairs:
        s = 1 - Fraction(i + j, k)
        r = (1 - gamma) ** i * (1 + gamma) ** j / beta
        out.append(((1 - delta) * Fraction(j, k), (1 + delta) * s, r))
        out.append((-(1 + delta) * Fraction(i, k), -(1 - delta) * s, r - 2))
    return out


def _open_interval(lowers, uppers):
    lo = max(lowers) if lowers else None
    hi = min(uppers) if uppers else None
    return lo, hi


def _pick(lo, hi):
    if lo is None and hi is None:
        return Fraction(1)
    if hi is None:
        return lo + 1
    if lo is None:
        return hi - 1
    return (lo + hi) / 2


def _solve_xy(cons):
    """Midpoint point in ``{a X + b Y < r, X >= 0, Y >= 0}`` or None."""
    ylo, yhi = [Fraction(0)], []
    xl, xu, free = [], [], []
    for a, b, r in cons:
        if a > 0:
            xu.append((a, b, r))
        elif a < 0:
            xl.append((a, b, r))
        elif b > 0:
            yhi.append(r / b)
        elif b < 0:
            ylo.append(r / b)
        elif r <= 0:
            return None
    # X >= 0 acts as a lower bound 0 - 0*Y
    lowers = [(-1, 0, 0)] + xl
    for al, bl, rl in lowers:
        for au, bu, ru in xu:
            # (rl - bl Y)/al < (ru - bu Y)/au  with al < 0 < au
            # multiply by al*au < 0: au (rl - bl Y) > al (ru - bu Y)
            coef = al * bu - au * bl
            const = al * ru - au * rl
            # coef * Y > const
            if coef > 0:
                ylo.append(const / coef)
            elif coef < 0:
                yhi.append(const / coef)
            elif const >= 0:
                return None
    lo, hi = _open_interval(ylo, yhi)
    if hi is not None and lo >= hi:
        return None
    Y = _pick(lo, hi)
    xlo = [(rl - bl * Y) / al for al, bl, rl in lowers]
    xhi = [(ru - bu * Y) / au for au, bu, ru in xu]
    lo, hi = _open_interval(xlo, xhi)
    if hi is not None and lo >= hi:
        return None
    X = _pick(lo, hi)
    return X, Y


def core_parameters(k: int, eps) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """(delta, eta, gamma, beta) for a given ``eps``."""
    c = constants(k)
    eps = as_fraction(eps)
    gamma = c.gamma_k + eps
    beta = c.beta
    h = c.half
    eta = 1 - (1 - gamma) ** h * (1 + gamma) ** h / beta
    if k == 2:
        delta = eps
    elif k % 2 == 0:
        delta = 4 * eta
    else:
        delta = 5 * eta
    return delta, eta, gamma, beta


def solve_core_strict(k: int, eps, max_halvings: int = 60) -> CoreStrictResult:
    """Find ``delta, X, Y`` meeting the six core inequalities strictly."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive; the core inequalities are only strict for eps > 0")
    pairs = sorted(predicted_tight_set(k))
    for halvings in range(max_halvings + 1):
        delta, eta, gamma, beta = core_parameters(k, eps)
        if 0 < delta < 1 and gamma < 1:
            cons = _core_constraints(k, delta, gamma, beta, pairs)
            xy = _solve_xy(cons)
            if xy is not None:
                X, Y = xy
                if all(a * X + b * Y < r for a, b, r in cons):
                    return CoreStrictResult(k, eps, delta, eta, gamma, beta, X, Y, halvings)
        eps /= 2
    raise CoreStrictError(f"no eps found for k={k} within {max_halvings} halvings")


def perturbed_ratio(k: int, delta, eps, **kw) -> float:
    """Ratio of ``t = (delta, 1)`` with ``p = p*_k + eps``."""
    c = constants(k)
    delta, eps = as_fraction(delta), as_fraction(eps)
    if delta == 0 and eps == 0:
        return approximation_ratio(k, (0, 1), (c.p_star,), **kw).value
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    return approximation_ratio(k, (delta, 1), (c.p_star + eps,), **kw).value


@dataclass
class CertifyResult:
    core: CoreStrictResult
    beta_prime: Fraction
    certificate: DualCertificate
    suff: SuffCondReport

    @property
    def certified_lower_bound(self) -> Fraction:
        return self.certificate.certified_ratio


def best_beta(k: int, delta, gamma, X, Y) -> Fraction:
    """Largest ``beta`` for which both families hold at the given point."""
    best = None
    for i in range(k + 1):
        for j in range(k + 1 - i):
            f1, f2, r = _family_terms(k, delta, gamma, X, Y, i, j)
            for lhs in (f1, f2):
                if lhs > 0:
                    cand = r / lhs
                    best = cand if best is None or cand < best else best
    if best is None:
        raise ValueError("families impose no bound on beta")
    return best


def certify(k: int, eps, max_halvings: int = 60) -> CertifyResult:
    """Strict improvement over ``alpha*_k`` via the perturbed certificate.

    Solves the core system, raises ``beta`` as far as every inequality allows
    and checks the resulting dual point against the full dual LP in exact
    arithmetic. ``eps`` is halved until the bound is strictly above ``alpha*_k``.
    """
    c = constants(k)
    eps = as_fraction(eps)
    for _ in range(max_halvings + 1):
        core = solve_core_strict(k, eps, max_halvings)
        bp = best_beta(k, core.delta, core.gamma, core.X, core.Y)
        if bp > c.beta:
            cert = dual_certificate(k, core.delta, core.gamma, bp, core.X, core.Y)
            suff = check_suff_cond(k, core.delta, core.gamma, bp, core.X, core.Y)
            if cert.feasible and suff.passed and cert.certified_ratio > c.alpha_star:
                return CertifyResult(core, bp, cert, suff)
        eps = core.eps / 2
    raise CoreStrictError(f"no strict certificate found for k={k}")


def margin_table_csv(report: SuffCondReport) -> str:
    lines = ["family,i,j,margin"]
    for (fam, i, j), m in sorted(report.margins.items()):
        lines.append(f"{fam},{i},{j},{float(m):.12g}")
    return "\n".join(lines) + "\n"


def bernoulli_table_csv(report: BernoulliReport) -> str:
    lines = ["i,j,margin,tight"]
    for (i, j), m in sorted(report.margins.items()):
        lines.append(f"{i},{j},{float(m):.12g},{int(m == 0)}")
    return "\n".join(lines) + "\n"
