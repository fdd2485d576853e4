# Upper bound 2^-(k-1), alpha*, the small-bias perturbation and the
# piecewise-linear rounding, side by side for k = 2..5.
from fractions import Fraction

from obliv_kand.factor_lp import approximation_ratio
from obliv_kand.oblivious import piecewise_linear_params
from obliv_kand.certificates import constants

piecewise = {3: (10, "0.7", "1.0"), 4: (11, "0.8", "0.8"), 5: (7, "0.95", "0.8")}

print(f"{'k':>2} {'upper':>8} {'alpha*':>8} {'perturbed':>10} {'piecewise':>10}")
for k in range(2, 6):
    c = constants(k)
    pert = approximation_ratio(k, (Fraction(1, 100), 1), (c.p_star + Fraction(1, 1000),)).value
    pw = ""
    if k in piecewise:
        ell, x, y = piecewise[k]
        t, p = piecewise_linear_params(ell, Fraction(x), Fraction(y))
        pw = f"{approximation_ratio(k, t, p).value:.4f}"
    print(f"{k:>2} {2.0 ** -(k - 1):8.4f} {float(c.alpha_star):8.4f} {pert:10.4f} {pw:>10}")

# k = 3 with ell = 10 is a coarse version of the 30-class curve, hence the lower value.
