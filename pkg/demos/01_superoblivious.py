# Sign-only rounding: every variable goes to its majority sign with probability p.
# Sweep p for k = 2 and compare the LP ratio with the closed-form alpha*.
from fractions import Fraction

import numpy as np

from obliv_kand import approximation_ratio
from obliv_kand.certificates import constants

k = 2
c = constants(k)
print("gamma_k =", c.gamma_k, " p* =", c.p_star, " alpha* =", c.alpha_star)

ps = [Fraction(50 + i, 100) for i in range(0, 50, 2)]
ratios = np.array([approximation_ratio(k, (0, 1), (p,)).value for p in ps])
for p, r in zip(ps, ratios):
    bar = "#" * int(200 * r)
    print(f"p={float(p):.2f} ratio={r:.5f} {bar}")

print("best grid point:", float(ps[int(ratios.argmax())]))
print("ratio at p* itself:", approximation_ratio(k, (0, 1), (c.p_star,)).value)
