# Exact-rational certificates: the Bernoulli inequality, the baseline dual
# certificate and a strict improvement over alpha* for small k.
from obliv_kand.certificates import baseline_certificate, certify, check_bernoulli, constants

rep = check_bernoulli(6)
print("k=6 Bernoulli check:", rep.passed, "tight pairs", sorted(rep.tight))

for k in range(2, 7):
    cert = baseline_certificate(k)
    print(f"k={k} baseline certificate feasible={cert.feasible} certifies {cert.certified_ratio}")

for k in (2, 3, 4):
    r = certify(k, "1/1000")
    a = constants(k).alpha_star
    print(f"k={k} delta={float(r.core.delta):.5f} certified >= {float(r.certified_lower_bound):.7f}"
          f" (alpha* = {float(a):.7f}, gain {float(r.certified_lower_bound - a):.2e})")
