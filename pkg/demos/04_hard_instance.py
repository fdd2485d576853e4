# Turn the worst-case LP weights for sign-only rounding into a concrete
# instance and check its ratio by brute force.
from obliv_kand.instance import format_instance
from obliv_kand.certificates import constants
from obliv_kand.factor_lp import instance_from_solution, nice_solution, superoblivious_hard_solution
from obliv_kand.instance import brute_force_optimum
from obliv_kand.oblivious import oblivious_value

for k in (2, 3):
    W = superoblivious_hard_solution(k)
    print(f"k={k} weights:")
    for pat, w in W.items():
        print("   ", pat.render(), w)
    inst = instance_from_solution(nice_solution(W, k, (0, 1)), k, (0, 1))
    x, val = brute_force_optimum(inst)
    obl = oblivious_value(inst, (0, 1), (constants(k).p_star,))
    print(f"  n={inst.n} m={inst.m} val={float(val):.6f} Obl={float(obl):.6f}"
          f" ratio={float(obl / val):.6f} alpha*={float(constants(k).alpha_star):.6f}")

print()
print(format_instance(instance_from_solution(nice_solution(superoblivious_hard_solution(2), 2, (0, 1)), 2, (0, 1))))
