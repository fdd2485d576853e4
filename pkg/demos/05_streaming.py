# Streaming snapshot estimators on a random k=2 instance: random clause order
# with a prefix sample, and bounded degree with variable subsampling.
from fractions import Fraction

import numpy as np

from obliv_kand.certificates import constants
from obliv_kand.oblivious import sat_prob
from obliv_kand.streaming import (
    bounded_degree_estimate,
    exact_snapshot,
    generate_random_stream,
    max_degree,
    random_order_estimate,
    shuffle_stream,
)

t, p = (Fraction(1, 100), 1), (constants(2).p_star + Fraction(1, 1000),)
stream = generate_random_stream(2, 2000, 40000, seed=1)
snap = exact_snapshot(stream, t)
obl = float(sum(sat_prob(c, p) * w for c, w in snap.items()))
print("exact oblivious value:", round(obl, 5))

errs, raws = [], []
for seed in range(10):
    out = random_order_estimate(shuffle_stream(stream.to_instance(), seed), t, p, eps=0.05)
    errs.append(out.Mhat.l1_distance(snap))
    raws.append(out.raw)
print(f"random order: stored {out.stored_clauses} clauses, l1 error median {np.median(errs):.4f},"
      f" raw estimate {np.mean(raws):.5f} +- {np.std(raws):.5f}")

capped = generate_random_stream(2, 5000, 20000, degree_cap=8, seed=2)
D = max_degree(capped)
outs = [bounded_degree_estimate(capped, D, capped.m, t, p, eps=0.25, seed=s) for s in range(20)]
print(f"bounded degree D={D}: q={outs[0].q:.4f}, stored clauses median"
      f" {int(np.median([o.stored_clauses for o in outs]))}, raw estimate {np.mean([o.raw for o in outs]):.5f}")
