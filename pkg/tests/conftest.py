from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from obliv_kand.instance import Clause, Instance

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False, help="run long reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full"):
        return
    skip = pytest.mark.skip(reason="long-running; pass --full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def random_instance(seed, k, n, m, weighted=True):
    """Small random instance covering every variable; weights in {1..5} or all 1."""
    rng = np.random.default_rng(seed)
    clauses = []
    for _ in range(m):
        vs = [int(v) for v in rng.choice(np.arange(1, n + 1), size=k, replace=False)]
        signs = rng.random(k) < 0.5
        w = Fraction(int(rng.integers(1, 6))) if weighted else Fraction(1)
        clauses.append(Clause([v for v, s in zip(vs, signs) if s], [v for v, s in zip(vs, signs) if not s], w))
    used = set().union(*(c.variables for c in clauses))
    # any leftover variable gets its own clause
    for v in range(1, n + 1):
        if v not in used:
            others = [u for u in range(1, n + 1) if u != v][: k - 1]
            clauses.append(Clause([v] + others[:1], others[1:], 1))
            used |= {v, *others}
    return Instance(k, n, clauses)
