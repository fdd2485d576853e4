"""Oblivious rounding algorithms for Max-kAND and their factor-revealing LPs."""

from .certificates import KandConstants, check_bernoulli, constants, dual_certificate, perturbed_ratio, solve_core_strict
from .factor_lp import (
    FeasibleWeights,
    approximation_ratio,
    build_dual,
    build_primal,
    grid_search,
    instance_from_solution,
    nice_solution,
    superoblivious_hard_solution,
    witness_solution_from_instance,
)
from .instance import Clause, Instance, assignment_value, bias, brute_force_optimum, parse_instance
from .lp import LPResult, StandardFormLP, check_feasible, solve
from .oblivious import BiasPartition, Pattern, RoundingVector, SnapshotArray, oblivious_value, snapshot

__all__ = [
    "BiasPartition", "Clause", "FeasibleWeights", "Instance", "KandConstants", "LPResult", "Pattern",
    "RoundingVector", "SnapshotArray", "StandardFormLP", "approximation_ratio", "assignment_value", "bias",
    "brute_force_optimum", "build_dual", "build_primal", "check_bernoulli", "check_feasible", "constants",
    "dual_certificate", "grid_search", "instance_from_solution", "nice_solution", "oblivious_value",
    "parse_instance", "perturbed_ratio", "snapshot", "solve", "solve_core_strict",
    "superoblivious_hard_solution", "witness_solution_from_instance",
]
