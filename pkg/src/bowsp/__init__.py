"""Bi-objective workflow satisfiability: Pareto fronts of constraint and
authorization weights, plus resiliency tools."""
from .core import (
    DEFAULT_M,
    ConsultantUser,
    ExplicitUser,
    LinearUser,
    Pattern,
    Plan,
    Schema,
    StaffUser,
    WeightedConstraint,
    WSPError,
    at_least,
    at_most,
    binding_of_duty,
    explicit_constraint,
    load_instance,
    make_plan,
    plan_weights,
    read_instance,
    save_instance,
    separation_of_duty,
    write_instance,
)
from .epsfront import BoundedMinimizeQuery, OracleBackend, PatternBackend, eps_front, oracle_front
from .gen import GenParams, generate, purchase_order_fixture, worst_case_family
from .matching import min_weight_block_assignment
from .pareto import ParetoFront, dominates
from .pbb import PatternBranchAndBound, enumerate_patterns, pbb_front, enumeration_front

__version__ = "0.1.0"
