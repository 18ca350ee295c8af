"""Constraint reasoning over p-box cdf-interval domains."""

from .pbox import (
    CdfPoint,
    DivisorStraddlesZero,
    Inconsistent,
    ObservationSet,
    PboxError,
    PboxInterval,
    StaircaseCdf,
    check_dominance,
    convex_interval,
    empirical_cdf,
    envelope,
    load_observations_csv,
    meet,
    point_mass,
    project,
    repair_dominance,
    set_tolerance,
    slope_between,
    tolerance,
)
from .arith import QuantileInterval, q_add, q_div, q_mul, q_sub, slide
from .engine import CONSISTENT, FAILED, Constraint, DomainStore, parse_model, solution_dict
from .inventory import (
    InventoryInstance,
    ScheduleReport,
    SearchResult,
    build_model,
    default_instance,
    evaluate_schedule,
    run_benchmark,
    search,
)

__version__ = "0.1.0"

__all__ = [
    "CdfPoint",
    "PboxInterval",
    "ObservationSet",
    "StaircaseCdf",
    "QuantileInterval",
    "Constraint",
    "DomainStore",
    "InventoryInstance",
    "ScheduleReport",
    "SearchResult",
    "PboxError",
    "Inconsistent",
    "DivisorStraddlesZero",
    "CONSISTENT",
    "FAILED",
    "slope_between",
    "project",
    "empirical_cdf",
    "envelope",
    "check_dominance",
    "repair_dominance",
    "meet",
    "convex_interval",
    "point_mass",
    "load_observations_csv",
    "tolerance",
    "set_tolerance",
    "q_add",
    "q_sub",
    "q_mul",
    "q_div",
    "slide",
    "parse_model",
    "solution_dict",
    "build_model",
    "evaluate_schedule",
    "search",
    "run_benchmark",
    "default_instance",
]
