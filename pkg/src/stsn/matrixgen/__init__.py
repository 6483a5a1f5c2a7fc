"""Procedural matrix-reasoning problems: rules, answer sets, rendering, files."""

from .augment import Transform, apply_transform, augment, sample_transform
from .bisection import bisection_answers, mutable_attributes
from .checker import RuleViolation, check_problem, solve
from .generate import generate_dataset, generate_problem, generate_splits, make_problem, problem_rng, render
from .io import read_dataset, write_dataset
from .raster import object_masks, rasterize
from .rules import apply_count_rule, apply_location_rule, apply_value_rule, sample_rules
from .symbolic import PROBLEM_TYPES, MatrixProblem, ObjectSpec, Rule, SymbolicPanel

__all__ = [
    "PROBLEM_TYPES",
    "MatrixProblem",
    "ObjectSpec",
    "Rule",
    "RuleViolation",
    "SymbolicPanel",
    "Transform",
    "apply_count_rule",
    "apply_location_rule",
    "apply_transform",
    "apply_value_rule",
    "augment",
    "bisection_answers",
    "check_problem",
    "generate_dataset",
    "generate_problem",
    "generate_splits",
    "make_problem",
    "mutable_attributes",
    "object_masks",
    "problem_rng",
    "rasterize",
    "read_dataset",
    "render",
    "sample_rules",
    "sample_transform",
    "solve",
    "write_dataset",
]
