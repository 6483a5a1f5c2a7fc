"""Materialize full problems: rules -> 3x3 symbolic grid -> candidates -> images."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..errors import GenerationError
from .bisection import bisection_answers, mutable_attributes
from .raster import rasterize
from .rules import MAX_RETRIES, apply_count_rule, apply_location_rule, apply_value_rule, sample_rules
from .symbolic import DOMAIN, N_CELLS, PROBLEM_TYPES, TYPE_CODES, VALUE_ATTRS, MatrixProblem, ObjectSpec, SymbolicPanel


def _panel(cells, values, rng):
    objs = []
    for cell in sorted(cells):
        attrs = {a: (values[a] if values[a] is not None else int(rng.integers(DOMAIN[a]))) for a in VALUE_ATTRS}
        objs.append(ObjectSpec(int(cell), attrs["shape"], attrs["size"], attrs["color"]))
    return SymbolicPanel(tuple(objs))


def generate_problem(problem_type, rng):
    """Sample rules and build the 3x3 grid; the bottom-right panel becomes ``solution``.

    Rules are resampled until at least three attributes are rule-governed,
    which the answer-set construction needs.
    """
    if problem_type not in PROBLEM_TYPES:
        raise ValueError(f"unknown problem type {problem_type!r}")
    for _ in range(MAX_RETRIES):
        rules = sample_rules(problem_type, rng)
        probe = MatrixProblem(problem_type, rules, [])
        if len(mutable_attributes(probe)) >= 3:
            break
    else:
        raise GenerationError("could not sample a rule set with three mutable attributes")

    by_attr = {r.attribute: r for r in rules}
    values = {a: apply_value_rule(by_attr[a], rng) for a in VALUE_ATTRS}
    if problem_type == "count":
        counts = apply_count_rule(by_attr["count"], rng)
        cells = [[frozenset(int(c) for c in rng.choice(N_CELLS, size=n, replace=False)) for n in row] for row in counts]
    else:
        cells = apply_location_rule(by_attr["location"], rng)

    grid = []
    for r in range(3):
        for c in range(3):
            grid.append(_panel(cells[r][c], {a: values[a][r][c] for a in VALUE_ATTRS}, rng))
    return MatrixProblem(problem_type, rules, grid[:8], solution=grid[8])


def make_problem(problem_type, rng, size=None, channels=1):
    """Generate a complete problem with candidates and, if ``size`` is set, images."""
    problem = generate_problem(problem_type, rng)
    problem.candidates, problem.answer_index = bisection_answers(problem.solution, rng, mutable_attributes(problem))
    if size is not None:
        render(problem, size, channels)
    return problem


def render(problem, size, channels=1):
    problem.images = np.stack([rasterize(p, size, size, channels) for p in problem.panels()])
    return problem


def problem_rng(seed, problem_type, index):
    """Independent stream per (master seed, type, index), so output ignores scheduling."""
    return np.random.default_rng([int(seed), TYPE_CODES[problem_type], int(index)])


def _one(args):
    seed, ptype, index, size, channels = args
    return make_problem(ptype, problem_rng(seed, ptype, index), size, channels)


def generate_dataset(problem_type, n, seed, size=80, channels=1, start=0, workers=1):
    """``n`` problems of one type (or ``n`` of each for ``"all"``), rendered at ``size``."""
    types = PROBLEM_TYPES if problem_type == "all" else (problem_type,)
    jobs = [(seed, t, start + i, size, channels) for t in types for i in range(n)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_one(j) for j in jobs]


SPLIT_SIZES = {"train": 16_000, "val": 2_000, "test": 2_000}


def generate_splits(problem_type, seed, scale=1.0, size=80, channels=1, workers=1):
    """Train/val/test splits at ``scale`` times 16K/2K/2K per type, disjoint by index."""
    out = {}
    start = 0
    for name, full in SPLIT_SIZES.items():
        n = max(1, int(round(full * scale)))
        out[name] = generate_dataset(problem_type, n, seed, size, channels, start=start, workers=workers)
        start += n
    return out
