"""Rule sampling and per-row rule application."""

from __future__ import annotations

from ..errors import GenerationError
from .symbolic import (
    DOMAIN,
    LOGIC_KINDS,
    N_CELLS,
    ORDERED_KINDS,
    PROBLEM_TYPES,
    VALUE_ATTRS,
    VALUE_KINDS,
    Rule,
)

MAX_RETRIES = 200
ALL_CELLS = frozenset(range(N_CELLS))


def _choice(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _distinct(rng, n, k):
    return [int(v) for v in rng.choice(n, size=k, replace=False)]


def sample_rules(problem_type, rng):
    """Value rules for shape/size/color plus the type's location or count rule."""
    if problem_type not in PROBLEM_TYPES:
        raise ValueError(f"unknown problem type {problem_type!r}")
    rules = []
    for attr in VALUE_ATTRS:
        kind = _choice(rng, VALUE_KINDS)
        payload = {}
        if kind == "distribution-of-3":
            payload["values"] = sorted(_distinct(rng, DOMAIN[attr], 3))
        rules.append(Rule(attr, kind, payload))
    if problem_type == "logic":
        rules.append(Rule("location", _choice(rng, LOGIC_KINDS)))
    else:
        attr = "location" if problem_type == "location" else "count"
        kind = _choice(rng, ORDERED_KINDS)
        payload = {}
        if kind == "progression":
            payload["step"] = _choice(rng, (1, -1))
        elif kind == "distribution-of-3":
            if attr == "count":
                payload["values"] = sorted(v + 1 for v in _distinct(rng, N_CELLS, 3))
            else:
                payload["sets"] = _distinct_sets(rng, 3)
        rules.append(Rule(attr, kind, payload))
    return rules


def apply_value_rule(rule, rng, rows=3):
    """Per-panel values for ``rows`` rows of 3 panels; ``None`` marks free values."""
    n = DOMAIN[rule.attribute]
    out = []
    if rule.kind == "null":
        return [[None, None, None] for _ in range(rows)]
    if rule.kind == "constant":
        for _ in range(rows):
            v = int(rng.integers(n))
            out.append([v, v, v])
        return out
    if rule.kind == "distribution-of-3":
        triple = list(rule.payload["values"])
        if len(set(triple)) != 3:
            raise GenerationError(f"distribution-of-3 needs 3 distinct values, got {triple}")
        for _ in range(rows):
            out.append([triple[i] for i in rng.permutation(3)])
        return out
    raise ValueError(f"{rule.kind!r} is not a value rule")


def _random_set(rng, min_size=1, max_size=N_CELLS):
    size = int(rng.integers(min_size, max_size + 1))
    return frozenset(_distinct(rng, N_CELLS, size))


def _distinct_sets(rng, k):
    sets = []
    while len(sets) < k:
        s = sorted(_random_set(rng))
        if s not in sets:
            sets.append(s)
    return sets


def shift_cells(cells, step):
    """Shift every cell index by ``step`` in row-major order, wrapping mod 9."""
    return frozenset((c + step) % N_CELLS for c in cells)


def logic_op(kind, a, b):
    if kind == "AND":
        return a & b
    if kind == "OR":
        return a | b
    if kind == "XOR":
        return a ^ b
    raise ValueError(kind)


def apply_location_rule(rule, rng, rows=3):
    """3 rows x 3 panels of occupied-cell sets; every set nonempty."""
    kind = rule.kind
    out = []
    for _ in range(rows):
        if kind in LOGIC_KINDS:
            for _attempt in range(MAX_RETRIES):
                a = frozenset(c for c in range(N_CELLS) if rng.random() < 0.5)
                b = frozenset(c for c in range(N_CELLS) if rng.random() < 0.5)
                c = logic_op(kind, a, b)
                if a and b and c:
                    break
            else:
                raise GenerationError(f"could not sample a nonempty {kind} row")
            out.append([a, b, c])
        elif kind == "constant":
            s = _random_set(rng)
            out.append([s, s, s])
        elif kind == "distribution-of-3":
            sets = [frozenset(s) for s in rule.payload["sets"]]
            out.append([sets[i] for i in rng.permutation(3)])
        elif kind == "progression":
            step = rule.payload["step"]
            s = _random_set(rng, max_size=N_CELLS - 1)
            out.append([s, shift_cells(s, step), shift_cells(s, 2 * step)])
        else:
            raise ValueError(f"{kind!r} is not a location rule")
    return out


def apply_count_rule(rule, rng, rows=3):
    """3 rows x 3 panels of object counts in 1..9."""
    out = []
    for _ in range(rows):
        if rule.kind == "constant":
            c = int(rng.integers(1, N_CELLS + 1))
            out.append([c, c, c])
        elif rule.kind == "distribution-of-3":
            triple = list(rule.payload["values"])
            out.append([triple[i] for i in rng.permutation(3)])
        elif rule.kind == "progression":
            step = rule.payload["step"]
            lo, hi = (1, N_CELLS - 2) if step > 0 else (3, N_CELLS)
            c = int(rng.integers(lo, hi + 1))
            out.append([c, c + step, c + 2 * step])
        else:
            raise ValueError(f"{rule.kind!r} is not a count rule")
    return out
