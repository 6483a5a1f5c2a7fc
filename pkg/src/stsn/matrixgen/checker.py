"""Rule checker that re-derives answers from the context panels.

Deliberately shares no code with the generator: it reads only rule kinds
from the metadata and infers every rule parameter (constant values,
distribution triples, progression steps) from rows 1 and 2 and the first
two panels of row 3.
"""

from __future__ import annotations

VALUE_ATTRS = ("shape", "size", "color")


class RuleViolation(AssertionError):
    pass


def _cells(panel):
    return frozenset(o.location for o in panel.objects)


def _value(panel, attr):
    vals = {getattr(o, attr) for o in panel.objects}
    if len(vals) != 1:
        raise RuleViolation(f"{attr} not uniform within panel: {sorted(vals)}")
    return vals.pop()


def _shift(cells, step):
    return frozenset((c + step) % 9 for c in cells)


def _expect(kind, rows, third_row, op_name):
    """Expected third entry of row 3 given rows 1-2 and row 3's first two entries.

    ``rows`` holds complete rows as lists of comparable items.
    """
    a, b = third_row
    if kind == "constant":
        for row in rows:
            if not row[0] == row[1] == row[2]:
                raise RuleViolation(f"{op_name}: constant rule broken in context row {row}")
        if a != b:
            raise RuleViolation(f"{op_name}: constant rule broken in row 3")
        return a
    if kind == "distribution-of-3":
        triple = set(rows[0])
        if len(triple) != 3:
            raise RuleViolation(f"{op_name}: first row has no 3 distinct values")
        for row in rows[1:]:
            if set(row) != triple:
                raise RuleViolation(f"{op_name}: row {row} is not a permutation of {triple}")
        rest = triple - {a, b}
        if len(rest) != 1:
            raise RuleViolation(f"{op_name}: row 3 does not leave a unique value")
        return rest.pop()
    raise ValueError(kind)


def expected_solution(problem):
    """Dict attribute -> value the bottom-right panel must have."""
    ctx = problem.context
    rows = [ctx[0:3], ctx[3:6]]
    third = ctx[6:8]
    want = {}
    for rule in problem.rules:
        attr, kind = rule.attribute, rule.kind
        if kind == "null":
            continue
        if attr in VALUE_ATTRS:
            vals = [[_value(p, attr) for p in row] for row in rows]
            want[attr] = _expect(kind, vals, [_value(p, attr) for p in third], attr)
        elif attr == "location":
            sets = [[_cells(p) for p in row] for row in rows]
            a, b = (_cells(p) for p in third)
            if kind in ("AND", "OR", "XOR"):
                fn = {
                    "AND": lambda x, y: x & y,
                    "OR": lambda x, y: x | y,
                    "XOR": lambda x, y: x ^ y,
                }[kind]
                for row in sets:
                    if fn(row[0], row[1]) != row[2]:
                        raise RuleViolation(f"location {kind} broken in context row")
                want[attr] = fn(a, b)
            elif kind == "progression":
                step = _infer_step(sets)
                if _shift(a, step) != b:
                    raise RuleViolation("location progression broken in row 3")
                want[attr] = _shift(b, step)
            else:
                want[attr] = _expect(kind, sets, [a, b], attr)
        elif attr == "count":
            counts = [[len(p.objects) for p in row] for row in rows]
            a, b = (len(p.objects) for p in third)
            if kind == "progression":
                step = counts[0][1] - counts[0][0]
                for row in counts:
                    if row[1] - row[0] != step or row[2] - row[1] != step or step == 0:
                        raise RuleViolation(f"count progression broken in row {row}")
                if b - a != step:
                    raise RuleViolation("count progression broken in row 3")
                want[attr] = b + step
            else:
                want[attr] = _expect(kind, counts, [a, b], attr)
        else:
            raise ValueError(f"unknown attribute {attr}")
    return want


def _infer_step(sets):
    for step in (1, -1):
        if all(_shift(r[0], step) == r[1] and _shift(r[1], step) == r[2] for r in sets):
            return step
    raise RuleViolation("no consistent location progression step")


def satisfies(panel, want):
    if not panel.objects:
        return False
    for attr, value in want.items():
        if attr in VALUE_ATTRS:
            vals = {getattr(o, attr) for o in panel.objects}
            if vals != {value}:
                return False
        elif attr == "location":
            if _cells(panel) != value:
                return False
        elif attr == "count":
            if len(panel.objects) != value:
                return False
    return True


def solve(problem):
    """Indices of candidates consistent with every non-null rule."""
    want = expected_solution(problem)
    return [i for i, cand in enumerate(problem.candidates) if satisfies(cand, want)]


def check_problem(problem):
    """Raise :class:`RuleViolation` unless exactly the recorded answer is consistent."""
    matches = solve(problem)
    if matches != [problem.answer_index]:
        raise RuleViolation(f"consistent candidates {matches}, recorded answer {problem.answer_index}")
    return True


def _features(panel):
    return (
        tuple(sorted(o.shape for o in panel.objects)),
        tuple(sorted(o.size for o in panel.objects)),
        tuple(sorted(o.color for o in panel.objects)),
        _cells(panel),
        len(panel.objects),
    )


def majority_vote(candidates, rng):
    """Context-blind baseline: pick the candidate whose attribute values are most common.

    Each candidate scores the number of candidates sharing each of its
    attribute values, summed over attributes; ties break uniformly at random.
    """
    feats = [_features(c) for c in candidates]
    scores = []
    for f in feats:
        scores.append(sum(sum(g[j] == f[j] for g in feats) for j in range(len(f))))
    best = max(scores)
    tied = [i for i, s in enumerate(scores) if s == best]
    return tied[int(rng.integers(len(tied)))]
