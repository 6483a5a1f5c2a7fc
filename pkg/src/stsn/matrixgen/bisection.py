"""Impartial answer sets from a depth-3 attribute bisection tree.

Level d picks attribute a_d and one alternative value for it. Every node
spawns a child that keeps the node as is and a child with a_d set to that
alternative, so the 8 leaves cover every keep/modify combination and each
chosen attribute takes the correct value in exactly 4 of them.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import GenerationError
from .rules import MAX_RETRIES
from .symbolic import DOMAIN, N_CELLS, VALUE_ATTRS, ObjectSpec, SymbolicPanel

TREE_DEPTH = 3


def mutable_attributes(problem):
    """Rule-governed attributes: non-null value rules plus location or count."""
    attrs = [r.attribute for r in problem.rules if r.attribute in VALUE_ATTRS and r.kind != "null"]
    return attrs + [problem.structural_attribute]


@dataclass
class Change:
    attribute: str
    value: object  # int for value attributes, frozenset of cells for location/count
    fill: dict  # cell -> (shape, size, color) for objects that appear
    governed: tuple = ()  # value attributes whose panel-wide value new objects inherit


def _other_cells(cells, rng):
    # toggle one or two cells so the distractor stays close to the correct layout
    for _ in range(MAX_RETRIES):
        flips = rng.choice(N_CELLS, size=int(rng.integers(1, 3)), replace=False)
        new = set(cells)
        for c in flips:
            new ^= {int(c)}
        if new and frozenset(new) != cells:
            return frozenset(new)
    raise GenerationError("could not perturb location set")


def _sample_change(attr, correct, rng, governed):
    fill = {c: tuple(int(rng.integers(DOMAIN[a])) for a in VALUE_ATTRS) for c in range(N_CELLS)}
    if attr in VALUE_ATTRS:
        current = correct.uniform(attr)
        options = [v for v in range(DOMAIN[attr]) if v != current]
        return Change(attr, options[int(rng.integers(len(options)))], fill, governed)
    if attr == "location":
        return Change(attr, _other_cells(correct.locations, rng), fill, governed)
    if attr == "count":
        options = [n for n in range(1, N_CELLS + 1) if n != correct.count]
        n = options[int(rng.integers(len(options)))]
        cells = frozenset(int(c) for c in rng.choice(N_CELLS, size=n, replace=False))
        return Change(attr, cells, fill, governed)
    raise ValueError(attr)


def apply_change(panel, change):
    attr = change.attribute
    if attr in VALUE_ATTRS:
        objs = [ObjectSpec(**{**_fields(o), attr: change.value}) for o in panel.objects]
        return SymbolicPanel(tuple(objs))
    # location / count: re-place objects; new ones inherit the panel-wide governed values
    by_cell = {o.location: o for o in panel.objects}
    uniform = {a: (panel.uniform(a) if a in change.governed else None) for a in VALUE_ATTRS}
    objs = []
    for cell in sorted(change.value):
        if cell in by_cell:
            objs.append(by_cell[cell])
            continue
        vals = dict(zip(VALUE_ATTRS, change.fill[cell]))
        for a in VALUE_ATTRS:
            if uniform[a] is not None:
                vals[a] = uniform[a]
        objs.append(ObjectSpec(cell, vals["shape"], vals["size"], vals["color"]))
    return SymbolicPanel(tuple(objs))


def _fields(o):
    return {"location": o.location, "shape": o.shape, "size": o.size, "color": o.color}


def bisection_answers(correct, rng, mutable):
    """Return (8 candidate panels, answer_index) for the ``correct`` panel.

    ``mutable`` lists the attributes the tree may modify (at least three).
    """
    if len(mutable) < TREE_DEPTH:
        raise GenerationError(f"need {TREE_DEPTH} mutable attributes, got {mutable}")
    for _ in range(MAX_RETRIES):
        order = [mutable[i] for i in rng.choice(len(mutable), size=TREE_DEPTH, replace=False)]
        governed = tuple(a for a in mutable if a in VALUE_ATTRS)
        changes = [_sample_change(a, correct, rng, governed) for a in order]
        leaves = [correct]
        for change in changes:
            leaves = [leaf for node in leaves for leaf in (node, apply_change(node, change))]
        if len(set(leaves)) == len(leaves):
            break
    else:
        raise GenerationError("bisection tree produced duplicate candidates")
    perm = rng.permutation(len(leaves))
    candidates = [leaves[i] for i in perm]
    return candidates, int(list(perm).index(0))

