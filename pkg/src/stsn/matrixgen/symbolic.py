"""Symbolic panels, rules, and problems."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SHAPES = ("square", "circle", "triangle")
SIZES = ("small", "medium", "large")
N_COLORS = 8
N_CELLS = 9

VALUE_ATTRS = ("shape", "size", "color")
DOMAIN = {"shape": len(SHAPES), "size": len(SIZES), "color": N_COLORS}

PROBLEM_TYPES = ("logic", "location", "count")
TYPE_CODES = {name: i for i, name in enumerate(PROBLEM_TYPES)}

VALUE_KINDS = ("null", "constant", "distribution-of-3")
LOGIC_KINDS = ("AND", "OR", "XOR")
ORDERED_KINDS = ("constant", "distribution-of-3", "progression")


@dataclass(frozen=True, order=True)
class ObjectSpec:
    location: int
    shape: int
    size: int
    color: int

    def __post_init__(self):
        if not 0 <= self.location < N_CELLS:
            raise ValueError(f"location {self.location} outside 0..8")
        for attr in VALUE_ATTRS:
            v = getattr(self, attr)
            if not 0 <= v < DOMAIN[attr]:
                raise ValueError(f"{attr}={v} outside 0..{DOMAIN[attr] - 1}")

    def to_list(self):
        return [self.location, self.shape, self.size, self.color]


@dataclass(frozen=True)
class SymbolicPanel:
    """Objects sorted by cell, at most one per cell."""

    objects: tuple = ()

    def __post_init__(self):
        objs = tuple(sorted(self.objects))
        cells = [o.location for o in objs]
        if len(set(cells)) != len(cells):
            raise ValueError("two objects share a cell")
        object.__setattr__(self, "objects", objs)

    @property
    def locations(self):
        return frozenset(o.location for o in self.objects)

    @property
    def count(self):
        return len(self.objects)

    def values(self, attr):
        return tuple(getattr(o, attr) for o in self.objects)

    def uniform(self, attr):
        """The single value of ``attr`` shared by all objects, else ``None``."""
        vals = set(self.values(attr))
        return vals.pop() if len(vals) == 1 else None

    def to_list(self):
        return [o.to_list() for o in self.objects]

    @classmethod
    def from_list(cls, rows):
        return cls(tuple(ObjectSpec(*map(int, r)) for r in rows))


@dataclass
class Rule:
    attribute: str  # shape | size | color | location | count
    kind: str
    payload: dict = field(default_factory=dict)

    def to_dict(self):
        return {"attribute": self.attribute, "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_dict(cls, d):
        return cls(d["attribute"], d["kind"], dict(d.get("payload", {})))


@dataclass
class MatrixProblem:
    problem_type: str
    rules: list
    context: list  # 8 SymbolicPanels, row-major, bottom-right cell omitted
    candidates: list = field(default_factory=list)  # 8 SymbolicPanels
    answer_index: int = -1
    solution: SymbolicPanel | None = None
    images: np.ndarray | None = None  # (16, H, W, C) float32: context then candidates
    transform: tuple | None = None

    def rule(self, attribute):
        for r in self.rules:
            if r.attribute == attribute:
                return r
        return None

    @property
    def structural_attribute(self):
        return "count" if self.problem_type == "count" else "location"

    @property
    def grid(self):
        """3x3 list of panels with the solution filled in (if known)."""
        cells = list(self.context) + [self.solution]
        return [cells[0:3], cells[3:6], cells[6:9]]

    def panels(self):
        return list(self.context) + list(self.candidates)

    def metadata(self):
        return {
            "rules": [r.to_dict() for r in self.rules],
            "context": [p.to_list() for p in self.context],
            "candidates": [p.to_list() for p in self.candidates],
        }
