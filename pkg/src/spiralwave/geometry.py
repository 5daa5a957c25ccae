"""Domain and defect primitives shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RectDomain:
    """Rectangle [0, lx] x [0, ly] with homogeneous Neumann walls.

    Lengths are measured in core-radius units (the defect core is O(1)).
    """

    lx: float
    ly: float

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValidationError(f"domain sides must be positive, got {self.lx} x {self.ly}")

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * self.lx, 0.5 * self.ly])

    def wall_distance(self, p) -> float:
        """Distance from point p to the nearest wall (negative outside)."""
        x, y = float(p[0]), float(p[1])
        return min(x, self.lx - x, y, self.ly - y)

    def contains(self, p, margin: float = 0.0) -> bool:
        return self.wall_distance(p) > margin


@dataclass(frozen=True)
class Spiral:
    """A phase defect: position plus winding number (+1 or -1)."""

    x: float
    y: float
    winding: int = 1

    def __post_init__(self):
        if self.winding not in (-1, 1):
            raise ValidationError(f"winding must be +1 or -1, got {self.winding}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])
