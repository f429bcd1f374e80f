"""Sectional curvature and injectivity-radius bounds from curvature."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import InapplicableError, UsageError
from .manifolds import Manifold


def sectional_curvature(m: Manifold, x=None) -> float:
    """Constant sectional curvature of a built-in (two-dimensional) manifold."""
    if m.dimension != 2 and m.kind != "euclidean":
        raise UsageError("sectional curvature of a unique plane needs dimension 2")
    return m.sectional_curvature(x)


@dataclass(frozen=True)
class CurvatureBounds:
    """What is known about the curvature of a complete simply connected M.

    ``sigma <= K <= delta`` everywhere; ``shortest_loop_length`` is the length
    of the shortest geodesic loop at the point, supplied by the caller.
    """

    sigma: Optional[float] = None
    delta: Optional[float] = None
    nonpositive: bool = False
    compact: bool = False
    shortest_loop_length: Optional[float] = None

    def __post_init__(self):
        if self.sigma is not None and self.delta is not None and self.sigma > self.delta:
            raise UsageError(f"sigma={self.sigma} exceeds delta={self.delta}")
        if self.shortest_loop_length is not None and not self.shortest_loop_length > 0:
            raise UsageError("shortest_loop_length must be positive")

    @property
    def pinched(self):
        s, d = self.sigma, self.delta
        return s is not None and d is not None and 0 < d / 4 < s <= d


@dataclass(frozen=True)
class RadiusInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise UsageError("lower bound exceeds upper bound")

    def contains(self, r: float) -> bool:
        return self.lower <= r <= self.upper

    def __str__(self):
        return f"[{_fmt(self.lower)}, {_fmt(self.upper)}]"


def _fmt(v):
    return "inf" if math.isinf(v) else repr(float(v))


def injectivity_interval(b: CurvatureBounds) -> RadiusInterval:
    """Bounds on the injectivity radius implied by ``b``.

    Clause precedence when several apply: nonpositive curvature (exact,
    infinite radius), then the pinched bound ``pi/sqrt(delta) <= i <=
    pi/sqrt(sigma)``, then the compact bound ``i >= min(pi/sqrt(delta),
    loop/2)`` whose upper end is unknown and reported as ``inf``.
    """
    if b.nonpositive:
        return RadiusInterval(math.inf, math.inf)
    if b.pinched:
        return RadiusInterval(math.pi / math.sqrt(b.delta), math.pi / math.sqrt(b.sigma))
    if b.compact and b.delta is not None and b.delta > 0 and b.shortest_loop_length is not None:
        lower = min(math.pi / math.sqrt(b.delta), 0.5 * b.shortest_loop_length)
        return RadiusInterval(lower, math.inf)
    raise InapplicableError(
        "inapplicable: need nonpositive curvature, 0 < delta/4 < sigma <= delta, "
        "or a compact manifold with delta > 0 and a loop length"
    )
