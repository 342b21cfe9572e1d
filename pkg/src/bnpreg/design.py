"""Design-point generation and spread diagnostics."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedBasisError

RANDOM_UNIFORM = "random-uniform"
EQUIDISTANT = "equidistant"


@dataclass(frozen=True)
class Design:
    """Ordered design points in [0,1]^p with a provenance tag."""

    points: np.ndarray
    kind: str
    seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            raise DomainError("a design needs at least one point")
        if np.min(pts) < 0.0 or np.max(pts) > 1.0:
            raise DomainError("design points must lie in [0, 1]")
        if self.kind not in (RANDOM_UNIFORM, EQUIDISTANT):
            raise DomainError(f"unknown design kind {self.kind!r}")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.points if self.points.ndim == 1 else self.points[:, j]

    def to_jsonable(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "points": self.points.tolist()}


def uniform_design(n: int, p: int = 1, seed: int | None = 0) -> Design:
    """n i.i.d. Uniform[0,1]^p points, deterministic per seed."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if p < 1:
        raise DomainError("p must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=n) if p == 1 else rng.uniform(size=(n, p))
    return Design(pts, RANDOM_UNIFORM, seed)


def equidistant_design(n: int) -> Design:
    """The midpoint design x_i = (i - 1/2)/n, i = 1..n."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return Design((np.arange(1, n + 1) - 0.5) / n, EQUIDISTANT, None)


def discrepancy(design: Design) -> float:
    """Exact sup-distance between the empirical design CDF and the uniform CDF.

    Computed over the 2n one-sided gaps at the order statistics rather than a
    grid search, so midpoint designs give n * discrepancy = 1/2 up to float
    rounding.
    """
    if design.p != 1:
        raise UnsupportedBasisError("discrepancy is defined for 1-d designs")
    x = np.sort(design.points)
    n = x.size
    i = np.arange(1, n + 1)
    above = np.max(i / n - x)
    below = np.max(x - (i - 1) / n)
    return float(max(above, below))
