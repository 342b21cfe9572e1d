"""Orthonormal and spline basis systems on [0, 1].

Three families are provided:

* :class:`FourierBasis` -- the orthonormal trigonometric system
  psi_1 = 1, psi_{2k}(x) = sqrt(2) sin(2 pi k x),
  psi_{2k+1}(x) = sqrt(2) cos(2 pi k x).
* :class:`HaarWaveletBasis` -- Haar wavelets psi_{jk} for resolution
  levels j = 0..J, dilations k = 0..2^j - 1.
* :class:`BSplineBasis` -- B-splines of order q on K subintervals,
  evaluated with the Cox-de Boor recurrence (dimension m = q + K - 1).

All basis objects are immutable and evaluation is pure, so they are safe
to share across worker processes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SQRT2 = np.sqrt(2.0)

DEFAULT_QUAD_PANELS = 4096


def midpoint_grid(panels: int) -> np.ndarray:
    """Midpoints of ``panels`` equal subintervals of [0, 1]."""
    return (np.arange(panels) + 0.5) / panels


def quad_mean(values: np.ndarray) -> float | np.ndarray:
    """Composite-midpoint integral over [0,1] of values sampled on a midpoint grid."""
    return np.mean(values, axis=-1)


def _check_unit_interval(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size and (np.min(x) < 0.0 or np.max(x) > 1.0):
        raise DomainError("evaluation points must lie in [0, 1]")
    return x


@dataclass(frozen=True)
class FourierBasis:
    """Stateless orthonormal trigonometric basis, indexed from 1."""

    name = "fourier"

    def eval_one(self, k: int, x) -> np.ndarray | float:
        """Evaluate psi_k at x (scalar or array), x in [0, 1]."""
        if k < 1:
            raise DomainError(f"Fourier index must be >= 1, got {k}")
        xs = _check_unit_interval(x)
        if k == 1:
            out = np.ones_like(xs)
        elif k % 2 == 0:
            out = SQRT2 * np.sin(2.0 * np.pi * (k // 2) * xs)
        else:
            out = SQRT2 * np.cos(2.0 * np.pi * (k // 2) * xs)
        return out if np.ndim(x) else float(out)

    def design_matrix(self, x, m: int) -> np.ndarray:
        """Matrix [psi_k(x_i)] of shape (len(x), m)."""
        xs = np.atleast_1d(_check_unit_interval(x))
        out = np.empty((xs.size, m))
        if m >= 1:
            out[:, 0] = 1.0
        freqs = np.arange(1, m // 2 + 1)
        if freqs.size:
            ang = 2.0 * np.pi * xs[:, None] * freqs[None, :]
            sin_part = SQRT2 * np.sin(ang)
            cos_part = SQRT2 * np.cos(ang)
            out[:, 1::2] = sin_part
            ncos = (m - 1) // 2
            if ncos:
                out[:, 2::2] = cos_part[:, :ncos]
        return out

    def integral(self, k: int) -> float:
        """Integral of psi_k over [0, 1]: 1 for k = 1, 0 otherwise."""
        if k < 1:
            raise DomainError(f"Fourier index must be >= 1, got {k}")
        return 1.0 if k == 1 else 0.0

    @property
    def dim(self) -> None:
        return None  # unbounded index set


@dataclass(frozen=True)
class HaarWaveletBasis:
    """Haar wavelets on [0, 1] up to resolution level ``max_resolution``.

    Flat coefficient index: level j occupies positions
    [2^j - 1, 2^{j+1} - 1), i.e. flat = 2^j - 1 + k for k in I_j.
    """

    max_resolution: int

    name = "haar"

    def __post_init__(self):
        if self.max_resolution < 0:
            raise DomainError("max_resolution must be >= 0")

    @property
    def dim(self) -> int:
        return 2 ** (self.max_resolution + 1) - 1

    @staticmethod
    def flat_index(j: int, k: int) -> int:
        return 2**j - 1 + k

    @staticmethod
    def level_slice(j: int) -> slice:
        return slice(2**j - 1, 2 ** (j + 1) - 1)

    def eval_one(self, j: int, k: int, x) -> np.ndarray | float:
        """Evaluate psi_{jk} at x; zero off the support [k 2^-j, (k+1) 2^-j]."""
        if j < 0:
            raise DomainError(f"resolution level must be >= 0, got {j}")
        if not 0 <= k < 2**j:
            raise DomainError(f"dilation index {k} outside I_{j} = {{0,..,{2**j - 1}}}")
        xs = _check_unit_interval(x)
        scaled = xs * 2**j
        idx = np.minimum(np.floor(scaled).astype(int), 2**j - 1)
        frac = scaled - idx
        vals = np.where(frac < 0.5, 1.0, -1.0) * 2.0 ** (j / 2.0)
        out = np.where(idx == k, vals, 0.0)
        return out if np.ndim(x) else float(out)

    def design_matrix(self, x, m: int | None = None) -> np.ndarray:
        """Matrix of all wavelets through level max_resolution, flat-indexed columns."""
        xs = np.atleast_1d(_check_unit_interval(x))
        m = self.dim if m is None else m
        out = np.zeros((xs.size, m))
        rows = np.arange(xs.size)
        for j in range(self.max_resolution + 1):
            scaled = xs * 2**j
            idx = np.minimum(np.floor(scaled).astype(int), 2**j - 1)
            frac = scaled - idx
            vals = np.where(frac < 0.5, 1.0, -1.0) * 2.0 ** (j / 2.0)
            cols = 2**j - 1 + idx
            keep = cols < m
            out[rows[keep], cols[keep]] = vals[keep]
        return out


@dataclass(frozen=True)
class BSplineBasis:
    """B-splines of order q (degree q - 1) on breakpoints t_0 = 0 < ... < t_K = 1.

    ``knots`` holds the K + 1 breakpoints; the clamped knot vector used by
    the Cox-de Boor recurrence repeats the endpoints q times. Dimension is
    m = q + K - 1 and the functions form a partition of unity on [0, 1].
    """

    order: int
    knots: tuple = field(default=None)

    name = "bspline"

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("spline order must be >= 1")
        if self.knots is None:
            raise DomainError("knots (breakpoints) are required; use BSplineBasis.uniform")
        kn = tuple(float(t) for t in self.knots)
        if len(kn) < 2 or kn[0] != 0.0 or kn[-1] != 1.0:
            raise DomainError("breakpoints must start at 0 and end at 1")
        if any(b < a for a, b in zip(kn, kn[1:])):
            raise DomainError("breakpoints must be nondecreasing")
        object.__setattr__(self, "knots", kn)

    @classmethod
    def uniform(cls, order: int, subintervals: int) -> "BSplineBasis":
        if subintervals < 1:
            raise DomainError("subintervals must be >= 1")
        return cls(order, tuple(np.linspace(0.0, 1.0, subintervals + 1)))

    @property
    def subintervals(self) -> int:
        return len(self.knots) - 1

    @property
    def dim(self) -> int:
        return self.order + self.subintervals - 1

    def _knot_vector(self) -> np.ndarray:
        q = self.order
        return np.concatenate(
            [np.zeros(q), np.asarray(self.knots[1:-1]), np.ones(q)]
        )

    def design_matrix(self, x, m: int | None = None) -> np.ndarray:
        """All B-spline values at x via the Cox-de Boor triangular scheme."""
        xs = np.atleast_1d(_check_unit_interval(x))
        q, dim = self.order, self.dim
        m = dim if m is None else m
        t = self._knot_vector()
        d = q - 1
        # knot span containing each point; x = 1 falls in the last span
        span = np.searchsorted(t, xs, side="right") - 1
        span = np.clip(span, d, dim - 1)
        npts = xs.size
        vals = np.zeros((npts, q))
        vals[:, 0] = 1.0
        left = np.empty((npts, d))
        right = np.empty((npts, d))
        for j in range(1, q):
            left[:, j - 1] = xs - t[span + 1 - j]
            right[:, j - 1] = t[span + j] - xs
            saved = np.zeros(npts)
            for r in range(j):
                denom = right[:, r] + left[:, j - 1 - r]
                with np.errstate(divide="ignore", invalid="ignore"):
                    temp = np.where(denom > 0.0, vals[:, r] / np.where(denom > 0.0, denom, 1.0), 0.0)
                vals[:, r] = saved + right[:, r] * temp
                saved = left[:, j - 1 - r] * temp
            vals[:, j] = saved
        out = np.zeros((npts, m))
        rows = np.repeat(np.arange(npts), q)
        cols = (span[:, None] - d + np.arange(q)[None, :]).ravel()
        keep = cols < m
        out[rows[keep], cols[keep]] = vals.ravel()[keep]
        return out

    def eval_one(self, k: int, x) -> np.ndarray | float:
        """Evaluate B_k (1-based index) at x in [0, 1]."""
        if not 1 <= k <= self.dim:
            raise DomainError(f"B-spline index {k} outside 1..{self.dim}")
        out = self.design_matrix(np.atleast_1d(x))[:, k - 1]
        return out if np.ndim(x) else float(out[0])


def orthonormality_check(basis, max_index: int, quad_points: int = DEFAULT_QUAD_PANELS) -> float:
    """Largest absolute deviation of the quadrature Gram matrix from identity.

    Checks all pairs with indices <= max_index (flat index for Haar) using
    composite midpoint quadrature with ``quad_points`` panels.
    """
    if quad_points < 4 * max_index:
        raise DomainError("quad_points must be at least 4 * max_index")
    grid = midpoint_grid(quad_points)
    design = basis.design_matrix(grid, max_index)
    gram = design.T @ design / quad_points
    return float(np.max(np.abs(gram - np.eye(max_index))))
