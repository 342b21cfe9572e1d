"""Series-represented functions, norms, smoothness balls, and truth generators.

A :class:`SeriesFunction` is a basis object plus a finite coefficient
vector; it is the common currency between the prior, inference, and
harness modules. Distances come in three flavours: the integrated L2
distance (coefficient arithmetic when the shared basis is orthonormal,
quadrature otherwise), a grid sup-norm, and the empirical root mean
square over a design.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import (
    DEFAULT_QUAD_PANELS,
    BSplineBasis,
    FourierBasis,
    HaarWaveletBasis,
    midpoint_grid,
)
from .errors import ConfigError, DomainError, UnsupportedBasisError

DEFAULT_SUP_GRID = 4096


@dataclass(frozen=True)
class SeriesFunction:
    """A function f = sum_k beta_k psi_k for a finite coefficient vector."""

    basis: FourierBasis | HaarWaveletBasis | BSplineBasis
    coefficients: np.ndarray

    def __post_init__(self):
        coefs = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if coefs.ndim != 1:
            raise DomainError("coefficients must be a one-dimensional sequence")
        if not np.all(np.isfinite(coefs)):
            raise DomainError("coefficients must all be finite")
        dim = self.basis.dim
        if dim is not None and coefs.size > dim:
            raise DomainError(
                f"{coefs.size} coefficients exceed basis dimension {dim}"
            )
        object.__setattr__(self, "coefficients", coefs)

    def __call__(self, x) -> np.ndarray | float:
        xs = np.atleast_1d(x)
        vals = self.basis.design_matrix(xs, self.coefficients.size) @ self.coefficients
        return vals if np.ndim(x) else float(vals[0])

    def shifted(self, c: float) -> "SeriesFunction":
        """f + c for constant c (Fourier only: psi_1 is the constant)."""
        if not isinstance(self.basis, FourierBasis):
            raise UnsupportedBasisError("constant shift implemented for Fourier only")
        coefs = self.coefficients.copy()
        coefs[0] += c
        return SeriesFunction(self.basis, coefs)

    def to_json(self) -> str:
        basis = self.basis
        if isinstance(basis, FourierBasis):
            params = {}
        elif isinstance(basis, HaarWaveletBasis):
            params = {"max_resolution": basis.max_resolution}
        elif isinstance(basis, BSplineBasis):
            params = {"order": basis.order, "knots": list(basis.knots)}
        else:
            raise UnsupportedBasisError(f"cannot serialize basis {basis!r}")
        return json.dumps(
            {"basis": basis.name, "params": params, "coefficients": self.coefficients.tolist()}
        )

    @staticmethod
    def from_json(text: str) -> "SeriesFunction":
        obj = json.loads(text)
        kind, params = obj["basis"], obj["params"]
        if kind == "fourier":
            basis = FourierBasis()
        elif kind == "haar":
            basis = HaarWaveletBasis(params["max_resolution"])
        elif kind == "bspline":
            basis = BSplineBasis(params["order"], tuple(params["knots"]))
        else:
            raise DomainError(f"unknown basis kind {kind!r}")
        return SeriesFunction(basis, np.asarray(obj["coefficients"], dtype=float))


def _same_family(f: SeriesFunction, g: SeriesFunction) -> bool:
    return type(f.basis) is type(g.basis) and f.basis == g.basis


def _padded_pair(a: np.ndarray, b: np.ndarray):
    m = max(a.size, b.size)
    pa = np.zeros(m)
    pb = np.zeros(m)
    pa[: a.size] = a
    pb[: b.size] = b
    return pa, pb


def l2_distance(f: SeriesFunction, g: SeriesFunction, quad_points: int = DEFAULT_QUAD_PANELS) -> float:
    """Integrated L2 distance on [0, 1].

    For a shared orthonormal basis (Fourier, Haar) this is the coefficient
    distance; B-spline or mixed-basis pairs fall back to midpoint quadrature
    of (f - g)^2.
    """
    if _same_family(f, g) and not isinstance(f.basis, BSplineBasis):
        pa, pb = _padded_pair(f.coefficients, g.coefficients)
        return float(np.linalg.norm(pa - pb))
    grid = midpoint_grid(quad_points)
    diff = f(grid) - g(grid)
    return float(np.sqrt(np.mean(diff * diff)))


def sup_norm(f: SeriesFunction, grid_size: int = DEFAULT_SUP_GRID) -> float:
    """Max |f| over an equispaced grid; a lower bound on the true sup-norm."""
    if grid_size < 256:
        raise DomainError("grid_size must be >= 256")
    grid = np.linspace(0.0, 1.0, grid_size)
    return float(np.max(np.abs(f(grid))))


def sup_distance(f: SeriesFunction, g: SeriesFunction, grid_size: int = DEFAULT_SUP_GRID) -> float:
    """Grid sup-norm of f - g (coefficient difference when the basis is shared)."""
    if _same_family(f, g):
        pa, pb = _padded_pair(f.coefficients, g.coefficients)
        return sup_norm(SeriesFunction(f.basis, pa - pb), grid_size)
    if grid_size < 256:
        raise DomainError("grid_size must be >= 256")
    grid = np.linspace(0.0, 1.0, grid_size)
    return float(np.max(np.abs(f(grid) - g(grid))))


def empirical_l2(f: SeriesFunction, g: SeriesFunction, design) -> float:
    """Root mean square of f - g over the design points."""
    pts = np.atleast_1d(np.asarray(design.points, dtype=float))
    if pts.size == 0:
        raise DomainError("empirical L2 distance needs a nonempty design")
    if pts.ndim != 1:
        raise DomainError("empirical L2 distance is defined for 1-d designs")
    diff = f(pts) - g(pts)
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class SmoothnessBall:
    """Coefficient-space smoothness class over the Fourier basis.

    kind = "holder":   sum_k k^alpha |beta_k|        <= radius
    kind = "sobolev":  sum_k k^(2 alpha) beta_k^2    <= radius^2
    kind = "analytic": sum_k beta_k^2 exp(k^2/c)     <= radius^2
    (for "analytic" the ``smoothness`` field holds c).
    """

    kind: str
    smoothness: float
    radius: float

    def __post_init__(self):
        if self.kind not in ("holder", "sobolev", "analytic"):
            raise DomainError(f"unknown ball kind {self.kind!r}")
        if self.smoothness <= 0 or self.radius <= 0:
            raise DomainError("smoothness and radius must be positive")

    @property
    def threshold(self) -> float:
        """Membership threshold for the value returned by :func:`ball_norm`."""
        return self.radius if self.kind == "holder" else self.radius**2


def ball_norm(f: SeriesFunction, ball: SmoothnessBall) -> float:
    """The ball's defining functional; membership iff <= ball.threshold.

    Returns the linear sum for Hoelder balls and the squared-norm sum for
    Sobolev/analytic balls (compared against radius^2).
    """
    if not isinstance(f.basis, FourierBasis):
        raise UnsupportedBasisError("smoothness balls are defined over the Fourier basis")
    beta = f.coefficients
    k = np.arange(1, beta.size + 1, dtype=float)
    if ball.kind == "holder":
        return float(np.sum(k**ball.smoothness * np.abs(beta)))
    if ball.kind == "sobolev":
        return float(np.sum(k ** (2.0 * ball.smoothness) * beta**2))
    # analytic weights explode in k; combine in log space so underflowing
    # coefficients contribute exactly zero instead of 0 * inf
    mask = beta != 0.0
    if not np.any(mask):
        return 0.0
    log_terms = 2.0 * np.log(np.abs(beta[mask])) + k[mask] ** 2 / ball.smoothness
    return float(np.sum(np.exp(log_terms)))


def ball_contains(f: SeriesFunction, ball: SmoothnessBall) -> bool:
    return ball_norm(f, ball) <= ball.threshold


def make_truth(
    ball: SmoothnessBall,
    seed: int,
    truncation: int,
    zero_mean: bool = False,
) -> SeriesFunction:
    """A reference function calibrated to 90% of the ball's membership threshold.

    Coefficients carry random signs on a deterministic decay profile
    (k^-(alpha+1) for Hoelder, k^-(alpha+0.55) for Sobolev,
    exp(-k^2/c) for analytic) and are rescaled so the ball functional
    equals 0.9 * threshold exactly. ``zero_mean`` zeroes the constant
    coefficient (used for additive components) before calibration.
    """
    if truncation < 1:
        raise DomainError("truncation must be >= 1")
    rng = np.random.default_rng(seed)
    k = np.arange(1, truncation + 1, dtype=float)
    if ball.kind == "holder":
        profile = k ** -(ball.smoothness + 1.0)
    elif ball.kind == "sobolev":
        profile = k ** -(ball.smoothness + 0.55)
    else:
        profile = np.exp(-(k**2) / ball.smoothness)
    signs = rng.choice([-1.0, 1.0], size=truncation)
    beta = signs * profile
    if zero_mean:
        beta[0] = 0.0
    feat = ball_norm(SeriesFunction(FourierBasis(), beta), ball)
    if not np.isfinite(feat) or feat <= 0.0:
        raise ConfigError(
            f"cannot calibrate a {ball.kind} truth at truncation {truncation}"
        )
    target = 0.9 * ball.threshold
    scale = target / feat if ball.kind == "holder" else np.sqrt(target / feat)
    return SeriesFunction(FourierBasis(), beta * scale)


@dataclass(frozen=True)
class SieveSpec:
    """Parameters of the sup-vs-L2 growth condition defining a sieve slice.

    Functions f in the slice satisfy
    ``sup|f - f0|^2 <= eta * (m * ||f - f0||_2^2 + delta^2)``;
    ``eta_prime`` is the analogous constant for concentration sets and
    defaults to eta.
    """

    m: int
    delta: float
    eta: float
    eta_prime: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise DomainError("sieve index m must be >= 1")
        if self.delta < 0 or self.eta <= 0:
            raise DomainError("delta must be >= 0 and eta > 0")
        if self.eta_prime is None:
            object.__setattr__(self, "eta_prime", self.eta)


def sieve_condition_check(
    f: SeriesFunction,
    f0: SeriesFunction,
    spec: SieveSpec,
    grid_size: int = DEFAULT_SUP_GRID,
) -> bool:
    """True iff sup|f-f0|^2 <= eta (m ||f-f0||_2^2 + delta^2) on the grid."""
    sup = sup_distance(f, f0, grid_size)
    l2 = l2_distance(f, f0)
    return sup**2 <= spec.eta * (spec.m * l2**2 + spec.delta**2)


@dataclass(frozen=True)
class AdditiveFunction:
    """mu + sum_j z_j f_j(x_j) with zero-mean univariate components."""

    mu: float
    components: tuple
    active: np.ndarray

    def __post_init__(self):
        act = np.asarray(self.active, dtype=bool)
        if act.size != len(self.components):
            raise DomainError("active flags and components must align")
        object.__setattr__(self, "active", act)
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def p(self) -> int:
        return len(self.components)

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            # a 1-d array is n points when p == 1, else a single p-vector
            X = X.reshape(-1, 1) if self.p == 1 else X.reshape(1, -1)
        if X.shape[1] != self.p:
            raise DomainError(f"design has {X.shape[1]} columns, expected {self.p}")
        out = np.full(X.shape[0], self.mu)
        for j in range(self.p):
            if self.active[j]:
                out += self.components[j](X[:, j])
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "additive",
                "mu": self.mu,
                "active": self.active.astype(int).tolist(),
                "components": [json.loads(c.to_json()) for c in self.components],
            }
        )


def additive_l2_distance(f: AdditiveFunction, g: AdditiveFunction) -> float:
    """Integrated L2 distance on [0,1]^p between two additive functions.

    Valid because every component has zero integral, so cross terms vanish:
    ||f - g||^2 = (mu_f - mu_g)^2 + sum_j ||z_j f_j - z'_j g_j||^2.
    """
    if f.p != g.p:
        raise DomainError("additive functions must share the dimension p")
    total = (f.mu - g.mu) ** 2
    for j in range(f.p):
        cf = f.components[j].coefficients if f.active[j] else np.zeros(1)
        cg = g.components[j].coefficients if g.active[j] else np.zeros(1)
        pa, pb = _padded_pair(cf, cg)
        total += float(np.sum((pa - pb) ** 2))
    return float(np.sqrt(total))
